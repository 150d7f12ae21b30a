pub mod abac;
pub mod bench;
pub mod contracts;
pub mod domain;
pub mod identity;
pub mod ledger;
pub mod workflows;
pub mod gateway;
