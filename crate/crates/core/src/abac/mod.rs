//! Attribute-based access control: policy store, attribute extraction and
//! access decisions.

mod attrs;
mod engine;
mod policy;
mod store;

pub use attrs::{
    role_value, subset_match, AttrError, AttrKind, AttrValue, AttributeSet, OBJECT_ATTRS, RESOURCE_FI_PROJECT,
    RESOURCE_POLICY, RESOURCE_USER, SUBJECT_ATTRS,
};
pub use engine::{
    all_policies, auth, check_access, decide, evaluate, get_attrs, query_policy, subject_attrs, AccessError,
    AccessOutcome, AccessRequest,
};
pub use policy::{check_policy, policy_id, AbacPolicy, BadPolicy, PolicySpec};
pub use store::{
    add_policy, delete_policy, get_policy, update_policy, AddPolicyArgs, DeletePolicyArgs, DeletePolicyCause,
    UpdatePolicyArgs,
};
