use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::contracts::Chaincode;

pub type PeerId = usize;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LifecycleError {
    #[error("chaincode {chaincode} v{version} is not installed on peer {peer}")]
    NotInstalled { chaincode: &'static str, version: u32, peer: PeerId },
    #[error("chaincode {chaincode}: version {requested} does not exceed {current}")]
    VersionRegression { chaincode: &'static str, current: u32, requested: u32 },
    #[error("chaincode {0} is not instantiated")]
    NotInstantiated(&'static str),
    #[error("no such peer {0}")]
    UnknownPeer(PeerId),
}

/// Install and instantiation state of one chaincode.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ChaincodeMeta {
    pub name: Chaincode,
    /// The instantiated (network-wide) version, 0 before instantiation.
    pub version: u32,
    /// Versions installed per peer.
    pub installed_on_peers: BTreeMap<PeerId, BTreeSet<u32>>,
    pub instantiated: bool,
}

/// Chaincode lifecycle across a fixed set of peers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lifecycle {
    peers: usize,
    metas: BTreeMap<Chaincode, ChaincodeMeta>,
}

impl Lifecycle {
    pub fn new(peers: usize) -> Self {
        let metas = Chaincode::ALL
            .into_iter()
            .map(|c| (c, ChaincodeMeta { name: c, version: 0, installed_on_peers: BTreeMap::new(), instantiated: false }))
            .collect();
        Lifecycle { peers, metas }
    }

    pub fn meta(&self, cc: Chaincode) -> &ChaincodeMeta {
        &self.metas[&cc]
    }

    pub fn install(&mut self, cc: Chaincode, version: u32, peer: PeerId) -> Result<(), LifecycleError> {
        if peer >= self.peers {
            return Err(LifecycleError::UnknownPeer(peer));
        }
        if version == 0 {
            return Err(LifecycleError::VersionRegression { chaincode: cc.name(), current: 0, requested: 0 });
        }
        self.metas.get_mut(&cc).expect("all chaincodes tracked").installed_on_peers.entry(peer).or_default().insert(version);
        Ok(())
    }

    /// Instantiates `version`, which must be installed on at least `peer`.
    pub fn instantiate(&mut self, cc: Chaincode, version: u32, peer: PeerId) -> Result<(), LifecycleError> {
        let meta = self.metas.get_mut(&cc).expect("all chaincodes tracked");
        if !meta.installed_on_peers.get(&peer).is_some_and(|v| v.contains(&version)) {
            return Err(LifecycleError::NotInstalled { chaincode: cc.name(), version, peer });
        }
        meta.version = version;
        meta.instantiated = true;
        Ok(())
    }

    /// Moves the instantiated version forward; the new version must already
    /// be installed on `peer`.
    pub fn upgrade(&mut self, cc: Chaincode, version: u32, peer: PeerId) -> Result<(), LifecycleError> {
        let meta = self.metas.get_mut(&cc).expect("all chaincodes tracked");
        if !meta.instantiated {
            return Err(LifecycleError::NotInstantiated(cc.name()));
        }
        if version <= meta.version {
            return Err(LifecycleError::VersionRegression { chaincode: cc.name(), current: meta.version, requested: version });
        }
        if !meta.installed_on_peers.get(&peer).is_some_and(|v| v.contains(&version)) {
            return Err(LifecycleError::NotInstalled { chaincode: cc.name(), version, peer });
        }
        meta.version = version;
        Ok(())
    }

    /// The version `peer` runs: the highest it has installed, provided the
    /// chaincode is instantiated.
    pub fn running_version(&self, cc: Chaincode, peer: PeerId) -> Result<u32, LifecycleError> {
        let meta = &self.metas[&cc];
        if !meta.instantiated {
            return Err(LifecycleError::NotInstantiated(cc.name()));
        }
        meta.installed_on_peers
            .get(&peer)
            .and_then(|v| v.last().copied())
            .ok_or(LifecycleError::NotInstalled { chaincode: cc.name(), version: meta.version, peer })
    }

    /// Installs and instantiates version 1 of every chaincode on every peer.
    pub fn deploy_all(&mut self) {
        for cc in Chaincode::ALL {
            for peer in 0..self.peers {
                self.install(cc, 1, peer).expect("peer in range");
            }
            self.instantiate(cc, 1, 0).expect("installed above");
        }
    }
}
