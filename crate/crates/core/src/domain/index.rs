//! User/project index relations and their full-graph audit.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::digest::Digest;
use super::types::{FiProject, Parties, User, UserType};

/// The eight index relations between users and financing projects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Relation {
    /// User → project index, 1:n.
    UserToProjectIndex,
    /// Project index → project, 1:1.
    ProjectIndexToProject,
    /// Project → CE index, 1:1.
    ProjectToCeIndex,
    /// Project → FE index, 1:1.
    ProjectToFeIndex,
    /// Project → FI index, 1:1.
    ProjectToFiIndex,
    /// CE index → core enterprise, 1:1.
    CeIndexToCe,
    /// FE index → financing enterprise, 1:1.
    FeIndexToFe,
    /// FI index → financial institution, 1:1.
    FiIndexToFi,
}

impl Relation {
    pub const ALL: [Relation; 8] = [
        Relation::UserToProjectIndex,
        Relation::ProjectIndexToProject,
        Relation::ProjectToCeIndex,
        Relation::ProjectToFeIndex,
        Relation::ProjectToFiIndex,
        Relation::CeIndexToCe,
        Relation::FeIndexToFe,
        Relation::FiIndexToFi,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexViolation {
    pub relation: Relation,
    pub detail: String,
}

impl fmt::Display for IndexViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.relation, self.detail)
    }
}

/// Secondary indexes maintained next to user and project records.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct IndexGraph {
    pub user_to_projects: BTreeMap<Digest, BTreeSet<Digest>>,
    pub project_to_parties: BTreeMap<Digest, Parties>,
}

impl IndexGraph {
    /// Checks every relation against the primary records. Returns all violations
    /// found, in a stable order.
    pub fn audit(
        &self,
        users: &BTreeMap<Digest, User>,
        projects: &BTreeMap<Digest, FiProject>,
    ) -> Vec<IndexViolation> {
        let mut out = Vec::new();
        let mut push = |relation, detail: String| out.push(IndexViolation { relation, detail });

        for (user, ids) in &self.user_to_projects {
            if !users.contains_key(user) {
                push(Relation::UserToProjectIndex, format!("index owner {user} is not a registered user"));
            }
            for id in ids {
                match self.project_to_parties.get(id) {
                    Some(parties) if parties.contains(user) => {}
                    Some(_) => push(
                        Relation::UserToProjectIndex,
                        format!("user {user} indexes project {id} it is not party to"),
                    ),
                    None => push(
                        Relation::UserToProjectIndex,
                        format!("user {user} indexes unknown project {id}"),
                    ),
                }
            }
        }

        for (id, project) in projects {
            if project.fi_project_id != *id {
                push(
                    Relation::ProjectIndexToProject,
                    format!("project stored under {id} carries id {}", project.fi_project_id),
                );
            }
            let Some(parties) = self.project_to_parties.get(id) else {
                push(Relation::ProjectIndexToProject, format!("project {id} has no index entry"));
                continue;
            };
            let checks = [
                (Relation::ProjectToCeIndex, parties.ce_index, project.ce_index),
                (Relation::ProjectToFeIndex, parties.fe_index, project.fe_index),
                (Relation::ProjectToFiIndex, parties.fi_index, project.fi_index),
            ];
            for (relation, indexed, recorded) in checks {
                if indexed != recorded {
                    push(relation, format!("project {id} index {indexed} != record {recorded}"));
                }
            }
            for member in parties.members() {
                let listed = self.user_to_projects.get(&member).is_some_and(|s| s.contains(id));
                if !listed {
                    push(
                        Relation::UserToProjectIndex,
                        format!("party {member} does not index project {id}"),
                    );
                }
            }
            let party_checks: [(Relation, Digest, fn(UserType) -> bool); 3] = [
                (Relation::CeIndexToCe, project.ce_index, |t| t == UserType::CoreEnterprise),
                (Relation::FeIndexToFe, project.fe_index, UserType::can_borrow),
                (Relation::FiIndexToFi, project.fi_index, |t| t == UserType::FinancialInstitution),
            ];
            for (relation, index, type_ok) in party_checks {
                match users.get(&index) {
                    Some(u) if type_ok(u.user_type) => {}
                    Some(u) => push(
                        relation,
                        format!("project {id} party {index} has type {}", u.user_type),
                    ),
                    None => push(relation, format!("project {id} party {index} is not registered")),
                }
            }
        }

        for id in self.project_to_parties.keys() {
            if !projects.contains_key(id) {
                push(Relation::ProjectIndexToProject, format!("index entry {id} has no project"));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::types::{CollateralKind, FiProjectDraft};

    fn user(name: &str, t: UserType) -> User {
        let mut key = [0u8; 32];
        key[..name.len()].copy_from_slice(name.as_bytes());
        User::new(name, t, &key).unwrap()
    }

    fn fixture() -> (BTreeMap<Digest, User>, BTreeMap<Digest, FiProject>, IndexGraph) {
        let ce = user("ce", UserType::CoreEnterprise);
        let sp = user("sp", UserType::Supplier);
        let fi = user("fi", UserType::FinancialInstitution);
        let fp = FiProject::from_draft(FiProjectDraft {
            fi_project_name: "p".into(),
            fi_project_number: "1".into(),
            collateral: CollateralKind::AccountsReceivable { ard_id: "ARD1".into() },
            amount: 100,
            interest_rate_bp: 500,
            time_start: 1,
            time_end: 2,
            ce_index: ce.user_number,
            fe_index: sp.user_number,
            fi_index: fi.user_number,
        })
        .unwrap();
        let mut graph = IndexGraph::default();
        for u in [&ce, &sp, &fi] {
            graph.user_to_projects.entry(u.user_number).or_default().insert(fp.fi_project_id);
        }
        graph.project_to_parties.insert(fp.fi_project_id, fp.parties());
        let users = [ce, sp, fi].into_iter().map(|u| (u.user_number, u)).collect();
        let projects = [(fp.fi_project_id, fp)].into_iter().collect();
        (users, projects, graph)
    }

    #[test]
    fn consistent_graph_is_clean() {
        let (users, projects, graph) = fixture();
        assert!(graph.audit(&users, &projects).is_empty());
    }

    #[test]
    fn missing_index_entry_detected() {
        let (users, projects, mut graph) = fixture();
        graph.project_to_parties.clear();
        let v = graph.audit(&users, &projects);
        assert!(v.iter().any(|v| v.relation == Relation::ProjectIndexToProject));
    }

    #[test]
    fn wrong_party_type_detected() {
        let (mut users, projects, graph) = fixture();
        let fi = projects.values().next().unwrap().fi_index;
        users.get_mut(&fi).unwrap().user_type = UserType::Supplier;
        let v = graph.audit(&users, &projects);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].relation, Relation::FiIndexToFi);
    }

    #[test]
    fn dangling_user_index_detected() {
        let (users, projects, mut graph) = fixture();
        let stray = Digest::of(b"stray");
        graph.user_to_projects.values_mut().next().unwrap().insert(stray);
        let v = graph.audit(&users, &projects);
        assert!(v.iter().any(|v| v.relation == Relation::UserToProjectIndex));
    }
}
