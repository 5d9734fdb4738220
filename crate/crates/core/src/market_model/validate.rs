use std::fmt;

use super::{AgentId, CategoryMarket, Market, PreferenceMode, Side};

/// A broken structural invariant, tagged with the offending agent where there is one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// Category at `position` carries index `found`; indices must run 0, 1, 2, ...
    CategoryIndex {
        position: usize,
        found: usize,
    },
    /// Roster slot `ordinal` holds an agent whose id does not describe that slot.
    RosterId {
        expected: AgentId,
        found: AgentId,
    },
    /// The number of preference lists on a side differs from the roster size.
    ListCount {
        category: usize,
        side: Side,
        lists: usize,
        roster: usize,
    },
    /// Preference list stored for `expected` claims a different owner.
    ListOwner {
        expected: AgentId,
        found: AgentId,
    },
    DuplicateEntry {
        owner: AgentId,
        entry: AgentId,
    },
    /// Entry from the owner's own side.
    WrongSide {
        owner: AgentId,
        entry: AgentId,
    },
    WrongCategory {
        owner: AgentId,
        entry: AgentId,
    },
    /// Entry ordinal outside the opposite roster.
    UnknownEntry {
        owner: AgentId,
        entry: AgentId,
    },
    /// Full-preference mode requires every list to rank the whole opposite roster.
    IncompleteList {
        owner: AgentId,
        length: usize,
        roster: usize,
    },
}

impl Violation {
    /// The agent the violation is attributed to, if any.
    pub fn agent(&self) -> Option<AgentId> {
        match *self {
            Violation::CategoryIndex { .. } | Violation::ListCount { .. } => None,
            Violation::RosterId { expected, .. } | Violation::ListOwner { expected, .. } => {
                Some(expected)
            }
            Violation::DuplicateEntry { owner, .. }
            | Violation::WrongSide { owner, .. }
            | Violation::WrongCategory { owner, .. }
            | Violation::UnknownEntry { owner, .. }
            | Violation::IncompleteList { owner, .. } => Some(owner),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::CategoryIndex { position, found } => {
                write!(f, "category at position {position} has index {found}")
            }
            Violation::RosterId { expected, found } => {
                write!(f, "roster slot {expected} holds id {found}")
            }
            Violation::ListCount {
                category,
                side,
                lists,
                roster,
            } => write!(
                f,
                "category {category}: {lists} {side} preference lists for {roster} {side}s"
            ),
            Violation::ListOwner { expected, found } => {
                write!(f, "preference list of {expected} is owned by {found}")
            }
            Violation::DuplicateEntry { owner, entry } => {
                write!(f, "duplicate entry {entry} in the list of {owner}")
            }
            Violation::WrongSide { owner, entry } => {
                write!(f, "{owner} ranks same-side agent {entry}")
            }
            Violation::WrongCategory { owner, entry } => {
                write!(f, "{owner} ranks {entry} from another category")
            }
            Violation::UnknownEntry { owner, entry } => {
                write!(f, "{owner} ranks unknown agent {entry}")
            }
            Violation::IncompleteList {
                owner,
                length,
                roster,
            } => write!(
                f,
                "{owner} ranks {length} of {roster} counterparts in full-preference mode"
            ),
        }
    }
}

/// Checks every structural invariant and reports all violations found.
///
/// An empty vector means the market is valid.
pub fn validate_market(market: &Market) -> Vec<Violation> {
    let mut out = Vec::new();
    for (position, cm) in market.categories.iter().enumerate() {
        if cm.category != position {
            out.push(Violation::CategoryIndex {
                position,
                found: cm.category,
            });
        }
        validate_category(cm, market.mode, &mut out);
    }
    out
}

fn validate_category(cm: &CategoryMarket, mode: PreferenceMode, out: &mut Vec<Violation>) {
    for side in [Side::Patient, Side::Doctor] {
        for (ordinal, agent) in cm.roster(side).iter().enumerate() {
            let expected = AgentId {
                side,
                category: cm.category,
                ordinal,
            };
            if agent.id != expected {
                out.push(Violation::RosterId {
                    expected,
                    found: agent.id,
                });
            }
        }
        let lists = cm.prefs(side);
        let roster = cm.size(side);
        if lists.len() != roster {
            out.push(Violation::ListCount {
                category: cm.category,
                side,
                lists: lists.len(),
                roster,
            });
        }
        let opposite = cm.size(side.opposite());
        for (ordinal, list) in lists.iter().enumerate() {
            let expected = AgentId {
                side,
                category: cm.category,
                ordinal,
            };
            if list.owner != expected {
                out.push(Violation::ListOwner {
                    expected,
                    found: list.owner,
                });
            }
            let owner = expected;
            let mut seen = vec![false; opposite];
            for &entry in &list.ranking {
                if entry.side == side {
                    out.push(Violation::WrongSide { owner, entry });
                } else if entry.category != cm.category {
                    out.push(Violation::WrongCategory { owner, entry });
                } else if entry.ordinal >= opposite {
                    out.push(Violation::UnknownEntry { owner, entry });
                } else if std::mem::replace(&mut seen[entry.ordinal], true) {
                    out.push(Violation::DuplicateEntry { owner, entry });
                }
            }
            if mode == PreferenceMode::Full && list.len() != opposite {
                out.push(Violation::IncompleteList {
                    owner,
                    length: list.len(),
                    roster: opposite,
                });
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::reference_market;
    use crate::market_model::{CategoryMarket, PreferenceList};

    #[test]
    fn reference_market_is_valid() {
        assert!(validate_market(&reference_market()).is_empty());
    }

    #[test]
    fn empty_market_is_valid() {
        assert!(validate_market(&Market::new(PreferenceMode::Full, vec![])).is_empty());
    }

    #[test]
    fn duplicate_entry_is_reported_for_owner() {
        let mut m = reference_market();
        // p1: d4 d3 d1 d2  ->  d4 d3 d1 d4
        m.categories[0].patient_prefs[0].ranking[3] = AgentId::doctor(0, 3);
        let v = validate_market(&m);
        assert_eq!(
            v,
            vec![Violation::DuplicateEntry {
                owner: AgentId::patient(0, 0),
                entry: AgentId::doctor(0, 3)
            }]
        );
        assert_eq!(v[0].agent(), Some(AgentId::patient(0, 0)));
    }

    #[test]
    fn structural_violations() {
        let mut cm = CategoryMarket::from_ordinal_lists(1, &[vec![0, 0, 5]], &[vec![0]]);
        cm.doctor_prefs[0].ranking.push(AgentId::doctor(1, 0));
        cm.doctor_prefs[0].ranking.push(AgentId::patient(3, 0));
        let m = Market::new(PreferenceMode::Partial, vec![cm]);
        let v = validate_market(&m);
        let p = AgentId::patient(1, 0);
        let d = AgentId::doctor(1, 0);
        assert!(v.contains(&Violation::CategoryIndex {
            position: 0,
            found: 1
        }));
        assert!(v.contains(&Violation::DuplicateEntry { owner: p, entry: d }));
        assert!(v.contains(&Violation::UnknownEntry {
            owner: p,
            entry: AgentId::doctor(1, 5)
        }));
        assert!(v.contains(&Violation::WrongSide { owner: d, entry: d }));
        assert!(v.contains(&Violation::WrongCategory {
            owner: d,
            entry: AgentId::patient(3, 0)
        }));
    }

    #[test]
    fn missing_list_and_incomplete_full_list() {
        let mut m = reference_market();
        m.categories[0].doctor_prefs.pop();
        m.categories[0].patient_prefs[1].ranking.pop();
        let v = validate_market(&m);
        assert!(v.contains(&Violation::ListCount {
            category: 0,
            side: Side::Doctor,
            lists: 3,
            roster: 4
        }));
        assert!(v.contains(&Violation::IncompleteList {
            owner: AgentId::patient(0, 1),
            length: 3,
            roster: 4
        }));
        // the same truncation is fine in partial mode
        m.mode = PreferenceMode::Partial;
        m.categories[0]
            .doctor_prefs
            .push(PreferenceList::from_ordinals(AgentId::doctor(0, 3), &[3]));
        assert!(validate_market(&m).is_empty());
    }
}
