//! Agents, preference lists and categorized markets.
//!
//! A [`Market`] is a sequence of independent [`CategoryMarket`]s. Inside a category
//! every agent is addressed by its side and its 0-based ordinal in that side's
//! roster; preference lists are ordered most-preferred first, so the rank of an
//! entry is simply its position in the list.

mod generate;
mod json;
mod validate;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use generate::{generate_random_market, ListLength};
pub use json::{load_market, store_market};
pub use validate::{validate_market, Violation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Patient,
    Doctor,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Patient => Side::Doctor,
            Side::Doctor => Side::Patient,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Side::Patient => "patient",
            Side::Doctor => "doctor",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Side {
    type Err = MarketError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "patient" | "patients" => Ok(Side::Patient),
            "doctor" | "doctors" => Ok(Side::Doctor),
            other => Err(MarketError::UnknownSide(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PreferenceMode {
    #[default]
    Full,
    Partial,
}

impl fmt::Display for PreferenceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PreferenceMode::Full => "full",
            PreferenceMode::Partial => "partial",
        })
    }
}

/// Position of an agent inside a market.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AgentId {
    pub side: Side,
    pub category: usize,
    pub ordinal: usize,
}

impl AgentId {
    pub fn patient(category: usize, ordinal: usize) -> Self {
        AgentId {
            side: Side::Patient,
            category,
            ordinal,
        }
    }

    pub fn doctor(category: usize, ordinal: usize) -> Self {
        AgentId {
            side: Side::Doctor,
            category,
            ordinal,
        }
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.side {
            Side::Patient => 'p',
            Side::Doctor => 'd',
        };
        write!(f, "{}{}@c{}", tag, self.ordinal + 1, self.category)
    }
}

/// A roster entry: the agent's position plus its external name and hospital.
///
/// The hospital label is carried for reporting only and never affects matching.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Agent {
    pub id: AgentId,
    pub name: String,
    pub hospital: String,
}

/// Strict ranking of opposite-side agents, most preferred first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreferenceList {
    pub owner: AgentId,
    pub ranking: Vec<AgentId>,
}

impl PreferenceList {
    pub fn new(owner: AgentId, ranking: Vec<AgentId>) -> Self {
        PreferenceList { owner, ranking }
    }

    /// Builds a list from opposite-side ordinals in the owner's category.
    pub fn from_ordinals(owner: AgentId, ordinals: &[usize]) -> Self {
        let side = owner.side.opposite();
        let ranking = ordinals
            .iter()
            .map(|&ordinal| AgentId {
                side,
                category: owner.category,
                ordinal,
            })
            .collect();
        PreferenceList { owner, ranking }
    }

    pub fn len(&self) -> usize {
        self.ranking.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranking.is_empty()
    }

    /// 0-based rank of the counterpart with this ordinal, if listed.
    pub fn rank_of(&self, ordinal: usize) -> Option<usize> {
        self.ranking.iter().position(|a| a.ordinal == ordinal)
    }

    pub fn ordinals(&self) -> impl Iterator<Item = usize> + '_ {
        self.ranking.iter().map(|a| a.ordinal)
    }

    /// True when `a` is ranked strictly above `b`. Unlisted counterparts rank below
    /// every listed one; `None` stands for "unmatched".
    pub fn prefers(&self, a: Option<usize>, b: Option<usize>) -> bool {
        let rank = |x: Option<usize>| x.and_then(|o| self.rank_of(o)).unwrap_or(usize::MAX);
        rank(a) < rank(b)
    }
}

/// One category's rosters and both preference profiles.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryMarket {
    pub category: usize,
    pub patients: Vec<Agent>,
    pub doctors: Vec<Agent>,
    /// Indexed by patient ordinal.
    pub patient_prefs: Vec<PreferenceList>,
    /// Indexed by doctor ordinal.
    pub doctor_prefs: Vec<PreferenceList>,
}

impl CategoryMarket {
    /// Builds a category from ordinal rankings, naming agents `p1..` / `d1..`
    /// and giving hospitals `hp1..` / `hd1..` labels.
    pub fn from_ordinal_lists(
        category: usize,
        patient_lists: &[Vec<usize>],
        doctor_lists: &[Vec<usize>],
    ) -> Self {
        let roster = |side: Side, count: usize| -> Vec<Agent> {
            (0..count)
                .map(|ordinal| {
                    let id = AgentId {
                        side,
                        category,
                        ordinal,
                    };
                    let tag = if side == Side::Patient { "p" } else { "d" };
                    Agent {
                        id,
                        name: format!("{tag}{}", ordinal + 1),
                        hospital: format!("h{tag}{}", ordinal + 1),
                    }
                })
                .collect()
        };
        let prefs = |side: Side, lists: &[Vec<usize>]| -> Vec<PreferenceList> {
            lists
                .iter()
                .enumerate()
                .map(|(ordinal, list)| {
                    PreferenceList::from_ordinals(
                        AgentId {
                            side,
                            category,
                            ordinal,
                        },
                        list,
                    )
                })
                .collect()
        };
        CategoryMarket {
            category,
            patients: roster(Side::Patient, patient_lists.len()),
            doctors: roster(Side::Doctor, doctor_lists.len()),
            patient_prefs: prefs(Side::Patient, patient_lists),
            doctor_prefs: prefs(Side::Doctor, doctor_lists),
        }
    }

    pub fn roster(&self, side: Side) -> &[Agent] {
        match side {
            Side::Patient => &self.patients,
            Side::Doctor => &self.doctors,
        }
    }

    pub fn prefs(&self, side: Side) -> &[PreferenceList] {
        match side {
            Side::Patient => &self.patient_prefs,
            Side::Doctor => &self.doctor_prefs,
        }
    }

    pub fn size(&self, side: Side) -> usize {
        self.roster(side).len()
    }

    pub fn list(&self, side: Side, ordinal: usize) -> &PreferenceList {
        &self.prefs(side)[ordinal]
    }

    /// Ordinal rankings for one side, the representation the mechanisms work on.
    pub fn ordinal_lists(&self, side: Side) -> Vec<Vec<usize>> {
        self.prefs(side)
            .iter()
            .map(|l| l.ordinals().collect())
            .collect()
    }

    /// `table[a][b]` is the rank `a` (on `side`) gives opposite-side agent `b`.
    pub fn rank_table(&self, side: Side) -> RankTable {
        RankTable::new(&self.ordinal_lists(side), self.size(side.opposite()))
    }

    /// Copy of this category with one agent's ranking replaced.
    pub fn with_ranking(&self, side: Side, ordinal: usize, ordinals: &[usize]) -> CategoryMarket {
        let mut out = self.clone();
        let owner = out.prefs(side)[ordinal].owner;
        let list = PreferenceList::from_ordinals(owner, ordinals);
        match side {
            Side::Patient => out.patient_prefs[ordinal] = list,
            Side::Doctor => out.doctor_prefs[ordinal] = list,
        }
        out
    }

    /// True when every list on both sides ranks the whole opposite roster.
    pub fn has_full_lists(&self) -> bool {
        let n_doc = self.doctors.len();
        let n_pat = self.patients.len();
        self.patient_prefs.iter().all(|l| l.len() == n_doc)
            && self.doctor_prefs.iter().all(|l| l.len() == n_pat)
    }
}

/// Dense rank lookup: `rank(a, b)` is `a`'s rank of `b`, or `None` if unlisted.
#[derive(Debug, Clone)]
pub struct RankTable {
    width: usize,
    ranks: Vec<u32>,
}

const UNLISTED: u32 = u32::MAX;

impl RankTable {
    pub fn new(lists: &[Vec<usize>], width: usize) -> Self {
        let mut ranks = vec![UNLISTED; lists.len() * width];
        for (a, list) in lists.iter().enumerate() {
            for (r, &b) in list.iter().enumerate() {
                if b < width {
                    ranks[a * width + b] = r as u32;
                }
            }
        }
        RankTable { width, ranks }
    }

    #[inline]
    pub fn rank(&self, a: usize, b: usize) -> Option<usize> {
        match self.ranks[a * self.width + b] {
            UNLISTED => None,
            r => Some(r as usize),
        }
    }
}

/// The full k-category system.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Market {
    pub mode: PreferenceMode,
    pub categories: Vec<CategoryMarket>,
}

impl Market {
    pub fn new(mode: PreferenceMode, categories: Vec<CategoryMarket>) -> Self {
        Market { mode, categories }
    }

    pub fn category_count(&self) -> usize {
        self.categories.len()
    }

    pub fn agent_count(&self, side: Side) -> usize {
        self.categories.iter().map(|c| c.size(side)).sum()
    }
}

#[derive(Debug, Error)]
pub enum MarketError {
    #[error("list length {length} exceeds the opposite roster size {roster} for {side}s")]
    ListTooLong {
        side: Side,
        length: usize,
        roster: usize,
    },
    #[error("malformed market document at {path}: {message}")]
    Malformed { path: String, message: String },
    #[error("schema violation at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("unknown side {0:?} (expected \"patient\" or \"doctor\")")]
    UnknownSide(String),
    #[error("market is invalid: {0} violation(s), first: {1}")]
    Invalid(usize, String),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn side_round_trip() {
        for side in [Side::Patient, Side::Doctor] {
            assert_eq!(side.as_str().parse::<Side>().unwrap(), side);
            assert_eq!(side.opposite().opposite(), side);
        }
        assert!("nurse".parse::<Side>().is_err());
    }

    #[test]
    fn preference_ranks_and_unmatched() {
        let list = PreferenceList::from_ordinals(AgentId::patient(0, 0), &[2, 0]);
        assert_eq!(list.rank_of(2), Some(0));
        assert_eq!(list.rank_of(1), None);
        assert!(list.prefers(Some(0), None));
        assert!(list.prefers(Some(2), Some(0)));
        assert!(!list.prefers(Some(1), None));
        assert!(!list.prefers(None, None));
    }

    #[test]
    fn rank_table_matches_lists() {
        let cm =
            CategoryMarket::from_ordinal_lists(0, &[vec![1, 0], vec![0]], &[vec![0, 1], vec![]]);
        let t = cm.rank_table(Side::Patient);
        assert_eq!(t.rank(0, 1), Some(0));
        assert_eq!(t.rank(1, 1), None);
        let t = cm.rank_table(Side::Doctor);
        assert_eq!(t.rank(1, 0), None);
        assert!(!cm.has_full_lists());
    }
}
