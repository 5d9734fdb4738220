//! Allocation mechanisms and their shared result types.
//!
//! Both mechanisms match each category independently. The market-level entry
//! points validate their input first; the `*_category` functions assume a valid
//! category and are what the oracles call in tight loops.

mod deferred_acceptance;
mod random_allocation;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market_model::{validate_market, AgentId, CategoryMarket, Market, Side, Violation};

pub use deferred_acceptance::{
    tomhecs, tomhecs_category, tomhecs_category_logged, ProposalLog, ProposalRound, Rejection,
};
pub use random_allocation::{ramhecs, ramhecs_category, ramhecs_sequence};

/// A patient/doctor pair, by ordinal within its category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pair {
    pub patient: usize,
    pub doctor: usize,
}

impl Pair {
    pub fn new(patient: usize, doctor: usize) -> Self {
        Pair { patient, doctor }
    }

    /// The ordinal this pair assigns on `side`.
    pub fn on(self, side: Side) -> usize {
        match side {
            Side::Patient => self.patient,
            Side::Doctor => self.doctor,
        }
    }
}

/// One category's allocation. Pairs are kept sorted by patient ordinal.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CategoryMatching {
    pub category: usize,
    pub pairs: Vec<Pair>,
}

impl CategoryMatching {
    pub fn new(category: usize, mut pairs: Vec<Pair>) -> Self {
        pairs.sort_unstable();
        CategoryMatching { category, pairs }
    }

    pub fn empty(category: usize) -> Self {
        CategoryMatching {
            category,
            pairs: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn contains(&self, patient: usize, doctor: usize) -> bool {
        self.pairs
            .binary_search(&Pair::new(patient, doctor))
            .is_ok()
    }

    /// Counterpart of the agent with `ordinal` on `side`, if matched.
    pub fn partner(&self, side: Side, ordinal: usize) -> Option<usize> {
        self.pairs
            .iter()
            .find(|p| p.on(side) == ordinal)
            .map(|p| p.on(side.opposite()))
    }

    /// Partner table for `side`: entry `i` is the counterpart of agent `i`.
    pub fn partners(&self, side: Side, roster: usize) -> Vec<Option<usize>> {
        let mut out = vec![None; roster];
        for p in &self.pairs {
            if let Some(slot) = out.get_mut(p.on(side)) {
                *slot = Some(p.on(side.opposite()));
            }
        }
        out
    }

    pub fn agent_pairs(&self) -> impl Iterator<Item = (AgentId, AgentId)> + '_ {
        self.pairs.iter().map(move |p| {
            (
                AgentId::patient(self.category, p.patient),
                AgentId::doctor(self.category, p.doctor),
            )
        })
    }

    /// Checks the matching invariants against a category: ordinals in range, each
    /// agent used at most once, and every pair mutually acceptable.
    pub fn check_against(&self, cm: &CategoryMarket) -> Result<(), MatchingError> {
        if self.category != cm.category {
            return Err(MatchingError::CategoryMismatch {
                matching: self.category,
                market: cm.category,
            });
        }
        let mut used_p = vec![false; cm.patients.len()];
        let mut used_d = vec![false; cm.doctors.len()];
        for p in &self.pairs {
            let pid = AgentId::patient(cm.category, p.patient);
            let did = AgentId::doctor(cm.category, p.doctor);
            if p.patient >= used_p.len() {
                return Err(MatchingError::UnknownAgent(pid));
            }
            if p.doctor >= used_d.len() {
                return Err(MatchingError::UnknownAgent(did));
            }
            if std::mem::replace(&mut used_p[p.patient], true) {
                return Err(MatchingError::MatchedTwice(pid));
            }
            if std::mem::replace(&mut used_d[p.doctor], true) {
                return Err(MatchingError::MatchedTwice(did));
            }
            if cm.patient_prefs[p.patient].rank_of(p.doctor).is_none()
                || cm.doctor_prefs[p.doctor].rank_of(p.patient).is_none()
            {
                return Err(MatchingError::NotAcceptable {
                    patient: pid,
                    doctor: did,
                });
            }
        }
        Ok(())
    }
}

/// Allocation for every category, in category order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Matching {
    pub categories: Vec<CategoryMatching>,
}

impl Matching {
    pub fn matched_count(&self) -> usize {
        self.categories.iter().map(CategoryMatching::len).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MatchingError {
    #[error("matching references unknown agent {0}")]
    UnknownAgent(AgentId),
    #[error("{0} appears in more than one pair")]
    MatchedTwice(AgentId),
    #[error("{patient} and {doctor} are paired but do not both list each other")]
    NotAcceptable { patient: AgentId, doctor: AgentId },
    #[error("matching for category {matching} checked against category {market}")]
    CategoryMismatch { matching: usize, market: usize },
    #[error("matching covers {matching} categories, market has {market}")]
    CategoryCount { matching: usize, market: usize },
}

/// Work counters for one category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CategoryTrace {
    pub category: usize,
    /// Deferred acceptance: proposals issued. Random allocation: pairings made.
    pub proposals: u64,
    /// Proposals turned down, including displaced held proposals and proposals to
    /// counterparts that do not list the proposer. Always zero for random allocation.
    pub rejections: u64,
    /// Deferred acceptance: proposal rounds. Random allocation: patient draws.
    pub outer_iterations: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TraceStats {
    pub proposals: u64,
    pub rejections: u64,
    pub outer_iterations: u64,
    pub per_category: Vec<CategoryTrace>,
}

impl TraceStats {
    pub fn from_categories(per_category: Vec<CategoryTrace>) -> Self {
        TraceStats {
            proposals: per_category.iter().map(|c| c.proposals).sum(),
            rejections: per_category.iter().map(|c| c.rejections).sum(),
            outer_iterations: per_category.iter().map(|c| c.outer_iterations).sum(),
            per_category,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mechanism {
    /// Uniformly random patient, then uniformly random available listed doctor.
    Ramhecs,
    /// Deferred acceptance with the requesting side proposing.
    Tomhecs,
}

impl Mechanism {
    pub fn as_str(self) -> &'static str {
        match self {
            Mechanism::Ramhecs => "ramhecs",
            Mechanism::Tomhecs => "tomhecs",
        }
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mechanism {
    type Err = MechanismError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ramhecs" => Ok(Mechanism::Ramhecs),
            "tomhecs" => Ok(Mechanism::Tomhecs),
            _ => Err(MechanismError::UnknownMechanism(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MechanismError {
    #[error("invalid market: {} violation(s), first: {}", .0.len(), .0[0])]
    InvalidMarket(Vec<Violation>),
    #[error("unknown mechanism {0:?} (expected \"ramhecs\" or \"tomhecs\")")]
    UnknownMechanism(String),
}

pub(crate) fn ensure_valid(market: &Market) -> Result<(), MechanismError> {
    let violations = validate_market(market);
    if violations.is_empty() {
        Ok(())
    } else {
        Err(MechanismError::InvalidMarket(violations))
    }
}

/// Uniform dispatch. `proposing_side` is ignored by `ramhecs`, `seed` by `tomhecs`.
pub fn run_mechanism(
    market: &Market,
    mechanism: Mechanism,
    proposing_side: Side,
    seed: u64,
) -> Result<(Matching, TraceStats), MechanismError> {
    match mechanism {
        Mechanism::Ramhecs => ramhecs(market, seed),
        Mechanism::Tomhecs => tomhecs(market, proposing_side),
    }
}
