//! Executable stability definitions and brute-force oracles.
//!
//! Everything here reads preferences through [`PreferenceList::rank_of`] rather
//! than the rank tables the mechanisms use, so the checks share no code path with
//! the allocators they audit. Being unmatched ranks below every listed counterpart.
//!
//! [`PreferenceList::rank_of`]: crate::market_model::PreferenceList::rank_of

use itertools::Itertools;
use thiserror::Error;

use crate::market_model::{AgentId, CategoryMarket, Side};
use crate::mechanisms::{tomhecs_category, CategoryMatching, MatchingError, Pair};

/// Largest roster the matching enumeration accepts.
pub const MAX_ENUMERATION_ROSTER: usize = 8;
/// Largest audited roster for the misreport sweep.
pub const MAX_AUDIT_ROSTER: usize = 5;
/// Largest opposite roster for the misreport sweep (m! misreports per agent).
pub const MAX_AUDIT_LIST: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlockingPair {
    pub patient: AgentId,
    pub doctor: AgentId,
}

/// A misreport that left the audited agent strictly better off under its true list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TruthViolation {
    pub misreport: Vec<AgentId>,
    pub truthful_assignment: Option<AgentId>,
    pub improved_assignment: Option<AgentId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TruthfulnessReport {
    pub agent: AgentId,
    pub misreports_tried: usize,
    pub violations: Vec<TruthViolation>,
}

impl TruthfulnessReport {
    pub fn is_truthful(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error(transparent)]
    Matching(#[from] MatchingError),
    #[error("roster of {size} exceeds the oracle limit of {limit}")]
    TooLarge { size: usize, limit: usize },
    #[error("{0} does not rank the whole opposite roster; misreport audits need full lists")]
    PartialList(AgentId),
}

fn partners(
    cm: &CategoryMarket,
    matching: &CategoryMatching,
) -> (Vec<Option<usize>>, Vec<Option<usize>>) {
    (
        matching.partners(Side::Patient, cm.patients.len()),
        matching.partners(Side::Doctor, cm.doctors.len()),
    )
}

/// Every pair that blocks `matching`: mutually acceptable, not matched together,
/// and each strictly prefers the other to its current assignment.
pub fn find_blocking_pairs(
    cm: &CategoryMarket,
    matching: &CategoryMatching,
) -> Result<Vec<BlockingPair>, OracleError> {
    matching.check_against(cm)?;
    Ok(blocking_pairs_unchecked(cm, matching))
}

fn blocking_pairs_unchecked(cm: &CategoryMarket, matching: &CategoryMatching) -> Vec<BlockingPair> {
    let (patient_partner, doctor_partner) = partners(cm, matching);
    let mut out = Vec::new();
    for (p, plist) in cm.patient_prefs.iter().enumerate() {
        for d in plist.ordinals() {
            if patient_partner[p] == Some(d) {
                continue;
            }
            let dlist = &cm.doctor_prefs[d];
            if dlist.rank_of(p).is_none() {
                continue;
            }
            if plist.prefers(Some(d), patient_partner[p])
                && dlist.prefers(Some(p), doctor_partner[d])
            {
                out.push(BlockingPair {
                    patient: AgentId::patient(cm.category, p),
                    doctor: AgentId::doctor(cm.category, d),
                });
            }
        }
    }
    out
}

pub fn is_stable(cm: &CategoryMarket, matching: &CategoryMatching) -> Result<bool, OracleError> {
    Ok(find_blocking_pairs(cm, matching)?.is_empty())
}

/// Every patient and every doctor matched; only possible with equal rosters.
pub fn is_perfect(cm: &CategoryMarket, matching: &CategoryMatching) -> Result<bool, OracleError> {
    matching.check_against(cm)?;
    Ok(cm.patients.len() == cm.doctors.len() && matching.len() == cm.patients.len())
}

fn guard(size: usize, limit: usize) -> Result<(), OracleError> {
    if size > limit {
        Err(OracleError::TooLarge { size, limit })
    } else {
        Ok(())
    }
}

/// All maximal matchings over mutually acceptable pairs: no free patient and free
/// doctor who list each other remain. Sorted canonically.
pub fn enumerate_maximal_matchings(
    cm: &CategoryMarket,
) -> Result<Vec<CategoryMatching>, OracleError> {
    guard(
        cm.patients.len().max(cm.doctors.len()),
        MAX_ENUMERATION_ROSTER,
    )?;
    let acceptable: Vec<Vec<usize>> = cm
        .patient_prefs
        .iter()
        .enumerate()
        .map(|(p, l)| {
            let mut ds: Vec<usize> = l
                .ordinals()
                .filter(|&d| cm.doctor_prefs[d].rank_of(p).is_some())
                .collect();
            ds.sort_unstable();
            ds
        })
        .collect();
    let mut out = Vec::new();
    let mut doctor_used = vec![false; cm.doctors.len()];
    let mut current = Vec::new();
    extend(
        0,
        &acceptable,
        &mut doctor_used,
        &mut current,
        &mut out,
        cm.category,
    );
    out.sort();
    Ok(out)
}

fn extend(
    patient: usize,
    acceptable: &[Vec<usize>],
    doctor_used: &mut [bool],
    current: &mut Vec<Pair>,
    out: &mut Vec<CategoryMatching>,
    category: usize,
) {
    if patient == acceptable.len() {
        let mut patient_used = vec![false; acceptable.len()];
        for pair in current.iter() {
            patient_used[pair.patient] = true;
        }
        let maximal = acceptable
            .iter()
            .enumerate()
            .all(|(p, ds)| patient_used[p] || ds.iter().all(|&d| doctor_used[d]));
        if maximal {
            out.push(CategoryMatching::new(category, current.clone()));
        }
        return;
    }
    extend(patient + 1, acceptable, doctor_used, current, out, category);
    for &d in &acceptable[patient] {
        if doctor_used[d] {
            continue;
        }
        doctor_used[d] = true;
        current.push(Pair::new(patient, d));
        extend(patient + 1, acceptable, doctor_used, current, out, category);
        current.pop();
        doctor_used[d] = false;
    }
}

/// All stable matchings, by exhaustive enumeration of maximal matchings.
pub fn enumerate_stable_matchings(
    cm: &CategoryMarket,
) -> Result<Vec<CategoryMatching>, OracleError> {
    Ok(enumerate_maximal_matchings(cm)?
        .into_iter()
        .filter(|m| blocking_pairs_unchecked(cm, m).is_empty())
        .collect())
}

fn rank_or_unmatched(
    cm: &CategoryMarket,
    side: Side,
    agent: usize,
    partner: Option<usize>,
) -> usize {
    let list = cm.list(side, agent);
    partner.and_then(|o| list.rank_of(o)).unwrap_or(list.len())
}

/// True when every agent on `side` weakly prefers its assignment in `matching` to
/// its assignment in every stable matching of `cm`.
pub fn check_requesting_party_optimal(
    cm: &CategoryMarket,
    matching: &CategoryMatching,
    side: Side,
) -> Result<bool, OracleError> {
    matching.check_against(cm)?;
    let stable = enumerate_stable_matchings(cm)?;
    let roster = cm.size(side);
    let ours = matching.partners(side, roster);
    Ok(stable.iter().all(|other| {
        let theirs = other.partners(side, roster);
        (0..roster).all(|a| {
            rank_or_unmatched(cm, side, a, ours[a]) <= rank_or_unmatched(cm, side, a, theirs[a])
        })
    }))
}

/// Misreport sweep for the proposing side under deferred acceptance.
pub fn check_truthfulness_exhaustive(
    cm: &CategoryMarket,
    proposing_side: Side,
) -> Result<Vec<TruthfulnessReport>, OracleError> {
    audit_misreports(cm, proposing_side, proposing_side)
}

/// For each agent on `audited`, replays deferred acceptance (with `proposing_side`
/// proposing) under every permutation of its list other than the truthful one, and
/// records each run that gives it a strictly better counterpart by its true list.
pub fn audit_misreports(
    cm: &CategoryMarket,
    audited: Side,
    proposing_side: Side,
) -> Result<Vec<TruthfulnessReport>, OracleError> {
    guard(cm.size(audited), MAX_AUDIT_ROSTER)?;
    let width = cm.size(audited.opposite());
    guard(width, MAX_AUDIT_LIST)?;
    for side in [Side::Patient, Side::Doctor] {
        let full = cm.size(side.opposite());
        if let Some(l) = cm.prefs(side).iter().find(|l| l.len() != full) {
            return Err(OracleError::PartialList(l.owner));
        }
    }
    let (truthful, _) = tomhecs_category(cm, proposing_side);
    let mut reports = Vec::with_capacity(cm.size(audited));
    for agent in 0..cm.size(audited) {
        let true_list = cm.list(audited, agent);
        let truthful_partner = truthful.partner(audited, agent);
        let own: Vec<usize> = true_list.ordinals().collect();
        let mut tried = 0;
        let mut violations = Vec::new();
        for report in (0..width).permutations(width) {
            if report == own {
                continue;
            }
            tried += 1;
            let lying = cm.with_ranking(audited, agent, &report);
            let (outcome, _) = tomhecs_category(&lying, proposing_side);
            let got = outcome.partner(audited, agent);
            if true_list.prefers(got, truthful_partner) {
                let opp = audited.opposite();
                let id = |o: Option<usize>| {
                    o.map(|ordinal| AgentId {
                        side: opp,
                        category: cm.category,
                        ordinal,
                    })
                };
                violations.push(TruthViolation {
                    misreport: report.iter().map(|&o| id(Some(o)).unwrap()).collect(),
                    truthful_assignment: id(truthful_partner),
                    improved_assignment: id(got),
                });
            }
        }
        reports.push(TruthfulnessReport {
            agent: true_list.owner,
            misreports_tried: tried,
            violations,
        });
    }
    Ok(reports)
}
