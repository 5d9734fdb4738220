//! Satisfaction level and number of preferable allocations.
//!
//! For an agent with a non-empty list, the satisfaction gap is the 0-based index of
//! its assigned counterpart minus the index of its top choice (always 0). An
//! unmatched agent scores its list length, one worse than its last choice. Lower
//! satisfaction level is better. The preferable-allocation count is the number of
//! agents holding the top entry of their list.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market_model::{AgentId, CategoryMarket, Market, Side};
use crate::mechanisms::{CategoryMatching, Matching, MatchingError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error(transparent)]
    Matching(#[from] MatchingError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryScore {
    pub category: usize,
    /// Satisfaction level: sum of rank gaps.
    pub eta: u64,
    /// Number of first-choice allocations.
    pub zeta: u64,
    /// Agents on the measured side.
    pub roster: usize,
    /// Matched agents on the measured side.
    pub matched: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub side: Side,
    pub per_category: Vec<CategoryScore>,
    pub eta: u64,
    pub zeta: u64,
}

/// Per-category values and their sum.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Totals {
    pub per_category: Vec<u64>,
    pub total: u64,
}

/// Scores one category. The matching is checked against the category first.
pub fn score_category(
    cm: &CategoryMarket,
    matching: &CategoryMatching,
    side: Side,
) -> Result<CategoryScore, MetricsError> {
    matching.check_against(cm)?;
    let roster = cm.size(side);
    let partners = matching.partners(side, roster);
    let mut score = CategoryScore {
        category: cm.category,
        eta: 0,
        zeta: 0,
        roster,
        matched: 0,
    };
    for (agent, partner) in partners.into_iter().enumerate() {
        let list = cm.list(side, agent);
        match partner {
            Some(counterpart) => {
                let assigned = list.rank_of(counterpart).ok_or_else(|| {
                    let opp = AgentId {
                        side: side.opposite(),
                        category: cm.category,
                        ordinal: counterpart,
                    };
                    let me = AgentId {
                        side,
                        category: cm.category,
                        ordinal: agent,
                    };
                    let (patient, doctor) = if side == Side::Patient {
                        (me, opp)
                    } else {
                        (opp, me)
                    };
                    MatchingError::NotAcceptable { patient, doctor }
                })?;
                let top = 0;
                score.eta += (assigned - top) as u64;
                score.zeta += u64::from(assigned == top);
                score.matched += 1;
            }
            None => score.eta += list.len() as u64,
        }
    }
    Ok(score)
}

pub fn evaluate(
    market: &Market,
    matching: &Matching,
    side: Side,
) -> Result<MetricsReport, MetricsError> {
    if matching.categories.len() != market.categories.len() {
        return Err(MatchingError::CategoryCount {
            matching: matching.categories.len(),
            market: market.categories.len(),
        }
        .into());
    }
    let per_category = market
        .categories
        .iter()
        .zip(&matching.categories)
        .map(|(cm, m)| score_category(cm, m, side))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(MetricsReport {
        side,
        eta: per_category.iter().map(|c| c.eta).sum(),
        zeta: per_category.iter().map(|c| c.zeta).sum(),
        per_category,
    })
}

pub fn satisfaction_level(
    market: &Market,
    matching: &Matching,
    side: Side,
) -> Result<Totals, MetricsError> {
    let r = evaluate(market, matching, side)?;
    Ok(Totals {
        per_category: r.per_category.iter().map(|c| c.eta).collect(),
        total: r.eta,
    })
}

pub fn preferable_allocation_count(
    market: &Market,
    matching: &Matching,
    side: Side,
) -> Result<Totals, MetricsError> {
    let r = evaluate(market, matching, side)?;
    Ok(Totals {
        per_category: r.per_category.iter().map(|c| c.zeta).collect(),
        total: r.zeta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{identity_market, reference_market};
    use crate::market_model::{generate_random_market, CategoryMarket, ListLength, PreferenceMode};
    use crate::mechanisms::{ramhecs, tomhecs, Pair};
    use proptest::prelude::*;

    fn patient_optimum() -> Matching {
        Matching {
            categories: vec![CategoryMatching::new(
                0,
                vec![
                    Pair::new(0, 2),
                    Pair::new(1, 1),
                    Pair::new(2, 0),
                    Pair::new(3, 3),
                ],
            )],
        }
    }

    #[test]
    fn reference_patient_side() {
        let m = reference_market();
        // ranks 1, 2, 2, 2
        assert_eq!(
            satisfaction_level(&m, &patient_optimum(), Side::Patient)
                .unwrap()
                .total,
            7
        );
        assert_eq!(
            preferable_allocation_count(&m, &patient_optimum(), Side::Patient)
                .unwrap()
                .total,
            0
        );
    }

    #[test]
    fn reference_doctor_side() {
        let m = reference_market();
        // d1..d4 ranks 3, 0, 1, 0
        assert_eq!(
            satisfaction_level(&m, &patient_optimum(), Side::Doctor)
                .unwrap()
                .total,
            4
        );
        assert_eq!(
            preferable_allocation_count(&m, &patient_optimum(), Side::Doctor)
                .unwrap()
                .total,
            2
        );
    }

    #[test]
    fn first_choices_everywhere() {
        let m = identity_market(5);
        let (matching, _) = tomhecs(&m, Side::Patient).unwrap();
        for side in [Side::Patient, Side::Doctor] {
            let r = evaluate(&m, &matching, side).unwrap();
            assert_eq!((r.eta, r.zeta), (0, 5));
        }
    }

    #[test]
    fn unmatched_agents_score_list_length() {
        let cm = CategoryMarket::from_ordinal_lists(0, &[vec![0, 1], vec![1]], &[vec![0], vec![0]]);
        let market = Market::new(PreferenceMode::Partial, vec![cm]);
        let matching = Matching {
            categories: vec![CategoryMatching::new(0, vec![Pair::new(0, 0)])],
        };
        let r = evaluate(&market, &matching, Side::Patient).unwrap();
        assert_eq!((r.eta, r.zeta), (1, 1));
        assert_eq!(
            (r.per_category[0].matched, r.per_category[0].roster),
            (1, 2)
        );
        let r = evaluate(&market, &matching, Side::Doctor).unwrap();
        assert_eq!((r.eta, r.zeta), (1, 1));
    }

    #[test]
    fn unlisted_partner_is_an_error() {
        let m = reference_market();
        let mut cm = m.categories[0].clone();
        cm.patient_prefs[0].ranking.truncate(1);
        let market = Market::new(PreferenceMode::Partial, vec![cm]);
        assert!(evaluate(&market, &patient_optimum(), Side::Patient).is_err());
        let short = Matching { categories: vec![] };
        assert!(evaluate(&m, &short, Side::Patient).is_err());
    }

    #[test]
    fn aggregate_is_sum_of_categories() {
        let m = generate_random_market(6, 7, 7, ListLength::Full, 21).unwrap();
        let (matching, _) = ramhecs(&m, 2).unwrap();
        let eta = satisfaction_level(&m, &matching, Side::Doctor).unwrap();
        assert_eq!(eta.per_category.iter().sum::<u64>(), eta.total);
        let zeta = preferable_allocation_count(&m, &matching, Side::Doctor).unwrap();
        assert_eq!(zeta.per_category.iter().sum::<u64>(), zeta.total);
        assert!(zeta.per_category.iter().all(|&z| z <= 7));
    }

    fn relabel(cm: &CategoryMarket, pp: &[usize], dp: &[usize]) -> CategoryMarket {
        // new ordinal of patient i is pp[i], of doctor j is dp[j]
        let mut plists = vec![Vec::new(); pp.len()];
        for (i, l) in cm.patient_prefs.iter().enumerate() {
            plists[pp[i]] = l.ordinals().map(|d| dp[d]).collect();
        }
        let mut dlists = vec![Vec::new(); dp.len()];
        for (j, l) in cm.doctor_prefs.iter().enumerate() {
            dlists[dp[j]] = l.ordinals().map(|p| pp[p]).collect();
        }
        CategoryMarket::from_ordinal_lists(cm.category, &plists, &dlists)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn zero_gap_iff_all_first_choices(seed in any::<u64>(), n in 1usize..8) {
            let m = generate_random_market(2, n, n, ListLength::Full, seed).unwrap();
            for matching in [tomhecs(&m, Side::Patient).unwrap().0, ramhecs(&m, seed).unwrap().0] {
                for side in [Side::Patient, Side::Doctor] {
                    for c in evaluate(&m, &matching, side).unwrap().per_category {
                        prop_assert_eq!(c.eta == 0, c.zeta as usize == c.roster);
                    }
                }
            }
        }

        #[test]
        fn eta_is_invariant_under_relabeling(
            seed in any::<u64>(),
            pp in Just((0..6).collect::<Vec<usize>>()).prop_shuffle(),
            dp in Just((0..6).collect::<Vec<usize>>()).prop_shuffle(),
        ) {
            let m = generate_random_market(1, 6, 6, ListLength::Full, seed).unwrap();
            let (matching, _) = ramhecs(&m, seed).unwrap();
            let moved = Market::new(PreferenceMode::Full, vec![relabel(&m.categories[0], &pp, &dp)]);
            let moved_matching = Matching { categories: vec![CategoryMatching::new(
                0,
                matching.categories[0].pairs.iter().map(|p| Pair::new(pp[p.patient], dp[p.doctor])).collect(),
            )] };
            for side in [Side::Patient, Side::Doctor] {
                prop_assert_eq!(
                    evaluate(&m, &matching, side).unwrap().eta,
                    evaluate(&moved, &moved_matching, side).unwrap().eta
                );
            }
        }
    }
}
