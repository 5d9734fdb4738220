//! Preference misreports and Monte Carlo estimators.
//!
//! The estimators come in two flavours. The `*_model` functions simulate the
//! stylized probability models directly (a uniformly random list index, independent
//! geometric rejections). The others run the real mechanisms on random markets so
//! the two can be compared. Every trial draws from its own stream
//! `(seed, [LABEL, trial])`, so results do not depend on execution order.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market_model::{
    generate_random_market, AgentId, ListLength, Market, PreferenceList, Side,
};
use crate::mechanisms::{ramhecs_sequence, tomhecs_category};
use crate::rng::{self, label};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticsError {
    #[error("deviation probability {0} is outside [0, 1]")]
    Probability(f64),
    #[error("rejection probability {0} is outside [0, 1)")]
    RejectionProbability(f64),
    #[error("at least one trial is required")]
    NoTrials,
    #[error("roster size must be at least 1")]
    EmptyRoster,
    #[error("unknown variation preset {0:?} (expected none, small, medium or large)")]
    UnknownPreset(String),
}

/// Named deviation probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variation {
    None,
    Small,
    Medium,
    Large,
}

impl Variation {
    pub const ALL: [Variation; 4] = [
        Variation::None,
        Variation::Small,
        Variation::Medium,
        Variation::Large,
    ];

    pub fn probability(self) -> f64 {
        match self {
            Variation::None => 0.0,
            Variation::Small => 0.125,
            Variation::Medium => 0.25,
            Variation::Large => 0.5,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variation::None => "none",
            Variation::Small => "small",
            Variation::Medium => "medium",
            Variation::Large => "large",
        }
    }

    pub fn index(self) -> u64 {
        self as u64
    }
}

impl fmt::Display for Variation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variation {
    type Err = AnalyticsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variation::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| AnalyticsError::UnknownPreset(s.to_string()))
    }
}

/// Which side misreports, how often, and from which seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationSpec {
    side: Side,
    q: f64,
    seed: u64,
}

impl PerturbationSpec {
    pub fn new(side: Side, q: f64, seed: u64) -> Result<Self, AnalyticsError> {
        if !(0.0..=1.0).contains(&q) {
            return Err(AnalyticsError::Probability(q));
        }
        Ok(PerturbationSpec { side, q, seed })
    }

    pub fn preset(side: Side, variation: Variation, seed: u64) -> Self {
        PerturbationSpec {
            side,
            q: variation.probability(),
            seed,
        }
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// As [`perturb_preferences`], also returning the agents that misreported.
///
/// In category `c`, using stream `(seed, [PERTURB, c])`, each agent on the target
/// side in ordinal order flips a `q`-coin; on heads its list is replaced by a
/// uniform shuffle of the same entries.
pub fn perturb_preferences_detailed(
    market: &Market,
    spec: &PerturbationSpec,
) -> (Market, Vec<AgentId>) {
    let mut out = market.clone();
    let mut deviators = Vec::new();
    for cm in &mut out.categories {
        let mut rng = rng::stream(spec.seed, &[label::PERTURB, cm.category as u64]);
        let lists: &mut Vec<PreferenceList> = match spec.side {
            Side::Patient => &mut cm.patient_prefs,
            Side::Doctor => &mut cm.doctor_prefs,
        };
        for list in lists.iter_mut() {
            if rng.gen_bool(spec.q) {
                list.ranking.shuffle(&mut rng);
                deviators.push(list.owner);
            }
        }
    }
    (out, deviators)
}

/// Replaces each target-side list, independently with probability `q`, by a random
/// permutation of its entries.
pub fn perturb_preferences(market: &Market, spec: &PerturbationSpec) -> Market {
    perturb_preferences_detailed(market, spec).0
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateResult {
    pub mean: f64,
    pub std_error: f64,
    pub trials: usize,
    pub parameters: BTreeMap<String, f64>,
}

impl EstimateResult {
    /// Sample mean and standard error (sample standard deviation over sqrt(n)).
    pub fn from_samples(samples: &[f64], parameters: &[(&str, f64)]) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let std_error = if samples.len() > 1 {
            let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        EstimateResult {
            mean,
            std_error,
            trials: samples.len(),
            parameters: parameters
                .iter()
                .map(|&(k, v)| (k.to_string(), v))
                .collect(),
        }
    }

    /// |mean - expected| within `sigmas` standard errors.
    pub fn within(&self, expected: f64, sigmas: f64) -> bool {
        (self.mean - expected).abs() <= sigmas * self.std_error
    }
}

fn check_size(n: usize, trials: usize) -> Result<(), AnalyticsError> {
    if trials == 0 {
        return Err(AnalyticsError::NoTrials);
    }
    if n == 0 {
        return Err(AnalyticsError::EmptyRoster);
    }
    Ok(())
}

fn params(n: usize, trials: usize, seed: u64) -> [(&'static str, f64); 3] {
    [
        ("n", n as f64),
        ("trials", trials as f64),
        ("seed", seed as f64),
    ]
}

/// Stylized first-pick model: a uniformly random list index `k` in `1..=n` lands at
/// distance `k - 1` from the top. Converges to `(n - 1) / 2`.
pub fn estimate_first_pick_distance(
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<EstimateResult, AnalyticsError> {
    check_size(n, trials)?;
    let samples: Vec<f64> = (0..trials)
        .map(|t| {
            let mut rng = rng::stream(seed, &[label::FIRST_PICK, t as u64]);
            let k = rng.gen_range(1..=n);
            (k - 1) as f64
        })
        .collect();
    Ok(EstimateResult::from_samples(
        &samples,
        &params(n, trials, seed),
    ))
}

/// Concrete counterpart: on a random full n x n market, the list index of the
/// doctor given to the first patient the random allocator draws.
pub fn estimate_first_pick_distance_concrete(
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<EstimateResult, AnalyticsError> {
    check_size(n, trials)?;
    let samples: Vec<f64> = (0..trials)
        .map(|t| {
            let (market, mut rng) = trial_market(label::FIRST_PICK, n, seed, t);
            let cm = &market.categories[0];
            let (sequence, _) = ramhecs_sequence(cm, &mut rng);
            let first = sequence[0];
            cm.patient_prefs[first.patient]
                .rank_of(first.doctor)
                .unwrap() as f64
        })
        .collect();
    Ok(EstimateResult::from_samples(
        &samples,
        &params(n, trials, seed),
    ))
}

fn trial_market(stream: u64, n: usize, seed: u64, trial: usize) -> (Market, rng::StreamRng) {
    let market_seed = rng::derive_seed(seed, &[stream, trial as u64, 0]);
    let market =
        generate_random_market(1, n, n, ListLength::Full, market_seed).expect("full lists fit");
    (market, rng::stream(seed, &[stream, trial as u64, 1]))
}

/// Runs the random allocator on random full n x n markets and averages the total
/// list index patients receive, measured on their original lists.
pub fn estimate_total_distance(
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<EstimateResult, AnalyticsError> {
    check_size(n, trials)?;
    let samples: Vec<f64> = (0..trials)
        .map(|t| {
            let (market, mut rng) = trial_market(label::TOTAL_DISTANCE, n, seed, t);
            let cm = &market.categories[0];
            let (sequence, _) = ramhecs_sequence(cm, &mut rng);
            sequence
                .iter()
                .map(|p| cm.patient_prefs[p.patient].rank_of(p.doctor).unwrap() as f64)
                .sum()
        })
        .collect();
    Ok(EstimateResult::from_samples(
        &samples,
        &params(n, trials, seed),
    ))
}

/// Stylized total-distance model: the patient served `i`-th (1-based) draws a
/// uniform index from its remaining list of `n - i + 1` entries. Converges to
/// `n (n - 1) / 4`.
pub fn estimate_total_distance_model(
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<EstimateResult, AnalyticsError> {
    check_size(n, trials)?;
    let samples: Vec<f64> = (0..trials)
        .map(|t| {
            let mut rng = rng::stream(seed, &[label::TOTAL_DISTANCE, t as u64, 2]);
            (1..=n).map(|i| rng.gen_range(0..n - i + 1) as f64).sum()
        })
        .collect();
    Ok(EstimateResult::from_samples(
        &samples,
        &params(n, trials, seed),
    ))
}

fn geometric_rejections<R: Rng>(rng: &mut R, p: f64, horizon: usize) -> u64 {
    let mut count = 0;
    let mut prob = 1.0;
    for _ in 0..horizon {
        if prob < f64::MIN_POSITIVE {
            break;
        }
        count += u64::from(rng.gen::<f64>() < prob);
        prob *= p;
    }
    count
}

fn check_rejection_model(p: f64, horizon: usize, trials: usize) -> Result<(), AnalyticsError> {
    if !(0.0..1.0).contains(&p) {
        return Err(AnalyticsError::RejectionProbability(p));
    }
    check_size(horizon, trials)
}

/// Independent-rejection model for one agent: `Y = sum_{k<n} Y_k` with
/// `P(Y_k = 1) = p^k`. The mean converges to `(1 - p^n) / (1 - p)`.
pub fn simulate_geometric_rejections(
    p: f64,
    horizon: usize,
    trials: usize,
    seed: u64,
) -> Result<EstimateResult, AnalyticsError> {
    check_rejection_model(p, horizon, trials)?;
    let samples: Vec<f64> = (0..trials)
        .map(|t| {
            let mut rng = rng::stream(seed, &[label::REJECTIONS, t as u64]);
            geometric_rejections(&mut rng, p, horizon) as f64
        })
        .collect();
    Ok(EstimateResult::from_samples(
        &samples,
        &[("p", p), ("n", horizon as f64), ("trials", trials as f64)],
    ))
}

/// The same model summed over `n` independent agents, each with horizon `n`.
/// Converges to `n (1 - p^n) / (1 - p)`, i.e. about `2n` at `p = 1/2`.
pub fn simulate_total_rejections(
    p: f64,
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<EstimateResult, AnalyticsError> {
    check_rejection_model(p, n, trials)?;
    let samples: Vec<f64> = (0..trials)
        .map(|t| {
            let mut rng = rng::stream(seed, &[label::REJECTIONS, t as u64, 1]);
            (0..n)
                .map(|_| geometric_rejections(&mut rng, p, n))
                .sum::<u64>() as f64
        })
        .collect();
    Ok(EstimateResult::from_samples(
        &samples,
        &[("p", p), ("n", n as f64), ("trials", trials as f64)],
    ))
}

/// Finite-horizon closed form `sum_{k<n} p^k`.
pub fn geometric_partial_sum(p: f64, n: usize) -> f64 {
    (0..n).map(|k| p.powi(k as i32)).sum()
}

/// Rejections counted by real deferred acceptance (patients proposing) on random
/// full n x n markets, per category.
pub fn measure_deferred_acceptance_rejections(
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<EstimateResult, AnalyticsError> {
    check_size(n, trials)?;
    let samples: Vec<f64> = (0..trials)
        .map(|t| {
            let market_seed = rng::derive_seed(seed, &[label::REJECTIONS, t as u64, 2]);
            let market = generate_random_market(1, n, n, ListLength::Full, market_seed)
                .expect("full lists fit");
            let (_, trace) = tomhecs_category(&market.categories[0], Side::Patient);
            trace.rejections as f64
        })
        .collect();
    Ok(EstimateResult::from_samples(
        &samples,
        &params(n, trials, seed),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::reference_market;
    use crate::market_model::validate_market;

    #[test]
    fn zero_probability_is_identity() {
        let m = generate_random_market(3, 6, 6, ListLength::Full, 1).unwrap();
        let spec = PerturbationSpec::new(Side::Patient, 0.0, 9).unwrap();
        let (out, deviators) = perturb_preferences_detailed(&m, &spec);
        assert_eq!(out, m);
        assert!(deviators.is_empty());
    }

    #[test]
    fn certain_deviation_resamples_every_target_list() {
        let m = reference_market();
        let spec = PerturbationSpec::new(Side::Doctor, 1.0, 4).unwrap();
        let (out, deviators) = perturb_preferences_detailed(&m, &spec);
        assert_eq!(deviators.len(), 4);
        assert_eq!(
            out.categories[0].patient_prefs,
            m.categories[0].patient_prefs
        );
        for (a, b) in out.categories[0]
            .doctor_prefs
            .iter()
            .zip(&m.categories[0].doctor_prefs)
        {
            let mut x: Vec<usize> = a.ordinals().collect();
            let mut y: Vec<usize> = b.ordinals().collect();
            x.sort_unstable();
            y.sort_unstable();
            assert_eq!(x, y);
        }
        assert!(validate_market(&out).is_empty());
    }

    #[test]
    fn probability_is_validated() {
        assert!(PerturbationSpec::new(Side::Patient, 1.5, 0).is_err());
        assert!(PerturbationSpec::new(Side::Patient, -0.1, 0).is_err());
        assert_eq!(
            PerturbationSpec::preset(Side::Patient, Variation::Small, 0).q(),
            0.125
        );
    }

    #[test]
    fn presets_parse() {
        for v in Variation::ALL {
            assert_eq!(v.as_str().parse::<Variation>().unwrap(), v);
        }
        assert!("huge".parse::<Variation>().is_err());
    }

    #[test]
    fn degenerate_estimators() {
        let z = estimate_first_pick_distance(1, 100, 0).unwrap();
        assert_eq!((z.mean, z.std_error), (0.0, 0.0));
        let d = estimate_total_distance(1, 100, 0).unwrap();
        assert_eq!(d.mean, 0.0);
        let y = simulate_geometric_rejections(0.0, 10, 50, 0).unwrap();
        assert_eq!((y.mean, y.std_error), (1.0, 0.0));
    }

    #[test]
    fn estimator_errors() {
        assert_eq!(
            estimate_first_pick_distance(3, 0, 0),
            Err(AnalyticsError::NoTrials)
        );
        assert_eq!(
            estimate_total_distance(0, 3, 0),
            Err(AnalyticsError::EmptyRoster)
        );
        assert_eq!(
            simulate_geometric_rejections(1.0, 3, 3, 0),
            Err(AnalyticsError::RejectionProbability(1.0))
        );
        assert!(simulate_total_rejections(-0.5, 3, 3, 0).is_err());
    }

    #[test]
    fn first_pick_two_options() {
        let r = estimate_first_pick_distance(2, 100_000, 3).unwrap();
        assert!(r.within(0.5, 3.0), "{r:?}");
        let c = estimate_first_pick_distance_concrete(2, 20_000, 3).unwrap();
        assert!(c.within(0.5, 3.0), "{c:?}");
    }

    #[test]
    fn total_distance_model_matches_closed_form() {
        let r = estimate_total_distance_model(10, 50_000, 8).unwrap();
        assert!(r.within(10.0 * 9.0 / 4.0, 3.0), "{r:?}");
    }

    #[test]
    fn finite_horizon_rejections() {
        let r = simulate_geometric_rejections(0.5, 4, 100_000, 1).unwrap();
        assert!(r.within(geometric_partial_sum(0.5, 4), 3.0), "{r:?}");
        assert!((geometric_partial_sum(0.5, 4) - 1.875).abs() < 1e-12);
    }

    #[test]
    fn measured_rejections_do_not_exceed_proposals() {
        for n in [8, 16, 32, 64] {
            let r = measure_deferred_acceptance_rejections(n, 50, 5).unwrap();
            assert!(r.mean <= (n * n) as f64);
        }
    }
}
