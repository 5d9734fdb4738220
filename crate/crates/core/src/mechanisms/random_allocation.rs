use rand::Rng;

use super::{
    ensure_valid, CategoryMatching, CategoryTrace, Matching, MechanismError, Pair, TraceStats,
};
use crate::market_model::{CategoryMarket, Market};
use crate::rng::{self, label};

/// Random allocation on one category, returning pairs in the order they were made.
///
/// Repeatedly draws a uniformly random patient among those not yet drawn, then a
/// uniformly random doctor among the still-free doctors on that patient's list who
/// also list the patient. A patient with no such doctor is dropped unmatched.
pub fn ramhecs_sequence<R: Rng + ?Sized>(
    cm: &CategoryMarket,
    rng: &mut R,
) -> (Vec<Pair>, CategoryTrace) {
    let mut pending: Vec<usize> = (0..cm.patients.len()).collect();
    let mut doctor_free = vec![true; cm.doctors.len()];
    let mut sequence = Vec::with_capacity(pending.len().min(cm.doctors.len()));
    let mut available = Vec::with_capacity(cm.doctors.len());
    let mut trace = CategoryTrace {
        category: cm.category,
        ..Default::default()
    };

    while !pending.is_empty() {
        trace.outer_iterations += 1;
        let patient = pending.swap_remove(rng.gen_range(0..pending.len()));
        available.clear();
        available.extend(
            cm.patient_prefs[patient]
                .ordinals()
                .filter(|&d| doctor_free[d] && cm.doctor_prefs[d].rank_of(patient).is_some()),
        );
        if available.is_empty() {
            continue;
        }
        let doctor = available[rng.gen_range(0..available.len())];
        doctor_free[doctor] = false;
        trace.proposals += 1;
        sequence.push(Pair::new(patient, doctor));
    }
    (sequence, trace)
}

pub fn ramhecs_category<R: Rng + ?Sized>(
    cm: &CategoryMarket,
    rng: &mut R,
) -> (CategoryMatching, CategoryTrace) {
    let (sequence, trace) = ramhecs_sequence(cm, rng);
    (CategoryMatching::new(cm.category, sequence), trace)
}

/// Random allocation over every category. Category `c` uses the stream
/// `(seed, [RAMHECS, c])`.
pub fn ramhecs(market: &Market, seed: u64) -> Result<(Matching, TraceStats), MechanismError> {
    ensure_valid(market)?;
    let (categories, traces) = market
        .categories
        .iter()
        .map(|cm| {
            ramhecs_category(
                cm,
                &mut rng::stream(seed, &[label::RAMHECS, cm.category as u64]),
            )
        })
        .unzip();
    Ok((Matching { categories }, TraceStats::from_categories(traces)))
}
