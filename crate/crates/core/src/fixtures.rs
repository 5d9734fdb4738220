//! Small hand-built markets used by tests, examples and the CLI.

use crate::market_model::{CategoryMarket, Market, PreferenceMode};

/// The 4x4 eye-surgery category: four patients from four hospitals ranking four
/// externally employed doctors, and vice versa. Ordinals are 0-based, so `p1` is
/// ordinal 0 and `d4` is ordinal 3.
pub fn reference_category(category: usize) -> CategoryMarket {
    let patient_lists = [
        vec![3, 2, 0, 1], // p1: d4 d3 d1 d2
        vec![2, 3, 1, 0], // p2: d3 d4 d2 d1
        vec![3, 1, 0, 2], // p3: d4 d2 d1 d3
        vec![1, 2, 3, 0], // p4: d2 d3 d4 d1
    ];
    let doctor_lists = [
        vec![0, 1, 3, 2], // d1: p1 p2 p4 p3
        vec![1, 3, 0, 2], // d2: p2 p4 p1 p3
        vec![2, 0, 1, 3], // d3: p3 p1 p2 p4
        vec![3, 2, 0, 1], // d4: p4 p3 p1 p2
    ];
    let mut cm = CategoryMarket::from_ordinal_lists(category, &patient_lists, &doctor_lists);
    for (agent, hospital) in cm.patients.iter_mut().zip(["h2", "h3", "h4", "h1"]) {
        agent.hospital = hospital.to_string();
    }
    for (agent, hospital) in cm.doctors.iter_mut().zip(["H3", "H1", "H4", "H2"]) {
        agent.hospital = hospital.to_string();
    }
    cm
}

pub fn reference_market() -> Market {
    Market::new(PreferenceMode::Full, vec![reference_category(0)])
}

/// Patient `i` and doctor `i` rank each other first; remaining entries follow in
/// cyclic order.
pub fn identity_category(category: usize, n: usize) -> CategoryMarket {
    let lists: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).map(|j| (i + j) % n).collect())
        .collect();
    CategoryMarket::from_ordinal_lists(category, &lists, &lists)
}

pub fn identity_market(n: usize) -> Market {
    Market::new(PreferenceMode::Full, vec![identity_category(0, n)])
}

pub fn single_pair_market() -> Market {
    Market::new(
        PreferenceMode::Full,
        vec![CategoryMarket::from_ordinal_lists(
            0,
            &[vec![0]],
            &[vec![0]],
        )],
    )
}
