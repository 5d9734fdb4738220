use std::fs;

use consult_match::analytics::Variation;
use consult_match::harness::{
    self, CategoryScope, ExperimentConfig, Granularity, MatchingRecord, Party, ResultRow,
    CSV_HEADER,
};
use consult_match::market_model::generate_random_market;
use consult_match::mechanisms::{ramhecs, tomhecs};
use consult_match::metrics::evaluate;
use consult_match::rng::{derive_seed, label};
use consult_match::{Mechanism, Side};

fn panel(json: &str) -> ExperimentConfig {
    serde_json::from_str(json).unwrap()
}

#[test]
fn four_case_panels_come_from_config_alone() {
    let base = r#""k": 3, "n_patients": 8, "n_doctors": 8, "repetitions": 5,
        "presets": ["none", "small", "medium", "large"], "measured_sides": ["patient", "doctor"]"#;
    let cases = [
        (
            format!(r#"{{{base}, "deviating_party": "requesting"}}"#),
            Party::Requesting,
            false,
        ),
        (
            format!(r#"{{{base}, "deviating_party": "requested"}}"#),
            Party::Requested,
            false,
        ),
        (
            format!(
                r#"{{{base}, "deviating_party": "requesting", "mode": "partial", "list_length": 4}}"#
            ),
            Party::Requesting,
            true,
        ),
        (
            format!(
                r#"{{{base}, "deviating_party": "requested", "mode": "partial", "list_length": 4}}"#
            ),
            Party::Requested,
            true,
        ),
    ];
    for (json, party, partial) in cases {
        let config = panel(&json);
        let rows = harness::run_experiment(&config).unwrap().rows;
        assert_eq!(rows.len(), 5 * 2 * 4 * 2);
        assert!(rows.iter().all(|r| r.deviating_party == party));
        if partial {
            // lists of 4: nobody's gap exceeds 4 per agent
            assert!(rows.iter().all(|r| r.eta <= 3 * 8 * 4));
        } else {
            assert!(rows.iter().all(|r| r.matched_count == 24));
        }
    }
}

#[test]
fn unbalanced_rosters_run() {
    for (n, m) in [(10, 6), (6, 10)] {
        let config = ExperimentConfig {
            k: 2,
            n_patients: n,
            n_doctors: m,
            repetitions: 3,
            ..Default::default()
        };
        let rows = harness::run_experiment(&config).unwrap().rows;
        assert!(rows.iter().all(|r| r.matched_count == 2 * n.min(m)));
    }
}

#[test]
fn default_grid_shape() {
    let config = ExperimentConfig {
        presets: Variation::ALL.to_vec(),
        repetitions: 100,
        ..Default::default()
    };
    let rows = harness::run_experiment(&config).unwrap().rows;
    assert_eq!(rows.len(), 100 * 2 * 4);
    let summary = harness::summarize(&rows).unwrap();
    let tom: Vec<_> = summary
        .iter()
        .filter(|s| s.mechanism == Mechanism::Tomhecs)
        .collect();
    assert_eq!(tom.len(), 4);
    for w in tom.windows(2) {
        assert!(w[0].eta_mean <= w[1].eta_mean && w[0].zeta_mean >= w[1].zeta_mean);
    }
    let ram = summary
        .iter()
        .find(|s| s.mechanism == Mechanism::Ramhecs && s.preset == Variation::None)
        .unwrap();
    assert!(tom[0].zeta_mean >= ram.zeta_mean);
}

#[test]
fn truthful_reports_dominate_perturbed_presets() {
    let config = ExperimentConfig {
        k: 4,
        n_patients: 12,
        n_doctors: 12,
        mechanisms: vec![Mechanism::Tomhecs],
        presets: Variation::ALL.to_vec(),
        repetitions: 120,
        seed: 71,
        ..Default::default()
    };
    let summary = harness::summarize(&harness::run_experiment(&config).unwrap().rows).unwrap();
    let truthful = summary
        .iter()
        .find(|s| s.preset == Variation::None)
        .unwrap()
        .eta_mean;
    assert!(summary.iter().all(|s| truthful <= s.eta_mean));
}

#[test]
fn rows_recompute_from_persisted_matchings() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rows.csv");
    let config = ExperimentConfig {
        k: 3,
        n_patients: 7,
        n_doctors: 6,
        presets: vec![Variation::None, Variation::Large],
        measured_sides: vec![Side::Patient, Side::Doctor],
        granularity: Granularity::PerCategory,
        repetitions: 4,
        seed: 19,
        output: Some(out.clone()),
        persist_matchings: true,
        ..Default::default()
    };
    harness::run_to_files(&config).unwrap();
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
    let rows: Vec<ResultRow> = csv::Reader::from_path(&out)
        .unwrap()
        .deserialize()
        .collect::<Result<_, _>>()
        .unwrap();
    let records: Vec<MatchingRecord> =
        serde_json::from_slice(&fs::read(harness::matchings_path(&out)).unwrap()).unwrap();
    assert_eq!(records.len(), 4 * 2 * 2);

    for row in &rows {
        let record = records
            .iter()
            .find(|r| r.rep == row.rep && r.mechanism == row.mechanism && r.preset == row.preset)
            .unwrap();
        let seed = derive_seed(config.seed, &[label::EXPERIMENT, row.rep as u64, 0]);
        let market = generate_random_market(3, 7, 6, config.list_length(), seed).unwrap();
        let report = evaluate(&market, &record.matching, row.measured_side).unwrap();
        let CategoryScope::Index(c) = row.category else {
            panic!("per-category rows")
        };
        assert_eq!(row.eta, report.per_category[c].eta);
        assert_eq!(row.zeta, report.per_category[c].zeta);
        assert_eq!(row.matched_count, record.matching.categories[c].len());
    }
}

#[test]
fn deferred_acceptance_beats_random_on_proposer_satisfaction() {
    let (mut tom, mut ram) = (0u64, 0u64);
    for seed in 0..1_000u64 {
        let market =
            generate_random_market(1, 10, 10, consult_match::ListLength::Full, seed).unwrap();
        tom += evaluate(
            &market,
            &tomhecs(&market, Side::Patient).unwrap().0,
            Side::Patient,
        )
        .unwrap()
        .eta;
        ram += evaluate(&market, &ramhecs(&market, seed).unwrap().0, Side::Patient)
            .unwrap()
            .eta;
    }
    assert!(tom <= ram, "{tom} vs {ram}");
}
