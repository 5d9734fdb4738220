//! Seeded experiment grid: repetitions x mechanisms x variation presets x measured sides.
//!
//! Each repetition `r` generates its market from `(seed, [EXPERIMENT, r, 0])`,
//! perturbs it per preset with `(seed, [EXPERIMENT, r, 1, preset])` and runs the
//! random allocator with `(seed, [EXPERIMENT, r, 2])`, so every preset of a
//! repetition is compared on the same market. Metrics are always computed on the
//! true (unperturbed) lists.

use std::borrow::Cow;
use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytics::{perturb_preferences, PerturbationSpec, Variation};
use crate::market_model::{generate_random_market, ListLength, MarketError, PreferenceMode, Side};
use crate::mechanisms::{run_mechanism, Matching, Mechanism, MechanismError};
use crate::metrics::{evaluate, MetricsError};
use crate::rng::{self, label};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error(transparent)]
    Mechanism(#[from] MechanismError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("cannot summarize an empty row set")]
    EmptyRows,
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    #[error("json output: {0}")]
    Json(#[from] serde_json::Error),
}

impl HarnessError {
    pub fn is_io(&self) -> bool {
        match self {
            HarnessError::Io { .. } => true,
            HarnessError::Csv(e) => e.is_io_error(),
            HarnessError::Json(e) => e.is_io(),
            _ => false,
        }
    }
}

/// Which party misreports in the perturbed presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Party {
    /// The proposing side.
    Requesting,
    /// The receiving side.
    Requested,
}

impl Party {
    pub fn side(self, proposing_side: Side) -> Side {
        match self {
            Party::Requesting => proposing_side,
            Party::Requested => proposing_side.opposite(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

/// Aggregated rows carry `category = "all"`; per-category rows carry its index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    #[default]
    Aggregate,
    PerCategory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub k: usize,
    pub n_patients: usize,
    pub n_doctors: usize,
    pub mode: PreferenceMode,
    /// Required in partial mode, rejected in full mode.
    pub list_length: Option<usize>,
    pub mechanisms: Vec<Mechanism>,
    pub proposing_side: Side,
    pub measured_sides: Vec<Side>,
    pub presets: Vec<Variation>,
    pub deviating_party: Party,
    pub repetitions: usize,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub format: OutputFormat,
    pub granularity: Granularity,
    /// Also write every matching to `<output>.matchings.json`.
    pub persist_matchings: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            k: 10,
            n_patients: 20,
            n_doctors: 20,
            mode: PreferenceMode::Full,
            list_length: None,
            mechanisms: vec![Mechanism::Ramhecs, Mechanism::Tomhecs],
            proposing_side: Side::Patient,
            measured_sides: vec![Side::Patient],
            presets: vec![Variation::None],
            deviating_party: Party::Requesting,
            repetitions: 100,
            seed: 0,
            output: None,
            format: OutputFormat::Csv,
            granularity: Granularity::Aggregate,
            persist_matchings: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::InvalidConfig(m.to_string()));
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1");
        }
        if self.mechanisms.is_empty() {
            return bad("at least one mechanism is required");
        }
        if self.measured_sides.is_empty() {
            return bad("at least one measured side is required");
        }
        if self.presets.is_empty() {
            return bad("at least one variation preset is required");
        }
        match (self.mode, self.list_length) {
            (PreferenceMode::Partial, None) => return bad("partial mode requires list_length"),
            (PreferenceMode::Full, Some(_)) => {
                return bad("list_length is only meaningful in partial mode")
            }
            (PreferenceMode::Partial, Some(len)) if len > self.n_patients.min(self.n_doctors) => {
                return bad("list_length exceeds a roster size");
            }
            _ => {}
        }
        Ok(())
    }

    pub fn list_length(&self) -> ListLength {
        match (self.mode, self.list_length) {
            (PreferenceMode::Partial, Some(len)) => ListLength::Partial(len),
            _ => ListLength::Full,
        }
    }

    pub fn deviating_side(&self) -> Side {
        self.deviating_party.side(self.proposing_side)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum CategoryScope {
    All,
    Index(usize),
}

impl fmt::Display for CategoryScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CategoryScope::All => f.write_str("all"),
            CategoryScope::Index(i) => write!(f, "{i}"),
        }
    }
}

impl From<CategoryScope> for String {
    fn from(c: CategoryScope) -> String {
        c.to_string()
    }
}

impl TryFrom<String> for CategoryScope {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        if s == "all" {
            return Ok(CategoryScope::All);
        }
        s.parse()
            .map(CategoryScope::Index)
            .map_err(|_| format!("bad category {s:?}"))
    }
}

/// One CSV line. Field order is the column order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultRow {
    pub rep: usize,
    pub category: CategoryScope,
    pub mechanism: Mechanism,
    pub preset: Variation,
    pub deviating_party: Party,
    pub measured_side: Side,
    pub eta: u64,
    pub zeta: u64,
    pub proposals: u64,
    pub rejections: u64,
    pub matched_count: usize,
}

pub const CSV_HEADER: &str =
    "rep,category,mechanism,preset,deviating_party,measured_side,eta,zeta,proposals,rejections,matched_count";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchingRecord {
    pub rep: usize,
    pub mechanism: Mechanism,
    pub preset: Variation,
    pub matching: Matching,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    /// Filled only when `persist_matchings` is set.
    pub matchings: Vec<MatchingRecord>,
}

/// Runs the grid. Rows come out ordered by repetition, mechanism, preset and
/// measured side, following the order of each list in the config.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput, HarnessError> {
    config.validate()?;
    let mut rows = Vec::new();
    let mut matchings = Vec::new();
    for rep in 0..config.repetitions {
        let r = rep as u64;
        let market_seed = rng::derive_seed(config.seed, &[label::EXPERIMENT, r, 0]);
        let market = generate_random_market(
            config.k,
            config.n_patients,
            config.n_doctors,
            config.list_length(),
            market_seed,
        )?;
        let reported: Vec<Cow<_>> = config
            .presets
            .iter()
            .map(|&preset| {
                if preset == Variation::None {
                    Cow::Borrowed(&market)
                } else {
                    let seed =
                        rng::derive_seed(config.seed, &[label::EXPERIMENT, r, 1, preset.index()]);
                    let spec = PerturbationSpec::preset(config.deviating_side(), preset, seed);
                    Cow::Owned(perturb_preferences(&market, &spec))
                }
            })
            .collect();
        let mechanism_seed = rng::derive_seed(config.seed, &[label::EXPERIMENT, r, 2]);
        for &mechanism in &config.mechanisms {
            for (&preset, lists) in config.presets.iter().zip(&reported) {
                let (matching, trace) =
                    run_mechanism(lists, mechanism, config.proposing_side, mechanism_seed)?;
                for &side in &config.measured_sides {
                    let report = evaluate(&market, &matching, side)?;
                    let row =
                        |category, eta, zeta, proposals, rejections, matched_count| ResultRow {
                            rep,
                            category,
                            mechanism,
                            preset,
                            deviating_party: config.deviating_party,
                            measured_side: side,
                            eta,
                            zeta,
                            proposals,
                            rejections,
                            matched_count,
                        };
                    match config.granularity {
                        Granularity::Aggregate => rows.push(row(
                            CategoryScope::All,
                            report.eta,
                            report.zeta,
                            trace.proposals,
                            trace.rejections,
                            matching.matched_count(),
                        )),
                        Granularity::PerCategory => {
                            for ((score, t), m) in report
                                .per_category
                                .iter()
                                .zip(&trace.per_category)
                                .zip(&matching.categories)
                            {
                                rows.push(row(
                                    CategoryScope::Index(score.category),
                                    score.eta,
                                    score.zeta,
                                    t.proposals,
                                    t.rejections,
                                    m.len(),
                                ));
                            }
                        }
                    }
                }
                if config.persist_matchings {
                    matchings.push(MatchingRecord {
                        rep,
                        mechanism,
                        preset,
                        matching,
                    });
                }
            }
        }
    }
    Ok(ExperimentOutput { rows, matchings })
}

pub fn emit<W: Write>(
    rows: &[ResultRow],
    format: OutputFormat,
    writer: W,
) -> Result<(), HarnessError> {
    match format {
        OutputFormat::Csv => {
            let mut w = csv::WriterBuilder::new()
                .has_headers(false)
                .from_writer(writer);
            w.write_record(CSV_HEADER.split(','))?;
            for row in rows {
                w.serialize(row)?;
            }
            w.flush().map_err(csv::Error::from)?;
        }
        OutputFormat::Json => {
            let mut writer = writer;
            serde_json::to_writer_pretty(&mut writer, rows)?;
            writer.write_all(b"\n").map_err(serde_json::Error::io)?;
        }
    }
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>, HarnessError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn with_io_path(path: &Path, e: HarnessError) -> HarnessError {
    let source = match e {
        HarnessError::Csv(c) if c.is_io_error() => match c.into_kind() {
            csv::ErrorKind::Io(io) => io,
            other => return HarnessError::InvalidConfig(format!("{other:?}")),
        },
        HarnessError::Json(j) if j.is_io() => io::Error::other(j),
        other => return other,
    };
    HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn emit_to_path(
    rows: &[ResultRow],
    format: OutputFormat,
    path: &Path,
) -> Result<(), HarnessError> {
    emit(rows, format, create(path)?).map_err(|e| with_io_path(path, e))
}

/// Sidecar path for persisted matchings: `<output>.matchings.json`.
pub fn matchings_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".matchings.json");
    PathBuf::from(s)
}

pub fn write_matchings(records: &[MatchingRecord], path: &Path) -> Result<(), HarnessError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, records).map_err(|e| with_io_path(path, e.into()))?;
    w.write_all(b"\n")
        .and_then(|_| w.flush())
        .map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub mechanism: Mechanism,
    pub preset: Variation,
    pub measured_side: Side,
    pub count: usize,
    pub eta_mean: f64,
    pub eta_std: f64,
    pub zeta_mean: f64,
    pub zeta_std: f64,
}

impl SummaryRow {
    pub fn eta_std_error(&self) -> f64 {
        self.eta_std / (self.count as f64).sqrt()
    }

    pub fn zeta_std_error(&self) -> f64 {
        self.zeta_std / (self.count as f64).sqrt()
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

type GroupKey = (Mechanism, Variation, Side);

/// Mean and sample standard deviation of eta and zeta per (mechanism, preset, side).
pub fn summarize(rows: &[ResultRow]) -> Result<Vec<SummaryRow>, HarnessError> {
    if rows.is_empty() {
        return Err(HarnessError::EmptyRows);
    }
    let mut groups: BTreeMap<GroupKey, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in rows {
        let g = groups
            .entry((r.mechanism, r.preset, r.measured_side))
            .or_default();
        g.0.push(r.eta as f64);
        g.1.push(r.zeta as f64);
    }
    Ok(groups
        .into_iter()
        .map(|((mechanism, preset, measured_side), (eta, zeta))| {
            let (eta_mean, eta_std) = mean_std(&eta);
            let (zeta_mean, zeta_std) = mean_std(&zeta);
            SummaryRow {
                mechanism,
                preset,
                measured_side,
                count: eta.len(),
                eta_mean,
                eta_std,
                zeta_mean,
                zeta_std,
            }
        })
        .collect())
}

/// Runs the experiment and writes its rows (and matchings, if asked) to
/// `config.output`.
pub fn run_to_files(config: &ExperimentConfig) -> Result<ExperimentOutput, HarnessError> {
    let output = run_experiment(config)?;
    let path = config
        .output
        .as_deref()
        .ok_or_else(|| HarnessError::InvalidConfig("no output path".into()))?;
    emit_to_path(&output.rows, config.format, path)?;
    if config.persist_matchings {
        write_matchings(&output.matchings, &matchings_path(path))?;
    }
    Ok(output)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanisms::tomhecs;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            k: 2,
            n_patients: 5,
            n_doctors: 5,
            repetitions: 3,
            seed: 11,
            ..Default::default()
        }
    }

    #[test]
    fn config_validation() {
        assert!(small().validate().is_ok());
        for broken in [
            ExperimentConfig {
                repetitions: 0,
                ..small()
            },
            ExperimentConfig {
                mechanisms: vec![],
                ..small()
            },
            ExperimentConfig {
                measured_sides: vec![],
                ..small()
            },
            ExperimentConfig {
                presets: vec![],
                ..small()
            },
            ExperimentConfig {
                mode: PreferenceMode::Partial,
                ..small()
            },
            ExperimentConfig {
                list_length: Some(2),
                ..small()
            },
            ExperimentConfig {
                mode: PreferenceMode::Partial,
                list_length: Some(6),
                ..small()
            },
        ] {
            assert!(
                matches!(run_experiment(&broken), Err(HarnessError::InvalidConfig(_))),
                "{broken:?}"
            );
        }
    }

    #[test]
    fn single_row_matches_direct_metric_calls() {
        let config = ExperimentConfig {
            k: 1,
            mechanisms: vec![Mechanism::Tomhecs],
            repetitions: 1,
            ..small()
        };
        let out = run_experiment(&config).unwrap();
        assert_eq!(out.rows.len(), 1);
        let market = generate_random_market(
            1,
            5,
            5,
            ListLength::Full,
            rng::derive_seed(11, &[label::EXPERIMENT, 0, 0]),
        )
        .unwrap();
        let (matching, trace) = tomhecs(&market, Side::Patient).unwrap();
        let report = evaluate(&market, &matching, Side::Patient).unwrap();
        let row = &out.rows[0];
        assert_eq!((row.eta, row.zeta), (report.eta, report.zeta));
        assert_eq!(
            (row.proposals, row.rejections),
            (trace.proposals, trace.rejections)
        );
        assert_eq!(row.matched_count, 5);
    }

    #[test]
    fn row_order_and_count() {
        let config = ExperimentConfig {
            presets: Variation::ALL.to_vec(),
            measured_sides: vec![Side::Patient, Side::Doctor],
            ..small()
        };
        let rows = run_experiment(&config).unwrap().rows;
        assert_eq!(rows.len(), 3 * 2 * 4 * 2);
        let keys: Vec<_> = rows
            .iter()
            .map(|r| (r.rep, r.mechanism, r.preset, r.measured_side))
            .collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }

    #[test]
    fn per_category_rows_sum_to_aggregate() {
        let agg = run_experiment(&small()).unwrap().rows;
        let per = run_experiment(&ExperimentConfig {
            granularity: Granularity::PerCategory,
            ..small()
        })
        .unwrap()
        .rows;
        assert_eq!(per.len(), agg.len() * 2);
        for (a, chunk) in agg.iter().zip(per.chunks(2)) {
            assert_eq!(a.eta, chunk.iter().map(|r| r.eta).sum::<u64>());
            assert_eq!(a.zeta, chunk.iter().map(|r| r.zeta).sum::<u64>());
            assert_eq!(a.proposals, chunk.iter().map(|r| r.proposals).sum::<u64>());
            assert_eq!(chunk[1].category, CategoryScope::Index(1));
        }
    }

    #[test]
    fn csv_has_header_and_one_line_per_row() {
        let rows: Vec<ResultRow> = run_experiment(&small())
            .unwrap()
            .rows
            .into_iter()
            .take(3)
            .collect();
        let mut buf = Vec::new();
        emit(&rows, OutputFormat::Csv, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], CSV_HEADER);
        assert!(
            lines[1].starts_with("0,all,ramhecs,none,requesting,patient,"),
            "{}",
            lines[1]
        );
    }

    #[test]
    fn json_rows_round_trip() {
        let rows = run_experiment(&ExperimentConfig {
            granularity: Granularity::PerCategory,
            ..small()
        })
        .unwrap()
        .rows;
        let mut buf = Vec::new();
        emit(&rows, OutputFormat::Json, &mut buf).unwrap();
        let back: Vec<ResultRow> = serde_json::from_slice(&buf).unwrap();
        assert_eq!(back, rows);
    }

    #[test]
    fn summary_groups() {
        let rows = run_experiment(&ExperimentConfig {
            presets: vec![Variation::None, Variation::Large],
            ..small()
        })
        .unwrap()
        .rows;
        let summary = summarize(&rows).unwrap();
        assert_eq!(summary.len(), 4);
        assert!(summary.iter().all(|s| s.count == 3));
        assert!(matches!(summarize(&[]), Err(HarnessError::EmptyRows)));
    }

    #[test]
    fn unwritable_path_is_an_io_error() {
        let rows = run_experiment(&small()).unwrap().rows;
        let err = emit_to_path(
            &rows,
            OutputFormat::Csv,
            Path::new("/nonexistent-dir/x/out.csv"),
        )
        .unwrap_err();
        assert!(err.is_io(), "{err:?}");
    }
}
