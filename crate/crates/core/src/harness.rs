//! Seeded Monte Carlo experiments over random protected trees.
//!
//! Every shot derives its own seed from the master seed, the depth, the
//! failure rate and the shot index, so records do not depend on how shots are
//! scheduled across worker threads.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics;
use crate::error::{invalid, Error, Result};
use crate::flags::{basis_reduction, flag_qubit_minimization, AssignerKind};
use crate::iterative::{choose_repairable_side, iterative_repair};
use crate::relabel::relabel_repair;
use crate::rng;
use crate::tree::{QramTree, RouterId, MAX_DEPTH};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Stats,
    Relabel,
    Iterative,
    FlagminLastLayer,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputSpec {
    pub path: PathBuf,
    #[serde(default)]
    pub format: OutputFormat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n_values: Vec<u32>,
    pub epsilons: Vec<f64>,
    pub shots: u64,
    pub master_seed: u64,
    pub algorithms: Vec<Algorithm>,
    /// Worker threads; 0 picks the rayon default.
    #[serde(default)]
    pub workers: usize,
    /// Assignment procedure used inside iterative repair.
    #[serde(default = "default_assigner")]
    pub iterative_assigner: AssignerKind,
    #[serde(default)]
    pub output: Option<OutputSpec>,
}

fn default_assigner() -> AssignerKind {
    AssignerKind::Flagmin
}

impl ExperimentConfig {
    pub fn new(n_values: Vec<u32>, epsilons: Vec<f64>, shots: u64, master_seed: u64, algorithms: Vec<Algorithm>) -> Self {
        Self {
            n_values,
            epsilons,
            shots,
            master_seed,
            algorithms,
            workers: 0,
            iterative_assigner: default_assigner(),
            output: None,
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(s)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_values.is_empty() || self.epsilons.is_empty() {
            return Err(invalid("config needs at least one depth and one epsilon"));
        }
        if let Some(n) = self.n_values.iter().find(|&&n| !(3..=MAX_DEPTH).contains(&n)) {
            return Err(invalid(format!("depth {n} outside [3, {MAX_DEPTH}]")));
        }
        if let Some(e) = self.epsilons.iter().find(|e| !(0.0..=1.0).contains(*e)) {
            return Err(invalid(format!("epsilon {e} outside [0, 1]")));
        }
        Ok(())
    }

    fn runs(&self, a: Algorithm) -> bool {
        self.algorithms.contains(&a)
    }
}

/// Outcome of one random tree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShotRecord {
    pub n: u32,
    pub epsilon: f64,
    pub seed: u64,
    pub faulty_addresses: u64,
    pub repairable: bool,
    /// Entry `m - 2` tells whether relabel repair succeeds at depth `m`.
    pub relabel_success_by_m: Vec<bool>,
    pub iterative_flags: Option<usize>,
    pub iterative_failed_layer: Option<u32>,
    /// Greedy flag count at the last layer before basis reduction.
    pub lastlayer_flags: Option<usize>,
    /// Rank of the last-layer patterns actually used.
    pub lastlayer_rank: Option<usize>,
    pub lastlayer_mask_flags: Option<usize>,
    /// Seconds spent in last-layer minimization.
    pub lastlayer_runtime: f64,
}

pub fn shot_seed(master_seed: u64, n: u32, epsilon: f64, shot: u64) -> u64 {
    rng::derive(master_seed, &[u64::from(n), epsilon.to_bits(), shot])
}

/// Faulty routers of the repairable half and spare routers of the other half
/// at the last layer.
pub fn last_layer_lists(tree: &QramTree) -> (Vec<RouterId>, Vec<RouterId>) {
    let acc = tree.accessibility();
    let side = choose_repairable_side(tree);
    let n = tree.depth();
    let mut faulty = Vec::new();
    let mut available = Vec::new();
    for r in tree.layer_routers(n) {
        match (r.side() == Some(side), acc.is_accessible(r)) {
            (true, false) => faulty.push(r),
            (false, true) => available.push(r),
            _ => {}
        }
    }
    (faulty, available)
}

pub fn run_shot(config: &ExperimentConfig, n: u32, epsilon: f64, shot: u64) -> Result<ShotRecord> {
    let seed = shot_seed(config.master_seed, n, epsilon, shot);
    let tree = QramTree::generate(n, epsilon, seed, true)?;
    let accessible = tree.accessible_address_count();
    let repairable = accessible >= 1u64 << (n - 1);
    let mut record = ShotRecord {
        n,
        epsilon,
        seed,
        faulty_addresses: (1u64 << n) - accessible,
        repairable,
        relabel_success_by_m: Vec::new(),
        iterative_flags: None,
        iterative_failed_layer: None,
        lastlayer_flags: None,
        lastlayer_rank: None,
        lastlayer_mask_flags: None,
        lastlayer_runtime: 0.0,
    };
    if !repairable {
        return Ok(record);
    }
    if config.runs(Algorithm::Relabel) {
        record.relabel_success_by_m = (2..=n).map(|m| relabel_repair(&tree, m).is_ok()).collect();
    }
    if config.runs(Algorithm::Iterative) {
        match iterative_repair(&tree, &config.iterative_assigner) {
            Ok(out) => record.iterative_flags = Some(out.max_flags()),
            Err(Error::IterativeFailure { layer, .. }) => record.iterative_failed_layer = Some(layer),
            Err(e) => return Err(e),
        }
    }
    if config.runs(Algorithm::FlagminLastLayer) {
        let (faulty, available) = last_layer_lists(&tree);
        let start = Instant::now();
        let res = flag_qubit_minimization(n, &faulty, &available)?;
        record.lastlayer_runtime = start.elapsed().as_secs_f64();
        record.lastlayer_flags = Some(res.flag_count);
        record.lastlayer_rank = Some(basis_reduction(&res).flag_count);
        record.lastlayer_mask_flags = Some((n - 2) as usize);
    }
    Ok(record)
}

/// Run every shot of one grid point, in shot order.
pub fn run_point(config: &ExperimentConfig, n: u32, epsilon: f64) -> Result<Vec<ShotRecord>> {
    (0..config.shots)
        .into_par_iter()
        .map(|s| run_shot(config, n, epsilon, s))
        .collect()
}

/// Summary of one `(n, epsilon)` grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub n: u32,
    pub epsilon: f64,
    pub shots: u64,
    pub mean_faulty_frac: f64,
    pub se_faulty_frac: f64,
    pub unrepairable_frac: f64,
    pub se_unrepairable: f64,
    pub repairable_shots: u64,
    /// Relabel failure rate at depth `m` among repairable shots, keyed by `m`.
    pub relabel_fail: BTreeMap<u32, f64>,
    pub iterative_failures: u64,
    pub mean_flags_iterative: Option<f64>,
    pub se_flags_iterative: Option<f64>,
    pub mean_flags_lastlayer: Option<f64>,
    pub se_flags_lastlayer: Option<f64>,
    pub mean_rank_lastlayer: Option<f64>,
    pub mean_mask_flags_lastlayer: Option<f64>,
    /// `flag_hist[i]`: shots whose greedy last-layer flag count is `i`.
    pub flag_hist: Vec<u64>,
    /// Shots whose greedy last-layer count exceeds `n - 3`.
    pub lastlayer_above_n_minus_3: u64,
    pub mean_runtime_s: Option<f64>,
    /// Analytic protected values, present when `stats` is selected.
    pub analytic_faulty_frac: Option<f64>,
    pub analytic_unrepairable: Option<f64>,
}

/// Mean and standard error of the mean.
pub fn mean_se(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    if values.len() < 2 {
        return Some((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    Some((mean, (var / k).sqrt()))
}

pub fn summarize(config: &ExperimentConfig, n: u32, epsilon: f64, records: &[ShotRecord]) -> Result<PointSummary> {
    let total = records.len() as f64;
    let frac: Vec<f64> = records
        .iter()
        .map(|r| r.faulty_addresses as f64 / (1u64 << n) as f64)
        .collect();
    let (mean_faulty_frac, se_faulty_frac) = mean_se(&frac).unwrap_or((f64::NAN, f64::NAN));
    let repairable: Vec<&ShotRecord> = records.iter().filter(|r| r.repairable).collect();
    let unrep = 1.0 - repairable.len() as f64 / total;
    let se_unrepairable = (unrep * (1.0 - unrep) / total).sqrt();

    let mut relabel_fail = BTreeMap::new();
    if config.runs(Algorithm::Relabel) && !repairable.is_empty() {
        for m in 2..=n {
            let fails = repairable
                .iter()
                .filter(|r| !r.relabel_success_by_m[(m - 2) as usize])
                .count();
            relabel_fail.insert(m, fails as f64 / repairable.len() as f64);
        }
    }

    let it: Vec<f64> = repairable
        .iter()
        .filter_map(|r| r.iterative_flags.map(|f| f as f64))
        .collect();
    let last: Vec<f64> = repairable
        .iter()
        .filter_map(|r| r.lastlayer_flags.map(|f| f as f64))
        .collect();
    let rank: Vec<f64> = repairable
        .iter()
        .filter_map(|r| r.lastlayer_rank.map(|f| f as f64))
        .collect();
    let mask: Vec<f64> = repairable
        .iter()
        .filter_map(|r| r.lastlayer_mask_flags.map(|f| f as f64))
        .collect();
    let times: Vec<f64> = repairable
        .iter()
        .filter(|r| r.lastlayer_flags.is_some())
        .map(|r| r.lastlayer_runtime)
        .collect();

    let mut flag_hist = Vec::new();
    if config.runs(Algorithm::FlagminLastLayer) {
        flag_hist = vec![0u64; n as usize];
        for r in &repairable {
            if let Some(f) = r.lastlayer_flags {
                flag_hist[f] += 1;
            }
        }
    }
    let lastlayer_above_n_minus_3 = repairable
        .iter()
        .filter(|r| r.lastlayer_flags.is_some_and(|f| f > (n - 3) as usize))
        .count() as u64;

    let stats = config.runs(Algorithm::Stats);
    Ok(PointSummary {
        n,
        epsilon,
        shots: records.len() as u64,
        mean_faulty_frac,
        se_faulty_frac,
        unrepairable_frac: unrep,
        se_unrepairable,
        repairable_shots: repairable.len() as u64,
        relabel_fail,
        iterative_failures: repairable
            .iter()
            .filter(|r| r.iterative_failed_layer.is_some())
            .count() as u64,
        mean_flags_iterative: mean_se(&it).map(|m| m.0),
        se_flags_iterative: mean_se(&it).map(|m| m.1),
        mean_flags_lastlayer: mean_se(&last).map(|m| m.0),
        se_flags_lastlayer: mean_se(&last).map(|m| m.1),
        mean_rank_lastlayer: mean_se(&rank).map(|m| m.0),
        mean_mask_flags_lastlayer: mean_se(&mask).map(|m| m.0),
        flag_hist,
        lastlayer_above_n_minus_3,
        mean_runtime_s: mean_se(&times).map(|m| m.0),
        analytic_faulty_frac: if stats { Some(analytics::faulty_fraction_protected(n, epsilon)?) } else { None },
        analytic_unrepairable: if stats && n <= analytics::MAX_DISTRIBUTION_DEPTH {
            Some(analytics::unrepairable_probability_protected(n, epsilon)?)
        } else {
            None
        },
    })
}

/// Result of a full sweep.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MonteCarloResult {
    pub config: ExperimentConfig,
    pub points: Vec<PointSummary>,
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| invalid(format!("cannot start worker pool: {e}")))
}

/// Run the sweep, calling `on_point` with each point's raw records.
pub fn run_monte_carlo_with<F>(config: &ExperimentConfig, mut on_point: F) -> Result<MonteCarloResult>
where
    F: FnMut(&PointSummary, &[ShotRecord]),
{
    config.validate()?;
    let pool = pool(config.workers)?;
    let mut points = Vec::new();
    for &n in &config.n_values {
        for &eps in &config.epsilons {
            let records = pool.install(|| run_point(config, n, eps))?;
            let summary = summarize(config, n, eps, &records)?;
            on_point(&summary, &records);
            points.push(summary);
        }
    }
    Ok(MonteCarloResult {
        config: config.clone(),
        points,
    })
}

pub fn run_monte_carlo(config: &ExperimentConfig) -> Result<MonteCarloResult> {
    run_monte_carlo_with(config, |_, _| {})
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// CSV header for a sweep over `n_values`.
pub fn csv_header(result: &MonteCarloResult) -> Vec<String> {
    let max_n = result.config.n_values.iter().copied().max().unwrap_or(0);
    let mut h: Vec<String> = [
        "n",
        "epsilon",
        "shots",
        "mean_faulty_frac",
        "se_faulty_frac",
        "unrepairable_frac",
        "se_unrepairable",
    ]
    .map(String::from)
    .to_vec();
    h.extend((2..=max_n).map(|m| format!("relabel_fail_m{m}")));
    h.extend(
        [
            "mean_flags_iterative",
            "se_flags_iterative",
            "mean_flags_lastlayer",
            "se_flags_lastlayer",
        ]
        .map(String::from),
    );
    h.extend((0..max_n).map(|i| format!("flag_hist_{i}")));
    h.push("mean_runtime_s".into());
    h
}

pub fn write_csv<W: Write>(result: &MonteCarloResult, out: W) -> Result<()> {
    let max_n = result.config.n_values.iter().copied().max().unwrap_or(0);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(csv_header(result))?;
    for p in &result.points {
        let mut row = vec![
            p.n.to_string(),
            p.epsilon.to_string(),
            p.shots.to_string(),
            p.mean_faulty_frac.to_string(),
            p.se_faulty_frac.to_string(),
            p.unrepairable_frac.to_string(),
            p.se_unrepairable.to_string(),
        ];
        row.extend((2..=max_n).map(|m| opt(p.relabel_fail.get(&m).copied())));
        row.extend([
            opt(p.mean_flags_iterative),
            opt(p.se_flags_iterative),
            opt(p.mean_flags_lastlayer),
            opt(p.se_flags_lastlayer),
        ]);
        row.extend((0..max_n as usize).map(|i| p.flag_hist.get(i).map(|c| c.to_string()).unwrap_or_default()));
        row.push(opt(p.mean_runtime_s));
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<W: Write>(result: &MonteCarloResult, mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, result)?;
    writeln!(out)?;
    Ok(())
}

pub fn emit_results(result: &MonteCarloResult, path: &Path, format: OutputFormat) -> Result<()> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    match format {
        OutputFormat::Csv => write_csv(result, file),
        OutputFormat::Json => write_json(result, file),
    }
}

/// Least-squares fit of `log t = a + b log N` with `N = 2^n`. Returns
/// `(a, b)`.
pub fn runtime_scaling_fit(points: &[(u32, f64)]) -> Result<(f64, f64)> {
    let mut by_n: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    for &(n, t) in points {
        if t > 0.0 && t.is_finite() {
            by_n.entry(n).or_default().push(t);
        }
    }
    if by_n.len() < 4 {
        return Err(Error::InsufficientPoints(by_n.len()));
    }
    let xy: Vec<(f64, f64)> = by_n
        .iter()
        .map(|(&n, ts)| {
            let mean = ts.iter().sum::<f64>() / ts.len() as f64;
            (f64::from(n) * std::f64::consts::LN_2, mean.ln())
        })
        .collect();
    let k = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / k;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = xy.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xy.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    let b = sxy / sxx;
    Ok((my - b * mx, b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(algorithms: Vec<Algorithm>) -> ExperimentConfig {
        ExperimentConfig::new(vec![5, 6], vec![0.04], 60, 11, algorithms)
    }

    #[test]
    fn shots_are_reproducible() {
        let c = config(vec![Algorithm::Relabel, Algorithm::Iterative, Algorithm::FlagminLastLayer]);
        let a = run_shot(&c, 6, 0.04, 3).unwrap();
        let b = run_shot(&c, 6, 0.04, 3).unwrap();
        assert_eq!(
            (a.seed, a.faulty_addresses, &a.relabel_success_by_m, a.lastlayer_flags),
            (b.seed, b.faulty_addresses, &b.relabel_success_by_m, b.lastlayer_flags)
        );
        assert_ne!(shot_seed(11, 6, 0.04, 3), shot_seed(11, 6, 0.04, 4));
    }

    #[test]
    fn csv_columns() {
        let mut c = config(vec![Algorithm::Stats, Algorithm::Relabel, Algorithm::FlagminLastLayer]);
        c.workers = 1;
        let res = run_monte_carlo(&c).unwrap();
        let mut buf = Vec::new();
        write_csv(&res, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let header = text.lines().next().unwrap();
        assert!(header.starts_with("n,epsilon,shots,mean_faulty_frac,se_faulty_frac,unrepairable_frac,se_unrepairable,relabel_fail_m2,"));
        assert!(header.ends_with("flag_hist_5,mean_runtime_s"));
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn fit_recovers_exponent() {
        let pts: Vec<(u32, f64)> = (7..=13).map(|n| (n, 3e-9 * 2f64.powi(n as i32).powf(2.0))).collect();
        let (_, b) = runtime_scaling_fit(&pts).unwrap();
        assert!((b - 2.0).abs() < 1e-9);
        assert!(matches!(runtime_scaling_fit(&pts[..3]), Err(Error::InsufficientPoints(3))));
    }

    #[test]
    fn config_json() {
        let c = ExperimentConfig::from_json(
            r#"{"n_values":[5],"epsilons":[0.01],"shots":10,"master_seed":1,"algorithms":["stats","flagmin_last_layer"]}"#,
        )
        .unwrap();
        assert_eq!(c.algorithms, vec![Algorithm::Stats, Algorithm::FlagminLastLayer]);
        assert!(ExperimentConfig::from_json(
            r#"{"n_values":[2],"epsilons":[0.01],"shots":10,"master_seed":1,"algorithms":[]}"#
        )
        .is_err());
    }
}
