use qram_repair::harness::{
    emit_results, run_monte_carlo, run_monte_carlo_with, Algorithm, ExperimentConfig, MonteCarloResult,
    OutputFormat,
};

fn config(workers: usize) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(
        vec![5, 7],
        vec![0.02, 0.08],
        120,
        77,
        vec![Algorithm::Stats, Algorithm::Relabel, Algorithm::Iterative, Algorithm::FlagminLastLayer],
    );
    c.workers = workers;
    c
}

fn strip_runtime(mut r: MonteCarloResult) -> MonteCarloResult {
    r.config.workers = 0;
    for p in &mut r.points {
        p.mean_runtime_s = None;
    }
    r
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let one = run_monte_carlo(&config(1)).unwrap();
    let three = run_monte_carlo(&config(3)).unwrap();
    let a = serde_json::to_string(&strip_runtime(one)).unwrap();
    let b = serde_json::to_string(&strip_runtime(three)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn records_are_in_shot_order() {
    let mut seen = Vec::new();
    run_monte_carlo_with(&config(2), |_, records| {
        seen.push(records.iter().map(|r| r.seed).collect::<Vec<_>>());
    })
    .unwrap();
    let mut again = Vec::new();
    run_monte_carlo_with(&config(1), |_, records| {
        again.push(records.iter().map(|r| r.seed).collect::<Vec<_>>());
    })
    .unwrap();
    assert_eq!(seen, again);
    assert_eq!(seen.len(), 4);
}

#[test]
fn summaries_are_consistent() {
    let res = run_monte_carlo(&config(1)).unwrap();
    for p in &res.points {
        assert_eq!(p.shots, 120);
        assert!((0.0..=1.0).contains(&p.unrepairable_frac));
        let hist_total: u64 = p.flag_hist.iter().sum();
        assert_eq!(hist_total, p.repairable_shots);
        assert_eq!(p.relabel_fail.len(), (p.n - 1) as usize);
        let fails: Vec<f64> = p.relabel_fail.values().copied().collect();
        assert!(fails.windows(2).all(|w| w[0] <= w[1]));
        assert!(p.mean_rank_lastlayer.unwrap() <= p.mean_flags_lastlayer.unwrap());
        assert_eq!(p.mean_mask_flags_lastlayer, Some((p.n - 2) as f64));
    }
}

#[test]
fn json_and_csv_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = config(1);
    c.shots = 20;
    let res = run_monte_carlo(&c).unwrap();
    let j = dir.path().join("out.json");
    emit_results(&res, &j, OutputFormat::Json).unwrap();
    let back: MonteCarloResult = serde_json::from_str(&std::fs::read_to_string(&j).unwrap()).unwrap();
    assert_eq!(back.points.len(), 4);
    let csv = dir.path().join("out.csv");
    emit_results(&res, &csv, OutputFormat::Csv).unwrap();
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 5);
}
