//! Multi-seed experiments, strategy comparisons and report persistence.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use super::run::{run_seed, ScoreRow, SeedRun};
use super::{AlConfig, CycleReport, EngineError};
use crate::acquisition::Strategy;
use crate::data::{Dataset, OracleToken};

#[derive(Debug)]
pub struct SeedOutcome {
    pub seed: u64,
    pub result: Result<SeedRun, EngineError>,
}

#[derive(Debug)]
pub struct StrategyOutcome {
    pub strategy: Strategy,
    pub seeds: Vec<SeedOutcome>,
}

impl StrategyOutcome {
    /// Reports of the seeds that succeeded, in seed order.
    pub fn reports(&self) -> impl Iterator<Item = &CycleReport> {
        self.seeds
            .iter()
            .filter_map(|s| s.result.as_ref().ok())
            .flat_map(|r| &r.reports)
    }
}

/// Runs every configured seed of `config.strategy`, in parallel.
///
/// A failing seed is reported in its own slot; siblings still run.
pub fn run_experiment(config: &AlConfig, dataset: &Dataset, token: &OracleToken) -> Vec<SeedOutcome> {
    compare(config, &[config.strategy], dataset, token)
        .pop()
        .map(|o| o.seeds)
        .unwrap_or_default()
}

/// Runs each strategy over the same seeds. Seeds fix the initial pool, so all
/// strategies start from identical labeled sets.
pub fn compare(
    config: &AlConfig,
    strategies: &[Strategy],
    dataset: &Dataset,
    token: &OracleToken,
) -> Vec<StrategyOutcome> {
    let jobs: Vec<(Strategy, u64)> = strategies
        .iter()
        .flat_map(|&s| config.seeds.iter().map(move |&seed| (s, seed)))
        .collect();
    let mut results: Vec<Option<Result<SeedRun, EngineError>>> = jobs
        .par_iter()
        .map(|&(strategy, seed)| {
            let mut cfg = config.clone();
            cfg.strategy = strategy;
            Some(
                cfg.check_strategy(strategy)
                    .map_err(EngineError::from)
                    .and_then(|_| run_seed(&cfg, dataset, seed, token)),
            )
        })
        .collect();
    let mut next = 0;
    strategies
        .iter()
        .map(|&strategy| StrategyOutcome {
            strategy,
            seeds: config
                .seeds
                .iter()
                .map(|&seed| {
                    let result = results[next].take().expect("one result per job");
                    next += 1;
                    SeedOutcome { seed, result }
                })
                .collect(),
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct AggregateRow {
    pub strategy: Strategy,
    pub cycle: usize,
    pub labeled_count: usize,
    pub mean_acc: f64,
    pub std_acc: f64,
    pub runs: usize,
}

/// Mean and sample standard deviation of test accuracy per (strategy, cycle).
///
/// Strategies keep their order of first appearance, cycles ascend; values are
/// summed in report order so persisted reports re-aggregate identically.
pub fn aggregate(reports: &[CycleReport]) -> Vec<AggregateRow> {
    let mut strategies: Vec<Strategy> = Vec::new();
    for r in reports {
        if !strategies.contains(&r.strategy) {
            strategies.push(r.strategy);
        }
    }
    let mut rows = Vec::new();
    for strategy in strategies {
        let mut cycles: Vec<usize> = reports
            .iter()
            .filter(|r| r.strategy == strategy)
            .map(|r| r.cycle)
            .collect();
        cycles.sort_unstable();
        cycles.dedup();
        for cycle in cycles {
            let group: Vec<&CycleReport> = reports
                .iter()
                .filter(|r| r.strategy == strategy && r.cycle == cycle)
                .collect();
            let n = group.len() as f64;
            let mean = group.iter().map(|r| r.test_accuracy).sum::<f64>() / n;
            let std = if group.len() > 1 {
                (group
                    .iter()
                    .map(|r| (r.test_accuracy - mean).powi(2))
                    .sum::<f64>()
                    / (n - 1.0))
                    .sqrt()
            } else {
                0.0
            };
            rows.push(AggregateRow {
                strategy,
                cycle,
                labeled_count: group[0].labeled_count,
                mean_acc: mean,
                std_acc: std,
                runs: group.len(),
            });
        }
    }
    rows
}

pub fn aggregate_csv(rows: &[AggregateRow]) -> String {
    let mut out = String::from("strategy,cycle,labeled_count,mean_acc,std_acc\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.strategy, r.cycle, r.labeled_count, r.mean_acc, r.std_acc
        )
        .expect("write to String");
    }
    out
}

pub fn reports_jsonl(reports: &[CycleReport]) -> String {
    reports
        .iter()
        .map(|r| serde_json::to_string(r).expect("report serializes") + "\n")
        .collect()
}

pub fn parse_reports_jsonl(text: &str) -> Result<Vec<CycleReport>, EngineError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| EngineError::Report(format!("line {}: {e}", i + 1)))
        })
        .collect()
}

pub fn scores_csv(rows: &[ScoreRow]) -> String {
    let mut out = String::from("sample_id,score,strategy,cycle\n");
    for r in rows {
        writeln!(out, "{},{},{},{}", r.sample_id, r.score, r.strategy, r.cycle)
            .expect("write to String");
    }
    out
}

/// Files written by [`write_outputs`].
pub const REPORTS_FILE: &str = "reports.jsonl";
pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const SCORES_DIR: &str = "scores";

/// Persists reports, the aggregate CSV and per-seed score dumps under `dir`.
///
/// Returns the error messages of failed seeds.
pub fn write_outputs(dir: &Path, outcomes: &[StrategyOutcome]) -> Result<Vec<String>, EngineError> {
    fs::create_dir_all(dir.join(SCORES_DIR))?;
    let reports: Vec<CycleReport> = outcomes.iter().flat_map(|o| o.reports().cloned()).collect();
    fs::write(dir.join(REPORTS_FILE), reports_jsonl(&reports))?;
    fs::write(dir.join(AGGREGATE_FILE), aggregate_csv(&aggregate(&reports)))?;
    let mut failures = Vec::new();
    for o in outcomes {
        for s in &o.seeds {
            match &s.result {
                Ok(run) if !run.scores.is_empty() => {
                    let file = dir.join(SCORES_DIR).join(format!("{}_seed{}.csv", o.strategy, s.seed));
                    fs::write(file, scores_csv(&run.scores))?;
                }
                Ok(_) => {}
                Err(e) => failures.push(format!("{} seed {}: {e}", o.strategy, s.seed)),
            }
        }
    }
    Ok(failures)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(strategy: Strategy, seed: u64, cycle: usize, acc: f64) -> CycleReport {
        CycleReport {
            strategy,
            seed,
            cycle,
            labeled_count: 10 + 5 * cycle,
            test_accuracy: acc,
            queried: Vec::new(),
            wall_time_seconds: 0.5,
        }
    }

    #[test]
    fn aggregate_mean_and_sample_std() {
        let reports = vec![
            report(Strategy::Random, 0, 0, 0.5),
            report(Strategy::Random, 1, 0, 0.7),
            report(Strategy::Random, 2, 0, 0.6),
            report(Strategy::Dispersion, 0, 0, 0.8),
        ];
        let rows = aggregate(&reports);
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].strategy, Strategy::Random);
        assert!((rows[0].mean_acc - 0.6).abs() < 1e-12);
        assert!((rows[0].std_acc - 0.1).abs() < 1e-12);
        assert_eq!(rows[1].mean_acc, 0.8);
        assert_eq!(rows[1].std_acc, 0.0);
        let csv = aggregate_csv(&rows);
        assert!(csv.starts_with("strategy,cycle,labeled_count,mean_acc,std_acc\nrandom,0,10,"));
    }

    #[test]
    fn jsonl_round_trip_reaggregates_identically() {
        let reports: Vec<CycleReport> = (0..3)
            .flat_map(|s| (0..5).map(move |c| report(Strategy::Margin, s, c, 0.1 * c as f64 + 0.01 * s as f64 + 1.0 / 3.0)))
            .collect();
        let text = reports_jsonl(&reports);
        let back = parse_reports_jsonl(&text).unwrap();
        assert_eq!(back, reports);
        assert_eq!(aggregate_csv(&aggregate(&back)), aggregate_csv(&aggregate(&reports)));
        assert!(parse_reports_jsonl("{\"nope\":1}\n").is_err());
    }
}
