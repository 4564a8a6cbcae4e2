use std::collections::BTreeSet;

use al_lab_core::acquisition::{select, AcquisitionContext};
use al_lab_core::data::{gen_blobs, load_dataset, save_dataset, BlobParams, Dataset, Matrix, Provenance, Split};
use al_lab_core::engine::ActiveLearningRun;
use al_lab_core::engine::{run_cycle, SimulatedOracle};
use al_lab_core::learner::{train, TrainingView};
use al_lab_core::pool::{fraction_count, PoolState};
use al_lab_core::seed::rng_from_seed;
use al_lab_core::{AlConfig, ClassId, LearnerConfig, OracleToken, PredictionHistory, Strategy};
use proptest::prelude::*;

fn small_blobs(classes: usize, seed: u64) -> Dataset {
    gen_blobs(&BlobParams {
        classes,
        per_class: 25,
        dims: 3,
        spread: 1.0,
        overlap: 0.5,
        seed,
    })
    .unwrap()
    .normalize()
}

fn strategy() -> impl proptest::strategy::Strategy<Value = Strategy> {
    proptest::sample::select(Strategy::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn selections_are_exact_and_top_k_consistent(
        classes in 2usize..4,
        data_seed in 0u64..1000,
        fraction in 0.1f64..0.6,
        b_frac in 0.01f64..1.0,
        which in strategy(),
    ) {
        let token = OracleToken::ground_truth();
        let ds = small_blobs(classes, data_seed);
        let pool = PoolState::init(&ds.split().train, fraction, data_seed).unwrap();
        let labels: Vec<ClassId> = pool.labeled().iter().map(|&i| ds.reveal(i, &token)).collect();
        let cfg = LearnerConfig::new(vec![3, 8, classes]).with_epochs(6).with_dropout(0.2).with_seed(data_seed);
        let mut history = PredictionHistory::new(pool.unlabeled().to_vec(), classes);
        let view = TrainingView { features: ds.features(), indices: pool.labeled(), labels: &labels };
        let model = train(&cfg, view, pool.unlabeled(), &mut history).unwrap();
        let b = ((b_frac * pool.unlabeled().len() as f64) as usize).max(1);

        let mut rng = rng_from_seed(data_seed);
        let mut ctx = AcquisitionContext {
            model: &model,
            dataset: &ds,
            pool: &pool,
            history: Some(&history),
            rng: &mut rng,
            mc_passes: 4,
            ground_truth: Some(&token),
        };
        let result = select(which, &mut ctx, b).unwrap();
        let chosen: BTreeSet<usize> = result.chosen.iter().copied().collect();
        prop_assert_eq!(result.chosen.len(), b);
        prop_assert_eq!(chosen.len(), b);
        prop_assert!(chosen.iter().all(|&i| pool.is_unlabeled(i)));
        if which.is_score_based() {
            let table = result.scores.as_ref().unwrap();
            prop_assert_eq!(table.len(), pool.unlabeled().len());
            let low = table.iter().filter(|(i, _)| chosen.contains(i)).map(|t| t.1).fold(f64::INFINITY, f64::min);
            let high = table.iter().filter(|(i, _)| !chosen.contains(i)).map(|t| t.1).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(low >= high, "chosen min {} < unchosen max {}", low, high);
        }
    }

    #[test]
    fn pool_is_conserved_and_grows_by_budget(
        seed in 0u64..1000,
        cycles in 1usize..4,
        which in strategy(),
    ) {
        let token = OracleToken::ground_truth();
        let ds = small_blobs(3, seed);
        let mut config = AlConfig::new(LearnerConfig::new(vec![3, 6, 3]).with_epochs(4).with_dropout(0.1));
        config.cycles = cycles;
        config.strategy = which;
        config.mc_passes = 3;
        let mut run = ActiveLearningRun::new(config, &ds, seed, &token).unwrap();
        let budget = run.budget();
        let train: BTreeSet<usize> = ds.split().train.iter().copied().collect();
        let mut oracle = SimulatedOracle { dataset: &ds, token: &token };
        let mut cycle = 0;
        while !run.is_finished() {
            let pool = run.pool();
            prop_assert_eq!(pool.labeled().len(), budget.labeled_after(cycle));
            prop_assert_eq!(pool.labeled().len() + pool.unlabeled().len(), train.len());
            let labeled: BTreeSet<usize> = pool.labeled().iter().copied().collect();
            let unlabeled: BTreeSet<usize> = pool.unlabeled().iter().copied().collect();
            prop_assert!(labeled.is_disjoint(&unlabeled));
            prop_assert!(labeled.union(&unlabeled).eq(train.iter()));
            let report = run_cycle(&mut run, &ds, &mut oracle, Some(&token)).unwrap().unwrap();
            prop_assert_eq!(report.cycle, cycle);
            prop_assert_eq!(report.labeled_count, budget.labeled_after(cycle));
            // Snapshots only ever cover the training pool.
            let tracked = run.history().unwrap().sample_ids();
            prop_assert!(tracked.iter().all(|i| train.contains(i)));
            cycle += 1;
        }
        prop_assert_eq!(run.reports().len(), cycles + 1);
        prop_assert_eq!(run.pool().labeled().len(), budget.total());
    }

    #[test]
    fn fraction_counts_floor(fraction in 0.0f64..1.0, n in 0usize..100_000) {
        let k = fraction_count(fraction, n);
        prop_assert!(k <= n);
        prop_assert!(k as f64 <= fraction * n as f64 + 1e-6);
        prop_assert!((k + 1) as f64 > fraction * n as f64 - 1e-6);
    }

    #[test]
    fn dataset_csv_round_trips_bit_exactly(
        rows in prop::collection::vec((prop::collection::vec(-1e6f64..1e6, 3), 0usize..3), 3..40),
    ) {
        let mut rows = rows;
        for (i, row) in rows.iter_mut().take(3).enumerate() {
            row.1 = i;
        }
        let features = Matrix::from_rows(&rows.iter().map(|r| r.0.clone()).collect::<Vec<_>>()).unwrap();
        let labels: Vec<ClassId> = rows.iter().map(|r| r.1).collect();
        let n = labels.len();
        let ds = Dataset::new("prop", features, labels, 3, Split::seeded(n, 0.2, 1), Provenance::Csv { sha256: String::new() }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        save_dataset(&ds, &path).unwrap();
        let back = load_dataset(&path).unwrap();
        prop_assert_eq!(back.features().as_slice(), ds.features().as_slice());
        prop_assert_eq!(back.split(), ds.split());
        let token = OracleToken::ground_truth();
        prop_assert!((0..n).all(|i| back.reveal(i, &token) == ds.reveal(i, &token)));
        let first = std::fs::read(&path).unwrap();
        save_dataset(&back, &path).unwrap();
        prop_assert_eq!(std::fs::read(&path).unwrap(), first);
    }
}
