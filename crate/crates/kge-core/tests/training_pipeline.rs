//! End-to-end training behavior on synthetic datasets.

use kge_core::data::{generate_synthetic, FilterIndex, Pattern, SyntheticSpec};
use kge_core::evaluation::{evaluate_model, evaluate_split, metrics_from_ranks, DEFAULT_HITS, RankResult};
use kge_core::training::{train_with_early_stop, LossKind, OptimizerKind, TrainConfig};
use kge_core::{ModelKind, ModelParams, Triple};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn mixed_dataset(entities: usize, count: usize, seed: u64) -> kge_core::Dataset {
    generate_synthetic(
        &SyntheticSpec {
            pattern: Pattern::Mixed,
            entities,
            count,
            fan: 3,
            split_fractions: (0.8, 0.1, 0.1),
        },
        seed,
    )
    .unwrap()
}

#[test]
fn training_lifts_validation_mrr_on_one_to_many_data() {
    let dataset = generate_synthetic(
        &SyntheticSpec {
            pattern: Pattern::OneToMany,
            entities: 100,
            count: 20,
            fan: 4,
            split_fractions: (0.75, 0.25, 0.0),
        },
        3,
    )
    .unwrap();
    let filter = FilterIndex::build(&dataset);

    let mut config = TrainConfig::for_kind(ModelKind::TransE);
    config.gamma = 4.0;
    config.lr = 0.01;
    config.eta = 4;
    config.max_epochs = 200;
    config.batches_per_epoch = 10;
    config.valid_every = 50;
    config.patience = 100;
    config.seed = 1;

    let params = ModelParams::init(ModelKind::TransE, 100, 1, 32, 1).unwrap();
    let untrained = evaluate_split(&params, &dataset.valid, &filter, 100).unwrap();
    let (trained, curve) = train_with_early_stop(params, &dataset, &config).unwrap();
    let after = evaluate_split(&trained, &dataset.valid, &filter, 100).unwrap();
    assert!(
        after.mrr > untrained.mrr,
        "validation MRR did not improve: {} -> {}",
        untrained.mrr,
        after.mrr
    );
    assert!(curve.epochs.len() <= 200);
    assert!(!curve.early_stop_disabled);
}

#[test]
fn zero_max_epochs_returns_initialization() {
    let dataset = mixed_dataset(40, 150, 2);
    let mut config = TrainConfig::for_kind(ModelKind::DistMult);
    config.max_epochs = 0;
    config.seed = 7;
    let params = ModelParams::init(ModelKind::DistMult, 40, 5, 8, 7).unwrap();
    let before = params.entity_table().values().to_vec();
    let (after, curve) = train_with_early_stop(params, &dataset, &config).unwrap();
    assert_eq!(after.entity_table().values(), before.as_slice());
    assert!(curve.epochs.is_empty());
}

#[test]
fn fixed_seed_training_is_deterministic() {
    let dataset = mixed_dataset(40, 150, 11);
    for (kind, loss, optimizer) in [
        (ModelKind::TransE, LossKind::BinaryLogistic, OptimizerKind::Adam),
        (ModelKind::ComplExN3, LossKind::MulticlassN3, OptimizerKind::Adagrad),
    ] {
        let mut config = TrainConfig::for_kind(kind);
        config.loss = loss;
        config.optimizer = optimizer;
        config.max_epochs = 4;
        config.batches_per_epoch = 5;
        config.batch_size = 16;
        config.eta = 2;
        config.seed = 31;

        let run = || {
            let params = ModelParams::init(kind, 40, 5, 8, 31).unwrap();
            let (trained, _) = train_with_early_stop(params, &dataset, &config).unwrap();
            (
                trained.entity_table().values().to_vec(),
                trained.relation_table().values().to_vec(),
            )
        };
        let (e1, r1) = run();
        let (e2, r2) = run();
        assert_eq!(e1, e2, "{kind:?} entity tables differ between runs");
        assert_eq!(r1, r2, "{kind:?} relation tables differ between runs");
    }
}

#[test]
fn empty_validation_split_trains_to_max_epochs() {
    let mut dataset = mixed_dataset(40, 150, 4);
    dataset.valid.clear();
    let mut config = TrainConfig::for_kind(ModelKind::DistMult);
    config.max_epochs = 6;
    config.batches_per_epoch = 5;
    config.eta = 2;
    config.seed = 3;
    let params = ModelParams::init(ModelKind::DistMult, 40, 5, 8, 3).unwrap();
    let (_, curve) = train_with_early_stop(params, &dataset, &config).unwrap();
    assert!(curve.early_stop_disabled);
    assert_eq!(curve.epochs.len(), 6);
    assert!(curve.epochs.iter().all(|e| e.valid_mrr.is_none()));
}

/// Random-scorer oracle: with i.i.d. continuous scores the rank of the true
/// candidate is uniform over the candidate count, so the MRR distribution
/// can be simulated directly from the per-triple candidate counts.
#[test]
fn untrained_model_matches_random_ranking_oracle() {
    let dataset = mixed_dataset(100, 900, 8);
    let filter = FilterIndex::build(&dataset);
    let entities = dataset.entity_count();

    let params = ModelParams::init(
        ModelKind::DistMult,
        entities,
        dataset.relation_count(),
        16,
        12345,
    )
    .unwrap();
    let actual = evaluate_model(&params, &dataset, &filter).unwrap();

    // Candidate counts per test triple and side (corruptions not filtered,
    // plus the test triple itself).
    let counts: Vec<(usize, usize)> = dataset
        .test
        .iter()
        .map(|t| {
            let filtered_tails = filter.tails(t.head, t.relation).map_or(0, |s| s.len());
            let filtered_heads = filter.heads(t.relation, t.tail).map_or(0, |s| s.len());
            (entities - filtered_heads, entities - filtered_tails)
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let simulations = 3000;
    let mut mrrs = Vec::with_capacity(simulations);
    for _ in 0..simulations {
        let ranks: Vec<RankResult> = counts
            .iter()
            .map(|&(m_left, m_right)| RankResult {
                triple: Triple::new(0, 0, 0),
                left_rank: rng.gen_range(1..=m_left) as f64,
                right_rank: rng.gen_range(1..=m_right) as f64,
            })
            .collect();
        mrrs.push(metrics_from_ranks(ranks, &DEFAULT_HITS).unwrap().mrr);
    }
    let mean = mrrs.iter().sum::<f64>() / simulations as f64;
    let std = (mrrs.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (simulations - 1) as f64)
        .sqrt();
    assert!(
        (actual.mrr - mean).abs() <= 3.0 * std,
        "untrained MRR {} outside {mean} +/- 3*{std}",
        actual.mrr
    );
}
