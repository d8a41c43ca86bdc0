use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use seqrank::corpus::{generate, ClickRecord, SyntheticSpec};
use seqrank::model::{Arch, Variant};
use seqrank::trainer::{evaluate_loss, initial_encoders, sample_negatives, train, PreparedCorpus, TrainConfig};
use seqrank::Error;

fn small_corpus(records: usize, seed: u64) -> Vec<ClickRecord> {
    let spec = SyntheticSpec { n_records: records, judgment_queries: 5, seed, ..SyntheticSpec::default() };
    generate(&spec).unwrap().clicks
}

fn quick(cells: usize, epochs: usize) -> TrainConfig {
    TrainConfig { cells, epochs, deterministic: true, ..TrainConfig::default() }
}

#[test]
fn zero_learning_rate_leaves_initial_parameters() {
    let clicks = small_corpus(60, 1);
    let cfg = TrainConfig { eps: 0.0, ..quick(4, 2) };
    let out = train(&clicks, &cfg).unwrap();
    let (q0, d0) = initial_encoders(&cfg, out.dict.dim());
    assert_eq!(out.query, q0);
    assert_eq!(out.doc, d0);
    // Nothing moved, so every epoch reports the same frozen-negative loss.
    let first = out.curve.first().unwrap();
    assert!(out.curve.epochs.iter().all(|e| e.mean_loss == first));
}

#[test]
fn zero_epochs_gives_empty_curve() {
    let clicks = small_corpus(40, 2);
    let out = train(&clicks, &quick(4, 0)).unwrap();
    assert!(out.curve.epochs.is_empty());
    assert_eq!(out.updates, 0);
}

#[test]
fn one_update_per_minibatch_per_epoch() {
    let clicks = small_corpus(130, 3);
    let cfg = TrainConfig { minibatch: 50, ..quick(3, 2) };
    assert_eq!(train(&clicks, &cfg).unwrap().updates, 3 * 2);
    let cfg = TrainConfig { minibatch: 1000, ..quick(3, 2) };
    assert_eq!(train(&clicks, &cfg).unwrap().updates, 2);
}

#[test]
fn negatives_are_other_distinct_clicked_docs() {
    let records: Vec<ClickRecord> = ["a b", "c d", "e f", "g h", "i j"]
        .iter()
        .enumerate()
        .map(|(i, d)| ClickRecord::new(format!("q{i}"), *d).unwrap())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for r in 0..records.len() {
        let mut negs = sample_negatives(r, &records, 4, &mut rng).unwrap();
        negs.sort();
        let mut expected: Vec<String> =
            records.iter().filter(|x| x.clicked_doc != records[r].clicked_doc).map(|x| x.clicked_doc.clone()).collect();
        expected.sort();
        assert_eq!(negs, expected);
    }
    match sample_negatives(0, &records, 5, &mut rng) {
        Err(Error::CorpusTooSmall { distinct: 5, requested: 5 }) => {}
        other => panic!("expected CorpusTooSmall, got {other:?}"),
    }
}

#[test]
fn negatives_never_include_own_document_even_when_repeated() {
    let mut records = vec![ClickRecord::new("q", "same doc").unwrap(); 10];
    records.extend(["x", "y", "z"].map(|d| ClickRecord::new("q", d).unwrap()));
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..50 {
        let negs = sample_negatives(0, &records, 3, &mut rng).unwrap();
        assert!(!negs.contains(&"same doc".to_string()));
        let mut sorted = negs.clone();
        sorted.dedup();
        assert_eq!(sorted.len(), 3);
    }
}

#[test]
fn too_few_documents_fails_before_training() {
    let records: Vec<ClickRecord> = (0..3).map(|i| ClickRecord::new("q", format!("d{i}")).unwrap()).collect();
    assert!(matches!(train(&records, &quick(3, 1)), Err(Error::CorpusTooSmall { .. })));
}

#[test]
fn invalid_config_is_rejected() {
    let clicks = small_corpus(20, 4);
    for cfg in [
        TrainConfig { cells: 0, ..quick(3, 1) },
        TrainConfig { minibatch: 0, ..quick(3, 1) },
        TrainConfig { gamma: 0.0, ..quick(3, 1) },
        TrainConfig { n_negatives: 0, ..quick(3, 1) },
    ] {
        assert!(matches!(train(&clicks, &cfg), Err(Error::Config(_))), "{cfg:?}");
    }
}

#[test]
fn evaluation_loss_ignores_minibatch_and_threads() {
    let clicks = small_corpus(80, 5);
    let cfg = quick(5, 0);
    let out = train(&clicks, &cfg).unwrap();
    let corpus = PreparedCorpus::new(&clicks, &out.dict).unwrap();
    let base = evaluate_loss(&corpus, &out.query, &out.doc, &cfg).unwrap();
    let other = TrainConfig { minibatch: 7, threads: Some(2), ..cfg.clone() };
    assert_eq!(base, evaluate_loss(&corpus, &out.query, &out.doc, &other).unwrap());
}

#[test]
fn deterministic_runs_are_identical() {
    let clicks = small_corpus(100, 6);
    let cfg = TrainConfig { minibatch: 30, ..quick(4, 3) };
    let a = train(&clicks, &cfg).unwrap();
    let b = train(&clicks, &TrainConfig { threads: Some(3), ..cfg.clone() }).unwrap();
    assert_eq!(a.query, b.query);
    assert_eq!(a.doc, b.doc);
    assert_eq!(a.curve.epochs, b.curve.epochs);
}

#[test]
fn training_lowers_loss_for_every_architecture() {
    let clicks = small_corpus(200, 7);
    for (arch, variant, bidirectional) in [
        (Arch::Rnn, Variant::Full, false),
        (Arch::Lstm, Variant::Full, false),
        (Arch::Lstm, Variant::Reduced, false),
        (Arch::Lstm, Variant::Reduced, true),
    ] {
        let cfg = TrainConfig { arch, variant, bidirectional, minibatch: 50, ..quick(8, 6) };
        let out = train(&clicks, &cfg).unwrap();
        let (first, last) = (out.curve.first().unwrap(), out.curve.last().unwrap());
        assert!(last < 0.8 * first, "{arch}/{variant}/bi={bidirectional}: {first} -> {last}");
    }
}

#[test]
fn shallow_bptt_still_trains() {
    let clicks = small_corpus(200, 8);
    let cfg = TrainConfig { bptt_depth: 1, minibatch: 50, ..quick(8, 6) };
    let out = train(&clicks, &cfg).unwrap();
    assert!(out.curve.last().unwrap() < out.curve.first().unwrap());
}

#[test]
fn overrides_round_trip_and_reject_unknown_keys() {
    let cfg = TrainConfig {
        arch: Arch::Rnn,
        bidirectional: true,
        cells: 12,
        gamma: 3.5,
        threads: Some(2),
        ..TrainConfig::default()
    };
    let mut back = TrainConfig::default();
    back.apply_overrides(&cfg.to_overrides(), "cfg").unwrap();
    assert_eq!(back, cfg);

    let mut c = TrainConfig::default();
    c.apply_overrides("# comment\n\nbptt-depth = 7  # trailing\nthreads = auto\n", "cfg").unwrap();
    assert_eq!(c.bptt_depth, 7);
    assert_eq!(c.threads, None);
    match c.apply_overrides("cells = 4\nlearning_rate = 1\n", "my.cfg") {
        Err(Error::Config(m)) => assert!(m.starts_with("my.cfg:2:"), "{m}"),
        other => panic!("{other:?}"),
    }
    assert!(c.apply_overrides("cells = many", "cfg").is_err());
    assert!(c.apply_overrides("cells 4", "cfg").is_err());
}
