//! End-to-end pipeline checks over synthetic sessions: streaming vs. batch
//! equivalence, scenario harness shape, and reproducibility of serialized
//! outputs.

use std::collections::BTreeMap;
use std::io::Write;

use mousedyn::eval::StreamOutcome;
use mousedyn::{
    authenticate_stream, build_master_datasets, dedupe_events, extract_features_batch,
    generate_profile, generate_session, parse_session_str, run_scenario, segment_actions,
    session_log_to_string, split_user, train_forest, EvalOptions, ForestParams, ParseOptions,
    RandomForestModel, Scenario, SegmenterConfig, SessionLog, StreamAuthenticator, UserSplit,
};

const SEED: u64 = 20210323;

fn corpus_splits(users: u32, seconds: f64) -> BTreeMap<u32, UserSplit> {
    (0..users)
        .map(|id| {
            let profile = generate_profile(id, SEED);
            let log = generate_session(&profile, seconds, SEED);
            // Round-trip through the text format so the whole ingest path
            // is exercised.
            let parsed = parse_session_str(&session_log_to_string(&log), &ParseOptions::default())
                .expect("synthetic logs always parse");
            assert_eq!(parsed.out_of_order, 0);
            let actions = segment_actions(
                &dedupe_events(&parsed.log.events),
                &SegmenterConfig::default(),
            );
            let features = extract_features_batch(&actions);
            let (train, test) = split_user(&features, 0.7);
            (id, UserSplit { train, test })
        })
        .collect()
}

fn small_params() -> ForestParams {
    ForestParams {
        n_trees: 15,
        seed: SEED,
        ..ForestParams::default()
    }
}

fn train_owner_model(log: &SessionLog) -> RandomForestModel {
    let actions = segment_actions(&dedupe_events(&log.events), &SegmenterConfig::default());
    let features = extract_features_batch(&actions);
    let samples: Vec<Vec<f64>> = features.iter().map(|f| f.as_slice().to_vec()).collect();
    let labels: Vec<bool> = (0..samples.len()).map(|i| i % 2 == 0).collect();
    train_forest(&samples, &labels, &small_params()).unwrap()
}

#[test]
fn scenario_reports_have_the_expected_shape() {
    let splits = corpus_splits(3, 90.0);
    let master = build_master_datasets(&splits, SEED).unwrap();
    let report = run_scenario(
        Scenario::A,
        &master,
        &small_params(),
        &EvalOptions::default(),
    )
    .unwrap();

    assert_eq!(report.rows.len(), 3);
    let ids: Vec<u32> = report.rows.iter().map(|r| r.user_id).collect();
    assert_eq!(ids, vec![0, 1, 2]);
    for row in &report.rows {
        assert!(row.genuine_actions > 0);
        for rate in [row.acc, row.fnr, row.fpr, row.eer] {
            assert!((0.0..=1.0).contains(&rate));
        }
    }

    // Average/std rows must equal an independent recomputation.
    let n = report.rows.len() as f64;
    let mean: f64 = report.rows.iter().map(|r| r.acc).sum::<f64>() / n;
    let var: f64 = report.rows.iter().map(|r| (r.acc - mean).powi(2)).sum::<f64>() / n;
    assert!((report.avg.acc - mean).abs() < 1e-12);
    assert!((report.std.acc - var.sqrt()).abs() < 1e-12);
}

#[test]
fn scenario_a_holdout_flag_changes_the_evaluated_rows() {
    let splits = corpus_splits(3, 90.0);
    let master = build_master_datasets(&splits, SEED).unwrap();
    let plain = run_scenario(
        Scenario::A,
        &master,
        &small_params(),
        &EvalOptions::default(),
    )
    .unwrap();
    let holdout = run_scenario(
        Scenario::A,
        &master,
        &small_params(),
        &EvalOptions {
            scenario_a_holdout: true,
            ..EvalOptions::default()
        },
    )
    .unwrap();
    for (a, b) in plain.rows.iter().zip(&holdout.rows) {
        assert!(b.genuine_actions < a.genuine_actions);
    }
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let make = || {
        let splits = corpus_splits(3, 60.0);
        let master = build_master_datasets(&splits, SEED).unwrap();
        let report = run_scenario(
            Scenario::B,
            &master,
            &small_params(),
            &EvalOptions::default(),
        )
        .unwrap();
        (report.to_csv_string(), report.to_text_table())
    };
    let (csv_a, text_a) = make();
    let (csv_b, text_b) = make();
    assert_eq!(csv_a, csv_b);
    assert_eq!(text_a, text_b);
}

#[test]
fn streaming_matches_batch_for_every_window_policy() {
    let profile = generate_profile(1, SEED);
    let log = generate_session(&profile, 30.0, SEED);
    let model = train_owner_model(&log);

    for (len, stride) in [(10, 10), (6, 3), (5, 8), (2, 1)] {
        let config = SegmenterConfig {
            sequence_length: len,
            stride,
            ..SegmenterConfig::default()
        };

        let actions = segment_actions(&dedupe_events(&log.events), &config);
        let batch: Vec<(usize, f64)> = extract_features_batch(&actions)
            .iter()
            .enumerate()
            .map(|(i, f)| (i, model.predict_proba(f.as_slice()).unwrap()))
            .collect();

        let StreamOutcome {
            actions: streamed,
            out_of_order,
        } = authenticate_stream(&model, log.events.iter().copied(), config, 0.5).unwrap();
        assert_eq!(out_of_order, 0);
        assert_eq!(streamed.len(), batch.len(), "len={len} stride={stride}");
        for (s, (ordinal, score)) in streamed.iter().zip(&batch) {
            assert_eq!(s.ordinal, *ordinal);
            assert_eq!(
                s.score.to_bits(),
                score.to_bits(),
                "score mismatch at ordinal {ordinal} (len={len} stride={stride})"
            );
            assert_eq!(s.authenticated, s.score >= 0.5);
        }
    }
}

#[test]
fn stream_rejects_out_of_order_events_and_short_streams() {
    let profile = generate_profile(0, SEED);
    let log = generate_session(&profile, 20.0, SEED);
    let model = train_owner_model(&log);

    let mut events = log.events.clone();
    events.swap(5, 6);
    let outcome = authenticate_stream(
        &model,
        events.iter().copied(),
        SegmenterConfig::default(),
        0.5,
    )
    .unwrap();
    assert_eq!(outcome.out_of_order, 1);

    let short = authenticate_stream(
        &model,
        log.events.iter().take(9).copied(),
        SegmenterConfig::default(),
        0.5,
    )
    .unwrap();
    assert!(short.actions.is_empty());

    // Threshold 0 authenticates everything that scores.
    let all = authenticate_stream(
        &model,
        log.events.iter().copied(),
        SegmenterConfig::default(),
        0.0,
    )
    .unwrap();
    assert!(!all.actions.is_empty());
    assert!(all.actions.iter().all(|a| a.authenticated));

    assert!(StreamAuthenticator::new(&model, SegmenterConfig::default(), 1.01).is_err());
}

#[test]
fn imposter_replay_scores_through_a_foreign_model() {
    let owner_log = generate_session(&generate_profile(0, SEED), 30.0, SEED);
    let imposter_log = generate_session(&generate_profile(7, SEED), 30.0, SEED);
    let model = train_owner_model(&owner_log);
    let outcome = authenticate_stream(
        &model,
        imposter_log.events.iter().copied(),
        SegmenterConfig::default(),
        0.5,
    )
    .unwrap();
    assert!(!outcome.actions.is_empty());
}

#[test]
fn model_file_round_trips_through_disk() {
    let log = generate_session(&generate_profile(2, SEED), 20.0, SEED);
    let model = train_owner_model(&log);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("user_2.model.json");
    model.save(std::fs::File::create(&path).unwrap()).unwrap();
    let loaded = RandomForestModel::load(std::fs::File::open(&path).unwrap()).unwrap();
    assert_eq!(loaded, model);
}

#[test]
fn feature_csv_written_to_disk_is_stable() {
    let splits = corpus_splits(3, 30.0);
    let master = build_master_datasets(&splits, SEED).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("train.csv");

    let write = || {
        let mut buf = Vec::new();
        mousedyn::dataset::write_feature_csv(&mut buf, &master.datasets[0].train).unwrap();
        buf
    };
    let bytes = write();
    std::fs::File::create(&path)
        .unwrap()
        .write_all(&bytes)
        .unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), write());

    let text = String::from_utf8(bytes).unwrap();
    let mut lines = text.lines();
    let header_cols = lines.next().unwrap().split(',').count();
    assert_eq!(header_cols, 34);
    for line in lines {
        assert_eq!(line.split(',').count(), 34);
    }
}

#[test]
fn out_of_order_input_parses_to_the_same_actions_as_sorted_input() {
    let profile = generate_profile(3, SEED);
    let log = generate_session(&profile, 10.0, SEED);
    let mut shuffled = log.events.clone();
    shuffled.swap(10, 11);
    shuffled.swap(100, 102);

    let text = session_log_to_string(&SessionLog {
        user_id: 3,
        events: shuffled,
    });
    let parsed = parse_session_str(&text, &ParseOptions::default()).unwrap();
    assert!(parsed.out_of_order > 0);
    assert_eq!(parsed.log.events.len(), log.events.len());

    let a = segment_actions(
        &dedupe_events(&parsed.log.events),
        &SegmenterConfig::default(),
    );
    let b = segment_actions(&dedupe_events(&log.events), &SegmenterConfig::default());
    assert_eq!(a, b);
}
