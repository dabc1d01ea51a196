//! Continuous authentication from mouse dynamics.
//!
//! This crate turns raw mouse-event session logs into per-user binary
//! random-forest authenticators and evaluates them as intrusion detectors.
//! The pipeline:
//!
//! 1. [`event`] — parse five-field session logs and drop duplicate events.
//! 2. [`segment`] — group consecutive events into fixed-length mouse actions.
//! 3. [`features`] — compute kinematic series and a 31-dimensional feature
//!    vector per action.
//! 4. [`dataset`] — split each user 70/30, then build one balanced
//!    genuine-vs-imposter dataset per user.
//! 5. [`forest`] — seeded CART random forests with probability scoring.
//! 6. [`eval`] — ACC/FNR/FPR/EER reports for two scenarios (evaluate on the
//!    training rows vs. on the held-out rows) plus streaming authentication.
//! 7. [`synth`] — seeded synthetic session generator for hermetic testing.
//!
//! Everything is deterministic under a master seed: per-tree, per-user, and
//! per-draw seeds are derived with a fixed mixing function, so results do not
//! depend on thread scheduling. With the `parallel` feature (default), batch
//! stages run data-parallel on rayon; without it the same code runs
//! sequentially.

pub mod dataset;
pub mod eval;
pub mod event;
pub mod features;
pub mod forest;
pub mod segment;
pub mod synth;

pub(crate) mod par;
pub(crate) mod seed;

pub use dataset::{
    assemble_master, build_master_datasets, build_user_dataset, split_user, split_user_shuffled,
    LabeledSample, MasterDatasets, SplitMode, UserDataset, UserSplit,
};
pub use eval::{
    authenticate_stream, compute_eer, confusion, evaluate_models, metrics, run_scenario,
    train_user_forests, ConfusionCounts, EvalOptions, EvalReport, MetricRow, Scenario,
    ScoredAction, StreamAuthenticator,
};
pub use event::{
    dedupe_events, parse_event_line, parse_session_log, parse_session_str, session_log_to_string,
    write_session_log, MouseEvent, ParseOptions, ParsedLog, SessionLog, MOVEMENT_EVENT,
};
pub use features::{
    compute_kinematics, extract_features, extract_features_batch, FeatureVector, KinematicSeries,
    FEATURE_DIM, FEATURE_NAMES,
};
pub use forest::{
    train_forest, train_tree, DecisionTree, ForestParams, MaxFeatures, RandomForestModel,
};
pub use segment::{segment_actions, MouseAction, SegmenterConfig};
pub use synth::{generate_profile, generate_session, UserProfile};
