//! Intrusion-detection evaluation: ACC/FNR/FPR at a fixed threshold, EER at
//! a per-user threshold, the two evaluation scenarios, and streaming
//! authentication of a live event feed.

use std::collections::VecDeque;
use std::fmt;

use thiserror::Error;

use crate::dataset::{LabeledSample, MasterDatasets, UserDataset};
use crate::event::MouseEvent;
use crate::features::{extract_features, FEATURE_DIM};
use crate::forest::{train_forest, ForestError, ForestParams, RandomForestModel};
use crate::par;
use crate::seed;
use crate::segment::{MouseAction, SegmenterConfig};

/// Which rows each user's classifier is evaluated on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// Train and evaluate on the training rows (in-distribution fit).
    A,
    /// Train on the training rows, evaluate on the held-out rows.
    B,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scenario::A => write!(f, "A"),
            Scenario::B => write!(f, "B"),
        }
    }
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("got {scores} scores for {labels} labels")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("cannot evaluate an empty sample set")]
    EmptyInput,
    #[error("no positive (genuine) samples in the evaluated set")]
    NoPositives,
    #[error("no negative (imposter) samples in the evaluated set")]
    NoNegatives,
    #[error("threshold must be in [0, 1], got {0}")]
    InvalidThreshold(f64),
    #[error(transparent)]
    Forest(#[from] ForestError),
    #[error("no trained model supplied for user {0}")]
    MissingModel(u32),
    #[error("user {user_id}: {source}")]
    User {
        user_id: u32,
        #[source]
        source: Box<EvalError>,
    },
}

/// Binary confusion tallies. Positive = genuine.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub true_pos: usize,
    pub false_pos: usize,
    pub true_neg: usize,
    pub false_neg: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.true_pos + self.false_pos + self.true_neg + self.false_neg
    }
}

/// ACC/FNR/FPR as fractions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasicMetrics {
    pub acc: f64,
    pub fnr: f64,
    pub fpr: f64,
}

/// Equal error rate and the threshold it was found at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EerResult {
    pub eer: f64,
    pub threshold: f64,
}

/// Tallies predictions at `threshold`; a score at the threshold predicts
/// positive.
pub fn confusion(
    scores: &[f64],
    labels: &[bool],
    threshold: f64,
) -> Result<ConfusionCounts, EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    if scores.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut counts = ConfusionCounts {
        true_pos: 0,
        false_pos: 0,
        true_neg: 0,
        false_neg: 0,
    };
    for (&score, &genuine) in scores.iter().zip(labels) {
        match (score >= threshold, genuine) {
            (true, true) => counts.true_pos += 1,
            (true, false) => counts.false_pos += 1,
            (false, false) => counts.true_neg += 1,
            (false, true) => counts.false_neg += 1,
        }
    }
    Ok(counts)
}

/// `acc = (tp+tn)/total`, `fnr = fn/(fn+tp)`, `fpr = fp/(fp+tn)`.
pub fn metrics(counts: &ConfusionCounts) -> Result<BasicMetrics, EvalError> {
    let positives = counts.true_pos + counts.false_neg;
    let negatives = counts.true_neg + counts.false_pos;
    if positives == 0 {
        return Err(EvalError::NoPositives);
    }
    if negatives == 0 {
        return Err(EvalError::NoNegatives);
    }
    Ok(BasicMetrics {
        acc: (counts.true_pos + counts.true_neg) as f64 / counts.total() as f64,
        fnr: counts.false_neg as f64 / positives as f64,
        fpr: counts.false_pos as f64 / negatives as f64,
    })
}

/// Finds the per-classifier threshold where FPR and FNR meet.
///
/// Sweeps `{0}`, the midpoints between consecutive distinct sorted scores,
/// and one step above 1; picks the candidate minimizing `|fpr - fnr|` (ties
/// go to the lowest threshold) and returns `eer = (fpr + fnr) / 2` there.
pub fn compute_eer(scores: &[f64], labels: &[bool]) -> Result<EerResult, EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    let total_pos = labels.iter().filter(|&&l| l).count();
    let total_neg = labels.len() - total_pos;
    if total_pos == 0 {
        return Err(EvalError::NoPositives);
    }
    if total_neg == 0 {
        return Err(EvalError::NoNegatives);
    }

    let mut pairs: Vec<(f64, bool)> = scores.iter().copied().zip(labels.iter().copied()).collect();
    pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));

    let mut best: Option<(f64, EerResult)> = None;
    let mut consider = |threshold: f64, below_pos: usize, below_neg: usize| {
        // Predicted negative = strictly below the threshold.
        let fnr = below_pos as f64 / total_pos as f64;
        let fpr = (total_neg - below_neg) as f64 / total_neg as f64;
        let gap = (fpr - fnr).abs();
        if best.as_ref().map_or(true, |(g, _)| gap < *g) {
            best = Some((
                gap,
                EerResult {
                    eer: (fpr + fnr) / 2.0,
                    threshold,
                },
            ));
        }
    };

    consider(0.0, 0, 0);
    let mut below_pos = 0usize;
    let mut below_neg = 0usize;
    for j in 0..pairs.len() - 1 {
        if pairs[j].1 {
            below_pos += 1;
        } else {
            below_neg += 1;
        }
        let (lo, hi) = (pairs[j].0, pairs[j + 1].0);
        if lo == hi {
            continue;
        }
        let mut mid = (lo + hi) / 2.0;
        // The rounded midpoint of two adjacent floats can land on `lo`;
        // under the `score >= t` rule any value in (lo, hi] realizes this
        // boundary, so fall back to `hi`.
        if mid <= lo {
            mid = hi;
        }
        consider(mid, below_pos, below_neg);
    }
    consider(1.0 + f64::EPSILON, total_pos, total_neg);

    Ok(best.expect("at least two candidates were considered").1)
}

/// One user's result row.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub user_id: u32,
    /// Genuine actions in the evaluated split.
    pub genuine_actions: usize,
    pub acc: f64,
    pub fnr: f64,
    pub fpr: f64,
    pub eer: f64,
    pub eer_threshold: f64,
}

/// Mean or spread of the per-user rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateSummary {
    pub acc: f64,
    pub fnr: f64,
    pub fpr: f64,
    pub eer: f64,
    pub eer_threshold: f64,
}

/// Per-user rows plus average and population-standard-deviation rows.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub scenario: Scenario,
    /// Decision threshold the ACC/FNR/FPR columns were computed at.
    pub threshold: f64,
    pub rows: Vec<MetricRow>,
    pub avg: RateSummary,
    pub std: RateSummary,
}

/// Evaluation knobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    /// Decision threshold for ACC/FNR/FPR. Lowering FPR at the cost of FNR
    /// (or vice versa) is a deployment choice; EER is threshold-free.
    pub threshold: f64,
    /// Scenario A alternative reading: hold out the last 30% of each user's
    /// training rows (per class) and evaluate on those instead of the
    /// training rows themselves. Off by default.
    pub scenario_a_holdout: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            scenario_a_holdout: false,
        }
    }
}

fn summarize(rows: &[MetricRow]) -> (RateSummary, RateSummary) {
    let n = rows.len() as f64;
    let mean = |f: fn(&MetricRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
    let pstd = |f: fn(&MetricRow) -> f64, mu: f64| {
        (rows.iter().map(|r| (f(r) - mu).powi(2)).sum::<f64>() / n).sqrt()
    };
    let avg = RateSummary {
        acc: mean(|r| r.acc),
        fnr: mean(|r| r.fnr),
        fpr: mean(|r| r.fpr),
        eer: mean(|r| r.eer),
        eer_threshold: mean(|r| r.eer_threshold),
    };
    let std = RateSummary {
        acc: pstd(|r| r.acc, avg.acc),
        fnr: pstd(|r| r.fnr, avg.fnr),
        fpr: pstd(|r| r.fpr, avg.fpr),
        eer: pstd(|r| r.eer, avg.eer),
        eer_threshold: pstd(|r| r.eer_threshold, avg.eer_threshold),
    };
    (avg, std)
}

/// Chronological per-class holdout of a training set, for the alternative
/// Scenario A reading.
fn holdout_split(samples: &[LabeledSample]) -> (Vec<LabeledSample>, Vec<LabeledSample>) {
    let mut fit = Vec::new();
    let mut held = Vec::new();
    for class in [true, false] {
        let rows: Vec<&LabeledSample> = samples.iter().filter(|s| s.label == class).collect();
        let cut = (0.7 * rows.len() as f64).floor() as usize;
        fit.extend(rows[..cut].iter().map(|&s| s.clone()));
        held.extend(rows[cut..].iter().map(|&s| s.clone()));
    }
    (fit, held)
}

/// Forest parameters for one user: same hyperparameters, a per-user seed
/// derived from the master seed so bootstrap draws stay uncorrelated between
/// users and schedule-independent.
fn user_params(params: &ForestParams, user_id: u32) -> ForestParams {
    ForestParams {
        seed: seed::mix(params.seed, &[0x7573_6572, u64::from(user_id)]),
        ..params.clone()
    }
}

/// Trains one forest per user on that user's training rows, in parallel with
/// the `parallel` feature. Returned in `(user_id, model)` pairs ordered by
/// user id.
pub fn train_user_forests(
    master: &MasterDatasets,
    params: &ForestParams,
) -> Result<Vec<(u32, RandomForestModel)>, EvalError> {
    let models = par::map_items(&master.datasets, |ds| {
        let (x, y) = UserDataset::matrix(&ds.train);
        train_forest(&x, &y, &user_params(params, ds.owner_id))
            .map(|m| (ds.owner_id, m))
            .map_err(|e| EvalError::User {
                user_id: ds.owner_id,
                source: Box::new(e.into()),
            })
    });
    models.into_iter().collect()
}

fn score_rows(
    model: &RandomForestModel,
    rows: &[LabeledSample],
    user_id: u32,
    opts: &EvalOptions,
) -> Result<MetricRow, EvalError> {
    let mut scores = Vec::with_capacity(rows.len());
    let mut labels = Vec::with_capacity(rows.len());
    for s in rows {
        scores.push(model.predict_proba(s.features.as_slice())?);
        labels.push(s.label);
    }
    let basic = metrics(&confusion(&scores, &labels, opts.threshold)?)?;
    let eer = compute_eer(&scores, &labels)?;
    Ok(MetricRow {
        user_id,
        genuine_actions: labels.iter().filter(|&&l| l).count(),
        acc: basic.acc,
        fnr: basic.fnr,
        fpr: basic.fpr,
        eer: eer.eer,
        eer_threshold: eer.threshold,
    })
}

/// Evaluates pre-trained per-user models (as from [`train_user_forests`])
/// under a scenario. Ignores `opts.scenario_a_holdout`, which requires
/// retraining on a sub-split.
pub fn evaluate_models(
    scenario: Scenario,
    master: &MasterDatasets,
    models: &[(u32, RandomForestModel)],
    opts: &EvalOptions,
) -> Result<EvalReport, EvalError> {
    if !(0.0..=1.0).contains(&opts.threshold) {
        return Err(EvalError::InvalidThreshold(opts.threshold));
    }
    let rows: Vec<Result<MetricRow, EvalError>> = par::map_items(&master.datasets, |ds| {
        let model = models
            .iter()
            .find(|(id, _)| *id == ds.owner_id)
            .map(|(_, m)| m)
            .ok_or(EvalError::MissingModel(ds.owner_id))?;
        let eval_rows = match scenario {
            Scenario::A => &ds.train,
            Scenario::B => &ds.test,
        };
        score_rows(model, eval_rows, ds.owner_id, opts).map_err(|e| EvalError::User {
            user_id: ds.owner_id,
            source: Box::new(e),
        })
    });
    let rows: Vec<MetricRow> = rows.into_iter().collect::<Result<_, _>>()?;
    let (avg, std) = summarize(&rows);
    Ok(EvalReport {
        scenario,
        threshold: opts.threshold,
        rows,
        avg,
        std,
    })
}

fn evaluate_user_holdout(
    ds: &UserDataset,
    params: &ForestParams,
    opts: &EvalOptions,
) -> Result<MetricRow, EvalError> {
    let (fit_rows, eval_rows) = holdout_split(&ds.train);
    let (x_fit, y_fit) = UserDataset::matrix(&fit_rows);
    let model = train_forest(&x_fit, &y_fit, &user_params(params, ds.owner_id))?;
    score_rows(&model, &eval_rows, ds.owner_id, opts)
}

/// Trains one forest per user and evaluates it under the given scenario.
/// Users run in parallel with the `parallel` feature; the report is ordered
/// by user id either way.
pub fn run_scenario(
    scenario: Scenario,
    master: &MasterDatasets,
    params: &ForestParams,
    opts: &EvalOptions,
) -> Result<EvalReport, EvalError> {
    if !(0.0..=1.0).contains(&opts.threshold) {
        return Err(EvalError::InvalidThreshold(opts.threshold));
    }
    if scenario == Scenario::A && opts.scenario_a_holdout {
        let rows: Vec<Result<MetricRow, EvalError>> = par::map_items(&master.datasets, |ds| {
            evaluate_user_holdout(ds, params, opts).map_err(|e| EvalError::User {
                user_id: ds.owner_id,
                source: Box::new(e),
            })
        });
        let rows: Vec<MetricRow> = rows.into_iter().collect::<Result<_, _>>()?;
        let (avg, std) = summarize(&rows);
        return Ok(EvalReport {
            scenario,
            threshold: opts.threshold,
            rows,
            avg,
            std,
        });
    }
    let models = train_user_forests(master, params)?;
    evaluate_models(scenario, master, &models, opts)
}

impl EvalReport {
    /// CSV rendering: per-user rows plus `Avg` and `Std` rows, rates to four
    /// decimals.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("User,GenuineActions,ACC,FNR,FPR,EER,EERThreshold\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{:.4},{:.4},{:.4},{:.4},{:.6}\n",
                r.user_id, r.genuine_actions, r.acc, r.fnr, r.fpr, r.eer, r.eer_threshold
            ));
        }
        for (name, s) in [("Avg", &self.avg), ("Std", &self.std)] {
            out.push_str(&format!(
                "{},,{:.4},{:.4},{:.4},{:.4},{:.6}\n",
                name, s.acc, s.fnr, s.fpr, s.eer, s.eer_threshold
            ));
        }
        out
    }

    /// Aligned plain-text table in the shape of the result tables, EER shown
    /// both as a fraction and a percentage.
    pub fn to_text_table(&self) -> String {
        let header = [
            "User".to_string(),
            "# of Genuine Actions".to_string(),
            "ACC".to_string(),
            format!("FNR (Threshold = {})", self.threshold),
            format!("FPR (Threshold = {})", self.threshold),
            "EER (User-Specific Threshold)".to_string(),
        ];
        let mut table: Vec<[String; 6]> = vec![header];
        for r in &self.rows {
            table.push([
                r.user_id.to_string(),
                r.genuine_actions.to_string(),
                format!("{:.4}", r.acc),
                format!("{:.4}", r.fnr),
                format!("{:.4}", r.fpr),
                format!("{:.4} ({:.2}%)", r.eer, r.eer * 100.0),
            ]);
        }
        for (name, s) in [("Avg.", &self.avg), ("Std.", &self.std)] {
            table.push([
                name.to_string(),
                String::new(),
                format!("{:.4}", s.acc),
                format!("{:.4}", s.fnr),
                format!("{:.4}", s.fpr),
                format!("{:.4} ({:.2}%)", s.eer, s.eer * 100.0),
            ]);
        }

        let mut widths = [0usize; 6];
        for row in &table {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.len());
            }
        }
        let mut out = format!("Scenario {} results, one RF classifier per user\n", self.scenario);
        for row in &table {
            let line: Vec<String> = row
                .iter()
                .zip(&widths)
                .map(|(cell, w)| format!("{cell:<w$}"))
                .collect();
            out.push_str(line.join("  ").trim_end());
            out.push('\n');
        }
        out
    }
}

/// One streaming decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredAction {
    pub ordinal: usize,
    pub score: f64,
    pub authenticated: bool,
}

/// Everything a finished stream produced.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamOutcome {
    pub actions: Vec<ScoredAction>,
    pub out_of_order: usize,
}

/// Incremental authenticator: feed events in time order, get one decision
/// per completed action window. Behavior is identical to running the batch
/// pipeline (dedupe, filter, segment, extract, score) over the same events.
pub struct StreamAuthenticator<'m> {
    model: &'m RandomForestModel,
    config: SegmenterConfig,
    threshold: f64,
    last_timestamp: Option<f64>,
    last_key: Option<(u32, u32, i32)>,
    buffer: VecDeque<MouseEvent>,
    buffer_base: usize,
    filtered_count: usize,
    next_start: usize,
    ordinal: usize,
    out_of_order: usize,
}

impl<'m> StreamAuthenticator<'m> {
    pub fn new(
        model: &'m RandomForestModel,
        config: SegmenterConfig,
        threshold: f64,
    ) -> Result<Self, EvalError> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(EvalError::InvalidThreshold(threshold));
        }
        if model.feature_dimension != FEATURE_DIM {
            return Err(EvalError::Forest(ForestError::DimensionMismatch {
                expected: FEATURE_DIM,
                got: model.feature_dimension,
            }));
        }
        config.assert_valid();
        Ok(Self {
            model,
            config,
            threshold,
            last_timestamp: None,
            last_key: None,
            buffer: VecDeque::new(),
            buffer_base: 0,
            filtered_count: 0,
            next_start: 0,
            ordinal: 0,
            out_of_order: 0,
        })
    }

    /// Events that arrived with a timestamp behind the stream clock and were
    /// rejected.
    pub fn out_of_order(&self) -> usize {
        self.out_of_order
    }

    /// Feeds one event; returns a decision when it completes a window.
    pub fn push(&mut self, event: MouseEvent) -> Option<ScoredAction> {
        if let Some(last) = self.last_timestamp {
            if event.timestamp < last {
                self.out_of_order += 1;
                return None;
            }
        }
        self.last_timestamp = Some(event.timestamp);

        // Mirror the batch order: dedupe over all retained events first,
        // event-type filtering second.
        let key = event.dedupe_key();
        if self.last_key == Some(key) {
            return None;
        }
        self.last_key = Some(key);
        if !self.config.event_filter.contains(&event.event_type) {
            return None;
        }

        let index = self.filtered_count;
        self.filtered_count += 1;
        if index < self.next_start {
            return None; // between windows when stride > length
        }
        if self.buffer.is_empty() {
            self.buffer_base = index;
        }
        self.buffer.push_back(event);

        if self.filtered_count < self.next_start + self.config.sequence_length {
            return None;
        }
        debug_assert_eq!(self.buffer_base, self.next_start);
        debug_assert_eq!(self.buffer.len(), self.config.sequence_length);

        let events: Vec<MouseEvent> = self.buffer.iter().copied().collect();
        let action = MouseAction {
            user_id: events[0].user_id,
            start_time: events[0].timestamp,
            end_time: events[events.len() - 1].timestamp,
            events,
            ordinal: self.ordinal,
        };
        let score = self
            .model
            .predict_proba(extract_features(&action).as_slice())
            .expect("dimension was validated in new()");
        let decision = ScoredAction {
            ordinal: self.ordinal,
            score,
            authenticated: score >= self.threshold,
        };
        self.ordinal += 1;
        self.next_start += self.config.stride;
        while self.buffer_base < self.next_start {
            if self.buffer.pop_front().is_none() {
                break;
            }
            self.buffer_base += 1;
        }
        Some(decision)
    }
}

/// Runs a whole event sequence through a [`StreamAuthenticator`].
pub fn authenticate_stream(
    model: &RandomForestModel,
    events: impl IntoIterator<Item = MouseEvent>,
    config: SegmenterConfig,
    threshold: f64,
) -> Result<StreamOutcome, EvalError> {
    let mut auth = StreamAuthenticator::new(model, config, threshold)?;
    let actions = events.into_iter().filter_map(|e| auth.push(e)).collect();
    Ok(StreamOutcome {
        actions,
        out_of_order: auth.out_of_order(),
    })
}
