//! Pipeline configuration: defaults, plain-text `key=value` config files,
//! and command-line overrides, in that precedence order. The
//! `MOUSEDYN_OUTPUT_DIR` environment variable overrides the output directory
//! last; nothing else is environment-sensitive.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use mousedyn::dataset::SplitMode;
use mousedyn::{ForestParams, MaxFeatures, Scenario};

/// Where sessions come from.
#[derive(Debug, Clone, PartialEq)]
pub enum InputSource {
    /// Directory with one `.txt` session log per user.
    Files(PathBuf),
    /// Generate seeded synthetic sessions instead.
    Synth { users: u32, duration: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input: Option<InputSource>,
    pub output_dir: PathBuf,
    pub max_coord: u32,
    pub sequence_length: usize,
    pub stride: usize,
    pub event_filter: BTreeSet<i32>,
    pub split_ratio: f64,
    pub split_mode: SplitMode,
    pub forest: ForestParams,
    pub scenarios: Vec<Scenario>,
    pub threshold: f64,
    pub scenario_a_holdout: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input: None,
            output_dir: PathBuf::from("mousedyn-out"),
            max_coord: 8192,
            sequence_length: 10,
            stride: 10,
            event_filter: BTreeSet::from([-1]),
            split_ratio: 0.7,
            split_mode: SplitMode::Chronological,
            forest: ForestParams::default(),
            scenarios: vec![Scenario::A, Scenario::B],
            threshold: 0.5,
            scenario_a_holdout: false,
        }
    }
}

/// Optional command-line overrides applied on top of the config file.
#[derive(Debug, Default, clap::Args)]
pub struct RunOverrides {
    /// Directory of session logs, one .txt file per user
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Generate this many synthetic users instead of reading logs
    #[arg(long)]
    pub synth_users: Option<u32>,
    /// Synthetic session length in seconds
    #[arg(long)]
    pub synth_duration: Option<f64>,
    /// Output directory
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Inclusive screen-coordinate bound accepted by the parser
    #[arg(long)]
    pub max_coord: Option<u32>,
    /// Events per mouse action
    #[arg(long)]
    pub sequence_length: Option<usize>,
    /// Step between action window starts
    #[arg(long)]
    pub stride: Option<usize>,
    /// Comma-separated event-type codes to keep (movement is -1)
    #[arg(long)]
    pub event_filter: Option<String>,
    /// Train fraction of the train/test split
    #[arg(long)]
    pub split_ratio: Option<f64>,
    /// chronological | shuffled
    #[arg(long)]
    pub split_mode: Option<String>,
    /// Trees per user forest
    #[arg(long)]
    pub trees: Option<usize>,
    /// Maximum tree depth, or "none"
    #[arg(long)]
    pub max_depth: Option<String>,
    #[arg(long)]
    pub min_samples_leaf: Option<usize>,
    #[arg(long)]
    pub min_samples_split: Option<usize>,
    /// sqrt | all | an explicit count
    #[arg(long)]
    pub max_features: Option<String>,
    /// true | false
    #[arg(long)]
    pub bootstrap: Option<bool>,
    /// Master seed for every randomized stage
    #[arg(long)]
    pub seed: Option<u64>,
    /// A | B | A,B
    #[arg(long)]
    pub scenario: Option<String>,
    /// Decision threshold for ACC/FNR/FPR
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Evaluate scenario A on a holdout within the training rows
    #[arg(long)]
    pub scenario_a_holdout: bool,
}

fn parse_event_filter(text: &str) -> Result<BTreeSet<i32>> {
    let mut set = BTreeSet::new();
    for part in text.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        set.insert(
            part.parse::<i32>()
                .with_context(|| format!("bad event-type code {part:?}"))?,
        );
    }
    if set.is_empty() {
        bail!("event_filter must keep at least one event type");
    }
    Ok(set)
}

fn parse_split_mode(text: &str) -> Result<SplitMode> {
    match text.to_ascii_lowercase().as_str() {
        "chronological" => Ok(SplitMode::Chronological),
        "shuffled" => Ok(SplitMode::Shuffled),
        other => bail!("split_mode must be chronological or shuffled, got {other:?}"),
    }
}

fn parse_max_depth(text: &str) -> Result<Option<usize>> {
    if text.eq_ignore_ascii_case("none") {
        return Ok(None);
    }
    let depth: usize = text
        .parse()
        .with_context(|| format!("max_depth must be a count or \"none\", got {text:?}"))?;
    if depth == 0 {
        bail!("max_depth must be positive; use \"none\" for unlimited");
    }
    Ok(Some(depth))
}

fn parse_max_features(text: &str) -> Result<MaxFeatures> {
    match text.to_ascii_lowercase().as_str() {
        "sqrt" => Ok(MaxFeatures::Sqrt),
        "all" => Ok(MaxFeatures::All),
        other => {
            let k: usize = other
                .parse()
                .with_context(|| format!("max_features must be sqrt, all, or a count, got {text:?}"))?;
            Ok(MaxFeatures::Fixed(k))
        }
    }
}

fn parse_scenarios(text: &str) -> Result<Vec<Scenario>> {
    let mut out = Vec::new();
    for part in text.split(',') {
        match part.trim().to_ascii_uppercase().as_str() {
            "A" => out.push(Scenario::A),
            "B" => out.push(Scenario::B),
            "AB" => out.extend([Scenario::A, Scenario::B]),
            "" => {}
            other => bail!("scenario must be A, B, or A,B, got {other:?}"),
        }
    }
    if out.is_empty() {
        bail!("at least one scenario must be selected");
    }
    out.dedup();
    Ok(out)
}

fn parse_bool(key: &str, text: &str) -> Result<bool> {
    match text.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => bail!("{key} must be true or false, got {other:?}"),
    }
}

impl RunConfig {
    fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .with_context(|| format!("{}:{}: expected key=value", path.display(), idx + 1))?;
            let (key, value) = (key.trim(), value.trim());
            let ctx = || format!("{}:{}: key {key}", path.display(), idx + 1);
            match key {
                "input_dir" => self.input = Some(InputSource::Files(PathBuf::from(value))),
                "synth_users" => {
                    let users: u32 = value.parse().with_context(ctx)?;
                    self.set_synth_users(users);
                }
                "synth_duration" => {
                    let duration: f64 = value.parse().with_context(ctx)?;
                    self.set_synth_duration(duration);
                }
                "output_dir" => self.output_dir = PathBuf::from(value),
                "max_coord" => self.max_coord = value.parse().with_context(ctx)?,
                "sequence_length" => self.sequence_length = value.parse().with_context(ctx)?,
                "stride" => self.stride = value.parse().with_context(ctx)?,
                "event_filter" => self.event_filter = parse_event_filter(value)?,
                "split_ratio" => self.split_ratio = value.parse().with_context(ctx)?,
                "split_mode" => self.split_mode = parse_split_mode(value)?,
                "n_trees" => self.forest.n_trees = value.parse().with_context(ctx)?,
                "max_depth" => self.forest.max_depth = parse_max_depth(value)?,
                "min_samples_leaf" => {
                    self.forest.min_samples_leaf = value.parse().with_context(ctx)?
                }
                "min_samples_split" => {
                    self.forest.min_samples_split = value.parse().with_context(ctx)?
                }
                "max_features" => self.forest.max_features = parse_max_features(value)?,
                "bootstrap" => self.forest.bootstrap = parse_bool(key, value)?,
                "seed" => self.forest.seed = value.parse().with_context(ctx)?,
                "scenario" => self.scenarios = parse_scenarios(value)?,
                "threshold" => self.threshold = value.parse().with_context(ctx)?,
                "scenario_a_holdout" => self.scenario_a_holdout = parse_bool(key, value)?,
                other => bail!("{}:{}: unknown key {other:?}", path.display(), idx + 1),
            }
        }
        Ok(())
    }

    fn set_synth_users(&mut self, users: u32) {
        match &mut self.input {
            Some(InputSource::Synth { users: u, .. }) => *u = users,
            _ => {
                self.input = Some(InputSource::Synth {
                    users,
                    duration: 120.0,
                })
            }
        }
    }

    fn set_synth_duration(&mut self, duration: f64) {
        match &mut self.input {
            Some(InputSource::Synth { duration: d, .. }) => *d = duration,
            _ => {
                self.input = Some(InputSource::Synth {
                    users: 10,
                    duration,
                })
            }
        }
    }

    fn apply_overrides(&mut self, o: &RunOverrides) -> Result<()> {
        if let Some(dir) = &o.input {
            self.input = Some(InputSource::Files(dir.clone()));
        }
        if let Some(users) = o.synth_users {
            self.set_synth_users(users);
        }
        if let Some(duration) = o.synth_duration {
            self.set_synth_duration(duration);
        }
        if let Some(dir) = &o.output {
            self.output_dir = dir.clone();
        }
        if let Some(v) = o.max_coord {
            self.max_coord = v;
        }
        if let Some(v) = o.sequence_length {
            self.sequence_length = v;
        }
        if let Some(v) = o.stride {
            self.stride = v;
        }
        if let Some(v) = &o.event_filter {
            self.event_filter = parse_event_filter(v)?;
        }
        if let Some(v) = o.split_ratio {
            self.split_ratio = v;
        }
        if let Some(v) = &o.split_mode {
            self.split_mode = parse_split_mode(v)?;
        }
        if let Some(v) = o.trees {
            self.forest.n_trees = v;
        }
        if let Some(v) = &o.max_depth {
            self.forest.max_depth = parse_max_depth(v)?;
        }
        if let Some(v) = o.min_samples_leaf {
            self.forest.min_samples_leaf = v;
        }
        if let Some(v) = o.min_samples_split {
            self.forest.min_samples_split = v;
        }
        if let Some(v) = &o.max_features {
            self.forest.max_features = parse_max_features(v)?;
        }
        if let Some(v) = o.bootstrap {
            self.forest.bootstrap = v;
        }
        if let Some(v) = o.seed {
            self.forest.seed = v;
        }
        if let Some(v) = &o.scenario {
            self.scenarios = parse_scenarios(v)?;
        }
        if let Some(v) = o.threshold {
            self.threshold = v;
        }
        if o.scenario_a_holdout {
            self.scenario_a_holdout = true;
        }
        Ok(())
    }

    /// Defaults, then the config file, then CLI flags, then the output-dir
    /// environment override.
    pub fn load(config_file: Option<&Path>, overrides: &RunOverrides) -> Result<RunConfig> {
        let mut config = RunConfig::default();
        if let Some(path) = config_file {
            config.apply_file(path)?;
        }
        config.apply_overrides(overrides)?;
        if let Ok(dir) = std::env::var("MOUSEDYN_OUTPUT_DIR") {
            if !dir.is_empty() {
                config.output_dir = PathBuf::from(dir);
            }
        }
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<()> {
        if self.input.is_none() {
            bail!("no input configured: set input_dir or synth_users/synth_duration");
        }
        if self.sequence_length < 2 {
            bail!("sequence_length must be at least 2");
        }
        if self.stride < 1 {
            bail!("stride must be at least 1");
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            bail!("split_ratio must be in (0, 1)");
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            bail!("threshold must be in [0, 1], got {}", self.threshold);
        }
        if self.forest.n_trees == 0 {
            bail!("n_trees must be positive");
        }
        if let Some(InputSource::Synth { users, duration }) = &self.input {
            if *users < 2 {
                bail!("synth_users must be at least 2 to form imposter pools");
            }
            if *duration <= 0.0 {
                bail!("synth_duration must be positive");
            }
        }
        Ok(())
    }

    fn max_depth_text(&self) -> String {
        match self.forest.max_depth {
            None => "none".to_string(),
            Some(d) => d.to_string(),
        }
    }

    fn max_features_text(&self) -> String {
        match self.forest.max_features {
            MaxFeatures::Sqrt => "sqrt".to_string(),
            MaxFeatures::All => "all".to_string(),
            MaxFeatures::Fixed(k) => k.to_string(),
        }
    }

    /// `config.*` manifest lines echoing the effective configuration.
    pub fn manifest_lines(&self) -> Vec<String> {
        let mut lines = Vec::new();
        let mut push = |key: &str, value: String| lines.push(format!("config.{key}={value}"));
        match self.input.as_ref().expect("validated") {
            InputSource::Files(dir) => push("input_dir", dir.display().to_string()),
            InputSource::Synth { users, duration } => {
                push("synth_users", users.to_string());
                push("synth_duration", duration.to_string());
            }
        }
        push("output_dir", self.output_dir.display().to_string());
        push("max_coord", self.max_coord.to_string());
        push("sequence_length", self.sequence_length.to_string());
        push("stride", self.stride.to_string());
        let filter = self
            .event_filter
            .iter()
            .fold(String::new(), |mut acc, code| {
                if !acc.is_empty() {
                    acc.push(',');
                }
                let _ = write!(acc, "{code}");
                acc
            });
        push("event_filter", filter);
        push("split_ratio", self.split_ratio.to_string());
        push(
            "split_mode",
            match self.split_mode {
                SplitMode::Chronological => "chronological".to_string(),
                SplitMode::Shuffled => "shuffled".to_string(),
            },
        );
        push("n_trees", self.forest.n_trees.to_string());
        push("max_depth", self.max_depth_text());
        push("min_samples_leaf", self.forest.min_samples_leaf.to_string());
        push(
            "min_samples_split",
            self.forest.min_samples_split.to_string(),
        );
        push("max_features", self.max_features_text());
        push("bootstrap", self.forest.bootstrap.to_string());
        push("seed", self.forest.seed.to_string());
        let scenarios = self
            .scenarios
            .iter()
            .map(Scenario::to_string)
            .collect::<Vec<_>>()
            .join(",");
        push("scenario", scenarios);
        push("threshold", self.threshold.to_string());
        push("scenario_a_holdout", self.scenario_a_holdout.to_string());
        lines
    }
}
