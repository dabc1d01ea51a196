//! The four subcommands: parse, synth, run, score.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use sha2::{Digest, Sha256};

use mousedyn::dataset::{self, SplitMode, UserSplit};
use mousedyn::eval;
use mousedyn::{
    authenticate_stream, build_master_datasets, dedupe_events, extract_features_batch,
    generate_profile, generate_session, parse_session_str, segment_actions, session_log_to_string,
    split_user, split_user_shuffled, EvalOptions, MasterDatasets, ParseOptions,
    RandomForestModel, Scenario, SegmenterConfig, SessionLog,
};

use crate::config::{InputSource, RunConfig};

/// Writes through a temp file and renames, so partial output never lands
/// under the final name.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn list_log_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading input directory {}", dir.display()))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().map_or(false, |e| e == "txt"))
        .collect();
    files.sort();
    if files.is_empty() {
        bail!("no input files: {} contains no .txt session logs", dir.display());
    }
    Ok(files)
}

fn file_name(path: &Path) -> String {
    path.file_name().unwrap_or_default().to_string_lossy().into_owned()
}

// ----------------------------------------------------------------------
// parse
// ----------------------------------------------------------------------

pub fn cmd_parse(input: &Path, output: &Path, max_coord: u32) -> Result<()> {
    let opts = ParseOptions { max_coord };
    fs::create_dir_all(output)
        .with_context(|| format!("creating output directory {}", output.display()))?;

    let mut total_events = 0usize;
    let mut total_removed = 0usize;
    for path in list_log_files(input)? {
        let name = file_name(&path);
        let text =
            fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        let parsed = parse_session_str(&text, &opts)
            .with_context(|| format!("parsing {}", path.display()))?;
        let deduped = dedupe_events(&parsed.log.events);
        let removed = parsed.log.events.len() - deduped.len();
        println!(
            "{name}: user {}, {} events, {} duplicates removed, {} out of order",
            parsed.log.user_id,
            parsed.log.events.len(),
            removed,
            parsed.out_of_order
        );
        total_events += parsed.log.events.len();
        total_removed += removed;

        let cleaned = SessionLog {
            user_id: parsed.log.user_id,
            events: deduped,
        };
        write_atomic(
            &output.join(&name),
            session_log_to_string(&cleaned).as_bytes(),
        )?;
    }
    println!("total: {total_events} events, duplicates removed: {total_removed}");
    Ok(())
}

// ----------------------------------------------------------------------
// synth
// ----------------------------------------------------------------------

pub fn cmd_synth(users: u32, duration: f64, seed: u64, output: &Path) -> Result<()> {
    if users == 0 {
        bail!("--users must be positive");
    }
    if duration <= 0.0 {
        bail!("--duration must be positive");
    }
    fs::create_dir_all(output)
        .with_context(|| format!("creating output directory {}", output.display()))?;
    for id in 0..users {
        let profile = generate_profile(id, seed);
        let log = generate_session(&profile, duration, seed);
        let name = format!("user_{id}.txt");
        write_atomic(&output.join(&name), session_log_to_string(&log).as_bytes())?;
        println!("{name}: {} events", log.events.len());
    }
    println!("wrote {users} session logs to {}", output.display());
    Ok(())
}

// ----------------------------------------------------------------------
// run
// ----------------------------------------------------------------------

struct LoadedSession {
    file: String,
    sha256: String,
    log: SessionLog,
    out_of_order: usize,
}

fn load_sessions(config: &RunConfig) -> Result<Vec<LoadedSession>> {
    let opts = ParseOptions {
        max_coord: config.max_coord,
    };
    match config.input.as_ref().expect("config is validated") {
        InputSource::Files(dir) => {
            let mut sessions = Vec::new();
            for path in list_log_files(dir)? {
                let text = fs::read_to_string(&path)
                    .with_context(|| format!("reading {}", path.display()))?;
                let parsed = parse_session_str(&text, &opts)
                    .with_context(|| format!("parsing {}", path.display()))?;
                sessions.push(LoadedSession {
                    file: file_name(&path),
                    sha256: sha256_hex(text.as_bytes()),
                    out_of_order: parsed.out_of_order,
                    log: parsed.log,
                });
            }
            Ok(sessions)
        }
        InputSource::Synth { users, duration } => {
            let dir = config.output_dir.join("sessions");
            fs::create_dir_all(&dir)?;
            let mut sessions = Vec::new();
            for id in 0..*users {
                let profile = generate_profile(id, config.forest.seed);
                let log = generate_session(&profile, *duration, config.forest.seed);
                let text = session_log_to_string(&log);
                let file = format!("user_{id}.txt");
                write_atomic(&dir.join(&file), text.as_bytes())?;
                sessions.push(LoadedSession {
                    file,
                    sha256: sha256_hex(text.as_bytes()),
                    out_of_order: 0,
                    log,
                });
            }
            Ok(sessions)
        }
    }
}

fn scenario_file_stem(scenario: Scenario) -> &'static str {
    match scenario {
        Scenario::A => "scenario_a",
        Scenario::B => "scenario_b",
    }
}

pub fn cmd_run(config: &RunConfig) -> Result<()> {
    fs::create_dir_all(&config.output_dir)?;
    let sessions = load_sessions(config)?;
    println!("loaded {} session logs", sessions.len());

    let segmenter = SegmenterConfig {
        sequence_length: config.sequence_length,
        stride: config.stride,
        event_filter: config.event_filter.clone(),
    };

    let mut splits: BTreeMap<u32, UserSplit> = BTreeMap::new();
    let mut manifest = config.manifest_lines();
    for session in &sessions {
        let user_id = session.log.user_id;
        if splits.contains_key(&user_id) {
            bail!(
                "input stage: user {user_id} appears in more than one file (second: {})",
                session.file
            );
        }
        let deduped = dedupe_events(&session.log.events);
        let removed = session.log.events.len() - deduped.len();
        let actions = segment_actions(&deduped, &segmenter);
        let features = extract_features_batch(&actions);
        let (train, test) = match config.split_mode {
            SplitMode::Chronological => split_user(&features, config.split_ratio),
            SplitMode::Shuffled => {
                split_user_shuffled(&features, config.split_ratio, config.forest.seed)
            }
        };
        println!(
            "user {user_id}: {} events, {removed} duplicates removed, {} actions ({} train / {} test)",
            session.log.events.len(),
            actions.len(),
            train.len(),
            test.len()
        );
        manifest.push(format!("input.{}.sha256={}", session.file, session.sha256));
        manifest.push(format!(
            "input.{}.duplicates_removed={removed}",
            session.file
        ));
        manifest.push(format!(
            "input.{}.out_of_order={}",
            session.file, session.out_of_order
        ));
        splits.insert(user_id, UserSplit { train, test });
    }

    let master = build_master_datasets(&splits, config.forest.seed)
        .context("dataset stage")?;
    for c in &master.counts.per_user {
        manifest.push(format!(
            "counts.user_{}.train_genuine={}",
            c.user_id, c.train_genuine
        ));
        manifest.push(format!(
            "counts.user_{}.test_genuine={}",
            c.user_id, c.test_genuine
        ));
    }
    manifest.push(format!(
        "counts.total_train_genuine={}",
        master.counts.total_train_genuine
    ));
    manifest.push(format!(
        "counts.total_test_genuine={}",
        master.counts.total_test_genuine
    ));

    write_datasets(&config.output_dir, &master)?;

    let models = eval::train_user_forests(&master, &config.forest).context("training stage")?;
    write_models(&config.output_dir, &models)?;

    let opts = EvalOptions {
        threshold: config.threshold,
        scenario_a_holdout: config.scenario_a_holdout,
    };
    let reports_dir = config.output_dir.join("reports");
    fs::create_dir_all(&reports_dir)?;
    for &scenario in &config.scenarios {
        let report = if scenario == Scenario::A && config.scenario_a_holdout {
            eval::run_scenario(scenario, &master, &config.forest, &opts)
        } else {
            eval::evaluate_models(scenario, &master, &models, &opts)
        }
        .context("evaluation stage")?;
        let stem = scenario_file_stem(scenario);
        write_atomic(
            &reports_dir.join(format!("{stem}.csv")),
            report.to_csv_string().as_bytes(),
        )?;
        write_atomic(
            &reports_dir.join(format!("{stem}.txt")),
            report.to_text_table().as_bytes(),
        )?;
        println!();
        print!("{}", report.to_text_table());
    }

    manifest.push(format!("tool.version={}", env!("CARGO_PKG_VERSION")));
    manifest.sort();
    let mut manifest_text = manifest.join("\n");
    manifest_text.push('\n');
    write_atomic(&config.output_dir.join("manifest.txt"), manifest_text.as_bytes())?;

    println!();
    println!("outputs written to {}", config.output_dir.display());
    Ok(())
}

fn write_datasets(out: &Path, master: &MasterDatasets) -> Result<()> {
    let dir = out.join("datasets");
    fs::create_dir_all(&dir)?;
    for ds in &master.datasets {
        for (which, samples) in [("train", &ds.train), ("test", &ds.test)] {
            let mut buf = Vec::new();
            dataset::write_feature_csv(&mut buf, samples)
                .with_context(|| format!("serializing user {} {which} rows", ds.owner_id))?;
            write_atomic(&dir.join(format!("user_{}_{which}.csv", ds.owner_id)), &buf)?;
        }
    }
    Ok(())
}

fn write_models(out: &Path, models: &[(u32, RandomForestModel)]) -> Result<()> {
    let dir = out.join("models");
    fs::create_dir_all(&dir)?;
    for (user_id, model) in models {
        let mut buf = Vec::new();
        model
            .save(&mut buf)
            .with_context(|| format!("serializing model for user {user_id}"))?;
        write_atomic(&dir.join(format!("user_{user_id}.json")), &buf)?;
    }
    Ok(())
}

// ----------------------------------------------------------------------
// score
// ----------------------------------------------------------------------

#[allow(clippy::too_many_arguments)]
pub fn cmd_score(
    model_path: &Path,
    log_path: &Path,
    threshold: f64,
    sequence_length: usize,
    stride: usize,
    event_filter: &std::collections::BTreeSet<i32>,
    max_coord: u32,
) -> Result<()> {
    if !(0.0..=1.0).contains(&threshold) {
        bail!("threshold must be in [0, 1], got {threshold}");
    }
    let model = RandomForestModel::load(
        fs::File::open(model_path)
            .with_context(|| format!("opening model {}", model_path.display()))?,
    )
    .with_context(|| format!("loading model {}", model_path.display()))?;

    let text =
        fs::read_to_string(log_path).with_context(|| format!("reading {}", log_path.display()))?;
    let parsed = parse_session_str(&text, &ParseOptions { max_coord })
        .with_context(|| format!("parsing {}", log_path.display()))?;

    let config = SegmenterConfig {
        sequence_length,
        stride,
        event_filter: event_filter.clone(),
    };
    let outcome = authenticate_stream(
        &model,
        parsed.log.events.iter().copied(),
        config,
        threshold,
    )?;

    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for action in &outcome.actions {
        writeln!(
            out,
            "{}\t{:.6}\t{}",
            action.ordinal,
            action.score,
            if action.authenticated {
                "authenticated"
            } else {
                "rejected"
            }
        )?;
    }
    if outcome.actions.is_empty() {
        println!("0 actions scored");
    } else {
        let authenticated = outcome.actions.iter().filter(|a| a.authenticated).count();
        println!(
            "scored {} actions, authenticated {} (rate {:.4})",
            outcome.actions.len(),
            authenticated,
            authenticated as f64 / outcome.actions.len() as f64
        );
    }
    Ok(())
}
