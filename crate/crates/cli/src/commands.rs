//! Subcommand bodies. Each reads its inputs through a [`Recorder`] so the
//! manifest lists every byte that influenced the outputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use session_miner::classifiers::{ClassifierError, Dataset, Family, Hyperparams, ModelArtifact};
use session_miner::eval::{
    cross_validate, default_grid, evaluate as score, grid_search, information_gain_ranking, render_table, EvalReport,
    GridSearchResult, SelectionMetric,
};
use session_miner::features::{build_matrix, read_matrix, write_matrix, CatalogId, ExtractOptions, FeatureMatrix};
use session_miner::ingest::{build_corpus, load_labels, parse_event_log, SessionPolicy};
use session_miner::knowledge::{
    assign_classes, knowledge_dataset, read_knowledge, select_features, ClassThresholds, Cuts, FeatureSelection, Level,
    SelectionMethod, Target, ThresholdPolicy,
};
use session_miner::model::IntentClass;
use session_miner::segment::GapPolicy;
use session_miner::synth::{browsing_only_profiles, generate_corpus, SynthConfig};

use crate::manifest::{manifest_path, Recorder};
use crate::{
    CliError, EvaluateArgs, ExtractArgs, KnowledgeArgs, Policy, PredictArgs, RankArgs, Selection, Sessions, SynthArgs,
    TrainArgs,
};

pub const PREDICTIONS_HEADER: &str = "#session-miner-predictions v1";
/// A TOML comment, so the effective config can be fed back through `--config`.
pub const CONFIG_HEADER: &str = "#session-miner-synth-config v1";

/// Versioned envelope for JSON outputs: `fmt` and `v` come first.
#[derive(Serialize)]
struct Doc<'a, T: Serialize> {
    fmt: &'a str,
    v: u32,
    #[serde(flatten)]
    body: T,
}

fn to_json<T: Serialize>(fmt: &str, body: T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(&Doc { fmt, v: 1, body }).expect("reports serialize");
    s.push('\n');
    s.into_bytes()
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn data(msg: impl Into<String>) -> CliError {
    CliError::Data(msg.into())
}

fn read_features(rec: &mut Recorder, path: &Path) -> Result<FeatureMatrix, CliError> {
    let bytes = rec.read(path)?;
    let m = read_matrix(&bytes[..])?;
    rec.catalog(&m.catalog);
    Ok(m)
}

fn read_model(rec: &mut Recorder, path: &Path) -> Result<ModelArtifact, CliError> {
    let bytes = rec.read(path)?;
    let text = String::from_utf8(bytes).map_err(|_| data(format!("{}: model file is not UTF-8", path.display())))?;
    let model = ModelArtifact::from_json(&text)?;
    rec.catalog(&model.catalog);
    Ok(model)
}

/// Class names implied by the labels present: intent classes or knowledge levels.
fn label_space(m: &FeatureMatrix) -> Result<Vec<String>, CliError> {
    let labels: Vec<&str> = m.rows.iter().filter_map(|r| r.label.as_deref()).collect();
    if labels.iter().all(|l| l.parse::<IntentClass>().is_ok()) {
        return Ok(IntentClass::ALL.iter().map(|c| c.name().to_string()).collect());
    }
    if labels.iter().all(|l| l.parse::<Level>().is_ok()) {
        return Ok(Level::ALL.iter().map(|c| c.name().to_string()).collect());
    }
    let bad = labels.iter().find(|l| l.parse::<IntentClass>().is_err()).expect("some label failed");
    Err(data(format!("label {bad:?} is neither an intent class nor a knowledge level")))
}

fn labeled_dataset(m: &FeatureMatrix, class_names: &[String]) -> Result<Dataset, CliError> {
    if !m.has_labels {
        return Err(data("feature matrix has no label column"));
    }
    let index = |s: &str| class_names.iter().position(|n| n.eq_ignore_ascii_case(s.trim()));
    Ok(Dataset::from_matrix(m, class_names.len(), index)?)
}

/// Parses one hyperparameter object for `family`; the `family` key is optional.
/// Keys the family does not define are rejected.
fn parse_cell(family: Family, v: Value, err: fn(String) -> CliError) -> Result<Hyperparams, CliError> {
    let Value::Object(mut map) = v else {
        return Err(err(format!("hyperparameters must be a JSON object, got {v}")));
    };
    match map.get("family").and_then(Value::as_str).map(str::parse::<Family>) {
        None => {
            map.insert("family".into(), Value::from(family.name()));
        }
        Some(Ok(f)) if f == family => {
            map.insert("family".into(), Value::from(family.name()));
        }
        Some(_) => return Err(err(format!("hyperparameters {} are not for family {family}", Value::Object(map)))),
    }
    let keys: Vec<String> = map.keys().cloned().collect();
    let hp: Hyperparams =
        serde_json::from_value(Value::Object(map)).map_err(|e| err(format!("{family} hyperparameters: {e}")))?;
    let known = serde_json::to_value(&hp).expect("hyperparameters serialize");
    if let Some(k) = keys.iter().find(|k| known.get(k.as_str()).is_none()) {
        return Err(err(format!("{family} has no hyperparameter {k:?}")));
    }
    Ok(hp)
}

fn parse_family(s: &str) -> Result<Family, CliError> {
    s.parse().map_err(CliError::Usage)
}

fn session_policy(sessions: Sessions, gap_minutes: u64) -> Result<SessionPolicy, CliError> {
    Ok(match sessions {
        Sessions::Field => SessionPolicy::ByField,
        Sessions::Gap => SessionPolicy::ByGap(
            GapPolicy::from_minutes(gap_minutes as f64).map_err(|e| usage(format!("--gap-minutes: {e}")))?,
        ),
    })
}

fn extract_options(break_seconds: u64) -> Result<ExtractOptions, CliError> {
    if break_seconds == 0 {
        return Err(usage("--break-seconds must be positive"));
    }
    Ok(ExtractOptions { break_ms: break_seconds * 1000 })
}

fn extract_matrix(
    rec: &mut Recorder,
    log: &Path,
    labels: Option<&Path>,
    catalog: CatalogId,
    policy: SessionPolicy,
    opts: &ExtractOptions,
) -> Result<FeatureMatrix, CliError> {
    let parsed = parse_event_log(&rec.read(log)?[..])?;
    for d in &parsed.diagnostics {
        log::warn!("{}:{}: skipped: {}", log.display(), d.line, d.reason);
    }
    let labels = match labels {
        Some(p) => load_labels(&rec.read(p)?[..])?,
        None => BTreeMap::new(),
    };
    let corpus = build_corpus(parsed.events, &labels, policy)?;
    log::info!(
        "{} events, {} sessions, label coverage {:.3}",
        corpus.event_count(),
        corpus.sessions.len(),
        corpus.label_coverage
    );
    rec.catalog(catalog.name());
    Ok(build_matrix(catalog, &corpus.sessions, opts)?)
}

pub fn synth(a: &SynthArgs, jobs: usize) -> Result<(), CliError> {
    let mut rec = Recorder::start("synth", jobs);
    let mut cfg = match &a.config {
        Some(p) => {
            let bytes = rec.read(p)?;
            let text = String::from_utf8(bytes).map_err(|_| data(format!("{}: not UTF-8", p.display())))?;
            SynthConfig::from_toml(&text)?
        }
        None => SynthConfig::default(),
    };
    cfg.seed = a.seed;
    if let Some(n) = a.sessions {
        cfg.n_sessions = n;
    }
    if a.browsing_only {
        cfg.profiles = browsing_only_profiles();
    }
    rec.seed(a.seed);
    let corpus = generate_corpus(&cfg)?;
    rec.write(&a.out.join("events.log"), corpus.log.as_bytes())?;
    rec.write(&a.out.join("labels.tsv"), corpus.labels.as_bytes())?;
    rec.write(&a.out.join("knowledge.tsv"), corpus.knowledge.as_bytes())?;
    let config = format!("{CONFIG_HEADER}\n{}", cfg.to_toml());
    rec.write(&a.out.join("config.toml"), config.as_bytes())?;
    let [nav, inf, tra] = corpus.class_counts;
    println!("{} sessions: {nav} navigational, {inf} informational, {tra} transactional", cfg.n_sessions);
    rec.finish(&a.out.join("manifest.json"))
}

pub fn extract(a: &ExtractArgs, jobs: usize) -> Result<(), CliError> {
    let catalog: CatalogId = a.catalog.parse().map_err(CliError::Usage)?;
    let policy = session_policy(a.sessions, a.gap_minutes)?;
    let opts = extract_options(a.break_seconds)?;
    let mut rec = Recorder::start("extract", jobs);
    let m = extract_matrix(&mut rec, &a.log, a.labels.as_deref(), catalog, policy, &opts)?;
    let mut out = Vec::new();
    write_matrix(&m, &mut out)?;
    rec.write(&a.out, &out)?;
    rec.finish(&manifest_path(&a.out))
}

/// True for a zero-byte file or one holding only the format header line.
fn has_no_rows(bytes: &[u8]) -> bool {
    let text = String::from_utf8_lossy(bytes);
    text.lines().filter(|l| !l.trim().is_empty()).count() <= 1
}

pub fn train(a: &TrainArgs, jobs: usize) -> Result<(), CliError> {
    let family = parse_family(&a.family)?;
    let metric: SelectionMetric = a.metric.parse().map_err(CliError::Usage)?;
    let mut rec = Recorder::start("train", jobs);
    rec.seed(a.seed);
    let explicit = match &a.hyperparams {
        Some(s) => {
            let v: Value = serde_json::from_str(s).map_err(|e| usage(format!("--hyperparams: {e}")))?;
            Some(parse_cell(family, v, CliError::Usage)?)
        }
        None => None,
    };
    let grid = match a.grid.as_deref() {
        _ if explicit.is_some() => Vec::new(),
        None | Some("default") => default_grid(family),
        Some(path) => {
            let path = Path::new(path);
            let v: Value =
                serde_json::from_slice(&rec.read(path)?).map_err(|e| data(format!("{}: {e}", path.display())))?;
            let Value::Array(cells) = v else {
                return Err(data(format!("{}: grid must be a JSON array of objects", path.display())));
            };
            cells.into_iter().map(|c| parse_cell(family, c, CliError::Data)).collect::<Result<_, _>>()?
        }
    };

    let bytes = rec.read(&a.features)?;
    if has_no_rows(&bytes) {
        return Err(ClassifierError::EmptyTrainingSet.into());
    }
    let m = read_matrix(&bytes[..])?;
    rec.catalog(&m.catalog);
    let class_names = label_space(&m)?;
    let data = labeled_dataset(&m, &class_names)?;
    if data.is_empty() {
        return Err(ClassifierError::EmptyTrainingSet.into());
    }

    let (hp, search) = match explicit {
        Some(hp) => (hp, None),
        None => {
            let result = grid_search(family, &grid, &data, a.k_folds, a.seed, metric)?;
            let best = result.best();
            println!(
                "selected {} of {} cells: {} (CV accuracy {:.4}, weighted F1 {:.4})",
                result.selected + 1,
                result.cells.len(),
                best.hyperparams.describe(),
                best.mean_accuracy,
                best.mean_weighted_f1
            );
            (best.hyperparams.clone(), Some(result))
        }
    };
    let mut model = hp.train(&data, a.seed)?;
    model.class_names = class_names;
    let mut json = model.to_json();
    json.push('\n');
    rec.write(&a.out, json.as_bytes())?;
    if let Some(result) = search {
        rec.write(&sibling(&a.out, ".grid.json"), &to_json::<&GridSearchResult>("session-miner-grid", &result))?;
    }
    rec.finish(&manifest_path(&a.out))
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Feature columns of `m` in the order `model` expects them.
fn aligned_rows(m: &FeatureMatrix, model: &ModelArtifact) -> Result<Vec<Vec<f64>>, CliError> {
    if m.catalog != model.catalog {
        return Err(
            ClassifierError::CatalogMismatch { expected: model.catalog.clone(), found: m.catalog.clone() }.into()
        );
    }
    let cols: Vec<usize> = model
        .feature_names
        .iter()
        .map(|n| m.feature_names.iter().position(|f| f == n))
        .collect::<Option<_>>()
        .ok_or_else(|| {
            CliError::from(ClassifierError::CatalogMismatch {
                expected: format!("{} ({} features)", model.catalog, model.feature_names.len()),
                found: format!("{} ({} features)", m.catalog, m.feature_names.len()),
            })
        })?;
    Ok(m.rows.iter().map(|r| cols.iter().map(|&c| r.values[c]).collect()).collect())
}

fn class_names_of(model: &ModelArtifact) -> Vec<String> {
    if model.class_names.len() == model.n_classes {
        model.class_names.clone()
    } else {
        (0..model.n_classes).map(|i| format!("class{i}")).collect()
    }
}

#[derive(Serialize)]
struct ModelEvaluation<'a> {
    model: String,
    family: Family,
    report: &'a EvalReport,
}

#[derive(Serialize)]
struct EvaluationReport<'a> {
    protocol: &'static str,
    features: String,
    n: usize,
    class_names: &'a [String],
    models: Vec<ModelEvaluation<'a>>,
}

pub fn evaluate(a: &EvaluateArgs, jobs: usize) -> Result<(), CliError> {
    let mut rec = Recorder::start("evaluate", jobs);
    let models = a.models.iter().map(|p| read_model(&mut rec, p)).collect::<Result<Vec<_>, _>>()?;
    let m = read_features(&mut rec, &a.features)?;
    let class_names = match models.first() {
        Some(first) if first.class_names.len() == first.n_classes => first.class_names.clone(),
        _ => label_space(&m)?,
    };
    if let Some((p, model)) = a.models.iter().zip(&models).find(|(_, model)| class_names_of(model) != class_names) {
        return Err(data(format!(
            "{}: classes {:?} differ from {:?}",
            p.display(),
            class_names_of(model),
            class_names
        )));
    }
    let labeled: Vec<usize> = (0..m.rows.len()).filter(|&i| m.rows[i].label.is_some()).collect();
    let gold = labeled_dataset(&m, &class_names)?.y;
    let mut reports = Vec::with_capacity(models.len());
    for model in &models {
        let rows = aligned_rows(&m, model)?;
        let predicted: Vec<usize> = labeled.iter().map(|&i| model.predict_row(&rows[i]).class).collect();
        reports.push(score(&gold, &predicted, class_names.len())?);
    }

    let mut labels: Vec<String> = models.iter().map(|m| m.family().to_string()).collect();
    for (i, p) in a.models.iter().enumerate() {
        if labels.iter().filter(|l| **l == labels[i]).count() > 1 {
            let stem = p.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
            labels[i] = format!("{} {stem}", labels[i]);
        }
    }
    let rows: Vec<(String, &EvalReport)> = labels.into_iter().zip(&reports).collect();
    let names: Vec<&str> = class_names.iter().map(String::as_str).collect();
    print!("{}", render_table(&rows, &names));

    if let Some(out) = &a.report {
        let body = EvaluationReport {
            protocol: "fixed-set",
            features: a.features.display().to_string(),
            n: gold.len(),
            class_names: &class_names,
            models: a
                .models
                .iter()
                .zip(&models)
                .zip(&reports)
                .map(|((p, model), report)| ModelEvaluation {
                    model: p.display().to_string(),
                    family: model.family(),
                    report,
                })
                .collect(),
        };
        rec.write(out, &to_json("session-miner-report", body))?;
        rec.finish(&manifest_path(out))?;
    }
    Ok(())
}

pub fn rank(a: &RankArgs, jobs: usize) -> Result<(), CliError> {
    let mut rec = Recorder::start("rank", jobs);
    let m = read_features(&mut rec, &a.features)?;
    let data = labeled_dataset(&m, &label_space(&m)?)?;
    let ranking = information_gain_ranking(&data)?;
    print!("{}", ranking.to_table());
    if let Some(out) = &a.report {
        #[derive(Serialize)]
        struct Body<'a> {
            catalog: &'a str,
            n: usize,
            #[serde(flatten)]
            ranking: &'a session_miner::eval::FeatureRanking,
        }
        rec.write(
            out,
            &to_json("session-miner-ranking", Body { catalog: &m.catalog, n: data.len(), ranking: &ranking }),
        )?;
        rec.finish(&manifest_path(out))?;
    }
    Ok(())
}

pub fn predict(a: &PredictArgs, jobs: usize) -> Result<(), CliError> {
    let mut rec = Recorder::start("predict", jobs);
    let model = read_model(&mut rec, &a.model)?;
    let m = match (&a.features, &a.log) {
        (Some(f), _) => read_features(&mut rec, f)?,
        (None, Some(log)) => {
            let catalog: CatalogId = model.catalog.parse().map_err(CliError::Data)?;
            let policy = session_policy(a.sessions, a.gap_minutes)?;
            let opts = extract_options(a.break_seconds)?;
            extract_matrix(&mut rec, log, None, catalog, policy, &opts)?
        }
        (None, None) => return Err(usage("one of --features or --log is required")),
    };
    let rows = aligned_rows(&m, &model)?;
    let names = class_names_of(&model);

    let mut out = format!("{PREDICTIONS_HEADER} {}\n", model.catalog).into_bytes();
    {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(&mut out);
        let mut header = vec!["session_id".to_string(), "predicted".to_string()];
        header.extend(names.iter().map(|n| format!("score_{n}")));
        w.write_record(&header).map_err(|e| data(e.to_string()))?;
        for (row, x) in m.rows.iter().zip(&rows) {
            let s = model.predict_row(x);
            let mut rec = vec![row.session_id.clone(), names[s.class].clone()];
            rec.extend(s.scores.iter().map(f64::to_string));
            w.write_record(&rec).map_err(|e| data(e.to_string()))?;
        }
        w.flush().map_err(|source| CliError::Io { path: a.out.clone(), source })?;
    }
    rec.write(&a.out, &out)?;
    rec.finish(&manifest_path(&a.out))
}

fn parse_cuts(flag: &str, s: &str) -> Result<Cuts, CliError> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [t1, t2] = parts[..] else {
        return Err(usage(format!("{flag}: expected t1,t2, got {s:?}")));
    };
    let num = |v: &str| v.parse::<f64>().map_err(|e| usage(format!("{flag}: {v:?}: {e}")));
    Ok(Cuts { t1: num(t1)?, t2: num(t2)? })
}

#[derive(Serialize)]
struct KnowledgeTask {
    target: Target,
    n: usize,
    class_counts: Vec<usize>,
    majority_baseline: f64,
    mean_fold_accuracy: f64,
    selection: Option<FeatureSelection>,
    /// Pooled out-of-fold predictions.
    report: EvalReport,
}

#[derive(Serialize)]
struct KnowledgeReport {
    protocol: String,
    seed: u64,
    hyperparams: Hyperparams,
    thresholds: ClassThresholds,
    tasks: Vec<KnowledgeTask>,
}

pub fn knowledge(a: &KnowledgeArgs, jobs: usize) -> Result<(), CliError> {
    let family = parse_family(&a.family)?;
    let hp = match &a.hyperparams {
        Some(s) => {
            let v: Value = serde_json::from_str(s).map_err(|e| usage(format!("--hyperparams: {e}")))?;
            parse_cell(family, v, CliError::Usage)?
        }
        None => family.default_hyperparams(),
    };
    let policy = match a.policy {
        Policy::Tertile => ThresholdPolicy::Tertile,
        Policy::Fixed => ThresholdPolicy::Fixed {
            state: parse_cuts("--state-cuts", &a.state_cuts)?,
            gain: parse_cuts("--gain-cuts", &a.gain_cuts)?,
        },
    };
    let method = match a.select {
        Selection::None => None,
        Selection::IgTopK => Some(SelectionMethod::IgTopK),
        Selection::GreedyForward => Some(SelectionMethod::GreedyForward),
    };
    let mut rec = Recorder::start("knowledge", jobs);
    rec.seed(a.seed);
    let m = read_features(&mut rec, &a.features)?;
    if m.catalog != CatalogId::KnowledgeV1.name() {
        log::warn!("features use catalog {} rather than {}", m.catalog, CatalogId::KnowledgeV1.name());
    }
    let records = read_knowledge(&rec.read(&a.knowledge)?[..])?;
    let (records, thresholds) = assign_classes(&records, &policy)?;

    let mut tasks = Vec::new();
    for target in [Target::State, Target::Gain] {
        let full = knowledge_dataset(&m, &records, target)?;
        let (data, selection) = match method {
            Some(method) => {
                let sel = select_features(&full, method, a.budget, &hp, a.k_folds, a.seed)?;
                (full.select_columns(&sel.indices), Some(sel))
            }
            None => (full, None),
        };
        let cv = cross_validate(&hp, &data, a.k_folds, a.seed)?;
        let class_counts = data.class_counts();
        let majority = *class_counts.iter().max().unwrap_or(&0) as f64 / data.len() as f64;
        tasks.push(KnowledgeTask {
            target,
            n: data.len(),
            majority_baseline: majority,
            mean_fold_accuracy: cv.mean_accuracy(),
            class_counts,
            selection,
            report: score(&data.y, &cv.predictions, Level::ALL.len())?,
        });
    }

    let rows: Vec<(String, &EvalReport)> =
        tasks.iter().map(|t| (format!("{} {}", hp.family(), t.target.name()), &t.report)).collect();
    let names: Vec<&str> = Level::ALL.iter().map(|l| l.name()).collect();
    print!("{}", render_table(&rows, &names));
    for t in &tasks {
        println!(
            "{}: n={} majority baseline {:.4}, mean fold accuracy {:.4}",
            t.target.name(),
            t.n,
            t.majority_baseline,
            t.mean_fold_accuracy
        );
    }

    if let Some(out) = &a.report {
        let body = KnowledgeReport {
            protocol: format!("{}-fold stratified CV, pooled out-of-fold predictions", a.k_folds),
            seed: a.seed,
            hyperparams: hp,
            thresholds,
            tasks,
        };
        rec.write(out, &to_json("session-miner-knowledge-report", body))?;
        rec.finish(&manifest_path(out))?;
    }
    Ok(())
}
