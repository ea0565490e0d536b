use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use fiber_sentinel::config::RunConfig;
use fiber_sentinel::eval::{
    compare_heads, compare_table, featurize, fmt_pct, latency_table, run_cv, stratified_kfold, sweep_input_size,
    sweep_table,
};
use fiber_sentinel::features::ExtractorRegistry;
use fiber_sentinel::learn::{load_model, save_model, HeadRegistry};
use fiber_sentinel::pipeline::{self, Stage};
use fiber_sentinel::rng::{self, Domain};
use fiber_sentinel::sense::detect;
use fiber_sentinel::spectral::{rasterize, write_pgm, Windower};
use fiber_sentinel::synth::{read_recording, write_recording, DatasetSample, Split};
use fiber_sentinel::{Error, EventLabel};

#[derive(Parser, Debug)]
#[command(name = "fiber-sentinel", version, about = "Threat classification for distributed fiber sensing")]
struct Cli {
    #[command(flatten)]
    global: Global,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// JSON run configuration; unknown keys are rejected.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the configured top-level seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (0 = all cores).
    #[arg(long, global = true, env = "FIBER_SENTINEL_THREADS")]
    threads: Option<usize>,

    /// Machine-readable output on stdout.
    #[arg(long, global = true)]
    json: bool,

    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate synthetic recordings from the configured event plan.
    Synth {
        /// C0, C1 or C2; all three when omitted.
        #[arg(long)]
        label: Option<String>,
        /// Recordings per label.
        #[arg(long, default_value_t = 1)]
        count: usize,
    },
    /// Detect and localize disturbances in a recording.
    Detect {
        recording: PathBuf,
        /// Also write per-segment max rolling std as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Window a recording and write its scalogram image.
    Scalogram {
        recording: PathBuf,
        /// Segment to transform; the most disturbed one when omitted.
        #[arg(long)]
        segment: Option<usize>,
        #[arg(long)]
        size: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the balanced dataset and write its manifest.
    Dataset,
    /// Train the configured head on the training split and save the model.
    Train {
        #[arg(long)]
        out: PathBuf,
    },
    /// Stratified cross-validation of the configured extractor and head.
    Eval,
    /// Cross-validation across image sizes.
    Sweep,
    /// Seven-row classifier comparison.
    Compare,
    /// Classify a recording or a feature vector with a saved model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        /// Recording header (.json) or a CSV / whitespace list of feature values.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 0.6)]
        confidence_gate: f64,
    },
    /// Full run: synth, cwt, dataset, features, cv, sweep, compare, unseen.
    Pipeline {
        /// Last stage to run.
        #[arg(long, default_value = "unseen")]
        stage: Stage,
    },
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_config() {
            Failure::Config(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn load_config(g: &Global) -> CliResult<RunConfig> {
    let mut cfg = match &g.config {
        Some(p) => RunConfig::load(p).map_err(|e| Failure::Config(e.to_string()))?,
        None => RunConfig::default(),
    };
    if let Some(seed) = g.seed {
        cfg.seed = seed;
    }
    if let Some(dir) = &g.output_dir {
        cfg.output_dir = dir.clone();
    }
    cfg.validate().map_err(|e| Failure::Config(e.to_string()))?;
    Ok(cfg)
}

fn emit(g: &Global, value: serde_json::Value, text: &str) {
    if g.json {
        println!("{}", serde_json::to_string_pretty(&value).expect("json value serializes"));
    } else {
        print!("{text}");
        if !text.ends_with('\n') {
            println!();
        }
    }
}

fn mkdir(dir: &Path) -> CliResult {
    fs::create_dir_all(dir).map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))
}

fn write_text(path: &Path, text: &str) -> CliResult {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        mkdir(parent)?;
    }
    fs::write(path, text).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn parse_label(s: &str) -> CliResult<EventLabel> {
    s.parse().map_err(|_| Failure::Config(format!("unknown label `{s}` (expected C0, C1 or C2)")))
}

fn cmd_synth(g: &Global, label: Option<String>, count: usize) -> CliResult {
    let cfg = load_config(g)?;
    let labels = match label {
        Some(l) => vec![parse_label(&l)?],
        None => EventLabel::ALL.to_vec(),
    };
    let seed = rng::derive_seed(cfg.seed, Domain::EventPlan, 0);
    let dir = cfg.output_dir.join("recordings");
    mkdir(&dir)?;
    let mut summary = Vec::new();
    let mut text = String::new();
    for label in labels {
        for i in 0..count {
            let rec = cfg.events.recording(&cfg.fiber, cfg.duration_s, label, seed, i, "")?;
            let path = dir.join(format!("{}.json", rec.id));
            write_recording(&rec, &path)?;
            text += &format!(
                "{}: {} segments x {} samples, {} event(s), seed {} -> {}\n",
                rec.id,
                rec.n_segments(),
                rec.n_samples,
                rec.events.len(),
                rec.seed,
                path.display()
            );
            summary.push(json!({
                "id": rec.id,
                "path": path,
                "segments": rec.n_segments(),
                "samples": rec.n_samples,
                "events": rec.events,
                "seed": rec.seed,
            }));
        }
    }
    let lines: String = summary.iter().map(|v| format!("{v}\n")).collect();
    write_text(&dir.join("recordings.jsonl"), &lines)?;
    emit(g, json!({ "recordings": summary }), &text);
    Ok(())
}

fn cmd_detect(g: &Global, path: &Path, csv: Option<PathBuf>) -> CliResult {
    let cfg = load_config(g)?;
    let rec = read_recording(path)?;
    let report = detect(&rec, &cfg.detection)?;
    if let Some(csv) = csv {
        write_text(&csv, &report.max_std_csv(rec.fiber.gauge_len_m))?;
    }
    let mut text = format!("{}: {} flagged segment(s)\n", rec.id, report.flagged.len());
    for f in report.localize() {
        text += &format!(
            "  segment {} at {:.1} m, onset {:.2} s, peak std {:.4} rad\n",
            f.segment_index, f.position_m, f.onset_s, f.peak_std
        );
    }
    emit(g, serde_json::to_value(&report).expect("report serializes"), &text);
    Ok(())
}

fn cmd_scalogram(g: &Global, path: &Path, segment: Option<usize>, size: Option<usize>, out: &Path) -> CliResult {
    let cfg = load_config(g)?;
    let rec = read_recording(path)?;
    let w = pipeline::windower(&cfg)?;
    let seg = match segment {
        Some(s) if s >= rec.n_segments() => {
            return Err(Failure::Config(format!("segment {s} out of range (recording has {})", rec.n_segments())))
        }
        Some(s) => s,
        None => w.select_segment(&rec)?,
    };
    let ws = w.window_segment(&rec, seg)?;
    let img = rasterize(&ws.scalogram, size.unwrap_or(cfg.image_size))?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        mkdir(parent)?;
    }
    write_pgm(&img, out)?;
    let text = format!(
        "{}: segment {seg}, window start {} ({} samples), {}x{} image -> {}\n",
        rec.id,
        ws.start,
        ws.raw.len(),
        img.size,
        img.size,
        out.display()
    );
    emit(
        g,
        json!({
            "recording": rec.id,
            "segment": seg,
            "window_start": ws.start,
            "window_center": ws.center,
            "size": img.size,
            "norm_min": img.norm_min,
            "norm_max": img.norm_max,
            "out": out,
        }),
        &text,
    );
    Ok(())
}

fn cmd_dataset(g: &Global) -> CliResult {
    let cfg = load_config(g)?;
    let (manifest, _) = pipeline::build_samples(&cfg)?;
    mkdir(&cfg.output_dir)?;
    let path = cfg.output_dir.join("manifest.jsonl");
    manifest.write(&path)?;
    let (train, test) = (manifest.split_count(Split::Train), manifest.split_count(Split::Test));
    emit(
        g,
        json!({ "samples": manifest.len(), "train": train, "test": test, "manifest": path }),
        &format!("{} samples ({train} train / {test} test) -> {}\n", manifest.len(), path.display()),
    );
    Ok(())
}

fn cmd_train(g: &Global, out: &Path) -> CliResult {
    let cfg = load_config(g)?;
    let (manifest, samples) = pipeline::build_samples(&cfg)?;
    let train: Vec<DatasetSample> = samples
        .into_iter()
        .zip(&manifest.entries)
        .filter(|(_, e)| e.split == Split::Train)
        .map(|(s, _)| s)
        .collect();
    let features = pipeline::primary_features(&cfg, &train)?;
    let model = pipeline::train_primary(&cfg, &features)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        mkdir(parent)?;
    }
    save_model(model.as_ref(), out)?;
    emit(
        g,
        json!({ "head": model.head(), "extractor": cfg.extractor, "dim": model.dim(), "n_train": train.len(), "model": out }),
        &format!(
            "{} on {} features (dim {}), {} training samples -> {}\n",
            model.head(),
            cfg.extractor,
            model.dim(),
            train.len(),
            out.display()
        ),
    );
    Ok(())
}

fn eval_samples(cfg: &RunConfig) -> CliResult<Vec<DatasetSample>> {
    let (manifest, samples) = pipeline::build_samples(cfg)?;
    Ok(pipeline::cv_samples(cfg, &manifest, &samples))
}

fn cmd_eval(g: &Global) -> CliResult {
    let cfg = load_config(g)?;
    let features = pipeline::primary_features(&cfg, &eval_samples(&cfg)?)?;
    let labels: Vec<EventLabel> = features.iter().map(|f| f.label).collect();
    let plan = stratified_kfold(&labels, cfg.eval.folds, cfg.fold_seed())?;
    let head = HeadRegistry::builtin().create(&cfg.head, &cfg.head_settings())?;
    let report = run_cv(&features, head.as_ref(), &plan)?;
    let (m, s) = (&report.metrics.mean, &report.metrics.std);
    let mut text = format!(
        "{} + {}, {}-fold: Acc {} ± {}, F1 {} ± {}, Er {}\n",
        cfg.extractor,
        cfg.head,
        cfg.eval.folds,
        fmt_pct(m.acc),
        fmt_pct(s.acc),
        fmt_pct(m.macro_f1),
        fmt_pct(s.macro_f1),
        fmt_pct(m.err)
    );
    for (label, row) in EventLabel::ALL.iter().zip(report.metrics.avg_confusion) {
        text += &format!("  {label}: {:.3} {:.3} {:.3}\n", row[0], row[1], row[2]);
    }
    emit(g, serde_json::to_value(&report).expect("report serializes"), &text);
    Ok(())
}

fn cmd_sweep(g: &Global) -> CliResult {
    let cfg = load_config(g)?;
    let rows = sweep_input_size(&eval_samples(&cfg)?, &pipeline::sweep_settings(&cfg))?;
    emit(g, serde_json::to_value(&rows).expect("rows serialize"), &sweep_table(&rows).to_text());
    Ok(())
}

fn cmd_compare(g: &Global) -> CliResult {
    let cfg = load_config(g)?;
    let rows = compare_heads(&eval_samples(&cfg)?, &pipeline::compare_settings(&cfg))?;
    let text = format!("{}\n{}", compare_table(&rows).to_text(), latency_table(&rows).to_text());
    emit(g, serde_json::to_value(&rows).expect("rows serialize"), &text);
    Ok(())
}

fn read_vector(path: &Path) -> CliResult<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Failure::Runtime(format!("{}: bad feature value `{t}`", path.display())))
        })
        .collect()
}

fn cmd_predict(g: &Global, model_path: &Path, input: &Path, gate: f64) -> CliResult {
    if !gate.is_finite() || gate < 0.0 {
        return Err(Failure::Config(format!("confidence gate {gate} must be non-negative")));
    }
    let model = load_model(model_path)?;
    let is_recording = input.extension().is_some_and(|e| e == "json");
    let (source, x) = if is_recording {
        let cfg = load_config(g)?;
        let rec = read_recording(input)?;
        let w = pipeline::windower(&cfg)?;
        let sample = DatasetSample {
            id: rec.id.clone(),
            label: rec.label(),
            source: rec.id.clone(),
            window: w.window(&rec)?,
        };
        let ex = ExtractorRegistry::builtin().create(&cfg.extractor, &cfg.extractor_settings())?;
        let fv = featurize(std::slice::from_ref(&sample), ex.as_ref(), cfg.image_size)?;
        (rec.id, fv.into_iter().next().expect("one sample").values)
    } else {
        (input.display().to_string(), read_vector(input)?)
    };
    let p = model.predict(&x)?;
    let confident = p.is_confident(gate);
    let scores: serde_json::Map<String, serde_json::Value> =
        EventLabel::ALL.iter().zip(p.scores).map(|(l, s)| (l.code().to_string(), json!(s))).collect();
    let text = format!(
        "{source}: {} ({}), confidence {:.3}{}\n  scores C0 {:.3}  C1 {:.3}  C2 {:.3}\n",
        p.label,
        p.label.description(),
        p.confidence,
        if confident { "" } else { " (below gate)" },
        p.scores[0],
        p.scores[1],
        p.scores[2]
    );
    emit(
        g,
        json!({
            "input": source,
            "label": p.label,
            "confidence": p.confidence,
            "scores": scores,
            "confident": confident,
            "confidence_gate": gate,
        }),
        &text,
    );
    Ok(())
}

fn cmd_pipeline(g: &Global, stage: Stage) -> CliResult {
    let cfg = load_config(g)?;
    let out = pipeline::run_pipeline(&cfg, stage).map_err(|e| {
        if e.source.is_config() {
            Failure::Config(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    })?;
    let mut text = format!("stopped after {stage}; {} file(s) in {}\n", out.files.len(), out.output_dir.display());
    if let Some(cv) = &out.cv {
        text += &format!("cv: Acc {} ± {}\n", fmt_pct(cv.metrics.mean.acc), fmt_pct(cv.metrics.std.acc));
    }
    if let Some(rows) = &out.compare {
        text += &compare_table(rows).to_text();
        text.push('\n');
    }
    if let Some(u) = &out.unseen {
        text += &format!("unseen: accuracy {}%, {} confident\n", fmt_pct(u.accuracy), u.n_confident);
    }
    emit(
        g,
        json!({
            "stage": stage.name(),
            "output_dir": out.output_dir,
            "files": out.files,
            "cv_acc": out.cv.as_ref().map(|c| c.metrics.mean.acc),
            "unseen_acc": out.unseen.as_ref().map(|u| u.accuracy),
        }),
        &text,
    );
    Ok(())
}

fn run(cli: Cli) -> CliResult {
    let g = &cli.global;
    match cli.command {
        Command::Synth { label, count } => cmd_synth(g, label, count),
        Command::Detect { recording, csv } => cmd_detect(g, &recording, csv),
        Command::Scalogram {
            recording,
            segment,
            size,
            out,
        } => cmd_scalogram(g, &recording, segment, size, &out),
        Command::Dataset => cmd_dataset(g),
        Command::Train { out } => cmd_train(g, &out),
        Command::Eval => cmd_eval(g),
        Command::Sweep => cmd_sweep(g),
        Command::Compare => cmd_compare(g),
        Command::Predict {
            model,
            input,
            confidence_gate,
        } => cmd_predict(g, &model, &input, confidence_gate),
        Command::Pipeline { stage } => cmd_pipeline(g, stage),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.global.threads.unwrap_or(0))
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(1);
        }
    };
    match pool.install(|| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
