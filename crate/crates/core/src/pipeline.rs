//! End-to-end runs: generate, detect, transform, featurize, evaluate, report.
//!
//! Every report written here is a pure function of the configuration.
//! Wall-clock measurements go to `timing.txt` only.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::{CvProtocol, RunConfig};
use crate::error::{Error, Result};
use crate::eval::{
    compare_heads, compare_table, confusion_pgm, eval_unseen, featurize, fmt_pct, latency_table, run_cv,
    stratified_kfold, sweep_input_size, sweep_table, CompareRow, CompareSettings, CvReport, SweepRow, SweepSettings,
    Table, UnseenReport,
};
use crate::features::{ExtractorRegistry, FeatureVector};
use crate::label::EventLabel;
use crate::learn::{as_training, HeadRegistry, TrainedModel};
use crate::rng::{self, Domain};
use crate::spectral::{rasterize, write_pgm, EnergyPeakWindower, Windower};
use crate::synth::{assemble, DatasetManifest, DatasetSample, EventPlan, Split};

/// Pipeline stages in execution order; a run may stop after any of them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Synth,
    Cwt,
    Dataset,
    Features,
    Cv,
    Sweep,
    Compare,
    Unseen,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Synth,
        Stage::Cwt,
        Stage::Dataset,
        Stage::Features,
        Stage::Cv,
        Stage::Sweep,
        Stage::Compare,
        Stage::Unseen,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Synth => "synth",
            Stage::Cwt => "cwt",
            Stage::Dataset => "dataset",
            Stage::Features => "features",
            Stage::Cv => "cv",
            Stage::Sweep => "sweep",
            Stage::Compare => "compare",
            Stage::Unseen => "unseen",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL.into_iter().find(|st| st.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Stage::ALL.iter().map(|s| s.name()).collect();
            format!("unknown stage `{s}` (expected one of {})", names.join(", "))
        })
    }
}

/// Failure of one stage, keeping the underlying error.
#[derive(Debug)]
pub struct StageError {
    pub stage: Stage,
    pub source: Error,
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "stage `{}` failed: {}", self.stage, self.source)
    }
}

impl std::error::Error for StageError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

pub fn windower(cfg: &RunConfig) -> Result<EnergyPeakWindower> {
    Ok(EnergyPeakWindower {
        bank: cfg.bank.build()?,
        width_s: cfg.window_s,
        detection: cfg.detection,
    })
}

fn plan_seed(cfg: &RunConfig, site: u64) -> u64 {
    rng::derive_seed(cfg.seed, Domain::EventPlan, site)
}

/// Generates and windows `count` recordings of `label`. Recordings are
/// dropped after windowing.
pub fn windowed_class(
    cfg: &RunConfig,
    plan: &EventPlan,
    seed: u64,
    label: EventLabel,
    count: usize,
    prefix: &str,
) -> Result<Vec<DatasetSample>> {
    let w = windower(cfg)?;
    (0..count)
        .into_par_iter()
        .map(|i| {
            let rec = plan.recording(&cfg.fiber, cfg.duration_s, label, seed, i, prefix)?;
            Ok(DatasetSample {
                id: rec.id.clone(),
                label,
                source: rec.id.clone(),
                window: w.window(&rec)?,
            })
        })
        .collect()
}

/// The balanced, split dataset described by `cfg`.
pub fn build_samples(cfg: &RunConfig) -> Result<(DatasetManifest, Vec<DatasetSample>)> {
    let seed = plan_seed(cfg, 0);
    let mut all = Vec::new();
    for label in EventLabel::ALL {
        all.extend(windowed_class(cfg, &cfg.events, seed, label, cfg.dataset.per_class, "")?);
    }
    assemble(all, &cfg.split_plan())
}

/// Excavator samples from the unseen site.
pub fn build_unseen(cfg: &RunConfig) -> Result<Vec<DatasetSample>> {
    windowed_class(
        cfg,
        &cfg.unseen_plan(),
        plan_seed(cfg, 1),
        EventLabel::Excavator,
        cfg.unseen.count,
        "unseen-",
    )
}

/// Samples the cross-validation runs over under the configured protocol.
pub fn cv_samples(cfg: &RunConfig, manifest: &DatasetManifest, samples: &[DatasetSample]) -> Vec<DatasetSample> {
    match cfg.eval.protocol {
        CvProtocol::All => samples.to_vec(),
        CvProtocol::TrainSplit => samples
            .iter()
            .zip(&manifest.entries)
            .filter(|(_, e)| e.split == Split::Train)
            .map(|(s, _)| s.clone())
            .collect(),
    }
}

pub fn primary_features(cfg: &RunConfig, samples: &[DatasetSample]) -> Result<Vec<FeatureVector>> {
    let ex = ExtractorRegistry::builtin().create(&cfg.extractor, &cfg.extractor_settings())?;
    featurize(samples, ex.as_ref(), cfg.image_size)
}

pub fn train_primary(cfg: &RunConfig, features: &[FeatureVector]) -> Result<Box<dyn TrainedModel>> {
    let head = HeadRegistry::builtin().create(&cfg.head, &cfg.head_settings())?;
    let (x, y) = as_training(features);
    head.fit(&x, &y)
}

pub fn sweep_settings(cfg: &RunConfig) -> SweepSettings {
    SweepSettings {
        sizes: cfg.eval.sweep_sizes.clone(),
        extractor: cfg.extractor.clone(),
        head: cfg.head.clone(),
        extractors: cfg.extractor_settings(),
        heads: cfg.head_settings(),
        k: cfg.eval.folds,
        seed: cfg.fold_seed(),
    }
}

pub fn compare_settings(cfg: &RunConfig) -> CompareSettings {
    let primary = if cfg.extractor == "imported" { "imported" } else { "convbank" };
    CompareSettings {
        primary: primary.into(),
        image_size: cfg.image_size,
        extractors: cfg.extractor_settings(),
        heads: cfg.head_settings(),
        k: cfg.eval.folds,
        seed: cfg.fold_seed(),
        latency_repeats: cfg.eval.latency_repeats,
    }
}

/// In-memory results of a run; later stages are `None` when the run stopped
/// early.
#[derive(Debug, Default)]
pub struct RunOutput {
    pub output_dir: PathBuf,
    pub manifest: Option<DatasetManifest>,
    pub samples: Vec<DatasetSample>,
    pub features: Vec<FeatureVector>,
    pub cv: Option<CvReport>,
    pub sweep: Option<Vec<SweepRow>>,
    pub compare: Option<Vec<CompareRow>>,
    pub unseen: Option<UnseenReport>,
    pub files: Vec<PathBuf>,
}

struct Writer {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Writer {
    fn bytes(&mut self, name: &str, data: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(&path, data).map_err(|e| Error::io(&path, e))?;
        self.files.push(path);
        Ok(())
    }

    fn text(&mut self, name: &str, s: &str) -> Result<()> {
        self.bytes(name, s.as_bytes())
    }

    fn json(&mut self, name: &str, v: &impl Serialize) -> Result<()> {
        let mut s = serde_json::to_string_pretty(v).expect("report serializes");
        s.push('\n');
        self.text(name, &s)
    }

    fn table(&mut self, stem: &str, t: &Table) -> Result<()> {
        self.text(&format!("{stem}.txt"), &t.to_text())?;
        self.text(&format!("{stem}.csv"), &t.to_csv())
    }
}

fn cv_table(r: &CvReport, title: &str) -> Table {
    let mut t = Table::new(title, &["Fold", "Acc", "F1", "Er"]);
    for (i, m) in r.metrics.folds.iter().enumerate() {
        t.push(vec![(i + 1).to_string(), fmt_pct(m.acc), fmt_pct(m.macro_f1), fmt_pct(m.err)]);
    }
    let (m, s) = (&r.metrics.mean, &r.metrics.std);
    t.push(vec![
        "mean ± std".into(),
        format!("{} ± {}", fmt_pct(m.acc), fmt_pct(s.acc)),
        format!("{} ± {}", fmt_pct(m.macro_f1), fmt_pct(s.macro_f1)),
        format!("{} ± {}", fmt_pct(m.err), fmt_pct(s.err)),
    ]);
    t
}

fn confusion_table(r: &CvReport) -> Table {
    let mut t = Table::new("Average row-normalized confusion matrix (%)", &["truth \\ predicted", "C0", "C1", "C2"]);
    for (label, row) in EventLabel::ALL.iter().zip(r.metrics.avg_confusion) {
        let mut cells = vec![format!("{label} ({})", label.description())];
        cells.extend(row.iter().map(|v| format!("{:.1}", 100.0 * v)));
        t.push(cells);
    }
    t
}

fn unseen_table(r: &UnseenReport) -> Table {
    let mut t = Table::new(
        &format!(
            "Unseen site: accuracy {}%, {} of {} predictions with confidence > {}",
            fmt_pct(r.accuracy),
            r.n_confident,
            r.predictions.len(),
            r.confidence_gate
        ),
        &["Sample", "Truth", "Predicted", "Confidence", "Confident"],
    );
    for p in &r.predictions {
        t.push(vec![
            p.sample_id.clone(),
            p.truth.to_string(),
            p.predicted.to_string(),
            format!("{:.3}", p.confidence),
            if p.confident { "yes".into() } else { "no".into() },
        ]);
    }
    t
}

fn compare_json(rows: &[CompareRow]) -> serde_json::Value {
    rows.iter()
        .map(|r| {
            json!({
                "method": r.method,
                "extractor": r.extractor,
                "head": r.head,
                "metrics": r.metrics,
            })
        })
        .collect()
}

/// Runs the pipeline up to and including `stop_after`, writing reports into
/// `cfg.output_dir`.
pub fn run_pipeline(cfg: &RunConfig, stop_after: Stage) -> Result<RunOutput, StageError> {
    let at = |stage: Stage| move |source: Error| StageError { stage, source };
    cfg.validate().map_err(at(Stage::Synth))?;
    let mut w = Writer {
        dir: cfg.output_dir.clone(),
        files: Vec::new(),
    };
    let mut out = RunOutput {
        output_dir: cfg.output_dir.clone(),
        ..Default::default()
    };
    w.text("config.json", &(cfg.to_json() + "\n")).map_err(at(Stage::Synth))?;

    // synth: the event plan of every recording
    let seed = plan_seed(cfg, 0);
    let mut plan_lines = String::new();
    for label in EventLabel::ALL {
        for i in 0..cfg.dataset.per_class {
            let event = cfg.events.draw_event(&cfg.fiber, label, seed, i);
            plan_lines.push_str(&json!({ "id": format!("{}-{i:03}", label.code()), "label": label, "event": event }).to_string());
            plan_lines.push('\n');
        }
    }
    w.text("recordings.jsonl", &plan_lines).map_err(at(Stage::Synth))?;
    if stop_after == Stage::Synth {
        out.files = w.files;
        return Ok(out);
    }

    let (manifest, samples) = build_samples(cfg).map_err(at(Stage::Cwt))?;
    let images = samples
        .par_iter()
        .map(|s| rasterize(&s.window.scalogram, cfg.image_size))
        .collect::<Result<Vec<_>>>()
        .map_err(at(Stage::Cwt))?;
    for (s, img) in samples.iter().zip(&images) {
        let path = cfg.output_dir.join("scalograms").join(format!("{}.pgm", s.id));
        fs::create_dir_all(path.parent().expect("has parent")).map_err(|e| at(Stage::Cwt)(Error::io(&path, e)))?;
        write_pgm(img, &path).map_err(at(Stage::Cwt))?;
        w.files.push(path);
    }
    out.samples = samples;
    if stop_after == Stage::Cwt {
        out.manifest = Some(manifest);
        out.files = w.files;
        return Ok(out);
    }

    w.text("manifest.jsonl", &manifest.to_jsonl()).map_err(at(Stage::Dataset))?;
    let eval_samples = cv_samples(cfg, &manifest, &out.samples);
    out.manifest = Some(manifest);
    if stop_after == Stage::Dataset {
        out.files = w.files;
        return Ok(out);
    }

    let features = primary_features(cfg, &eval_samples).map_err(at(Stage::Features))?;
    out.features = features;
    if stop_after == Stage::Features {
        out.files = w.files;
        return Ok(out);
    }

    let labels: Vec<EventLabel> = out.features.iter().map(|f| f.label).collect();
    let cv = (|| {
        let plan = stratified_kfold(&labels, cfg.eval.folds, cfg.fold_seed())?;
        let head = HeadRegistry::builtin().create(&cfg.head, &cfg.head_settings())?;
        let report = run_cv(&out.features, head.as_ref(), &plan)?;
        w.json("folds.json", &plan)?;
        w.json("cv.json", &report)?;
        w.table("cv", &cv_table(&report, &format!("{} + {} cross-validation", cfg.extractor, cfg.head)))?;
        w.table("confusion", &confusion_table(&report))?;
        w.bytes("confusion.pgm", &confusion_pgm(&report.metrics.avg_confusion, 32).encode())?;
        Ok(report)
    })()
    .map_err(at(Stage::Cv))?;
    out.cv = Some(cv);
    if stop_after == Stage::Cv {
        out.files = w.files;
        return Ok(out);
    }

    let sweep = (|| {
        let rows = sweep_input_size(&eval_samples, &sweep_settings(cfg))?;
        w.table("sweep", &sweep_table(&rows))?;
        w.json("sweep.json", &rows)?;
        Ok(rows)
    })()
    .map_err(at(Stage::Sweep))?;
    out.sweep = Some(sweep);
    if stop_after == Stage::Sweep {
        out.files = w.files;
        return Ok(out);
    }

    let compare = (|| {
        let rows = compare_heads(&eval_samples, &compare_settings(cfg))?;
        w.table("compare", &compare_table(&rows))?;
        w.json("compare.json", &compare_json(&rows))?;
        w.text("timing.txt", &latency_table(&rows).to_text())?;
        Ok(rows)
    })()
    .map_err(at(Stage::Compare))?;
    out.compare = Some(compare);
    if stop_after == Stage::Compare {
        out.files = w.files;
        return Ok(out);
    }

    let unseen = (|| {
        let model = train_primary(cfg, &out.features)?;
        let unseen_samples = build_unseen(cfg)?;
        let unseen_fv = primary_features(cfg, &unseen_samples)?;
        let train_ids: Vec<String> = out.features.iter().map(|f| f.sample_id.clone()).collect();
        let report = eval_unseen(model.as_ref(), &unseen_fv, &train_ids, cfg.eval.confidence_gate)?;
        w.table("unseen", &unseen_table(&report))?;
        w.json("unseen.json", &report)?;
        Ok(report)
    })()
    .map_err(at(Stage::Unseen))?;
    out.unseen = Some(unseen);
    out.files = w.files;
    Ok(out)
}

/// Files whose content must not depend on timing or thread count.
pub fn deterministic_reports(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).map_err(|e| Error::io(&d, e))? {
            let p = entry.map_err(|e| Error::io(&d, e))?.path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().is_some_and(|n| n != "timing.txt") {
                out.push(p);
            }
        }
    }
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(dir: &Path) -> RunConfig {
        let mut cfg = RunConfig {
            output_dir: dir.to_path_buf(),
            ..RunConfig::default()
        };
        cfg.fiber = crate::synth::FiberSpec::desk(100.0);
        cfg.dataset.per_class = 6;
        cfg.eval.folds = 3;
        cfg.eval.sweep_sizes = vec![32];
        cfg.eval.latency_repeats = 1;
        cfg.image_size = 32;
        cfg.convbank.n_kernels = 8;
        cfg.heads.forest.n_trees = 10;
        cfg.heads.svm.epochs = 5;
        cfg.heads.softmax.epochs = 20;
        cfg.unseen.count = 3;
        cfg
    }

    #[test]
    fn stage_names_round_trip() {
        for s in Stage::ALL {
            assert_eq!(s.name().parse::<Stage>().unwrap(), s);
        }
        assert!("train".parse::<Stage>().is_err());
    }

    #[test]
    fn small_run_writes_every_report() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small(dir.path());
        let out = run_pipeline(&cfg, Stage::Unseen).unwrap();
        assert_eq!(out.samples.len(), 18);
        assert_eq!(out.compare.as_ref().unwrap().len(), 7);
        assert_eq!(out.sweep.as_ref().unwrap().len(), 1);
        for name in ["config.json", "manifest.jsonl", "cv.txt", "confusion.pgm", "sweep.csv", "compare.json", "unseen.json", "timing.txt"] {
            assert!(dir.path().join(name).exists(), "{name}");
        }
        assert!(out.unseen.unwrap().predictions.iter().all(|p| p.sample_id.starts_with("unseen-")));
    }

    #[test]
    fn early_stop_after_cwt() {
        let dir = tempfile::tempdir().unwrap();
        let out = run_pipeline(&small(dir.path()), Stage::Cwt).unwrap();
        assert!(out.cv.is_none());
        assert!(dir.path().join("scalograms").join("C2-005.pgm").exists());
        assert!(!dir.path().join("manifest.jsonl").exists());
    }

    #[test]
    fn stage_failure_names_the_stage() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small(dir.path());
        cfg.extractor = "imported".into();
        cfg.embeddings = Some(dir.path().join("missing.csv"));
        let e = run_pipeline(&cfg, Stage::Unseen).unwrap_err();
        assert_eq!(e.stage, Stage::Features);
        assert!(e.to_string().contains("features"));
    }
}
