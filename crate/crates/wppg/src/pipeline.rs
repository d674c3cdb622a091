//! Stage orchestration from a manifest to report tables.
//!
//! Every stage reads its inputs from disk and writes its outputs to disk,
//! so any stage can be rerun on its own. `run_all` skips a stage whose
//! stamp (the settings it and its upstream stages ran with) is unchanged.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::Serialize;
use wppg_core::afnet::{self, Prediction};
use wppg_core::entropy::{entropy_report, sampen};
use wppg_core::metrics::{confusion, per_class_metrics, roc_auc, weighted_metrics, ConfusionMatrix, Metrics};
use wppg_core::restorer::{restore, train_cyclegan, CycleGanState};
use wppg_core::sigproc::{preprocess_recording, Modality, Quality, Segment, SourceKey};

use crate::checkpoint;
use crate::config::PipelineConfig;
use crate::error::{data_err, CliError, CliResult};
use crate::ingest::{self, ResolvedDataset};
use crate::report::{self, Branch, AF_CLASSES, QUALITY_CLASSES, Q_ORDER};
use crate::segstore::{self, StoredSegment};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Ingest,
    Preprocess,
    QcTrain,
    QcApply,
    RestoreTrain,
    Restore,
    ClfTrain,
    Evaluate,
    EntropyReport,
}

impl Stage {
    pub const ALL: [Stage; 9] = [
        Stage::Ingest,
        Stage::Preprocess,
        Stage::QcTrain,
        Stage::QcApply,
        Stage::RestoreTrain,
        Stage::Restore,
        Stage::ClfTrain,
        Stage::Evaluate,
        Stage::EntropyReport,
    ];

    /// Subcommand name.
    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Preprocess => "preprocess",
            Stage::QcTrain => "qc-train",
            Stage::QcApply => "qc-apply",
            Stage::RestoreTrain => "restore-train",
            Stage::Restore => "restore",
            Stage::ClfTrain => "clf-train",
            Stage::Evaluate => "evaluate",
            Stage::EntropyReport => "entropy-report",
        }
    }

    fn upstream(self) -> Option<Stage> {
        match self {
            Stage::Ingest => None,
            Stage::Preprocess => Some(Stage::Ingest),
            Stage::QcTrain => Some(Stage::Preprocess),
            Stage::QcApply => Some(Stage::QcTrain),
            Stage::RestoreTrain => Some(Stage::QcApply),
            Stage::Restore => Some(Stage::RestoreTrain),
            Stage::ClfTrain => Some(Stage::Restore),
            Stage::Evaluate => Some(Stage::ClfTrain),
            Stage::EntropyReport => Some(Stage::Restore),
        }
    }
}

/// Where each artifact lives under the output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub out: PathBuf,
    pub checkpoints: PathBuf,
}

impl Layout {
    pub fn new(cfg: &PipelineConfig) -> Self {
        Self {
            out: cfg.paths.out_dir.clone(),
            checkpoints: cfg.checkpoint_dir(),
        }
    }

    pub fn dataset(&self) -> PathBuf {
        self.out.join("ingest/dataset.json")
    }

    pub fn segments(&self, modality: Modality) -> PathBuf {
        self.out.join(format!("preprocess/{}.wseg", modality.as_str().to_lowercase()))
    }

    pub fn acceptable(&self, modality: Modality) -> PathBuf {
        self.out
            .join(format!("qc/{}_acceptable.wseg", modality.as_str().to_lowercase()))
    }

    pub fn gate(&self) -> PathBuf {
        self.checkpoints.join("quality_gate.opnn")
    }

    pub fn restorer(&self) -> PathBuf {
        self.checkpoints.join("restorer.opnn")
    }

    pub fn restored(&self, pass: usize) -> PathBuf {
        self.out.join(format!("restore/ppg_pass{pass}.wseg"))
    }

    pub fn classifier(&self, branch: Branch, split: u8, q: usize) -> PathBuf {
        self.checkpoints.join(format!("clf_{}.opnn", report::stem(branch, split, q)))
    }

    pub fn log(&self, name: &str) -> PathBuf {
        self.out.join(format!("logs/{name}.csv"))
    }

    pub fn report(&self, name: &str) -> PathBuf {
        self.out.join("reports").join(name)
    }

    fn stamp(&self, stage: Stage) -> PathBuf {
        self.out.join(format!("stamps/{}.json", stage.name()))
    }
}

fn require(path: &Path, stage: Stage) -> CliResult<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::MissingArtifact {
            path: path.to_path_buf(),
            stage: stage.name(),
        })
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    report::write_text(path, &(serde_json::to_string_pretty(value).expect("serializable") + "\n"))
}

/// Branches evaluated for a restorer pass count; with no restoration only
/// the raw PPG branch runs.
pub fn branches(passes: usize) -> Vec<Branch> {
    if passes == 0 {
        vec![Branch::PpgRaw]
    } else {
        Branch::ALL.to_vec()
    }
}

fn seed_for(base: u64, salt: u64) -> u64 {
    base.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(salt)
}

#[derive(Debug, Serialize)]
struct PreprocessSummary {
    ppg_segments: usize,
    ecg_segments: usize,
    unpaired_dropped: usize,
    af: usize,
    non_af: usize,
    unlabeled: usize,
}

#[derive(Debug, Serialize)]
struct GateSummary {
    ingested: usize,
    acceptable: usize,
    corrupted: usize,
}

#[derive(Debug, Default, Serialize)]
struct EvaluateSummary {
    models: usize,
    undefined_cells: usize,
    roc_skipped: usize,
}

pub struct Pipeline {
    pub cfg: PipelineConfig,
    pub layout: Layout,
    /// Print progress to stderr.
    pub verbose: bool,
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig) -> CliResult<Self> {
        cfg.validate()?;
        let layout = Layout::new(&cfg);
        Ok(Self {
            cfg,
            layout,
            verbose: true,
        })
    }

    fn say(&self, msg: impl AsRef<str>) {
        if self.verbose {
            eprintln!("{}", msg.as_ref());
        }
    }

    /// Settings a stage's outputs depend on, its upstream stages' included.
    fn stamp(&self, stage: Stage) -> CliResult<String> {
        let c = &self.cfg;
        let own = match stage {
            Stage::Ingest => {
                let text = std::fs::read_to_string(&c.paths.manifest).map_err(CliError::io(&c.paths.manifest))?;
                serde_json::json!({"manifest": c.paths.manifest, "content": text})
            }
            Stage::Preprocess => serde_json::json!(c.preprocess),
            Stage::QcTrain => serde_json::json!({"gate": c.quality_gate, "seed": c.seed}),
            Stage::QcApply => serde_json::json!({}),
            Stage::RestoreTrain => {
                let mut r = c.restorer.clone();
                r.passes = usize::from(r.passes > 0);
                serde_json::json!({"restorer": r, "entropy": c.entropy, "seed": c.seed})
            }
            Stage::Restore => serde_json::json!({"passes": c.restorer.passes}),
            Stage::ClfTrain => serde_json::json!({"classifier": c.classifier, "splits": c.test_splits, "seed": c.seed}),
            Stage::Evaluate => serde_json::json!({}),
            Stage::EntropyReport => serde_json::json!({"entropy": c.entropy}),
        };
        let mut s = match stage.upstream() {
            Some(up) => self.stamp(up)?,
            None => String::new(),
        };
        s.push_str(&format!("{}: {own}\n", stage.name()));
        Ok(s)
    }

    pub fn write_effective_config(&self) -> CliResult<()> {
        report::write_text(&self.layout.out.join("effective_config.json"), &self.cfg.effective_json())
    }

    /// Runs one stage unconditionally and records its stamp.
    pub fn run_stage(&self, stage: Stage) -> CliResult<()> {
        self.say(format!("[{}]", stage.name()));
        match stage {
            Stage::Ingest => self.ingest(),
            Stage::Preprocess => self.preprocess(),
            Stage::QcTrain => self.qc_train(),
            Stage::QcApply => self.qc_apply(),
            Stage::RestoreTrain => self.restore_train(),
            Stage::Restore => self.restore(),
            Stage::ClfTrain => self.clf_train(),
            Stage::Evaluate => self.evaluate(),
            Stage::EntropyReport => self.entropy_report(),
        }?;
        report::write_text(&self.layout.stamp(stage), &self.stamp(stage)?)
    }

    /// Every stage in order, skipping those already run with the same
    /// settings.
    pub fn run_all(&self) -> CliResult<()> {
        self.write_effective_config()?;
        for stage in Stage::ALL {
            let path = self.layout.stamp(stage);
            let current = self.stamp(stage)?;
            if std::fs::read_to_string(&path).ok().as_deref() == Some(current.as_str()) {
                self.say(format!("[{}] up to date", stage.name()));
                continue;
            }
            self.run_stage(stage)?;
        }
        Ok(())
    }

    fn ingest(&self) -> CliResult<()> {
        let ds = ingest::load_manifest(&self.cfg.paths.manifest)?;
        self.say(format!(
            "  {} recordings, {} annotations, {} quality annotations",
            ds.recordings.len(),
            ds.annotations.len(),
            ds.quality_annotations.len()
        ));
        write_json(&self.layout.dataset(), &ds)
    }

    fn load_dataset(&self) -> CliResult<ResolvedDataset> {
        let path = self.layout.dataset();
        require(&path, Stage::Ingest)?;
        let text = std::fs::read_to_string(&path).map_err(CliError::io(&path))?;
        serde_json::from_str(&text).map_err(|e| data_err(format!("{}: {e}", path.display())))
    }

    fn preprocess(&self) -> CliResult<()> {
        let ds = self.load_dataset()?;
        let pcfg = self.cfg.preprocess_config();
        let w = pcfg.window_s;
        let mut by_mod: [BTreeMap<SourceKey, StoredSegment>; 2] = [BTreeMap::new(), BTreeMap::new()];
        for r in &ds.recordings {
            let mut rec = r.load()?;
            // Drop leading samples so windows fall on a grid shared by every
            // recording of the subject.
            let first = (rec.start_time / w - 1e-9).ceil().max(0.0);
            let skip = (((first * w - rec.start_time) * rec.sample_rate_hz).round() as usize).min(rec.samples.len());
            rec.samples.drain(..skip);
            rec.start_time = first * w;
            let segs = preprocess_recording(&rec, &pcfg)
                .map_err(|e| data_err(format!("{}: {e}", r.path.display())))?;
            let slot = usize::from(rec.modality == Modality::Ppg);
            for mut s in segs {
                s.source.window += first as usize;
                let t0 = s.source.window as f64 * w;
                s.label = ingest::window_label(&ds.annotations, &s.source.subject_id, t0, t0 + w);
                let quality_truth = (rec.modality == Modality::Ppg)
                    .then(|| ingest::window_quality(&ds.quality_annotations, &s.source.subject_id, t0, t0 + w))
                    .flatten();
                let key = s.source.clone();
                let item = StoredSegment {
                    segment: s,
                    split: r.split,
                    quality_truth,
                };
                if by_mod[slot].insert(key.clone(), item).is_some() {
                    return Err(data_err(format!(
                        "subject {:?} has two {} recordings covering window {}",
                        key.subject_id,
                        rec.modality.as_str(),
                        key.window
                    )));
                }
            }
        }
        let [ecg, ppg] = by_mod;
        let paired: BTreeSet<&SourceKey> = ecg.keys().filter(|k| ppg.contains_key(*k)).collect();
        let dropped = ecg.len() + ppg.len() - 2 * paired.len();
        let keep = |m: &BTreeMap<SourceKey, StoredSegment>| -> Vec<StoredSegment> {
            m.iter().filter(|(k, _)| paired.contains(k)).map(|(_, v)| v.clone()).collect()
        };
        let (ecg, ppg) = (keep(&ecg), keep(&ppg));
        let count = |l| ppg.iter().filter(|s| s.segment.label == l).count();
        use wppg_core::sigproc::Label;
        let summary = PreprocessSummary {
            ppg_segments: ppg.len(),
            ecg_segments: ecg.len(),
            unpaired_dropped: dropped,
            af: count(Label::Af),
            non_af: count(Label::NonAf),
            unlabeled: count(Label::Unlabeled),
        };
        self.say(format!("  {summary:?}"));
        segstore::write(&self.layout.segments(Modality::Ppg), &ppg)?;
        segstore::write(&self.layout.segments(Modality::Ecg), &ecg)?;
        write_json(&self.layout.out.join("preprocess/summary.json"), &summary)
    }

    fn gate_path(&self) -> PathBuf {
        self.cfg.quality_gate.model_path.clone().unwrap_or_else(|| self.layout.gate())
    }

    fn qc_train(&self) -> CliResult<()> {
        if let Some(p) = &self.cfg.quality_gate.model_path {
            self.say(format!("  using the configured gate {}", p.display()));
            return require(p, Stage::QcTrain);
        }
        let ppg = segstore::read(&self.layout.segments(Modality::Ppg), Stage::Preprocess.name())?;
        let (signals, classes): (Vec<&[f32]>, Vec<usize>) = ppg
            .iter()
            .filter_map(|s| {
                s.quality_truth
                    .map(|q| (s.segment.samples.as_slice(), usize::from(q == Quality::Corrupted)))
            })
            .unzip();
        if !(classes.contains(&0) && classes.contains(&1)) {
            return Err(data_err(
                "training the quality gate needs quality annotations covering both acceptable and corrupted PPG \
                 windows; add them to the manifest or set quality_gate.model_path",
            ));
        }
        let tc = self.cfg.quality_gate.train.train_config(seed_for(self.cfg.seed, 1));
        let mut model = tc.build_model()?;
        let log = afnet::train(&mut model, &signals, &classes, &tc)?;
        self.say(format!("  trained on {} windows", signals.len()));
        report::write_text(
            &self.layout.log("qc_train"),
            &report::log_csv("epoch,loss,accuracy", log.iter().map(|e| vec![e.loss, e.accuracy])),
        )?;
        checkpoint::save_classifier(&self.layout.gate(), &model)
    }

    fn qc_apply(&self) -> CliResult<()> {
        let gate_path = self.gate_path();
        require(&gate_path, Stage::QcTrain)?;
        let gate = checkpoint::load_classifier(&gate_path)?;
        let mut ppg = segstore::read(&self.layout.segments(Modality::Ppg), Stage::Preprocess.name())?;
        let ecg = segstore::read(&self.layout.segments(Modality::Ecg), Stage::Preprocess.name())?;
        let ingested = ppg.len();
        let (mut preds, mut truth) = (Vec::new(), Vec::new());
        for s in ppg.iter_mut() {
            let corrupted = afnet::predict(&gate, &s.segment)?.class == 1;
            s.segment.quality = if corrupted { Quality::Corrupted } else { Quality::Acceptable };
            if let Some(t) = s.quality_truth {
                preds.push(usize::from(corrupted));
                truth.push(usize::from(t == Quality::Corrupted));
            }
        }
        let (acceptable, corrupted): (Vec<StoredSegment>, Vec<StoredSegment>) =
            ppg.into_iter().partition(|s| s.segment.quality == Quality::Acceptable);
        if acceptable.len() + corrupted.len() != ingested {
            return Err(data_err("quality gate lost segments"));
        }
        // Corrupted PPG windows take their paired ECG windows with them.
        let keep: BTreeSet<&SourceKey> = acceptable.iter().map(|s| &s.segment.source).collect();
        let ecg: Vec<StoredSegment> = ecg
            .into_iter()
            .filter(|s| keep.contains(&s.segment.source))
            .map(|mut s| {
                s.segment.quality = Quality::Acceptable;
                s
            })
            .collect();
        if ecg.len() != acceptable.len() {
            return Err(data_err("ECG and PPG windows are no longer paired; rerun `wppg preprocess`"));
        }
        let summary = GateSummary {
            ingested,
            acceptable: acceptable.len(),
            corrupted: corrupted.len(),
        };
        self.say(format!("  {summary:?}"));
        if !truth.is_empty() {
            let cm = confusion(&preds, &truth, 1)?;
            let per = per_class_metrics(&cm);
            let w = weighted_metrics(&per, &[cm.negatives(), cm.positives()]).unwrap_or_default();
            report::write_text(
                &self.layout.report("quality_gate_metrics.csv"),
                &report::metrics_csv(QUALITY_CLASSES, &per, &w),
            )?;
            report::write_text(
                &self.layout.report("quality_gate_confusion.csv"),
                &report::confusion_csv(QUALITY_CLASSES, &cm),
            )?;
        }
        segstore::write(&self.layout.acceptable(Modality::Ppg), &acceptable)?;
        segstore::write(&self.layout.acceptable(Modality::Ecg), &ecg)?;
        write_json(&self.layout.out.join("qc/summary.json"), &summary)
    }

    fn read_acceptable(&self, modality: Modality) -> CliResult<Vec<StoredSegment>> {
        segstore::read(&self.layout.acceptable(modality), Stage::QcApply.name())
    }

    /// Lowest- and highest-SampEn shares of the acceptable PPG windows.
    /// Windows whose SampEn is undefined rank as most irregular.
    pub fn restoration_domains<'a>(&self, segs: &'a [StoredSegment]) -> CliResult<(Vec<&'a [f32]>, Vec<&'a [f32]>)> {
        let p = self.cfg.entropy.params();
        let mut ranked: Vec<(f64, usize)> = segs
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let x: Vec<f64> = s.segment.samples.iter().map(|&v| v as f64).collect();
                let e = sampen(&x, &p).ok().filter(|v| v.is_finite()).unwrap_or(f64::INFINITY);
                (e, i)
            })
            .collect();
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let k = (segs.len() as f64 * self.cfg.restorer.domain_fraction).floor() as usize;
        if k < 2 {
            return Err(data_err(format!(
                "{} acceptable PPG windows leave fewer than 2 per restoration domain",
                segs.len()
            )));
        }
        let pick = |r: &[(f64, usize)]| r.iter().map(|&(_, i)| segs[i].segment.samples.as_slice()).collect();
        Ok((pick(&ranked[..k]), pick(&ranked[segs.len() - k..])))
    }

    fn restore_train(&self) -> CliResult<()> {
        if self.cfg.restorer.passes == 0 {
            self.say("  restoration disabled (passes = 0)");
            return Ok(());
        }
        let ppg = self.read_acceptable(Modality::Ppg)?;
        let (clean, corrupted) = self.restoration_domains(&ppg)?;
        let mut state = CycleGanState::new(self.cfg.restorer.gan_config(seed_for(self.cfg.seed, 2)))?;
        let log = train_cyclegan(&mut state, &corrupted, &clean)?;
        self.say(format!("  trained on {} + {} windows", clean.len(), corrupted.len()));
        report::write_text(
            &self.layout.log("restore_train"),
            &report::log_csv(
                "epoch,adv_x2c,adv_c2x,cycle,identity,total,d_c,d_x",
                log.iter().map(|e| {
                    let g = &e.generator;
                    vec![g.adv1, g.adv2, g.cycle, g.identity, e.total, e.d_c, e.d_x]
                }),
            ),
        )?;
        checkpoint::save_restorer(&self.layout.restorer(), &state)
    }

    fn restore(&self) -> CliResult<()> {
        let passes = self.cfg.restorer.passes;
        if passes == 0 {
            self.say("  restoration disabled (passes = 0)");
            return Ok(());
        }
        require(&self.layout.restorer(), Stage::RestoreTrain)?;
        let state = checkpoint::load_restorer(&self.layout.restorer(), self.cfg.restorer.gan_config(self.cfg.seed))?;
        let mut current = self.read_acceptable(Modality::Ppg)?;
        for pass in 1..=passes {
            for s in current.iter_mut() {
                s.segment = restore(&s.segment, &state, 1)?;
            }
            segstore::write(&self.layout.restored(pass), &current)?;
        }
        self.say(format!("  restored {} windows, {passes} pass(es)", current.len()));
        Ok(())
    }

    fn branch_segments(&self, branch: Branch) -> CliResult<Vec<StoredSegment>> {
        match branch {
            Branch::Ecg => self.read_acceptable(Modality::Ecg),
            Branch::PpgRaw => self.read_acceptable(Modality::Ppg),
            Branch::PpgRestored => {
                segstore::read(&self.layout.restored(self.cfg.restorer.passes), Stage::Restore.name())
            }
        }
    }

    fn clf_train(&self) -> CliResult<()> {
        let q = self.cfg.classifier.q;
        for branch in branches(self.cfg.restorer.passes) {
            let segs = self.branch_segments(branch)?;
            for &split in &self.cfg.test_splits {
                let (signals, classes): (Vec<&[f32]>, Vec<usize>) = segs
                    .iter()
                    .filter(|s| s.split != split)
                    .filter_map(|s| s.segment.label.class_index().map(|c| (s.segment.samples.as_slice(), c)))
                    .unzip();
                if !(classes.contains(&0) && classes.contains(&1)) {
                    return Err(data_err(format!(
                        "{} training data for test split {split} lacks AF or NonAF windows",
                        branch.title()
                    )));
                }
                let tc = self.cfg.classifier.train_config(seed_for(self.cfg.seed, 10 + split as u64));
                let mut model = tc.build_model()?;
                let log = afnet::train(&mut model, &signals, &classes, &tc)?;
                let stem = report::stem(branch, split, q);
                self.say(format!("  {stem}: {} windows, final accuracy {:.3}", signals.len(), log.last().map_or(0.0, |e| e.accuracy)));
                report::write_text(
                    &self.layout.log(&format!("clf_{stem}")),
                    &report::log_csv("epoch,loss,accuracy", log.iter().map(|e| vec![e.loss, e.accuracy])),
                )?;
                checkpoint::save_classifier(&self.layout.classifier(branch, split, q), &model)?;
            }
        }
        Ok(())
    }

    fn evaluate(&self) -> CliResult<()> {
        let q = self.cfg.classifier.q;
        let mut summary = EvaluateSummary::default();
        let mut test_keys: BTreeMap<u8, Vec<(Branch, Vec<SourceKey>)>> = BTreeMap::new();
        let mut rows: BTreeMap<u8, Vec<(Branch, Metrics, Option<f64>, Option<wppg_core::metrics::RocCurve>)>> =
            BTreeMap::new();
        for branch in branches(self.cfg.restorer.passes) {
            let segs = self.branch_segments(branch)?;
            for &split in &self.cfg.test_splits {
                let path = self.layout.classifier(branch, split, q);
                require(&path, Stage::ClfTrain)?;
                let model = checkpoint::load_classifier(&path)?;
                let test: Vec<&StoredSegment> = segs
                    .iter()
                    .filter(|s| s.split == split && s.segment.label.class_index().is_some())
                    .collect();
                test_keys
                    .entry(split)
                    .or_default()
                    .push((branch, test.iter().map(|s| s.segment.source.clone()).collect()));
                let preds: Vec<Prediction> = test
                    .iter()
                    .map(|s| afnet::predict(&model, &s.segment))
                    .collect::<Result<_, _>>()?;
                let labels: Vec<usize> = test.iter().map(|s| s.segment.label.class_index().unwrap()).collect();
                let classes: Vec<usize> = preds.iter().map(|p| p.class).collect();
                let cm = if test.is_empty() {
                    ConfusionMatrix::default()
                } else {
                    confusion(&classes, &labels, 1)?
                };
                let per = per_class_metrics(&cm);
                let weighted = weighted_metrics(&per, &[cm.negatives(), cm.positives()]).unwrap_or_default();
                summary.models += 1;
                summary.undefined_cells += per.iter().chain([&weighted]).map(|m| m.undefined_count()).sum::<usize>();
                let stem = report::stem(branch, split, q);
                let scores: Vec<f64> = preds.iter().map(|p| p.score).collect();
                let positive: Vec<bool> = labels.iter().map(|&l| l == 1).collect();
                let roc = roc_auc(&scores, &positive).ok();
                match &roc {
                    Some((curve, auc)) => {
                        report::write_text(&self.layout.report(&format!("{stem}_roc.csv")), &report::roc_csv(curve))?;
                        report::write_text(
                            &self.layout.report(&format!("{stem}_roc.svg")),
                            &report::roc_svg(&format!("{} split {split} Q{q}", branch.title()), &[(branch.title(), curve, *auc)]),
                        )?;
                    }
                    None => {
                        summary.roc_skipped += 1;
                        report::write_text(&self.layout.report(&format!("{stem}_roc.csv")), "fpr,tpr\n")?;
                    }
                }
                report::write_text(
                    &self.layout.report(&format!("{stem}_metrics.csv")),
                    &report::metrics_csv(AF_CLASSES, &per, &weighted),
                )?;
                report::write_text(
                    &self.layout.report(&format!("{stem}_confusion.csv")),
                    &report::confusion_csv(AF_CLASSES, &cm),
                )?;
                self.say(format!("  {stem}: accuracy {:?}", weighted.accuracy));
                let (curve, auc) = roc.map_or((None, None), |(c, a)| (Some(c), Some(a)));
                rows.entry(split).or_default().push((branch, weighted, auc, curve));
            }
        }
        // Paired windows must reach every branch's evaluation unchanged.
        for (split, sets) in &test_keys {
            if sets.windows(2).any(|w| w[0].1 != w[1].1) {
                return Err(data_err(format!("branches of split {split} evaluate different windows")));
            }
        }
        for (split, rows) in &rows {
            let name = format!("split{split}_q{q}");
            let table: Vec<(Branch, Metrics, Option<f64>)> = rows.iter().map(|(b, m, a, _)| (*b, *m, *a)).collect();
            report::write_text(&self.layout.report(&format!("{name}_comparison.csv")), &report::comparison_csv(&table))?;
            let series: Vec<(&str, [Option<f64>; 5])> = rows.iter().map(|(b, m, _, _)| (b.title(), m.columns())).collect();
            report::write_text(
                &self.layout.report(&format!("{name}_bars.svg")),
                &report::grouped_bar_svg(&format!("Test split {split}, Q{q}"), &series),
            )?;
            let curves: Vec<(&str, &wppg_core::metrics::RocCurve, f64)> = rows
                .iter()
                .filter_map(|(b, _, a, c)| Some((b.title(), c.as_ref()?, (*a)?)))
                .collect();
            if !curves.is_empty() {
                report::write_text(
                    &self.layout.report(&format!("{name}_roc.svg")),
                    &report::roc_svg(&format!("Test split {split}, Q{q}"), &curves),
                )?;
            }
        }
        self.write_q_tables()?;
        if summary.undefined_cells > 0 || summary.roc_skipped > 0 {
            self.say(format!(
                "  warning: {} undefined metric cells, {} ROC curves skipped",
                summary.undefined_cells, summary.roc_skipped
            ));
        }
        write_json(&self.layout.report("evaluate_summary.json"), &summary)
    }

    /// Per branch and split, one row for every q evaluated so far.
    fn write_q_tables(&self) -> CliResult<()> {
        for branch in Branch::ALL {
            for split in [1u8, 2] {
                let mut rows = Vec::new();
                for q in Q_ORDER {
                    let path = self.layout.report(&format!("{}_metrics.csv", report::stem(branch, split, q)));
                    if let Ok(text) = std::fs::read_to_string(&path) {
                        let m = report::parse_weighted(&text)
                            .ok_or_else(|| data_err(format!("{}: no weighted row", path.display())))?;
                        rows.push((q, m));
                    }
                }
                if !rows.is_empty() {
                    report::write_text(
                        &self.layout.report(&format!("{}_split{split}_by_q.csv", branch.key())),
                        &report::q_table_csv(&rows),
                    )?;
                }
            }
        }
        Ok(())
    }

    fn entropy_report(&self) -> CliResult<()> {
        let raw = self.read_acceptable(Modality::Ppg)?;
        let mut sets: Vec<(String, Vec<Segment>)> =
            vec![("Original".into(), raw.into_iter().map(|s| s.segment).collect())];
        for pass in 1..=self.cfg.restorer.passes {
            let r = segstore::read(&self.layout.restored(pass), Stage::Restore.name())?;
            sets.push((format!("Restored (Pass {pass})"), r.into_iter().map(|s| s.segment).collect()));
        }
        if sets[0].1.is_empty() {
            return Err(data_err("no acceptable PPG windows to report on"));
        }
        let refs: Vec<(&str, &[Segment])> = sets.iter().map(|(n, s)| (n.as_str(), s.as_slice())).collect();
        let rows = entropy_report(&refs, &self.cfg.entropy.params())?;
        report::write_text(&self.layout.report("entropy.csv"), &report::entropy_csv(&rows))
    }
}
