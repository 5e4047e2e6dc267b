//! End-to-end runs: fit a bundle on reference-vehicle data, predict damage
//! and classify maneuvers from accelerations alone.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fatigue::{segment_damage, DamageRecord, WoehlerCurve};
use crate::features::{FeatureLayout, ScatteringConfig, Transform, TransformKind};
use crate::ingest::{
    screen_strain_channels, segment_file, split_files, FileRole, Labels, Location, Segment,
    SplitItem, SplitPlan, TimeSeriesFile, DEFAULT_STRAIN_THRESHOLD, DEFAULT_TRAIN_FRACTION,
};
use crate::models::{
    confusion_and_accuracy, fds_ratio, fit_quadratic, knn_fit, n_quadratic_coefficients, r2, ChannelMetrics, KnnModel,
    QuadraticRegressor, TaskReport, DEFAULT_KNN_K,
};
use crate::reduce::{
    fit_pca, fit_standardizer, rows_to_matrix, transform as pca_scores, PcaModel, Standardizer,
    DEFAULT_VARIANCE_CUTOFF,
};

/// Every knob of a run. Paths are supplied separately so that the same
/// configuration hashes identically wherever the data lives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub transform: TransformKind,
    pub j: u32,
    pub q: u32,
    /// Averaging support override, samples.
    pub t: Option<usize>,
    pub l_seq: usize,
    /// Variance share below which PCA axes are dropped.
    pub theta: f64,
    /// Mean |strain| a channel needs on the reference file, µm/m.
    pub strain_threshold: f64,
    pub woehler_k: f64,
    pub woehler_capacity: f64,
    pub train_fraction: f64,
    pub stratify_by_rider: bool,
    pub knn_k: usize,
    /// Leading PC axes fed to the damage regression. When unset, the largest
    /// count leaving `rows_per_coefficient` training rows per coefficient.
    pub regression_axes: Option<usize>,
    pub rows_per_coefficient: usize,
    pub seed: u64,
    /// File used for strain screening; first usage file by id when unset.
    pub reference_file: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            transform: TransformKind::Scattering,
            j: 5,
            q: 6,
            t: None,
            l_seq: 4096,
            theta: DEFAULT_VARIANCE_CUTOFF,
            strain_threshold: DEFAULT_STRAIN_THRESHOLD,
            woehler_k: crate::fatigue::DEFAULT_WOEHLER_K,
            woehler_capacity: crate::fatigue::DEFAULT_WOEHLER_CAPACITY,
            train_fraction: DEFAULT_TRAIN_FRACTION,
            stratify_by_rider: true,
            knn_k: DEFAULT_KNN_K,
            regression_axes: None,
            rows_per_coefficient: 20,
            seed: 0,
            reference_file: None,
        }
    }
}

impl RunConfig {
    pub fn scattering_config(&self) -> ScatteringConfig {
        ScatteringConfig {
            t: self.t,
            ..ScatteringConfig::new(self.j, self.q, self.l_seq)
        }
    }

    pub fn build_transform(&self) -> Result<Transform> {
        match self.transform {
            TransformKind::Fft => Transform::fft(self.l_seq),
            TransformKind::Scattering => Transform::scattering(&self.scattering_config()),
        }
    }

    pub fn woehler(&self) -> Result<WoehlerCurve> {
        WoehlerCurve::new(self.woehler_k, self.woehler_capacity)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta >= 0.0 && self.theta < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "theta must lie in [0, 1), got {}",
                self.theta
            )));
        }
        if self.rows_per_coefficient == 0 {
            return Err(Error::InvalidConfig("rows_per_coefficient must be positive".into()));
        }
        if self.knn_k == 0 {
            return Err(Error::InvalidK { k: 0, n: 0 });
        }
        if !self.strain_threshold.is_finite() {
            return Err(Error::InvalidConfig("strain threshold must be finite".into()));
        }
        self.woehler()?;
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("config serializes"))
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Classification tasks in report order.
pub const TASKS: [&str; 3] = ["underground", "speed", "rider"];

fn task_label(labels: &Labels, task: &str) -> String {
    match task {
        "underground" => labels.underground.as_str().to_string(),
        "speed" => labels.speed_bin(),
        _ => labels.rider_id.clone(),
    }
}

/// Label order of a task: speeds numerically, everything else lexically.
fn sorted_labels(task: &str, labels: BTreeSet<String>) -> Vec<String> {
    let mut out: Vec<String> = labels.into_iter().collect();
    if task == "speed" {
        out.sort_by(|a, b| {
            let (x, y) = (a.parse::<f64>(), b.parse::<f64>());
            match (x, y) {
                (Ok(x), Ok(y)) => x.total_cmp(&y).then_with(|| a.cmp(b)),
                _ => a.cmp(b),
            }
        });
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classifier {
    pub task: String,
    pub model: KnnModel,
}

/// Everything learned on the reference vehicle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bundle {
    pub config: RunConfig,
    pub config_hash: String,
    pub layout: FeatureLayout,
    pub layout_fingerprint: String,
    pub split: SplitPlan,
    pub reference_file: String,
    pub strain_channels: Vec<String>,
    pub standardizer: Standardizer,
    pub pca: PcaModel,
    pub pca_fingerprint: String,
    pub regressors: Vec<QuadraticRegressor>,
    /// Files whose segments train the classifiers.
    pub classifier_files: Vec<String>,
    pub classifiers: Vec<Classifier>,
}

impl Bundle {
    pub fn save(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        serde_json::to_writer(&mut w, self)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        let bundle: Bundle = serde_json::from_reader(BufReader::new(f))?;
        if bundle.config.hash() != bundle.config_hash {
            return Err(Error::InvalidConfig(format!(
                "{}: stored config hash does not match its config",
                path.display()
            )));
        }
        Ok(bundle)
    }

    pub fn regressor(&self, channel: &str) -> Option<&QuadraticRegressor> {
        self.regressors.iter().find(|r| r.target_channel == channel)
    }

    /// PC scores of one segment.
    fn scores(&self, transform: &Transform, segment: &Segment) -> Result<Vec<f64>> {
        let mut row = transform.extract(segment)?;
        self.standardizer.apply_in_place(&mut row)?;
        pca_scores(&self.pca, &row)
    }

    /// Checks that `files` produce the feature layout the bundle was fit on.
    fn check_layout(&self, transform: &Transform, files: &[TimeSeriesFile]) -> Result<()> {
        for f in files {
            let found = transform.layout(&f.acc_names()).fingerprint();
            if found != self.layout_fingerprint {
                return Err(Error::FingerprintMismatch {
                    expected: self.layout_fingerprint.clone(),
                    found,
                }
                .context(format!("file {}", f.file_id)));
            }
        }
        Ok(())
    }
}

fn segment_context(e: Error, s: &Segment) -> Error {
    e.context(format!("file {} segment {}", s.file_id, s.index))
}

/// Feature rows of every segment of `file`, in segment order.
fn file_features(transform: &Transform, file: &TimeSeriesFile) -> Result<Vec<(Segment, Vec<f64>)>> {
    let segments = segment_file(file, transform.l_seq())?;
    segments
        .into_par_iter()
        .map(|s| {
            let row = transform.extract(&s).map_err(|e| segment_context(e, &s))?;
            Ok((s, row))
        })
        .collect()
}

fn observed_damage(s: &Segment, channel: &str, curve: &WoehlerCurve) -> Result<f64> {
    let series = s.strain(channel).ok_or_else(|| Error::MissingMetadata {
        file: s.file_id.clone(),
        field: format!("strain channel {channel}"),
    })?;
    Ok(segment_damage(series, curve))
}

fn sorted_files(files: &[TimeSeriesFile]) -> Vec<&TimeSeriesFile> {
    let mut v: Vec<&TimeSeriesFile> = files.iter().collect();
    v.sort_by(|a, b| a.file_id.cmp(&b.file_id));
    v
}

/// Fits standardizer, PCA, damage regressors and maneuver classifiers.
///
/// Only usage files on the training side of the split parameterize the PCA
/// and the regressors; maneuver files never do. The classifiers train on
/// labeled training usage files plus maneuver files marked `train`.
pub fn fit(files: &[TimeSeriesFile], cfg: &RunConfig) -> Result<Bundle> {
    cfg.validate()?;
    let transform = cfg.build_transform()?;
    let curve = cfg.woehler()?;
    let files = sorted_files(files);
    let usage: Vec<&TimeSeriesFile> = files
        .iter()
        .copied()
        .filter(|f| f.role == FileRole::Usage)
        .collect();

    let channels = usage
        .first()
        .ok_or(Error::InsufficientFiles { found: 0 })?
        .acc_names();
    let layout = transform.layout(&channels);
    let fingerprint = layout.fingerprint();
    for f in &files {
        if f.acc_names() != channels {
            return Err(Error::FingerprintMismatch {
                expected: fingerprint,
                found: transform.layout(&f.acc_names()).fingerprint(),
            }
            .context(format!("file {}", f.file_id)));
        }
    }

    let items: Vec<SplitItem> = usage
        .iter()
        .map(|f| SplitItem::from_file(f, cfg.l_seq))
        .collect();
    let split = split_files(&items, cfg.train_fraction, cfg.stratify_by_rider, cfg.seed)?;

    let reference = match &cfg.reference_file {
        Some(id) => *usage
            .iter()
            .find(|f| &f.file_id == id)
            .ok_or_else(|| Error::InvalidConfig(format!("reference file {id} not found")))?,
        None => usage[0],
    };
    let strain_channels = screen_strain_channels(reference, cfg.strain_threshold);
    if strain_channels.is_empty() {
        log::warn!("no strain channel passes screening; damage regression is skipped");
    }

    // training rows, in (file, segment) order
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut damages: Vec<Vec<f64>> = vec![Vec::new(); strain_channels.len()];
    let mut labels: Vec<Option<Labels>> = Vec::new();
    for f in usage.iter().filter(|f| split.is_train(&f.file_id)) {
        for (s, row) in file_features(&transform, f)? {
            for (c, name) in strain_channels.iter().enumerate() {
                damages[c].push(observed_damage(&s, name, &curve)?);
            }
            labels.push(s.labels.clone());
            rows.push(row);
        }
    }
    log::info!("fitting on {} training segments", rows.len());

    let standardizer = fit_standardizer(&rows, &layout.group_map())?;
    for row in rows.iter_mut() {
        standardizer.apply_in_place(row)?;
    }
    let pca = {
        let matrix = rows_to_matrix(&rows)?;
        fit_pca(&matrix, cfg.theta)?
    };
    log::info!(
        "retained {} axes ({:.4} of variance)",
        pca.n_axes(),
        pca.retained_share()
    );
    let scores: Vec<Vec<f64>> = rows
        .par_iter()
        .map(|r| pca_scores(&pca, r))
        .collect::<Result<_>>()?;
    drop(rows);

    let mut regressors = Vec::with_capacity(strain_channels.len());
    for (name, d) in strain_channels.iter().zip(&damages) {
        let (x, y): (Vec<Vec<f64>>, Vec<f64>) = scores
            .iter()
            .zip(d)
            .filter(|(_, &d)| d > 0.0)
            .map(|(h, &d)| (h.clone(), d.log10()))
            .unzip();
        let p = regression_axes(cfg.regression_axes, cfg.rows_per_coefficient, pca.n_axes(), x.len());
        let x: Vec<Vec<f64>> = x.into_iter().map(|h| h[..p].to_vec()).collect();
        regressors.push(fit_quadratic(&x, &y, name).map_err(|e| e.context(format!("channel {name}")))?);
    }

    // classifier training set
    let mut knn_points: Vec<Vec<f64>> = Vec::new();
    let mut knn_labels: Vec<Labels> = Vec::new();
    let mut classifier_files = BTreeSet::new();
    let mut row = 0;
    for f in usage.iter().filter(|f| split.is_train(&f.file_id)) {
        let n = f.len() / cfg.l_seq;
        if f.labels.is_some() {
            classifier_files.insert(f.file_id.clone());
            for i in row..row + n {
                knn_points.push(scores[i].clone());
                knn_labels.push(labels[i].clone().expect("labeled file"));
            }
        }
        row += n;
    }
    let bundle_stub = Bundle {
        config: cfg.clone(),
        config_hash: cfg.hash(),
        layout,
        layout_fingerprint: fingerprint,
        split,
        reference_file: reference.file_id.clone(),
        strain_channels,
        standardizer,
        pca_fingerprint: String::new(),
        pca,
        regressors,
        classifier_files: Vec::new(),
        classifiers: Vec::new(),
    };
    for f in files
        .iter()
        .filter(|f| f.role == FileRole::Maneuver && f.location == Some(Location::Train))
    {
        let labels = f.labels.clone().ok_or_else(|| Error::MissingMetadata {
            file: f.file_id.clone(),
            field: "labels".into(),
        })?;
        classifier_files.insert(f.file_id.clone());
        for (_, h) in segment_scores(&bundle_stub, &transform, f)? {
            knn_points.push(h);
            knn_labels.push(labels.clone());
        }
    }

    let mut classifiers = Vec::new();
    if knn_points.is_empty() {
        log::warn!("no labeled training segments; classifiers are not fit");
    } else {
        for task in TASKS {
            let y: Vec<String> = knn_labels.iter().map(|l| task_label(l, task)).collect();
            let model = knn_fit(knn_points.clone(), y, cfg.knn_k)
                .map_err(|e| e.context(format!("{task} classifier")))?;
            classifiers.push(Classifier {
                task: task.to_string(),
                model,
            });
        }
    }

    let pca_fingerprint = sha256_hex(&serde_json::to_vec(&bundle_stub.pca)?);
    Ok(Bundle {
        pca_fingerprint,
        classifier_files: classifier_files.into_iter().collect(),
        classifiers,
        ..bundle_stub
    })
}

/// Number of leading PC axes a damage regressor uses.
pub fn regression_axes(
    requested: Option<usize>,
    rows_per_coefficient: usize,
    available: usize,
    rows: usize,
) -> usize {
    match requested {
        Some(p) => p.min(available),
        None => (0..=available)
            .take_while(|&p| rows_per_coefficient * n_quadratic_coefficients(p) <= rows)
            .last()
            .unwrap_or(0),
    }
}

/// PC scores of every segment of `file`, in segment order.
fn segment_scores(
    bundle: &Bundle,
    transform: &Transform,
    file: &TimeSeriesFile,
) -> Result<Vec<(Segment, Vec<f64>)>> {
    let segments = segment_file(file, transform.l_seq())?;
    segments
        .into_par_iter()
        .map(|s| {
            let h = bundle
                .scores(transform, &s)
                .map_err(|e| segment_context(e, &s))?;
            Ok((s, h))
        })
        .collect()
}

/// Evaluation group of a file relative to the bundle's split.
pub fn file_group(bundle: &Bundle, f: &TimeSeriesFile) -> &'static str {
    if f.role == FileRole::Maneuver {
        "maneuver"
    } else if bundle.split.is_train(&f.file_id) {
        "usage_train"
    } else {
        "usage_test"
    }
}

/// Observed and predicted damage of one segment and strain channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub file_id: String,
    pub segment: usize,
    pub channel: String,
    pub group: String,
    /// Absent when the file lacks the strain channel.
    pub damage: Option<f64>,
    pub lg_damage: Option<f64>,
    pub predicted_lg_damage: f64,
    pub predicted_damage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMetrics {
    pub group: String,
    pub channels: Vec<ChannelMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictReport {
    pub config_hash: String,
    pub layout_fingerprint: String,
    pub pca_fingerprint: String,
    pub n_axes: usize,
    pub retained_variance_share: f64,
    pub groups: Vec<GroupMetrics>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub records: Vec<PredictionRecord>,
    pub report: PredictReport,
}

/// Predicts damage for every segment of `files` from accelerations alone and
/// scores the predictions wherever strain was measured.
pub fn predict(bundle: &Bundle, files: &[TimeSeriesFile]) -> Result<Prediction> {
    predict_scored(bundle, &score_files(bundle, files)?)
}

/// One segment mapped to PC scores, with the strain damage observed on it.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSegment {
    pub file_id: String,
    pub segment: usize,
    pub group: &'static str,
    pub labels: Option<Labels>,
    pub scores: Vec<f64>,
    /// Per bundle regressor; absent when the file lacks the channel.
    pub damage: Vec<Option<f64>>,
}

/// PC scores of every segment of `files`, ordered by file id and segment.
pub fn score_files(bundle: &Bundle, files: &[TimeSeriesFile]) -> Result<Vec<ScoredSegment>> {
    let transform = bundle.config.build_transform()?;
    let curve = bundle.config.woehler()?;
    bundle.check_layout(&transform, files)?;
    let mut out = Vec::new();
    for f in sorted_files(files) {
        let group = file_group(bundle, f);
        for (s, h) in segment_scores(bundle, &transform, f)? {
            let damage = bundle
                .regressors
                .iter()
                .map(|r| s.strain(&r.target_channel).map(|x| segment_damage(x, &curve)))
                .collect();
            out.push(ScoredSegment {
                file_id: s.file_id,
                segment: s.index,
                group,
                labels: s.labels,
                scores: h,
                damage,
            });
        }
    }
    Ok(out)
}

/// Damage predictions for already scored segments.
pub fn predict_scored(bundle: &Bundle, scored: &[ScoredSegment]) -> Result<Prediction> {
    let mut records = Vec::with_capacity(scored.len() * bundle.regressors.len());
    for s in scored {
        for (reg, &damage) in bundle.regressors.iter().zip(&s.damage) {
            let lg = reg.predict(&s.scores[..reg.n_axes()])?;
            records.push(PredictionRecord {
                file_id: s.file_id.clone(),
                segment: s.segment,
                channel: reg.target_channel.clone(),
                group: s.group.to_string(),
                damage,
                lg_damage: damage.filter(|&d| d > 0.0).map(f64::log10),
                predicted_lg_damage: lg,
                predicted_damage: 10f64.powf(lg),
            });
        }
    }

    let mut groups = Vec::new();
    for group in ["usage_train", "usage_test", "maneuver"] {
        let in_group: Vec<&PredictionRecord> =
            records.iter().filter(|r| r.group == group).collect();
        if in_group.is_empty() {
            continue;
        }
        let channels = bundle
            .regressors
            .iter()
            .map(|reg| channel_metrics(&reg.target_channel, &in_group))
            .collect();
        groups.push(GroupMetrics {
            group: group.to_string(),
            channels,
        });
    }
    Ok(Prediction {
        records,
        report: PredictReport {
            config_hash: bundle.config_hash.clone(),
            layout_fingerprint: bundle.layout_fingerprint.clone(),
            pca_fingerprint: bundle.pca_fingerprint.clone(),
            n_axes: bundle.pca.n_axes(),
            retained_variance_share: bundle.pca.retained_share(),
            groups,
        },
    })
}

fn channel_metrics(channel: &str, records: &[&PredictionRecord]) -> ChannelMetrics {
    let observed: Vec<&&PredictionRecord> = records
        .iter()
        .filter(|r| r.channel == channel && r.damage.is_some())
        .collect();
    let (y, y_star): (Vec<f64>, Vec<f64>) = observed
        .iter()
        .filter_map(|r| r.lg_damage.map(|lg| (lg, r.predicted_lg_damage)))
        .unzip();
    let (d, d_star): (Vec<f64>, Vec<f64>) = observed
        .iter()
        .map(|r| (r.damage.unwrap_or(0.0), r.predicted_damage))
        .unzip();
    ChannelMetrics {
        channel: channel.to_string(),
        n_segments: observed.len(),
        r2: r2(&y, &y_star).ok(),
        fds_ratio: fds_ratio(&d, &d_star).ok(),
    }
}

/// Observed damage rows of a prediction, in record order.
pub fn damage_records(records: &[PredictionRecord]) -> Vec<DamageRecord> {
    records
        .iter()
        .filter_map(|r| {
            r.damage
                .map(|d| DamageRecord::new(&r.file_id, r.segment, &r.channel, d))
        })
        .collect()
}

/// Writes one CSV row per prediction record.
pub fn write_predictions_csv<W: Write>(records: &[PredictionRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["file_id", "segment", "channel", "group", "D", "lgD", "D_pred", "lgD_pred"])?;
    let opt = |v: Option<f64>, sci: bool| match v {
        Some(x) if sci => format!("{x:e}"),
        Some(x) => format!("{x}"),
        None => String::new(),
    };
    for r in records {
        w.write_record([
            r.file_id.clone(),
            r.segment.to_string(),
            r.channel.clone(),
            r.group.clone(),
            opt(r.damage, true),
            opt(r.lg_damage, false),
            format!("{:e}", r.predicted_damage),
            format!("{}", r.predicted_lg_damage),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<predictions>", e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyReport {
    pub config_hash: String,
    pub layout_fingerprint: String,
    pub pca_fingerprint: String,
    pub evaluated_files: Vec<String>,
    pub n_segments: usize,
    pub tasks: Vec<TaskReport>,
}

/// Classifies every segment of the labeled files that did not train the
/// classifiers and tabulates the confusion matrices.
pub fn classify(bundle: &Bundle, files: &[TimeSeriesFile]) -> Result<ClassifyReport> {
    let eval: Vec<TimeSeriesFile> = files
        .iter()
        .filter(|f| f.labels.is_some() && !bundle.classifier_files.contains(&f.file_id))
        .cloned()
        .collect();
    classify_scored(bundle, &score_files(bundle, &eval)?)
}

/// Classification of already scored segments. Unlabeled segments and those
/// of classifier training files are skipped.
pub fn classify_scored(bundle: &Bundle, scored: &[ScoredSegment]) -> Result<ClassifyReport> {
    if bundle.classifiers.is_empty() {
        return Err(Error::InsufficientData(
            "bundle has no classifiers (no labeled training data)".into(),
        ));
    }
    let trained: BTreeSet<&str> = bundle.classifier_files.iter().map(String::as_str).collect();
    let eval: Vec<&ScoredSegment> = scored
        .iter()
        .filter(|s| s.labels.is_some() && !trained.contains(s.file_id.as_str()))
        .collect();
    if eval.is_empty() {
        return Err(Error::InsufficientData(
            "no labeled segments outside the classifier training set".into(),
        ));
    }

    let mut truth: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    let mut predicted: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for c in &bundle.classifiers {
        let p = eval
            .par_iter()
            .map(|s| c.model.predict(&s.scores))
            .collect::<Result<Vec<_>>>()?;
        predicted.insert(c.task.as_str(), p);
        let t = eval
            .iter()
            .map(|s| task_label(s.labels.as_ref().expect("filtered"), &c.task))
            .collect();
        truth.insert(c.task.as_str(), t);
    }
    let mut evaluated_files: Vec<String> = eval.iter().map(|s| s.file_id.clone()).collect();
    evaluated_files.dedup();

    let mut tasks = Vec::new();
    for c in &bundle.classifiers {
        let t = &truth[c.task.as_str()];
        let p = &predicted[c.task.as_str()];
        let set: BTreeSet<String> = c
            .model
            .training_labels
            .iter()
            .chain(t)
            .cloned()
            .collect();
        let labels = sorted_labels(&c.task, set);
        let confusion = confusion_and_accuracy(&labels, t, p)?;
        tasks.push(TaskReport {
            task: c.task.clone(),
            accuracy: confusion.accuracy,
            confusion,
        });
    }
    Ok(ClassifyReport {
        config_hash: bundle.config_hash.clone(),
        layout_fingerprint: bundle.layout_fingerprint.clone(),
        pca_fingerprint: bundle.pca_fingerprint.clone(),
        evaluated_files,
        n_segments: eval.len(),
        tasks,
    })
}

/// Summary of a fitted bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleSummary {
    pub config: RunConfig,
    pub config_hash: String,
    pub layout_fingerprint: String,
    pub pca_fingerprint: String,
    pub n_features: usize,
    pub n_training_segments: usize,
    pub n_axes: usize,
    pub retained_variance_share: f64,
    pub variance_shares: Vec<f64>,
    pub train_files: Vec<String>,
    pub test_files: Vec<String>,
    pub reference_file: String,
    pub strain_channels: Vec<String>,
    pub regressors: Vec<QuadraticRegressor>,
    pub classifier_training_points: usize,
}

pub fn summarize(bundle: &Bundle) -> BundleSummary {
    BundleSummary {
        config: bundle.config.clone(),
        config_hash: bundle.config_hash.clone(),
        layout_fingerprint: bundle.layout_fingerprint.clone(),
        pca_fingerprint: bundle.pca_fingerprint.clone(),
        n_features: bundle.layout.len(),
        n_training_segments: bundle.pca.n_samples,
        n_axes: bundle.pca.n_axes(),
        retained_variance_share: bundle.pca.retained_share(),
        variance_shares: bundle.pca.variance_shares.clone(),
        train_files: bundle.split.train_file_ids.iter().cloned().collect(),
        test_files: bundle.split.test_file_ids.iter().cloned().collect(),
        reference_file: bundle.reference_file.clone(),
        strain_channels: bundle.strain_channels.clone(),
        regressors: bundle.regressors.clone(),
        classifier_training_points: bundle
            .classifiers
            .first()
            .map_or(0, |c| c.model.training_points.len()),
    }
}

/// Writes pretty JSON followed by a newline.
pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}
