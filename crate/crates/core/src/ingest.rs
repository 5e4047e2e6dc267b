//! Measurement files, sidecar metadata, segmentation, strain channel
//! screening and file-level train/test splits.
//!
//! A measurement ride is stored as a CSV file (header row of channel names,
//! one sample per row) next to a `<name>.meta.json` sidecar that declares the
//! sample rate, the role of every channel and optional labels.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

/// Strain screening threshold used when none is configured, in µm/m.
pub const DEFAULT_STRAIN_THRESHOLD: f64 = 150.0;

/// Fraction of usage segments placed on the training side by default.
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.777;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub name: String,
    pub samples: Vec<f64>,
}

impl Channel {
    pub fn new(name: impl Into<String>, samples: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            samples,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Underground {
    Even,
    Cobble,
}

impl Underground {
    pub fn as_str(&self) -> &'static str {
        match self {
            Underground::Even => "even",
            Underground::Cobble => "cobble",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "even" => Some(Underground::Even),
            "cobble" => Some(Underground::Cobble),
            _ => None,
        }
    }
}

/// Maneuver labels of a ride. Always complete.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Labels {
    #[serde(rename = "rider")]
    pub rider_id: String,
    pub underground: Underground,
    pub speed_kmh: f64,
}

impl Labels {
    /// Speed label as used by the classifier: speeds are categorical bins.
    pub fn speed_bin(&self) -> String {
        format_speed(self.speed_kmh)
    }
}

pub(crate) fn format_speed(speed: f64) -> String {
    if speed.fract() == 0.0 {
        format!("{}", speed as i64)
    } else {
        format!("{speed}")
    }
}

/// How a file takes part in a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FileRole {
    /// General usage ride: parameterizes the PCA and the damage regression.
    #[default]
    Usage,
    /// Targeted maneuver measurement: never used to fit the PCA.
    Maneuver,
}

/// Which side of the classifier evaluation a maneuver file belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Location {
    Train,
    Test,
}

/// One validated measurement ride.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesFile {
    pub file_id: String,
    pub sample_rate_hz: f64,
    pub acc_channels: Vec<Channel>,
    pub strain_channels: Vec<Channel>,
    pub labels: Option<Labels>,
    /// Rider of an otherwise unlabeled ride (used for split stratification).
    pub rider_id: Option<String>,
    pub role: FileRole,
    pub location: Option<Location>,
}

impl TimeSeriesFile {
    /// Builds a file and checks its invariants.
    pub fn new(
        file_id: impl Into<String>,
        sample_rate_hz: f64,
        acc_channels: Vec<Channel>,
        strain_channels: Vec<Channel>,
        labels: Option<Labels>,
    ) -> Result<Self> {
        let file = Self {
            file_id: file_id.into(),
            sample_rate_hz,
            acc_channels,
            strain_channels,
            labels,
            rider_id: None,
            role: FileRole::Usage,
            location: None,
        };
        file.validate()?;
        Ok(file)
    }

    pub fn with_role(mut self, role: FileRole, location: Option<Location>) -> Self {
        self.role = role;
        self.location = location;
        self
    }

    pub fn with_rider(mut self, rider: Option<String>) -> Self {
        self.rider_id = rider;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let malformed = |reason: String| Error::MalformedFile {
            file: self.file_id.clone(),
            reason,
        };
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(malformed(format!(
                "sample rate must be positive, got {}",
                self.sample_rate_hz
            )));
        }
        if self.acc_channels.is_empty() && self.strain_channels.is_empty() {
            return Err(malformed("no channels".into()));
        }
        let len = self.len();
        if len == 0 {
            return Err(malformed("empty data section".into()));
        }
        let mut names = BTreeSet::new();
        for ch in self.channels() {
            if ch.samples.len() != len {
                return Err(malformed(format!(
                    "channel {} has {} samples, expected {}",
                    ch.name,
                    ch.samples.len(),
                    len
                )));
            }
            if !names.insert(ch.name.as_str()) {
                return Err(malformed(format!("duplicate channel {}", ch.name)));
            }
            if let Some(index) = ch.samples.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteSample {
                    file: self.file_id.clone(),
                    channel: ch.name.clone(),
                    index,
                });
            }
        }
        if self.role == FileRole::Maneuver && self.labels.is_none() {
            return Err(Error::MissingMetadata {
                file: self.file_id.clone(),
                field: "labels".into(),
            });
        }
        Ok(())
    }

    /// Number of samples per channel.
    pub fn len(&self) -> usize {
        self.channels().next().map_or(0, |c| c.samples.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channels(&self) -> impl Iterator<Item = &Channel> {
        self.acc_channels.iter().chain(self.strain_channels.iter())
    }

    pub fn acc_names(&self) -> Vec<String> {
        self.acc_channels.iter().map(|c| c.name.clone()).collect()
    }

    /// Rider known for this file, from labels or the unlabeled rider field.
    pub fn rider(&self) -> Option<&str> {
        self.labels
            .as_ref()
            .map(|l| l.rider_id.as_str())
            .or(self.rider_id.as_deref())
    }

    pub fn strain_channel(&self, name: &str) -> Option<&Channel> {
        self.strain_channels.iter().find(|c| c.name == name)
    }
}

/// Channel role declared in the sidecar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelRole {
    Acc,
    Strain,
}

/// Sidecar path for a data file: `ride.csv` → `ride.meta.json`.
pub fn sidecar_path(data_path: &Path) -> PathBuf {
    let stem = data_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    data_path.with_file_name(format!("{stem}.meta.json"))
}

fn file_id_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

#[derive(Debug)]
struct Sidecar {
    sample_rate_hz: f64,
    channels: Vec<(String, ChannelRole)>,
    labels: Option<Labels>,
    rider: Option<String>,
    role: FileRole,
    location: Option<Location>,
}

fn parse_sidecar(file_id: &str, text: &str) -> Result<Sidecar> {
    let missing = |field: &str| Error::MissingMetadata {
        file: file_id.to_string(),
        field: field.to_string(),
    };
    let bad = |reason: String| Error::MalformedFile {
        file: file_id.to_string(),
        reason,
    };
    let root: Map<String, Value> = serde_json::from_str(text)
        .map_err(|e| bad(format!("sidecar is not a JSON object: {e}")))?;

    let sample_rate_hz = root
        .get("sample_rate_hz")
        .ok_or_else(|| missing("sample_rate_hz"))?
        .as_f64()
        .ok_or_else(|| bad("sample_rate_hz must be a number".into()))?;

    let channel_map = root
        .get("channels")
        .ok_or_else(|| missing("channels"))?
        .as_object()
        .ok_or_else(|| bad("channels must map names to roles".into()))?;
    let mut channels = Vec::with_capacity(channel_map.len());
    for (name, role) in channel_map {
        let role: ChannelRole = serde_json::from_value(role.clone())
            .map_err(|_| bad(format!("channel {name}: role must be \"acc\" or \"strain\"")))?;
        channels.push((name.clone(), role));
    }
    if channels.is_empty() {
        return Err(bad("no channels declared".into()));
    }

    let labels = match root.get("labels") {
        None | Some(Value::Null) => None,
        Some(Value::Object(map)) => {
            let rider = map
                .get("rider")
                .ok_or_else(|| missing("labels.rider"))?;
            let rider = match rider {
                Value::String(s) => s.clone(),
                Value::Number(n) => n.to_string(),
                _ => return Err(bad("labels.rider must be a string".into())),
            };
            let underground = map
                .get("underground")
                .ok_or_else(|| missing("labels.underground"))?
                .as_str()
                .and_then(Underground::parse)
                .ok_or_else(|| bad("labels.underground must be \"even\" or \"cobble\"".into()))?;
            let speed_kmh = map
                .get("speed_kmh")
                .ok_or_else(|| missing("labels.speed_kmh"))?
                .as_f64()
                .ok_or_else(|| bad("labels.speed_kmh must be a number".into()))?;
            Some(Labels {
                rider_id: rider,
                underground,
                speed_kmh,
            })
        }
        Some(_) => return Err(bad("labels must be an object".into())),
    };

    let rider = match root.get("rider") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(Value::Number(n)) => Some(n.to_string()),
        Some(_) => return Err(bad("rider must be a string".into())),
    };
    let role = match root.get("role") {
        None | Some(Value::Null) => FileRole::Usage,
        Some(v) => serde_json::from_value(v.clone())
            .map_err(|_| bad("role must be \"usage\" or \"maneuver\"".into()))?,
    };
    let location = match root.get("location") {
        None | Some(Value::Null) => None,
        Some(v) => Some(
            serde_json::from_value(v.clone())
                .map_err(|_| bad("location must be \"train\" or \"test\"".into()))?,
        ),
    };

    Ok(Sidecar {
        sample_rate_hz,
        channels,
        labels,
        rider,
        role,
        location,
    })
}

/// Loads a data file and its sidecar, validating both.
///
/// Channel order follows the sidecar declaration order. Columns present in
/// the CSV but not declared in the sidecar are ignored.
pub fn load_file(data_path: &Path, meta_path: &Path) -> Result<TimeSeriesFile> {
    let file_id = file_id_of(data_path);
    let meta_text = fs::read_to_string(meta_path).map_err(|e| Error::io(meta_path, e))?;
    let meta = parse_sidecar(&file_id, &meta_text)?;
    let malformed = |reason: String| Error::MalformedFile {
        file: file_id.clone(),
        reason,
    };

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(data_path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(data_path, io),
            other => malformed(format!("{other:?}")),
        })?;
    let header = reader.headers()?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(malformed("missing header row".into()));
    }
    let mut columns = Vec::with_capacity(meta.channels.len());
    for (name, _) in &meta.channels {
        let col = header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| malformed(format!("declared channel {name} has no column")))?;
        columns.push(col);
    }

    let mut data: Vec<Vec<f64>> = vec![Vec::new(); meta.channels.len()];
    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != header.len() {
            return Err(malformed(format!(
                "row {} has {} fields, header has {} (channel length mismatch)",
                row_idx + 1,
                record.len(),
                header.len()
            )));
        }
        for (slot, &col) in columns.iter().enumerate() {
            let field = &record[col];
            let value: f64 = field.parse().map_err(|_| {
                malformed(format!(
                    "row {}: cannot parse `{field}` in channel {}",
                    row_idx + 1,
                    meta.channels[slot].0
                ))
            })?;
            data[slot].push(value);
        }
    }

    let mut acc = Vec::new();
    let mut strain = Vec::new();
    for ((name, role), samples) in meta.channels.into_iter().zip(data) {
        let ch = Channel::new(name, samples);
        match role {
            ChannelRole::Acc => acc.push(ch),
            ChannelRole::Strain => strain.push(ch),
        }
    }
    let file = TimeSeriesFile {
        file_id,
        sample_rate_hz: meta.sample_rate_hz,
        acc_channels: acc,
        strain_channels: strain,
        labels: meta.labels,
        rider_id: meta.rider,
        role: meta.role,
        location: meta.location,
    };
    file.validate()?;
    Ok(file)
}

/// Loads `path` together with its `<name>.meta.json` sidecar.
pub fn load_file_with_sidecar(data_path: &Path) -> Result<TimeSeriesFile> {
    load_file(data_path, &sidecar_path(data_path))
}

/// Loads every `*.csv` in `dir` (non-recursive), sorted by file id.
pub fn load_dir(dir: &Path) -> Result<Vec<TimeSeriesFile>> {
    use rayon::prelude::*;

    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|ext| ext == "csv") {
            paths.push(path);
        }
    }
    paths.sort();
    paths
        .par_iter()
        .map(|p| load_file_with_sidecar(p).map_err(|e| e.context(p.display().to_string())))
        .collect()
}

/// Writes `file` as `<dir>/<file_id>.csv` plus sidecar. Output is byte-stable.
pub fn write_file(file: &TimeSeriesFile, dir: &Path) -> Result<PathBuf> {
    let data_path = dir.join(format!("{}.csv", file.file_id));
    let channels: Vec<&Channel> = file.channels().collect();

    let mut out = String::with_capacity(file.len() * channels.len() * 12);
    let header: Vec<&str> = channels.iter().map(|c| c.name.as_str()).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for i in 0..file.len() {
        for (j, ch) in channels.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&format!("{}", ch.samples[i]));
        }
        out.push('\n');
    }
    let mut f = fs::File::create(&data_path).map_err(|e| Error::io(&data_path, e))?;
    f.write_all(out.as_bytes())
        .map_err(|e| Error::io(&data_path, e))?;

    let mut meta = Map::new();
    meta.insert("sample_rate_hz".into(), Value::from(file.sample_rate_hz));
    let mut chan_map = Map::new();
    for c in &file.acc_channels {
        chan_map.insert(c.name.clone(), Value::from("acc"));
    }
    for c in &file.strain_channels {
        chan_map.insert(c.name.clone(), Value::from("strain"));
    }
    meta.insert("channels".into(), Value::Object(chan_map));
    if let Some(labels) = &file.labels {
        meta.insert("labels".into(), serde_json::to_value(labels)?);
    }
    if let Some(rider) = &file.rider_id {
        meta.insert("rider".into(), Value::from(rider.clone()));
    }
    meta.insert("role".into(), serde_json::to_value(file.role)?);
    if let Some(loc) = file.location {
        meta.insert("location".into(), serde_json::to_value(loc)?);
    }
    let meta_path = sidecar_path(&data_path);
    let text = serde_json::to_string_pretty(&Value::Object(meta))?;
    fs::write(&meta_path, text + "\n").map_err(|e| Error::io(&meta_path, e))?;
    Ok(data_path)
}

/// One non-overlapping window of a file.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub file_id: String,
    pub index: usize,
    /// One row per acceleration channel, each `l_seq` long.
    pub acc_data: Vec<Vec<f64>>,
    pub strain_data: Vec<Vec<f64>>,
    pub strain_names: Vec<String>,
    pub labels: Option<Labels>,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.acc_data
            .first()
            .or(self.strain_data.first())
            .map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn strain(&self, name: &str) -> Option<&[f64]> {
        self.strain_names
            .iter()
            .position(|n| n == name)
            .map(|i| self.strain_data[i].as_slice())
    }
}

/// Cuts a file into `floor(len / l_seq)` contiguous windows from the start.
/// Trailing samples that do not fill a window are dropped.
pub fn segment_file(f: &TimeSeriesFile, l_seq: usize) -> Result<Vec<Segment>> {
    if l_seq < 2 {
        return Err(Error::InvalidConfig(format!(
            "segment length must be at least 2, got {l_seq}"
        )));
    }
    let n = f.len() / l_seq;
    let strain_names: Vec<String> = f.strain_channels.iter().map(|c| c.name.clone()).collect();
    let cut = |ch: &Channel, i: usize| ch.samples[i * l_seq..(i + 1) * l_seq].to_vec();
    Ok((0..n)
        .map(|i| Segment {
            file_id: f.file_id.clone(),
            index: i,
            acc_data: f.acc_channels.iter().map(|c| cut(c, i)).collect(),
            strain_data: f.strain_channels.iter().map(|c| cut(c, i)).collect(),
            strain_names: strain_names.clone(),
            labels: f.labels.clone(),
        })
        .collect())
}

/// Strain channels of `reference` whose mean absolute strain reaches
/// `threshold`, in the reference file's channel order.
pub fn screen_strain_channels(reference: &TimeSeriesFile, threshold: f64) -> Vec<String> {
    let retained: Vec<String> = reference
        .strain_channels
        .iter()
        .filter(|c| {
            let mean_abs = c.samples.iter().map(|v| v.abs()).sum::<f64>() / c.samples.len() as f64;
            mean_abs >= threshold
        })
        .map(|c| c.name.clone())
        .collect();
    if retained.is_empty() {
        log::warn!(
            "no strain channel of {} reaches {threshold} µm/m",
            reference.file_id
        );
    }
    retained
}

/// File-level train/test assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub train_file_ids: BTreeSet<String>,
    pub test_file_ids: BTreeSet<String>,
    pub target_train_fraction: f64,
}

impl SplitPlan {
    pub fn is_train(&self, file_id: &str) -> bool {
        self.train_file_ids.contains(file_id)
    }

    pub fn is_test(&self, file_id: &str) -> bool {
        self.test_file_ids.contains(file_id)
    }
}

/// What the splitter needs to know about a file.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitItem {
    pub file_id: String,
    pub rider: Option<String>,
    pub n_segments: usize,
}

impl SplitItem {
    pub fn from_file(f: &TimeSeriesFile, l_seq: usize) -> Self {
        Self {
            file_id: f.file_id.clone(),
            rider: f.rider().map(str::to_string),
            n_segments: f.len() / l_seq,
        }
    }
}

/// Splits files into train and test sides so that the training share of
/// segments is as close to `target_fraction` as file granularity allows.
///
/// With `stratify_by_rider` the optimum is sought per rider. Files are
/// shuffled with `rng_seed` first, so ties between equally good subsets are
/// broken reproducibly.
pub fn split_files(
    files: &[SplitItem],
    target_fraction: f64,
    stratify_by_rider: bool,
    rng_seed: u64,
) -> Result<SplitPlan> {
    if files.len() < 2 {
        return Err(Error::InsufficientFiles { found: files.len() });
    }
    if !(target_fraction > 0.0 && target_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "train fraction must lie in (0, 1), got {target_fraction}"
        )));
    }
    let mut ids = BTreeSet::new();
    for f in files {
        if !ids.insert(f.file_id.as_str()) {
            return Err(Error::InvalidConfig(format!("duplicate file id {}", f.file_id)));
        }
    }

    let mut sorted: Vec<&SplitItem> = files.iter().collect();
    sorted.sort_by(|a, b| a.file_id.cmp(&b.file_id));
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    sorted.shuffle(&mut rng);

    let plan = |groups: Vec<Vec<&SplitItem>>| {
        let mut train = BTreeSet::new();
        let mut test = BTreeSet::new();
        for group in groups {
            let chosen = best_subset(&group, target_fraction);
            for (item, in_train) in group.iter().zip(chosen) {
                if in_train {
                    train.insert(item.file_id.clone());
                } else {
                    test.insert(item.file_id.clone());
                }
            }
        }
        SplitPlan {
            train_file_ids: train,
            test_file_ids: test,
            target_train_fraction: target_fraction,
        }
    };

    if stratify_by_rider {
        let mut groups: BTreeMap<Option<&str>, Vec<&SplitItem>> = BTreeMap::new();
        for item in &sorted {
            groups.entry(item.rider.as_deref()).or_default().push(item);
        }
        let stratified = plan(groups.into_values().collect());
        if !stratified.train_file_ids.is_empty() && !stratified.test_file_ids.is_empty() {
            return Ok(stratified);
        }
        log::warn!("rider-stratified split leaves one side empty; splitting without strata");
    }
    Ok(plan(vec![sorted]))
}

/// Subset-sum over segment counts. Returns one flag per item (true = train).
/// Groups of two or more files always keep both sides non-empty.
fn best_subset(items: &[&SplitItem], target: f64) -> Vec<bool> {
    let n = items.len();
    if n == 1 {
        return vec![target >= 0.5];
    }
    let total: usize = items.iter().map(|i| i.n_segments).sum();
    // reach[i][s]: sum s is reachable using a subset of items[..i]
    let mut reach = vec![vec![false; total + 1]; n + 1];
    reach[0][0] = true;
    for i in 0..n {
        let w = items[i].n_segments;
        for s in 0..=total {
            if reach[i][s] {
                reach[i + 1][s] = true;
                reach[i + 1][s + w] = true;
            }
        }
    }
    let goal = target * total as f64;
    let mut best: Option<(f64, usize)> = None;
    for s in 0..=total {
        if !reach[n][s] {
            continue;
        }
        let dev = (s as f64 - goal).abs();
        if best.is_none_or(|(d, _)| dev < d) {
            best = Some((dev, s));
        }
    }
    let mut sum = best.map_or(0, |(_, s)| s);
    let mut flags = vec![false; n];
    for i in (0..n).rev() {
        let w = items[i].n_segments;
        if !reach[i][sum] {
            flags[i] = true;
            sum -= w;
        }
    }
    // Both sides must receive at least one file.
    if flags.iter().all(|&f| f) {
        let smallest = (0..n).min_by_key(|&i| items[i].n_segments).unwrap_or(0);
        flags[smallest] = false;
    } else if flags.iter().all(|&f| !f) {
        let smallest = (0..n).min_by_key(|&i| items[i].n_segments).unwrap_or(0);
        flags[smallest] = true;
    }
    flags
}

#[cfg(test)]
mod tests {
    use super::*;

    fn file_with(len: usize) -> TimeSeriesFile {
        let acc = Channel::new("a", (0..len).map(|i| i as f64).collect());
        let strain = Channel::new("s", (0..len).map(|i| -(i as f64)).collect());
        TimeSeriesFile::new("f", 1200.0, vec![acc], vec![strain], None).unwrap()
    }

    #[test]
    fn segment_counts_and_dropped_tail() {
        let segs = segment_file(&file_with(10_000), 4096).unwrap();
        assert_eq!(segs.len(), 2);
        assert_eq!(10_000 - segs.len() * 4096, 1808);
        assert_eq!(segs[1].acc_data[0][0], 4096.0);

        let segs = segment_file(&file_with(4096), 4096).unwrap();
        assert_eq!(segs.len(), 1);

        assert!(segment_file(&file_with(100), 4096).unwrap().is_empty());
        assert!(segment_file(&file_with(100), 1).is_err());
    }

    #[test]
    fn default_segment_duration() {
        let seconds: f64 = 4096.0 / 1200.0;
        assert!((seconds - 3.41).abs() < 0.01);
    }

    #[test]
    fn unequal_channel_lengths_rejected() {
        let a = Channel::new("a", vec![1.0, 2.0, 3.0]);
        let b = Channel::new("b", vec![1.0, 2.0]);
        let err = TimeSeriesFile::new("x", 1200.0, vec![a, b], vec![], None).unwrap_err();
        assert!(matches!(err, Error::MalformedFile { .. }));
    }

    #[test]
    fn non_finite_sample_reports_location() {
        let a = Channel::new("a", vec![1.0, f64::NAN, 3.0]);
        let err = TimeSeriesFile::new("x", 1200.0, vec![a], vec![], None).unwrap_err();
        match err {
            Error::NonFiniteSample {
                file,
                channel,
                index,
            } => {
                assert_eq!((file.as_str(), channel.as_str(), index), ("x", "a", 1));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn screening_examples() {
        let zero = Channel::new("zero", vec![0.0; 10]);
        let high = Channel::new("high", vec![200.0; 10]);
        let low = Channel::new("neg", vec![-100.0; 10]);
        let f = TimeSeriesFile::new("r", 1200.0, vec![], vec![zero, high, low], None).unwrap();
        assert_eq!(screen_strain_channels(&f, DEFAULT_STRAIN_THRESHOLD), vec!["high"]);
        assert_eq!(screen_strain_channels(&f, 50.0), vec!["high", "neg"]);
        assert!(screen_strain_channels(&f, 1e-9).len() == 2);
        assert!(screen_strain_channels(&f, 1e6).is_empty());
    }

    fn items(counts: &[usize]) -> Vec<SplitItem> {
        counts
            .iter()
            .enumerate()
            .map(|(i, &n)| SplitItem {
                file_id: format!("f{i:02}"),
                rider: Some(format!("r{}", i % 3)),
                n_segments: n,
            })
            .collect()
    }

    #[test]
    fn two_files_half_split() {
        let plan = split_files(&items(&[5, 5]), 0.5, false, 1).unwrap();
        assert_eq!(plan.train_file_ids.len(), 1);
        assert_eq!(plan.test_file_ids.len(), 1);
    }

    #[test]
    fn too_few_files() {
        assert!(matches!(
            split_files(&items(&[5]), 0.5, false, 1),
            Err(Error::InsufficientFiles { found: 1 })
        ));
        assert!(split_files(&items(&[5, 5]), 1.0, false, 1).is_err());
    }

    #[test]
    fn split_is_reproducible() {
        let it = items(&[3, 8, 12, 5, 9, 14, 2, 7, 6, 11]);
        let a = split_files(&it, 0.777, true, 42).unwrap();
        let b = split_files(&it, 0.777, true, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn split_is_optimal_per_rider() {
        let it = items(&[3, 8, 12, 5, 9, 14, 2, 7, 6, 11]);
        let plan = split_files(&it, 0.777, true, 3).unwrap();
        for rider in ["r0", "r1", "r2"] {
            let group: Vec<&SplitItem> = it
                .iter()
                .filter(|i| i.rider.as_deref() == Some(rider))
                .collect();
            let total: usize = group.iter().map(|i| i.n_segments).sum();
            let train: usize = group
                .iter()
                .filter(|i| plan.is_train(&i.file_id))
                .map(|i| i.n_segments)
                .sum();
            // exhaustive oracle over all non-trivial subsets
            let m = group.len();
            let mut best = f64::INFINITY;
            for mask in 1..(1u32 << m) - 1 {
                let s: usize = (0..m)
                    .filter(|b| mask & (1 << b) != 0)
                    .map(|b| group[b].n_segments)
                    .sum();
                best = best.min((s as f64 / total as f64 - 0.777).abs());
            }
            let dev = (train as f64 / total as f64 - 0.777).abs();
            assert!((dev - best).abs() < 1e-12, "{rider}: {dev} vs {best}");
        }
    }

    #[test]
    fn default_split_fraction_is_reached() {
        let frac = 4209.0 / (4209.0 + 1205.0);
        assert!((frac - DEFAULT_TRAIN_FRACTION).abs() < 5e-4);
    }

    #[test]
    fn sidecar_partial_labels_rejected() {
        let text = r#"{"sample_rate_hz": 1200, "channels": {"a": "acc"},
                       "labels": {"rider": "1", "underground": "even"}}"#;
        let err = parse_sidecar("x", text).unwrap_err();
        assert!(matches!(err, Error::MissingMetadata { ref field, .. } if field == "labels.speed_kmh"));
    }

    #[test]
    fn sidecar_missing_rate() {
        let err = parse_sidecar("x", r#"{"channels": {"a": "acc"}}"#).unwrap_err();
        assert!(matches!(err, Error::MissingMetadata { ref field, .. } if field == "sample_rate_hz"));
    }

    #[test]
    fn sidecar_keeps_declaration_order() {
        let text = r#"{"sample_rate_hz": 1200, "channels": {"z": "acc", "b": "strain", "a": "acc"}}"#;
        let meta = parse_sidecar("x", text).unwrap();
        let names: Vec<&str> = meta.channels.iter().map(|(n, _)| n.as_str()).collect();
        assert_eq!(names, ["z", "b", "a"]);
    }
}
