//! CovType ingestion and preparation: parsing, class balancing, stratified splitting,
//! z-scoring and the per-window observation stream.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::rng::{rng_from, SimRng};

/// Number of features in a CovType record.
pub const COVTYPE_FEATURES: usize = 54;
/// Number of cover-type classes.
pub const COVTYPE_CLASSES: usize = 7;
/// Size of the balanced dataset used by every experiment.
pub const BALANCED_TOTAL: usize = 19_229;

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub features: Vec<f64>,
    pub label: usize,
}

impl Observation {
    pub fn new(features: Vec<f64>, label: usize) -> Self {
        Observation { features, label }
    }
}

/// An ordered collection of observations sharing one feature dimension and label space.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    observations: Vec<Observation>,
    num_classes: usize,
    feature_dim: usize,
}

impl Dataset {
    pub fn empty(num_classes: usize, feature_dim: usize) -> Self {
        Dataset {
            observations: Vec::new(),
            num_classes,
            feature_dim,
        }
    }

    /// Builds a dataset, checking every observation's dimension and label.
    pub fn new(observations: Vec<Observation>, num_classes: usize, feature_dim: usize) -> Result<Self> {
        for (i, o) in observations.iter().enumerate() {
            if o.features.len() != feature_dim {
                return Err(Error::domain(format!(
                    "observation {i} has {} features, expected {feature_dim}",
                    o.features.len()
                )));
            }
            if o.label >= num_classes {
                return Err(Error::domain(format!(
                    "observation {i} has label {}, expected < {num_classes}",
                    o.label
                )));
            }
        }
        Ok(Dataset {
            observations,
            num_classes,
            feature_dim,
        })
    }

    /// Same shape, different rows. Rows are assumed to come from a dataset of this shape.
    pub(crate) fn with_rows(&self, observations: Vec<Observation>) -> Self {
        Dataset {
            observations,
            num_classes: self.num_classes,
            feature_dim: self.feature_dim,
        }
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Observation> {
        self.observations.iter()
    }

    pub fn into_observations(self) -> Vec<Observation> {
        self.observations
    }

    pub fn push(&mut self, obs: Observation) {
        debug_assert_eq!(obs.features.len(), self.feature_dim);
        debug_assert!(obs.label < self.num_classes);
        self.observations.push(obs);
    }

    /// Moves every observation of `other` onto the end of `self`.
    pub fn append(&mut self, other: &mut Dataset) {
        self.observations.append(&mut other.observations);
    }

    pub fn extend_from(&mut self, other: &Dataset) {
        self.observations.extend(other.observations.iter().cloned());
    }

    /// Observation count per label.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for o in &self.observations {
            counts[o.label] += 1;
        }
        counts
    }

    /// Row indices grouped by label.
    pub fn indices_by_class(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.num_classes];
        for (i, o) in self.observations.iter().enumerate() {
            groups[o.label].push(i);
        }
        groups
    }

    fn select(&self, indices: &[usize]) -> Dataset {
        self.with_rows(indices.iter().map(|&i| self.observations[i].clone()).collect())
    }
}

impl<'a> IntoIterator for &'a Dataset {
    type Item = &'a Observation;
    type IntoIter = std::slice::Iter<'a, Observation>;

    fn into_iter(self) -> Self::IntoIter {
        self.observations.iter()
    }
}

/// Loads the UCI Covertype file (`covtype.data`): 55 comma-separated integers per line,
/// labels 1..=7 remapped to 0..=6.
pub fn load_covtype(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_covtype(BufReader::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn parse_covtype<R: Read>(reader: R) -> Result<Dataset> {
    let mut observations = Vec::new();
    let reader = BufReader::new(reader);
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io("<covtype>", e))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut features = Vec::with_capacity(COVTYPE_FEATURES);
        let mut label = None;
        let mut fields = 0;
        for field in line.split(',') {
            fields += 1;
            let value: i64 = field.trim().parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("field {fields} is not an integer: {field:?}"),
            })?;
            if fields <= COVTYPE_FEATURES {
                features.push(value as f64);
            } else {
                label = Some(value);
            }
        }
        if fields != COVTYPE_FEATURES + 1 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected {} fields, found {fields}", COVTYPE_FEATURES + 1),
            });
        }
        let label = label.expect("field count checked");
        if !(1..=COVTYPE_CLASSES as i64).contains(&label) {
            return Err(Error::domain(format!(
                "line {line_no}: label {label} outside 1..={COVTYPE_CLASSES}"
            )));
        }
        observations.push(Observation::new(features, (label - 1) as usize));
    }
    Ok(Dataset {
        observations,
        num_classes: COVTYPE_CLASSES,
        feature_dim: COVTYPE_FEATURES,
    })
}

/// Writes observations in the Covertype layout (labels shifted back to 1-based).
pub fn write_covtype<W: Write>(data: &Dataset, writer: W) -> std::io::Result<()> {
    let mut w = BufWriter::new(writer);
    for o in data {
        for f in &o.features {
            write!(w, "{f},")?;
        }
        writeln!(w, "{}", o.label + 1)?;
    }
    w.flush()
}

/// Subsamples every class to `min(smallest class, BALANCED_TOTAL / K)` rows and shuffles.
///
/// On the full Covertype file this keeps 2747 rows per class, 19229 in total.
pub fn balance_classes(data: &Dataset, rng: &mut SimRng) -> Result<Dataset> {
    balance_classes_to(data, BALANCED_TOTAL / data.num_classes.max(1), rng)
}

/// Like [`balance_classes`] with an explicit per-class cap.
pub fn balance_classes_to(data: &Dataset, per_class_cap: usize, rng: &mut SimRng) -> Result<Dataset> {
    let mut groups = data.indices_by_class();
    if let Some(missing) = groups.iter().position(|g| g.is_empty()) {
        return Err(Error::domain(format!("class {missing} is absent from the input")));
    }
    let smallest = groups.iter().map(Vec::len).min().unwrap_or(0);
    let per_class = smallest.min(per_class_cap);
    let mut keep = Vec::with_capacity(per_class * groups.len());
    for group in &mut groups {
        let (chosen, _) = group.partial_shuffle(rng, per_class);
        keep.extend_from_slice(chosen);
    }
    keep.shuffle(rng);
    Ok(data.select(&keep))
}

/// Stratified split: each class contributes `round(n_c * train_fraction)` rows to the
/// training side. Both sides are shuffled.
pub fn split(data: &Dataset, train_fraction: f64, rng: &mut SimRng) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::domain(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for mut group in data.indices_by_class() {
        group.shuffle(rng);
        let n_train = (group.len() as f64 * train_fraction).round() as usize;
        train.extend_from_slice(&group[..n_train]);
        test.extend_from_slice(&group[n_train..]);
    }
    train.shuffle(rng);
    test.shuffle(rng);
    Ok((data.select(&train), data.select(&test)))
}

/// Draws `windows` disjoint batches of `obs_per_window` rows, uniformly without
/// replacement over the whole stream.
pub fn window_stream(
    train: &Dataset,
    obs_per_window: usize,
    windows: usize,
    rng: &mut SimRng,
) -> Result<Vec<Dataset>> {
    let needed = obs_per_window
        .checked_mul(windows)
        .ok_or_else(|| Error::config("window stream size overflows"))?;
    if needed > train.len() {
        return Err(Error::config(format!(
            "{windows} windows of {obs_per_window} observations need {needed} rows, \
             training split has {}",
            train.len()
        )));
    }
    let mut order: Vec<usize> = (0..train.len()).collect();
    let (chosen, _) = order.partial_shuffle(rng, needed);
    Ok(chosen
        .chunks(obs_per_window.max(1))
        .take(windows)
        .map(|idx| train.select(idx))
        .collect())
}

/// Per-feature mean and population standard deviation of a training split.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizationStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl StandardizationStats {
    pub fn fit(data: &Dataset) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::domain("cannot standardize with an empty training set"));
        }
        let d = data.feature_dim;
        let n = data.len() as f64;
        let mut mean = vec![0.0; d];
        for o in data {
            for (m, x) in mean.iter_mut().zip(&o.features) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for o in data {
            for ((v, x), m) in var.iter_mut().zip(&o.features).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let std = var.into_iter().map(|v| (v / n).sqrt()).collect();
        Ok(StandardizationStats { mean, std })
    }

    pub fn apply(&self, data: &Dataset) -> Dataset {
        let rows = data
            .iter()
            .map(|o| {
                let features = o
                    .features
                    .iter()
                    .zip(self.mean.iter().zip(&self.std))
                    .map(|(x, (m, s))| if *s > 0.0 { (x - m) / s } else { 0.0 })
                    .collect();
                Observation::new(features, o.label)
            })
            .collect();
        data.with_rows(rows)
    }
}

/// Z-scores both splits with statistics computed on `train` alone.
pub fn standardize(train: &Dataset, test: &Dataset) -> Result<(Dataset, Dataset, StandardizationStats)> {
    let stats = StandardizationStats::fit(train)?;
    Ok((stats.apply(train), stats.apply(test), stats))
}

/// Balanced, split and standardized data ready for a simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedData {
    pub train: Dataset,
    pub test: Dataset,
    pub stats: StandardizationStats,
}

/// Runs balance, split and standardize with a single seed.
pub fn prepare(raw: &Dataset, train_fraction: f64, seed: u64) -> Result<PreparedData> {
    let mut rng = rng_from(seed);
    let balanced = balance_classes(raw, &mut rng)?;
    let (train, test) = split(&balanced, train_fraction, &mut rng)?;
    let (train, test, stats) = standardize(&train, &test)?;
    Ok(PreparedData { train, test, stats })
}

const SNAPSHOT_MAGIC: &[u8; 8] = b"HTLSNAP1";

/// Binary snapshot of prepared data, keyed by the preparation seed.
///
/// Layout (little endian): magic, seed u64, K u64, d u64, then for train and test a row
/// count u64 followed by rows of `d` f64 values and a u64 label; finally the mean and std
/// vectors.
pub fn write_snapshot(path: impl AsRef<Path>, seed: u64, data: &PreparedData) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut put = |bytes: &[u8]| w.write_all(bytes).map_err(|e| Error::io(path, e));
    put(SNAPSHOT_MAGIC)?;
    put(&seed.to_le_bytes())?;
    put(&(data.train.num_classes as u64).to_le_bytes())?;
    put(&(data.train.feature_dim as u64).to_le_bytes())?;
    for split in [&data.train, &data.test] {
        put(&(split.len() as u64).to_le_bytes())?;
        for o in split {
            for f in &o.features {
                put(&f.to_le_bytes())?;
            }
            put(&(o.label as u64).to_le_bytes())?;
        }
    }
    for v in data.stats.mean.iter().chain(&data.stats.std) {
        put(&v.to_le_bytes())?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a snapshot written by [`write_snapshot`]. Returns `Ok(None)` when the snapshot was
/// produced with a different seed.
pub fn read_snapshot(path: impl AsRef<Path>, seed: u64) -> Result<Option<PreparedData>> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let mut r = SnapshotReader { bytes: &bytes, path };
    if r.take(8)? != SNAPSHOT_MAGIC {
        return Err(r.corrupt());
    }
    if r.u64()? != seed {
        return Ok(None);
    }
    let k = r.u64()? as usize;
    let d = r.u64()? as usize;
    let mut splits = Vec::with_capacity(2);
    for _ in 0..2 {
        let n = r.u64()? as usize;
        let mut rows = Vec::with_capacity(n);
        for _ in 0..n {
            let features = (0..d).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            rows.push(Observation::new(features, r.u64()? as usize));
        }
        splits.push(Dataset::new(rows, k, d)?);
    }
    let mean = (0..d).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    let std = (0..d).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    let test = splits.pop().expect("two splits");
    let train = splits.pop().expect("two splits");
    Ok(Some(PreparedData {
        train,
        test,
        stats: StandardizationStats { mean, std },
    }))
}

struct SnapshotReader<'a> {
    bytes: &'a [u8],
    path: &'a Path,
}

impl<'a> SnapshotReader<'a> {
    fn corrupt(&self) -> Error {
        Error::domain(format!("{}: corrupt snapshot", self.path.display()))
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() < n {
            return Err(self.corrupt());
        }
        let (head, tail) = self.bytes.split_at(n);
        self.bytes = tail;
        Ok(head)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        self.u64().map(f64::from_bits)
    }
}

/// Synthetic data with the Covertype layout: 10 continuous features drawn from
/// class-dependent Gaussians, 4 one-hot wilderness indicators and 40 one-hot soil
/// indicators whose distribution depends on the class. Labels are balanced.
///
/// Only the shape matches the real dataset; it stands in wherever the feature values do
/// not matter (energy accounting) and for tests and benchmarks.
pub fn synthetic_covtype(per_class: usize, seed: u64) -> Dataset {
    let mut rng = rng_from(seed);
    let k = COVTYPE_CLASSES;
    let continuous = 10;
    let centers: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..continuous).map(|_| rng.random_range(-1.5..1.5)).collect())
        .collect();
    let noise = Normal::new(0.0, 1.0).expect("valid normal");
    let mut rows = Vec::with_capacity(per_class * k);
    for label in 0..k {
        for _ in 0..per_class {
            let mut features = vec![0.0; COVTYPE_FEATURES];
            for (j, c) in centers[label].iter().enumerate() {
                features[j] = 100.0 * (c + noise.sample(&mut rng));
            }
            let wilderness = if rng.random_bool(0.6) { label % 4 } else { rng.random_range(0..4) };
            features[continuous + wilderness] = 1.0;
            let soil = if rng.random_bool(0.5) {
                (label * 5 + rng.random_range(0..5)) % 40
            } else {
                rng.random_range(0..40)
            };
            features[continuous + 4 + soil] = 1.0;
            rows.push(Observation::new(features, label));
        }
    }
    rows.shuffle(&mut rng);
    Dataset {
        observations: rows,
        num_classes: k,
        feature_dim: COVTYPE_FEATURES,
    }
}
