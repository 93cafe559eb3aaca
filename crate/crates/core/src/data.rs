//! Dataset bundles on disk and the synthetic generator.
//!
//! A bundle is a directory:
//!
//! | file             | contents                                                    |
//! |------------------|-------------------------------------------------------------|
//! | `features.gzt`   | visual features, one row per sample                         |
//! | `labels.u32`     | little-endian `u32` class id per sample, no header          |
//! | `attributes.gzt` | one attribute row per class, class ids dense `0..C`         |
//! | `splits.json`    | index and class lists ([`SplitSpec`] field names)           |
//! | `manifest.json`  | dims, counts and a 64-bit FNV-1a checksum per file          |
//!
//! Tensor files (`.gzt`) are `b"GZT1"`, `u32` version (1), `u32` rows,
//! `u32` cols, then `rows·cols` little-endian `f32` values in row-major order.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{l2_distance, Matrix};
use crate::rng::Rng;

pub const TENSOR_MAGIC: &[u8; 4] = b"GZT1";
pub const TENSOR_VERSION: u32 = 1;
const TENSOR_HEADER: usize = 16;

pub const FEATURES_FILE: &str = "features.gzt";
pub const LABELS_FILE: &str = "labels.u32";
pub const ATTRIBUTES_FILE: &str = "attributes.gzt";
pub const SPLITS_FILE: &str = "splits.json";
pub const MANIFEST_FILE: &str = "manifest.json";

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn checksum_hex(bytes: &[u8]) -> String {
    format!("{:016x}", fnv1a64(bytes))
}

/// Serializes a matrix in the canonical tensor encoding (values narrowed to `f32`).
pub fn encode_tensor(m: &Matrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(TENSOR_HEADER + 4 * m.as_slice().len());
    out.extend_from_slice(TENSOR_MAGIC);
    out.extend_from_slice(&TENSOR_VERSION.to_le_bytes());
    out.extend_from_slice(&(m.rows() as u32).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u32).to_le_bytes());
    for &v in m.as_slice() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

fn corrupt(path: &Path, offset: usize, msg: impl Into<String>) -> Error {
    Error::Corrupt {
        path: path.to_path_buf(),
        offset: offset as u64,
        msg: msg.into(),
    }
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"))
}

/// Parses a tensor file image; `path` is only used in error messages.
pub fn decode_tensor(bytes: &[u8], path: &Path) -> Result<Matrix> {
    if bytes.len() < TENSOR_HEADER {
        return Err(corrupt(path, bytes.len(), "truncated tensor header"));
    }
    if &bytes[..4] != TENSOR_MAGIC {
        return Err(corrupt(path, 0, "bad magic, expected GZT1"));
    }
    let version = read_u32(bytes, 4);
    if version != TENSOR_VERSION {
        return Err(corrupt(path, 4, format!("unsupported version {version}")));
    }
    let rows = read_u32(bytes, 8) as usize;
    let cols = read_u32(bytes, 12) as usize;
    let expected = TENSOR_HEADER + 4 * rows * cols;
    if bytes.len() < expected {
        return Err(corrupt(
            path,
            bytes.len(),
            format!("truncated payload: {rows}x{cols} needs {expected} bytes"),
        ));
    }
    if bytes.len() > expected {
        return Err(corrupt(path, expected, "trailing bytes after payload"));
    }
    let mut data = Vec::with_capacity(rows * cols);
    for (i, chunk) in bytes[TENSOR_HEADER..].chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().expect("4 bytes"));
        if !v.is_finite() {
            return Err(corrupt(path, TENSOR_HEADER + 4 * i, "non-finite value"));
        }
        data.push(f64::from(v));
    }
    Matrix::from_vec(rows, cols, data)
}

pub fn write_tensor(path: &Path, m: &Matrix) -> Result<()> {
    fs::write(path, encode_tensor(m)).map_err(|e| Error::io(path, e))
}

pub fn read_tensor(path: &Path) -> Result<Matrix> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_tensor(&bytes, path)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct SplitSpec {
    pub train_idx: Vec<usize>,
    pub val_idx: Vec<usize>,
    pub test_seen_idx: Vec<usize>,
    pub test_unseen_idx: Vec<usize>,
    pub seen_classes: Vec<u32>,
    pub unseen_classes: Vec<u32>,
    /// Seen classes held out as unseen while tuning hyperparameters.
    pub val_unseen_classes: Vec<u32>,
}

/// Per-dimension min-max scaling applied to the features, if any.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMax {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBundle {
    pub features: Matrix,
    pub labels: Vec<u32>,
    pub attributes: Matrix,
    pub splits: SplitSpec,
    pub class_names: Option<Vec<String>>,
    pub normalization: Option<MinMax>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub val: usize,
    pub test_seen: usize,
    pub test_unseen: usize,
    pub seen_classes: usize,
    pub unseen_classes: usize,
    pub val_unseen_classes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub format_version: u32,
    pub num_samples: usize,
    pub num_classes: usize,
    pub dim_v: usize,
    pub dim_a: usize,
    pub counts: SplitCounts,
    /// File name to lowercase hex FNV-1a 64.
    pub checksums: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_names: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalization: Option<MinMax>,
}

impl DatasetBundle {
    pub fn num_classes(&self) -> usize {
        self.attributes.rows()
    }

    pub fn dim_v(&self) -> usize {
        self.features.cols()
    }

    pub fn dim_a(&self) -> usize {
        self.attributes.cols()
    }

    pub fn rows(&self, idx: &[usize]) -> (Matrix, Vec<u32>) {
        (
            self.features.select_rows(idx),
            idx.iter().map(|&i| self.labels[i]).collect(),
        )
    }

    pub fn attribute_rows(&self, classes: &[u32]) -> Matrix {
        let idx: Vec<usize> = classes.iter().map(|&c| c as usize).collect();
        self.attributes.select_rows(&idx)
    }

    /// Checks every structural invariant; returns non-fatal warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        let n = self.features.rows();
        let c = self.attributes.rows();
        if self.labels.len() != n {
            return Err(Error::Data(format!(
                "{} labels for {n} feature rows",
                self.labels.len()
            )));
        }
        if let Some((i, &l)) = self.labels.iter().enumerate().find(|(_, &l)| l as usize >= c) {
            return Err(Error::Data(format!(
                "label {l} of row {i} has no attribute row ({c} classes)"
            )));
        }
        if let Some(names) = &self.class_names {
            if names.len() != c {
                return Err(Error::Data(format!("{} class names for {c} classes", names.len())));
            }
        }
        if let Some(mm) = &self.normalization {
            if mm.min.len() != self.dim_v() || mm.max.len() != self.dim_v() {
                return Err(Error::Data("normalization width does not match features".into()));
            }
        }
        let s = &self.splits;

        let class_set = |name: &str, ids: &[u32]| -> Result<BTreeSet<u32>> {
            let mut set = BTreeSet::new();
            for &id in ids {
                if id as usize >= c {
                    return Err(Error::Data(format!("{name}: class {id} out of range")));
                }
                if !set.insert(id) {
                    return Err(Error::Data(format!("{name}: class {id} listed twice")));
                }
            }
            Ok(set)
        };
        let seen = class_set("seen_classes", &s.seen_classes)?;
        let unseen = class_set("unseen_classes", &s.unseen_classes)?;
        let val_unseen = class_set("val_unseen_classes", &s.val_unseen_classes)?;
        if let Some(x) = seen.intersection(&unseen).next() {
            return Err(Error::Data(format!("class {x} is both seen and unseen")));
        }
        if let Some(x) = val_unseen.difference(&seen).next() {
            return Err(Error::Data(format!("validation-unseen class {x} is not a seen class")));
        }

        let mut owner: Vec<Option<&str>> = vec![None; n];
        let lists: [(&str, &[usize], &BTreeSet<u32>); 4] = [
            ("train_idx", &s.train_idx, &seen),
            ("val_idx", &s.val_idx, &seen),
            ("test_seen_idx", &s.test_seen_idx, &seen),
            ("test_unseen_idx", &s.test_unseen_idx, &unseen),
        ];
        for (name, idx, allowed) in lists {
            for &i in idx {
                if i >= n {
                    return Err(Error::Data(format!("{name}: index {i} out of range ({n} rows)")));
                }
                if let Some(prev) = owner[i] {
                    return Err(Error::Data(format!("row {i} appears in both {prev} and {name}")));
                }
                owner[i] = Some(name);
                let l = self.labels[i];
                if !allowed.contains(&l) {
                    return Err(Error::Data(format!(
                        "{name}: row {i} has class {l}, which is not allowed in this split"
                    )));
                }
            }
        }

        let mut warnings = Vec::new();
        let train_classes: BTreeSet<u32> = s
            .train_idx
            .iter()
            .chain(&s.val_idx)
            .map(|&i| self.labels[i])
            .collect();
        for cls in seen.difference(&train_classes) {
            warnings.push(format!("seen class {cls} has no training rows"));
        }
        let test_unseen: BTreeSet<u32> = s.test_unseen_idx.iter().map(|&i| self.labels[i]).collect();
        for cls in unseen.difference(&test_unseen) {
            warnings.push(format!("unseen class {cls} has no test rows"));
        }
        Ok(warnings)
    }

    pub fn counts(&self) -> SplitCounts {
        let s = &self.splits;
        SplitCounts {
            train: s.train_idx.len(),
            val: s.val_idx.len(),
            test_seen: s.test_seen_idx.len(),
            test_unseen: s.test_unseen_idx.len(),
            seen_classes: s.seen_classes.len(),
            unseen_classes: s.unseen_classes.len(),
            val_unseen_classes: s.val_unseen_classes.len(),
        }
    }

    /// Rescales every feature dimension to `[0, 1]` using the training rows,
    /// recording the ranges for the manifest.
    pub fn normalize_minmax(&mut self) -> Result<()> {
        if self.normalization.is_some() {
            return Err(Error::State("features are already normalized".into()));
        }
        let train: Vec<usize> = self.splits.train_idx.iter().chain(&self.splits.val_idx).copied().collect();
        if train.is_empty() {
            return Err(Error::Data("no training rows to fit normalization".into()));
        }
        let d = self.dim_v();
        let mut min = vec![f64::INFINITY; d];
        let mut max = vec![f64::NEG_INFINITY; d];
        for &i in &train {
            for (j, &v) in self.features.row(i).iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        for i in 0..self.features.rows() {
            for (j, v) in self.features.row_mut(i).iter_mut().enumerate() {
                let span = max[j] - min[j];
                let scaled = if span > 0.0 { (*v - min[j]) / span } else { 0.0 };
                *v = f64::from(scaled as f32);
            }
        }
        self.normalization = Some(MinMax { min, max });
        Ok(())
    }

    /// Byte images of the three binary files.
    fn binary_files(&self) -> [(&'static str, Vec<u8>); 3] {
        let labels: Vec<u8> = self.labels.iter().flat_map(|l| l.to_le_bytes()).collect();
        [
            (FEATURES_FILE, encode_tensor(&self.features)),
            (LABELS_FILE, labels),
            (ATTRIBUTES_FILE, encode_tensor(&self.attributes)),
        ]
    }

    /// Checksums of every bundle file as written by [`save_bundle`].
    pub fn file_checksums(&self) -> BTreeMap<String, String> {
        let mut sums: BTreeMap<String, String> = self
            .binary_files()
            .iter()
            .map(|(name, bytes)| (name.to_string(), checksum_hex(bytes)))
            .collect();
        sums.insert(SPLITS_FILE.into(), checksum_hex(self.splits_json().as_bytes()));
        sums
    }

    fn splits_json(&self) -> String {
        serde_json::to_string_pretty(&self.splits).expect("splits serialize") + "\n"
    }

    pub fn manifest(&self) -> BundleManifest {
        BundleManifest {
            format_version: 1,
            num_samples: self.features.rows(),
            num_classes: self.num_classes(),
            dim_v: self.dim_v(),
            dim_a: self.dim_a(),
            counts: self.counts(),
            checksums: self.file_checksums(),
            class_names: self.class_names.clone(),
            normalization: self.normalization.clone(),
        }
    }
}

fn write_file(path: PathBuf, bytes: &[u8]) -> Result<()> {
    fs::write(&path, bytes).map_err(|e| Error::io(path, e))
}

/// Writes the canonical encoding of `bundle` into directory `dir`.
pub fn save_bundle(bundle: &DatasetBundle, dir: &Path) -> Result<()> {
    bundle.validate()?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (name, bytes) in bundle.binary_files() {
        write_file(dir.join(name), &bytes)?;
    }
    write_file(dir.join(SPLITS_FILE), bundle.splits_json().as_bytes())?;
    let manifest = serde_json::to_string_pretty(&bundle.manifest()).expect("manifest serializes") + "\n";
    write_file(dir.join(MANIFEST_FILE), manifest.as_bytes())
}

/// Loads and validates a bundle, returning any non-fatal warnings.
pub fn load_bundle_with_warnings(dir: &Path) -> Result<(DatasetBundle, Vec<String>)> {
    let read = |name: &str| -> Result<(PathBuf, Vec<u8>)> {
        let p = dir.join(name);
        let bytes = fs::read(&p).map_err(|e| Error::io(&p, e))?;
        Ok((p, bytes))
    };
    let json_err = |p: &Path, e| Error::Json {
        path: p.to_path_buf(),
        source: e,
    };

    let (mpath, mbytes) = read(MANIFEST_FILE)?;
    let manifest: BundleManifest = serde_json::from_slice(&mbytes).map_err(|e| json_err(&mpath, e))?;
    if manifest.format_version != 1 {
        return Err(corrupt(&mpath, 0, format!("unsupported bundle format {}", manifest.format_version)));
    }

    let mut images = BTreeMap::new();
    for name in [FEATURES_FILE, LABELS_FILE, ATTRIBUTES_FILE, SPLITS_FILE] {
        images.insert(name, read(name)?);
    }
    let (fp, fb) = &images[FEATURES_FILE];
    let features = decode_tensor(fb, fp)?;
    let (ap, ab) = &images[ATTRIBUTES_FILE];
    let attributes = decode_tensor(ab, ap)?;
    let (lp, lb) = &images[LABELS_FILE];
    if lb.len() != 4 * features.rows() {
        return Err(corrupt(
            lp,
            lb.len().min(4 * features.rows()),
            format!("expected {} labels", features.rows()),
        ));
    }
    let labels: Vec<u32> = lb.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().unwrap())).collect();
    let (sp, sb) = &images[SPLITS_FILE];
    let splits: SplitSpec = serde_json::from_slice(sb).map_err(|e| json_err(sp, e))?;

    // structural errors above carry precise offsets; checksums catch the rest
    for (name, (p, bytes)) in &images {
        match manifest.checksums.get(*name) {
            Some(expected) if *expected == checksum_hex(bytes) => {}
            Some(expected) => {
                return Err(corrupt(
                    p,
                    0,
                    format!("checksum {} does not match manifest {expected}", checksum_hex(bytes)),
                ))
            }
            None => return Err(corrupt(&mpath, 0, format!("no checksum for {name}"))),
        }
    }

    if features.cols() != manifest.dim_v || attributes.cols() != manifest.dim_a {
        return Err(Error::Data(format!(
            "manifest dims ({}, {}) disagree with files ({}, {})",
            manifest.dim_v,
            manifest.dim_a,
            features.cols(),
            attributes.cols()
        )));
    }
    if features.rows() != manifest.num_samples || attributes.rows() != manifest.num_classes {
        return Err(Error::Data("manifest counts disagree with files".into()));
    }
    let bundle = DatasetBundle {
        features,
        labels,
        attributes,
        splits,
        class_names: manifest.class_names.clone(),
        normalization: manifest.normalization.clone(),
    };
    let warnings = bundle.validate()?;
    if bundle.counts() != manifest.counts {
        return Err(Error::Data("manifest split counts disagree with splits.json".into()));
    }
    Ok((bundle, warnings))
}

pub fn load_bundle(dir: &Path) -> Result<DatasetBundle> {
    let (bundle, warnings) = load_bundle_with_warnings(dir)?;
    for w in warnings {
        log::warn!("{}: {w}", dir.display());
    }
    Ok(bundle)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_seen: usize,
    pub n_unseen: usize,
    pub dim_v: usize,
    pub dim_a: usize,
    /// Dimension of the shared space the class centers live in.
    pub semantic_dim: usize,
    pub samples_per_class: usize,
    /// Minimum distance between class centers, in units of the visual noise σ.
    pub separation: f64,
    pub attr_noise: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_seen: 10,
            n_unseen: 5,
            dim_v: 32,
            dim_a: 16,
            semantic_dim: 6,
            samples_per_class: 100,
            separation: 4.0,
            attr_noise: 0.5,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("infeasible synthetic spec: {m}")));
        if self.n_seen == 0 || self.n_unseen == 0 || self.samples_per_class == 0 {
            return bad("class and sample counts must be >= 1");
        }
        if self.dim_v == 0 || self.dim_a == 0 || self.semantic_dim == 0 {
            return bad("dimensions must be >= 1");
        }
        if self.semantic_dim > self.dim_v {
            return bad("semantic_dim must not exceed dim_v");
        }
        if !(self.separation > 0.0) || !self.separation.is_finite() {
            return bad("separation must be > 0");
        }
        if !(self.attr_noise >= 0.0) || !self.attr_noise.is_finite() {
            return bad("attr_noise must be >= 0");
        }
        Ok(())
    }

    /// Unseen class ids, spread evenly through `0..C`.
    pub fn unseen_ids(&self) -> Vec<u32> {
        let c = self.n_seen + self.n_unseen;
        (0..self.n_unseen)
            .map(|j| ((2 * j + 1) * c / (2 * self.n_unseen)) as u32)
            .collect()
    }
}

/// Points in `dim` dimensions with pairwise distance at least `sep`,
/// dart-thrown into a cube that grows until all points fit.
fn spaced_points(count: usize, dim: usize, sep: f64, rng: &mut Rng) -> Vec<Vec<f64>> {
    let mut side = sep * (count as f64).powf(1.0 / dim as f64) * 1.5;
    'grow: loop {
        let mut pts: Vec<Vec<f64>> = Vec::with_capacity(count);
        for _ in 0..count {
            let mut placed = false;
            for _ in 0..2000 {
                let p: Vec<f64> = (0..dim).map(|_| rng.uniform(0.0, side)).collect();
                if pts.iter().all(|q| l2_distance(&p, q) >= sep) {
                    pts.push(p);
                    placed = true;
                    break;
                }
            }
            if !placed {
                side *= 1.1;
                continue 'grow;
            }
        }
        let mean: Vec<f64> = (0..dim)
            .map(|j| pts.iter().map(|p| p[j]).sum::<f64>() / count as f64)
            .collect();
        for p in &mut pts {
            p.iter_mut().zip(&mean).for_each(|(v, m)| *v -= m);
        }
        return pts;
    }
}

/// `rows × cols` matrix with orthonormal columns (Gram–Schmidt on Gaussians).
fn orthonormal_columns(rows: usize, cols: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(cols);
    while basis.len() < cols {
        let mut v: Vec<f64> = (0..rows).map(|_| rng.normal()).collect();
        for b in &basis {
            let d: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
    basis
}

#[inline]
fn to_f32_exact(v: f64) -> f64 {
    f64::from(v as f32)
}

/// Builds a bundle of Gaussian classes whose centers and attributes are
/// linear images of shared low-dimensional class codes, so the attribute
/// of an unseen class predicts where its visual samples lie.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<DatasetBundle> {
    spec.validate()?;
    let root = Rng::new(spec.seed);
    let c = spec.n_seen + spec.n_unseen;
    let k = spec.semantic_dim;

    let codes = spaced_points(c, k, spec.separation, &mut root.fork(0));
    let embed = orthonormal_columns(spec.dim_v, k, &mut root.fork(1));
    let mut proj_rng = root.fork(2);
    let proj: Vec<Vec<f64>> = (0..spec.dim_a)
        .map(|_| (0..k).map(|_| proj_rng.normal() / (k as f64).sqrt()).collect())
        .collect();

    let centers: Vec<Vec<f64>> = codes
        .iter()
        .map(|s| {
            (0..spec.dim_v)
                .map(|i| (0..k).map(|j| embed[j][i] * s[j]).sum())
                .collect()
        })
        .collect();
    let mut attr_rng = root.fork(3);
    let mut attributes = Matrix::zeros(c, spec.dim_a);
    for (cls, s) in codes.iter().enumerate() {
        for (i, p) in proj.iter().enumerate() {
            let clean: f64 = p.iter().zip(s).map(|(a, b)| a * b).sum();
            attributes.set(cls, i, to_f32_exact(clean + spec.attr_noise * attr_rng.normal()));
        }
    }

    let unseen = spec.unseen_ids();
    let seen: Vec<u32> = (0..c as u32).filter(|id| !unseen.contains(id)).collect();
    let mut split_rng = root.fork(4);
    let n_val_unseen = if spec.n_seen >= 2 {
        ((spec.n_seen as f64 * 0.2).round() as usize).clamp(1, spec.n_seen - 1)
    } else {
        0
    };
    let mut shuffled = seen.clone();
    split_rng.shuffle(&mut shuffled);
    let mut val_unseen: Vec<u32> = shuffled[..n_val_unseen].to_vec();
    val_unseen.sort_unstable();

    let mut noise_rng = root.fork(5);
    let n = spec.samples_per_class;
    let mut features = Matrix::zeros(c * n, spec.dim_v);
    let mut labels = Vec::with_capacity(c * n);
    let mut splits = SplitSpec {
        seen_classes: seen.clone(),
        unseen_classes: unseen.clone(),
        val_unseen_classes: val_unseen.clone(),
        ..SplitSpec::default()
    };
    let n_test = n / 5;
    for cls in 0..c as u32 {
        let center = &centers[cls as usize];
        let base = cls as usize * n;
        for s in 0..n {
            let row = features.row_mut(base + s);
            for (v, m) in row.iter_mut().zip(center) {
                *v = to_f32_exact(m + noise_rng.normal());
            }
            labels.push(cls);
        }
        let rows: Vec<usize> = (base..base + n).collect();
        if unseen.contains(&cls) {
            splits.test_unseen_idx.extend(rows);
            continue;
        }
        let (test, rest) = rows.split_at(n_test);
        splits.test_seen_idx.extend_from_slice(test);
        if val_unseen.contains(&cls) {
            splits.val_idx.extend_from_slice(rest);
        } else {
            let n_val = rest.len() / 5;
            let (val, train) = rest.split_at(n_val);
            splits.val_idx.extend_from_slice(val);
            splits.train_idx.extend_from_slice(train);
        }
    }
    for list in [
        &mut splits.train_idx,
        &mut splits.val_idx,
        &mut splits.test_seen_idx,
        &mut splits.test_unseen_idx,
    ] {
        list.sort_unstable();
    }

    let bundle = DatasetBundle {
        features,
        labels,
        attributes,
        splits,
        class_names: Some((0..c).map(|i| format!("class_{i:03}")).collect()),
        normalization: None,
    };
    bundle.validate()?;
    Ok(bundle)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_reference_vectors() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn tensor_roundtrip_and_errors() {
        let m = Matrix::from_rows(&[vec![1.5, -2.0], vec![0.25, 3.0]]).unwrap();
        let bytes = encode_tensor(&m);
        assert_eq!(bytes.len(), 16 + 16);
        let p = Path::new("t.gzt");
        assert_eq!(decode_tensor(&bytes, p).unwrap(), m);

        let err = decode_tensor(&bytes[..bytes.len() - 3], p).unwrap_err();
        assert!(matches!(err, Error::Corrupt { offset: 29, .. }), "{err}");
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_tensor(&bad, p), Err(Error::Corrupt { offset: 0, .. })));
        let mut bad = bytes.clone();
        bad[4] = 2;
        assert!(matches!(decode_tensor(&bad, p), Err(Error::Corrupt { offset: 4, .. })));
        let mut bad = bytes;
        bad.push(0);
        assert!(matches!(decode_tensor(&bad, p), Err(Error::Corrupt { offset: 32, .. })));
    }

    #[test]
    fn minimal_synthetic_bundle_is_legal() {
        let spec = SynthSpec {
            n_seen: 1,
            n_unseen: 1,
            samples_per_class: 1,
            ..SynthSpec::default()
        };
        let b = generate_synthetic(&spec).unwrap();
        assert_eq!(b.features.rows(), 2);
        assert_eq!(b.splits.test_unseen_idx.len(), 1);
        assert!(b.splits.val_unseen_classes.is_empty());
    }

    #[test]
    fn synthetic_is_deterministic() {
        let spec = SynthSpec {
            samples_per_class: 10,
            seed: 5,
            ..SynthSpec::default()
        };
        let a = generate_synthetic(&spec).unwrap();
        let b = generate_synthetic(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.file_checksums(), b.file_checksums());
    }

    #[test]
    fn synthetic_centers_respect_separation() {
        let mut rng = Rng::new(4);
        let pts = spaced_points(15, 6, 4.0, &mut rng);
        for i in 0..15 {
            for j in 0..i {
                assert!(l2_distance(&pts[i], &pts[j]) >= 4.0);
            }
        }
    }

    #[test]
    fn unseen_ids_interleave() {
        assert_eq!(SynthSpec::default().unseen_ids(), vec![1, 4, 7, 10, 13]);
    }

    #[test]
    fn infeasible_specs_are_rejected() {
        for spec in [
            SynthSpec { n_seen: 0, ..SynthSpec::default() },
            SynthSpec { separation: 0.0, ..SynthSpec::default() },
            SynthSpec { semantic_dim: 64, ..SynthSpec::default() },
        ] {
            assert!(matches!(generate_synthetic(&spec), Err(Error::Config(_))));
        }
    }

    #[test]
    fn validation_rejects_unseen_training_rows() {
        let mut b = generate_synthetic(&SynthSpec {
            samples_per_class: 5,
            ..SynthSpec::default()
        })
        .unwrap();
        let leak = b.splits.test_unseen_idx.pop().unwrap();
        b.splits.train_idx.push(leak);
        assert!(matches!(b.validate(), Err(Error::Data(_))));
    }

    #[test]
    fn validation_rejects_overlapping_splits() {
        let mut b = generate_synthetic(&SynthSpec {
            samples_per_class: 5,
            ..SynthSpec::default()
        })
        .unwrap();
        let dup = b.splits.train_idx[0];
        b.splits.test_seen_idx.push(dup);
        assert!(b.validate().is_err());
    }

    #[test]
    fn minmax_records_ranges() {
        let mut b = generate_synthetic(&SynthSpec {
            samples_per_class: 10,
            ..SynthSpec::default()
        })
        .unwrap();
        b.normalize_minmax().unwrap();
        assert!(b.normalization.is_some());
        assert!(b.normalize_minmax().is_err());
        for &i in &b.splits.train_idx {
            assert!(b.features.row(i).iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }
}
