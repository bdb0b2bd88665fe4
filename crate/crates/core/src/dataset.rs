//! Loaders for the three dataset families (2-D shape files, UCI-style CSV,
//! MNIST IDX) and per-column feature normalisation.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// A point set with optional ground-truth labels.
///
/// Labels, when present, are always 0-based and contiguous: every value in
/// `0..k_true` is used by at least one point.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub name: String,
    points: Matrix,
    labels: Option<Vec<usize>>,
    k_true: usize,
}

impl LabeledDataset {
    /// Validates and wraps an already-remapped point set.
    pub fn new(name: impl Into<String>, points: Matrix, labels: Option<Vec<usize>>) -> Result<Self> {
        let (n, m) = points.shape();
        if n == 0 || m == 0 {
            return Err(Error::invalid(format!("dataset must be non-empty, got {n}x{m}")));
        }
        if let Some(row) = points.row_iter().position(|r| r.iter().any(|x| !x.is_finite())) {
            return Err(Error::invalid(format!("row {row} contains a non-finite value")));
        }
        let k_true = match &labels {
            None => 0,
            Some(l) => {
                if l.len() != n {
                    return Err(Error::DimensionMismatch(format!(
                        "{} labels for {n} points",
                        l.len()
                    )));
                }
                let distinct: BTreeSet<usize> = l.iter().copied().collect();
                let k = distinct.len();
                if distinct.iter().copied().ne(0..k) {
                    return Err(Error::invalid("labels must be 0-based and contiguous"));
                }
                k
            }
        };
        Ok(Self {
            name: name.into(),
            points,
            labels,
            k_true,
        })
    }

    /// Wraps a point set whose labels are arbitrary integers, remapping them
    /// to `0..k` in ascending order of the original values.
    pub fn with_raw_labels(name: impl Into<String>, points: Matrix, raw: &[i64]) -> Result<Self> {
        Self::new(name, points, Some(remap_ascending(raw)))
    }

    pub fn points(&self) -> &Matrix {
        &self.points
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    /// Number of distinct ground-truth classes (0 when unlabeled).
    pub fn k_true(&self) -> usize {
        self.k_true
    }

    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.cols()
    }
}

fn remap_ascending(raw: &[i64]) -> Vec<usize> {
    let order: BTreeMap<i64, usize> = raw
        .iter()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .enumerate()
        .map(|(i, v)| (v, i))
        .collect();
    raw.iter().map(|v| order[v]).collect()
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn is_skippable(line: &str) -> bool {
    let t = line.trim();
    t.is_empty() || t.starts_with('#')
}

fn parse_label(cell: &str) -> Option<i64> {
    cell.parse::<i64>().ok().or_else(|| {
        let v = cell.parse::<f64>().ok()?;
        (v.fract() == 0.0 && v.abs() < 9.0e15).then_some(v as i64)
    })
}

/// Loads a 2-D shape dataset: one point per line, `x<sep>y<sep>label`, with
/// `sep` either a comma or whitespace. Lines starting with `#` are ignored.
pub fn load_shape_csv(path: impl AsRef<Path>) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut coords = Vec::new();
    let mut raw_labels = Vec::new();
    for (lineno, line) in text.lines().enumerate().map(|(i, l)| (i + 1, l)) {
        if is_skippable(line) {
            continue;
        }
        let cells: Vec<&str> = if line.contains(',') {
            line.split(',').map(str::trim).collect()
        } else {
            line.split_whitespace().collect()
        };
        let err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: lineno,
            message,
        };
        if cells.len() != 3 {
            return Err(err(format!("expected 3 columns (x, y, label), found {}", cells.len())));
        }
        for cell in &cells[..2] {
            let v: f64 = cell
                .parse()
                .map_err(|_| err(format!("invalid coordinate {cell:?}")))?;
            if !v.is_finite() {
                return Err(err(format!("non-finite coordinate {cell:?}")));
            }
            coords.push(v);
        }
        raw_labels.push(parse_label(cells[2]).ok_or_else(|| err(format!("invalid label {:?}", cells[2])))?);
    }
    if raw_labels.is_empty() {
        return Err(Error::EmptyFile {
            path: path.to_path_buf(),
        });
    }
    let points = Matrix::from_row_major(raw_labels.len(), 2, coords).expect("two coordinates per row");
    LabeledDataset::with_raw_labels(dataset_name(path), points, &raw_labels)
}

/// Writes a 2-D dataset in the shape-file format (comma separated). The
/// shortest round-trip representation is used for coordinates, so reloading
/// reproduces every value bit-exactly.
pub fn write_shape_csv(dataset: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if dataset.dim() != 2 {
        return Err(Error::invalid(format!(
            "shape files hold 2-D points, dataset has {} dimensions",
            dataset.dim()
        )));
    }
    let mut out = String::new();
    for (i, row) in dataset.points().row_iter().enumerate() {
        let label = dataset.labels().map_or(0, |l| l[i]);
        let _ = writeln!(out, "{:?},{:?},{label}", row[0], row[1]);
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Loads a UCI-style delimited file. The label column may hold arbitrary
/// strings; they are numbered in order of first appearance. All remaining
/// columns must be numeric.
pub fn load_uci_csv(path: impl AsRef<Path>, label_column: usize, delimiter: char) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut label_ids: HashMap<String, usize> = HashMap::new();
    let mut width: Option<usize> = None;
    for (lineno, line) in text.lines().enumerate().map(|(i, l)| (i + 1, l)) {
        if is_skippable(line) {
            continue;
        }
        let cells: Vec<&str> = if delimiter.is_whitespace() {
            line.split_whitespace().collect()
        } else {
            line.split(delimiter).map(str::trim).collect()
        };
        let err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: lineno,
            message,
        };
        if label_column >= cells.len() {
            return Err(err(format!(
                "label column {label_column} out of range for {} columns",
                cells.len()
            )));
        }
        match width {
            None => width = Some(cells.len()),
            Some(w) if w != cells.len() => {
                return Err(err(format!("expected {w} columns, found {}", cells.len())));
            }
            Some(_) => {}
        }
        for (c, cell) in cells.iter().enumerate() {
            if c == label_column {
                continue;
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| err(format!("non-numeric feature {cell:?} in column {c}")))?;
            if !v.is_finite() {
                return Err(err(format!("non-finite feature {cell:?} in column {c}")));
            }
            features.push(v);
        }
        let next = label_ids.len();
        labels.push(*label_ids.entry(cells[label_column].to_string()).or_insert(next));
    }
    let Some(width) = width else {
        return Err(Error::EmptyFile {
            path: path.to_path_buf(),
        });
    };
    if width < 2 {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: "no feature columns besides the label".into(),
        });
    }
    let points = Matrix::from_row_major(labels.len(), width - 1, features).expect("rectangular rows");
    LabeledDataset::new(dataset_name(path), points, Some(labels))
}

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;
const MNIST_SIDE: usize = 28;

fn read_u32_be(bytes: &[u8], offset: usize) -> Option<u32> {
    let b = bytes.get(offset..offset + 4)?;
    Some(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
}

struct IdxImages {
    count: usize,
    pixels: Vec<u8>,
}

fn read_idx_images(path: &Path) -> Result<IdxImages> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let fmt = |message: String| Error::Format {
        path: path.to_path_buf(),
        message,
    };
    let magic = read_u32_be(&bytes, 0).ok_or_else(|| fmt("truncated header".into()))?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(fmt(format!(
            "bad image magic number {magic:#010x}, expected {IDX_IMAGES_MAGIC:#010x}"
        )));
    }
    let count = read_u32_be(&bytes, 4).ok_or_else(|| fmt("truncated header".into()))? as usize;
    let rows = read_u32_be(&bytes, 8).ok_or_else(|| fmt("truncated header".into()))? as usize;
    let cols = read_u32_be(&bytes, 12).ok_or_else(|| fmt("truncated header".into()))? as usize;
    if rows != MNIST_SIDE || cols != MNIST_SIDE {
        return Err(fmt(format!("expected 28x28 images, found {rows}x{cols}")));
    }
    let body = &bytes[16..];
    let expected = count * rows * cols;
    if body.len() < expected {
        return Err(fmt(format!("expected {expected} pixel bytes, found {}", body.len())));
    }
    Ok(IdxImages {
        count,
        pixels: body[..expected].to_vec(),
    })
}

fn read_idx_labels(path: &Path) -> Result<Vec<u8>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let fmt = |message: String| Error::Format {
        path: path.to_path_buf(),
        message,
    };
    let magic = read_u32_be(&bytes, 0).ok_or_else(|| fmt("truncated header".into()))?;
    if magic != IDX_LABELS_MAGIC {
        return Err(fmt(format!(
            "bad label magic number {magic:#010x}, expected {IDX_LABELS_MAGIC:#010x}"
        )));
    }
    let count = read_u32_be(&bytes, 4).ok_or_else(|| fmt("truncated header".into()))? as usize;
    let body = &bytes[8..];
    if body.len() < count {
        return Err(fmt(format!("expected {count} labels, found {}", body.len())));
    }
    Ok(body[..count].to_vec())
}

/// Loads a balanced subset of MNIST digits from IDX files.
///
/// Without a seed the first `per_digit` occurrences of each digit (file
/// order) are taken; with a seed each digit's subset is drawn uniformly
/// without replacement. Points are ordered by digit, then by file position.
/// Pixels are scaled to `[0, 1]`.
pub fn load_mnist_idx(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
    digits: &[u8],
    per_digit: usize,
    seed: Option<u64>,
) -> Result<LabeledDataset> {
    let (images_path, labels_path) = (images_path.as_ref(), labels_path.as_ref());
    let digits: BTreeSet<u8> = digits.iter().copied().collect();
    if digits.is_empty() {
        return Err(Error::invalid("no digits requested"));
    }
    if let Some(d) = digits.iter().find(|&&d| d > 9) {
        return Err(Error::invalid(format!("{d} is not a digit")));
    }
    if per_digit == 0 {
        return Err(Error::invalid("per_digit must be at least 1 (empty selection)"));
    }
    let images = read_idx_images(images_path)?;
    let labels = read_idx_labels(labels_path)?;
    if images.count != labels.len() {
        return Err(Error::Format {
            path: labels_path.to_path_buf(),
            message: format!("{} labels for {} images", labels.len(), images.count),
        });
    }

    let mut rng = seed.map(ChaCha8Rng::seed_from_u64);
    let mut selected: Vec<(usize, usize)> = Vec::new();
    for (class, &digit) in digits.iter().enumerate() {
        let candidates: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter_map(|(i, &l)| (l == digit).then_some(i))
            .collect();
        if candidates.len() < per_digit {
            return Err(Error::invalid(format!(
                "digit {digit}: requested {per_digit} samples, only {} available",
                candidates.len()
            )));
        }
        let mut picked: Vec<usize> = match rng.as_mut() {
            None => candidates[..per_digit].to_vec(),
            Some(rng) => index::sample(rng, candidates.len(), per_digit)
                .into_iter()
                .map(|i| candidates[i])
                .collect(),
        };
        picked.sort_unstable();
        selected.extend(picked.into_iter().map(|i| (i, class)));
    }

    let pixels_per_image = MNIST_SIDE * MNIST_SIDE;
    let mut data = Vec::with_capacity(selected.len() * pixels_per_image);
    for &(i, _) in &selected {
        let img = &images.pixels[i * pixels_per_image..(i + 1) * pixels_per_image];
        data.extend(img.iter().map(|&p| f64::from(p) / 255.0));
    }
    let points = Matrix::from_row_major(selected.len(), pixels_per_image, data).expect("full images");
    let name = format!(
        "mnist{{{}}}",
        digits.iter().map(u8::to_string).collect::<Vec<_>>().join(",")
    );
    LabeledDataset::new(name, points, Some(selected.into_iter().map(|(_, c)| c).collect()))
}

/// Per-column feature rescaling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    #[default]
    None,
    /// Mean 0, sample standard deviation 1. Zero-variance columns become 0.
    ZScore,
    /// Affine map onto `[0, 1]`. Constant columns become 0.
    MinMax,
}

impl std::str::FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "z-score" | "zscore" => Ok(Self::ZScore),
            "min-max" | "minmax" => Ok(Self::MinMax),
            other => Err(Error::invalid(format!("unknown normalization {other:?}"))),
        }
    }
}

pub fn normalize(dataset: &LabeledDataset, method: Normalization) -> LabeledDataset {
    let mut points = dataset.points.clone();
    let (n, m) = points.shape();
    match method {
        Normalization::None => {}
        Normalization::ZScore => {
            for j in 0..m {
                let col = points.column(j);
                let mean = col.iter().sum::<f64>() / n as f64;
                let var = if n > 1 {
                    col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
                } else {
                    0.0
                };
                let std = var.sqrt();
                for (i, x) in col.iter().enumerate() {
                    let v = if std > 0.0 { (x - mean) / std } else { 0.0 };
                    points.set(i, j, v);
                }
            }
        }
        Normalization::MinMax => {
            for j in 0..m {
                let col = points.column(j);
                let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let range = hi - lo;
                for (i, x) in col.iter().enumerate() {
                    let v = if range > 0.0 { (x - lo) / range } else { 0.0 };
                    points.set(i, j, v);
                }
            }
        }
    }
    LabeledDataset {
        points,
        ..dataset.clone()
    }
}

fn dataset_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into())
}
