//! Feature-matrix and manifest I/O plus per-utterance normalization:
//! cepstral mean-variance normalization (CMVN), first/second-order temporal
//! deltas, and optional delta variance rescaling.
//!
//! Feature files are plain text: a `T d` header line, then exactly T lines
//! of d space-separated reals. Manifests are 3-column TSV
//! (`utt_id \t feature_path \t transcript`) with `#` comment lines.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::FeatError;
use crate::numkit::Matrix;

/// An utterance's acoustic frames: a T x d matrix, frames by coefficients.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    pub utt_id: String,
    pub frames: Matrix,
}

impl FeatureMatrix {
    pub fn new(utt_id: impl Into<String>, frames: Matrix) -> Self {
        FeatureMatrix {
            utt_id: utt_id.into(),
            frames,
        }
    }

    pub fn num_frames(&self) -> usize {
        self.frames.rows()
    }

    pub fn dim(&self) -> usize {
        self.frames.cols()
    }
}

/// One corpus entry: utterance id, path to its feature file, transcript.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub utt_id: String,
    pub feature_path: PathBuf,
    pub transcript: String,
}

/// An ordered corpus listing with unique utterance ids.
#[derive(Debug, Clone, Default)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn parse_err(path: &Path, line: usize, what: impl Into<String>) -> FeatError {
    FeatError::Parse {
        path: path.display().to_string(),
        line,
        what: what.into(),
    }
}

fn io_err(path: &Path, source: std::io::Error) -> FeatError {
    FeatError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Parses a feature matrix from the text format. The utterance id is taken
/// from the file stem.
pub fn load_feature_file(path: &Path) -> Result<FeatureMatrix, FeatError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let frames = parse_matrix_text(&text, path)?;
    let utt_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(FeatureMatrix { utt_id, frames })
}

/// Parses the `T d` + rows text format from a string.
pub fn parse_matrix_text(text: &str, path: &Path) -> Result<Matrix, FeatError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "empty file"))?;
    let mut parts = header.split_whitespace();
    let t: usize = parts
        .next()
        .ok_or_else(|| parse_err(path, 1, "missing frame count in header"))?
        .parse()
        .map_err(|_| parse_err(path, 1, format!("bad frame count in header {header:?}")))?;
    let d: usize = parts
        .next()
        .ok_or_else(|| parse_err(path, 1, "missing dimension in header"))?
        .parse()
        .map_err(|_| parse_err(path, 1, format!("bad dimension in header {header:?}")))?;
    if parts.next().is_some() {
        return Err(parse_err(path, 1, "header must be exactly `T d`"));
    }
    if t == 0 || d == 0 {
        return Err(parse_err(path, 1, "header dimensions must be positive"));
    }

    let mut data = Vec::with_capacity(t * d);
    let mut rows_read = 0;
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        if rows_read == t {
            return Err(parse_err(
                path,
                lineno,
                format!("more than the {t} rows declared in the header"),
            ));
        }
        let mut count = 0;
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| parse_err(path, lineno, format!("non-numeric token {tok:?}")))?;
            data.push(v);
            count += 1;
        }
        if count != d {
            return Err(parse_err(
                path,
                lineno,
                format!("row has {count} values, header declares {d}"),
            ));
        }
        rows_read += 1;
    }
    if rows_read != t {
        return Err(parse_err(
            path,
            rows_read + 1,
            format!("found {rows_read} rows, header declares {t}"),
        ));
    }
    Ok(Matrix::from_vec(t, d, data))
}

/// Canonical text serialization of a matrix (shortest round-trip decimal
/// encoding per value, `\n` endings). Reading it back is bit-exact.
pub fn matrix_to_text(m: &Matrix) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} {}", m.rows(), m.cols());
    for r in 0..m.rows() {
        let mut first = true;
        for &v in m.row(r) {
            if !first {
                out.push(' ');
            }
            let _ = write!(out, "{v}");
            first = false;
        }
        out.push('\n');
    }
    out
}

pub fn save_feature_file(path: &Path, frames: &Matrix) -> Result<(), FeatError> {
    write_atomic(path, matrix_to_text(frames).as_bytes()).map_err(|e| io_err(path, e))
}

/// Writes to a sibling temp file then renames, so failures never leave a
/// partial file at the target path.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp-write");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

pub fn load_manifest(path: &Path) -> Result<Manifest, FeatError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    let mut entries = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(parse_err(
                path,
                lineno,
                format!("expected 3 tab-separated columns, got {}", cols.len()),
            ));
        }
        let utt_id = cols[0].to_string();
        if !seen.insert(utt_id.clone()) {
            return Err(parse_err(path, lineno, format!("duplicate utt_id {utt_id:?}")));
        }
        let raw = PathBuf::from(cols[1]);
        let feature_path = if raw.is_absolute() { raw } else { base.join(raw) };
        entries.push(ManifestEntry {
            utt_id,
            feature_path,
            transcript: cols[2].to_string(),
        });
    }
    Ok(Manifest { entries })
}

/// Serializes a manifest, storing feature paths as given.
pub fn manifest_to_text(manifest: &Manifest) -> String {
    let mut out = String::new();
    for e in &manifest.entries {
        let _ = writeln!(
            out,
            "{}\t{}\t{}",
            e.utt_id,
            e.feature_path.display(),
            e.transcript
        );
    }
    out
}

pub fn save_manifest(path: &Path, manifest: &Manifest) -> Result<(), FeatError> {
    write_atomic(path, manifest_to_text(manifest).as_bytes()).map_err(|e| io_err(path, e))
}

/// Which temporal-difference features to append.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeltaMode {
    None,
    Plain,
    Rescaled,
}

impl DeltaMode {
    pub fn name(&self) -> &'static str {
        match self {
            DeltaMode::None => "none",
            DeltaMode::Plain => "plain",
            DeltaMode::Rescaled => "rescaled",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "none" => Some(DeltaMode::None),
            "plain" => Some(DeltaMode::Plain),
            "rescaled" => Some(DeltaMode::Rescaled),
            _ => None,
        }
    }
}

/// Per-utterance preprocessing applied before the model. Stored in
/// checkpoints so decoding reproduces the training-time inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeaturePipeline {
    pub cmvn: bool,
    pub deltas: DeltaMode,
}

impl Default for FeaturePipeline {
    fn default() -> Self {
        FeaturePipeline {
            cmvn: true,
            deltas: DeltaMode::None,
        }
    }
}

impl FeaturePipeline {
    /// Model input width for raw features of width `d`.
    pub fn output_dim(&self, d: usize) -> usize {
        match self.deltas {
            DeltaMode::None => d,
            _ => 3 * d,
        }
    }

    pub fn apply(&self, f: &FeatureMatrix) -> FeatureMatrix {
        let out = if self.cmvn { cmvn(f) } else { f.clone() };
        match self.deltas {
            DeltaMode::None => out,
            DeltaMode::Plain => add_deltas(&out, false),
            DeltaMode::Rescaled => add_deltas(&out, true),
        }
    }
}

/// Per-utterance cepstral mean-variance normalization. Each column is
/// shifted to zero mean and scaled to unit population variance;
/// zero-variance columns (and single-frame inputs) are mean-shifted only.
pub fn cmvn(f: &FeatureMatrix) -> FeatureMatrix {
    let t = f.frames.rows();
    let d = f.frames.cols();
    let mut out = f.frames.clone();
    let n = t as f64;
    for c in 0..d {
        let mut mean = 0.0;
        for r in 0..t {
            mean += out.get(r, c);
        }
        mean /= n;
        let mut var = 0.0;
        for r in 0..t {
            let v = out.get(r, c) - mean;
            var += v * v;
        }
        var /= n;
        let inv_std = if t < 2 || var == 0.0 { 1.0 } else { 1.0 / var.sqrt() };
        for r in 0..t {
            let v = (out.get(r, c) - mean) * inv_std;
            out.set(r, c, v);
        }
    }
    FeatureMatrix {
        utt_id: f.utt_id.clone(),
        frames: out,
    }
}

/// Appends first- and second-order temporal differences: output is
/// `T x 3d`, laid out `[static | delta | delta-delta]`.
///
/// Deltas are 2-point central differences `(x[t+1] - x[t-1]) / 2` with edge
/// replication; delta-deltas apply the same stencil to the deltas. With
/// `rescale`, each delta block column is divided by its per-utterance
/// standard deviation so its variance is ~1 (zero-variance columns are left
/// alone).
pub fn add_deltas(f: &FeatureMatrix, rescale: bool) -> FeatureMatrix {
    let statics = &f.frames;
    let mut delta = central_difference(statics);
    let mut delta2 = central_difference(&delta);
    if rescale {
        rescale_unit_variance(&mut delta);
        rescale_unit_variance(&mut delta2);
    }
    let combined =
        Matrix::concat_cols(&[statics, &delta, &delta2]).expect("same row count by construction");
    FeatureMatrix {
        utt_id: f.utt_id.clone(),
        frames: combined,
    }
}

fn central_difference(m: &Matrix) -> Matrix {
    let t = m.rows();
    let d = m.cols();
    let mut out = Matrix::zeros(t, d);
    for r in 0..t {
        let prev = if r == 0 { 0 } else { r - 1 };
        let next = if r + 1 >= t { t - 1 } else { r + 1 };
        for c in 0..d {
            out.set(r, c, (m.get(next, c) - m.get(prev, c)) / 2.0);
        }
    }
    out
}

fn rescale_unit_variance(m: &mut Matrix) {
    let t = m.rows();
    let n = t as f64;
    for c in 0..m.cols() {
        let mut mean = 0.0;
        for r in 0..t {
            mean += m.get(r, c);
        }
        mean /= n;
        let mut var = 0.0;
        for r in 0..t {
            let v = m.get(r, c) - mean;
            var += v * v;
        }
        var /= n;
        if var > 0.0 {
            let inv_std = 1.0 / var.sqrt();
            for r in 0..t {
                m.set(r, c, m.get(r, c) * inv_std);
            }
        }
    }
}
