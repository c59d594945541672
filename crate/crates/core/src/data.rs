//! Datasets: unit-norm inputs with scalar responses, synthetic generators,
//! MNIST IDX ingestion and a plain CSV persistence format.
//!
//! # CSV layout
//!
//! ```text
//! d,n,y_max
//! <d>,<n>,<y_max>
//! x_1,...,x_d,y        (one row per example, n rows)
//! ```
//!
//! Floats are written in shortest round-trip form, so save/load is lossless.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{dot, norm, RngStream, Sampler, SymMatrix};

/// Tolerance on `| ||x_i|| - 1 |` accepted by [`Dataset::new`].
pub const UNIT_NORM_TOL: f64 = 1e-12;

/// Columns closer than this (up to sign) are treated as duplicates on ingestion.
pub const DEDUP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub name: String,
    pub seed: Option<u64>,
    pub params: BTreeMap<String, String>,
    pub y_max: f64,
    pub dropped_zero_norm: usize,
    pub dropped_duplicates: usize,
}

/// `n` examples in `R^d` stored column by column, each column of unit norm.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    d: usize,
    n: usize,
    x: Vec<f64>,
    y: Vec<f64>,
    meta: DatasetMeta,
}

impl Dataset {
    /// `x` holds the `n` columns back to back (`x[i*d..(i+1)*d]` is example
    /// `i`). `meta.y_max` is overwritten with `max |y_i|`.
    pub fn new(d: usize, x: Vec<f64>, y: Vec<f64>, mut meta: DatasetMeta) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidInput("input dimension must be at least 1".into()));
        }
        let n = y.len();
        if n == 0 {
            return Err(Error::InvalidInput("dataset must contain at least one example".into()));
        }
        if x.len() != d * n {
            return Err(Error::DimensionMismatch { what: "dataset inputs", expected: d * n, found: x.len() });
        }
        if let Some(k) = x.iter().chain(&y).position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("dataset has a non-finite value at flat index {k}")));
        }
        for (i, col) in x.chunks_exact(d).enumerate() {
            let len = norm(col);
            if (len - 1.0).abs() > UNIT_NORM_TOL {
                return Err(Error::InvalidInput(format!("column {i} has norm {len}, expected 1")));
            }
        }
        meta.y_max = y.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
        Ok(Self { d, n, x, y, meta })
    }

    /// Normalizes each column before validating.
    pub fn from_raw_columns(d: usize, mut x: Vec<f64>, y: Vec<f64>, meta: DatasetMeta) -> Result<Self> {
        if d == 0 || !x.len().is_multiple_of(d) {
            return Err(Error::InvalidInput("raw inputs are not a whole number of columns".into()));
        }
        for (i, col) in x.chunks_exact_mut(d).enumerate() {
            if !normalize(col) {
                return Err(Error::InvalidInput(format!("column {i} has zero norm")));
            }
        }
        Self::new(d, x, y, meta)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn column(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        self.x.chunks_exact(self.d)
    }

    pub fn inputs(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn meta(&self) -> &DatasetMeta {
        &self.meta
    }

    /// Same inputs, different responses.
    pub fn with_responses(&self, y: Vec<f64>) -> Result<Self> {
        if y.len() != self.n {
            return Err(Error::DimensionMismatch { what: "responses", expected: self.n, found: y.len() });
        }
        Self::new(self.d, self.x.clone(), y, self.meta.clone())
    }

    /// Examples reordered so that new example `i` is old example `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::DimensionMismatch { what: "permutation", expected: self.n, found: perm.len() });
        }
        let x = perm.iter().flat_map(|&i| self.column(i).iter().copied()).collect();
        let y = perm.iter().map(|&i| self.y[i]).collect();
        Self::new(self.d, x, y, self.meta.clone())
    }

    /// Inner products `<x_i, x_j>`.
    pub fn gram(&self) -> SymMatrix {
        SymMatrix::from_fn(self.n, |i, j| dot(self.column(i), self.column(j)))
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(BufWriter::new(File::create(path)?))
    }

    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(writer);
        w.write_record(["d", "n", "y_max"])?;
        w.write_record([self.d.to_string(), self.n.to_string(), format!("{:?}", self.meta.y_max)])?;
        let mut row = Vec::with_capacity(self.d + 1);
        for (i, col) in self.columns().enumerate() {
            row.clear();
            row.extend(col.iter().map(|v| format!("{v:?}")));
            row.push(format!("{:?}", self.y[i]));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut data = Self::read_csv(BufReader::new(File::open(path)?))?;
        data.meta.name = path.display().to_string();
        Ok(data)
    }

    pub fn read_csv(reader: impl Read) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(reader);
        let mut records = r.records();
        let mut next = |what: &str| -> Result<(u64, csv::StringRecord)> {
            match records.next() {
                Some(rec) => {
                    let rec = rec?;
                    let line = rec.position().map_or(0, |p| p.line());
                    Ok((line, rec))
                }
                None => Err(Error::Parse { line: 0, message: format!("unexpected end of input, expected {what}") }),
            }
        };
        let (line, header) = next("header row")?;
        if header.iter().collect::<Vec<_>>() != ["d", "n", "y_max"] {
            return Err(Error::Parse { line, message: "header must be `d,n,y_max`".into() });
        }
        let (line, shape) = next("shape row")?;
        if shape.len() != 3 {
            return Err(Error::Parse { line, message: format!("shape row has {} fields, expected 3", shape.len()) });
        }
        let d: usize = parse_field(&shape[0], line)?;
        let n: usize = parse_field(&shape[1], line)?;
        let mut x = Vec::with_capacity(d * n);
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let (line, rec) = next(&format!("example row {}", i + 1))?;
            if rec.len() != d + 1 {
                return Err(Error::Parse { line, message: format!("row has {} fields, expected {}", rec.len(), d + 1) });
            }
            for field in rec.iter().take(d) {
                x.push(parse_field(field, line)?);
            }
            y.push(parse_field(&rec[d], line)?);
        }
        if let Ok((line, _)) = next("end of input") {
            return Err(Error::Parse { line, message: format!("trailing rows after {n} examples") });
        }
        Self::new(d, x, y, DatasetMeta { name: "csv".into(), ..Default::default() })
    }
}

fn parse_field<T: std::str::FromStr>(field: &str, line: u64) -> Result<T> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::Parse { line, message: format!("cannot parse `{field}`") })
}

/// Scales `v` to unit norm; `false` when `v` is zero.
fn normalize(v: &mut [f64]) -> bool {
    let len = norm(v);
    if len == 0.0 || !len.is_finite() {
        return false;
    }
    for e in v.iter_mut() {
        *e /= len;
    }
    true
}

fn unit_gaussian(sampler: &mut Sampler, d: usize) -> Vec<f64> {
    loop {
        let mut v = vec![0.0; d];
        sampler.fill_gaussian(&mut v);
        if normalize(&mut v) {
            return v;
        }
    }
}

fn generator_meta(name: &str, stream: RngStream, params: &[(&str, String)]) -> DatasetMeta {
    DatasetMeta {
        name: name.into(),
        seed: Some(stream.master_seed),
        params: params.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
        ..Default::default()
    }
}

fn teacher_responses(teacher: &[f64], x: &[f64], d: usize) -> Vec<f64> {
    x.chunks_exact(d).map(|col| dot(teacher, col).clamp(-1.0, 1.0)).collect()
}

/// Gaussian inputs normalized to the sphere and `y = <w, x>` for a unit
/// teacher `w`. The teacher is the first `d` draws of the stream.
pub fn gen_linear_teacher(d: usize, n: usize, stream: RngStream) -> Result<Dataset> {
    if d == 0 || n == 0 {
        return Err(Error::InvalidInput("linear teacher needs d >= 1 and n >= 1".into()));
    }
    let mut s = stream.sampler();
    let teacher = unit_gaussian(&mut s, d);
    let x: Vec<f64> = (0..n).flat_map(|_| unit_gaussian(&mut s, d)).collect();
    let y = x.chunks_exact(d).map(|col| dot(&teacher, col)).collect();
    let meta = generator_meta("linear_teacher", stream, &[("d", d.to_string()), ("n", n.to_string())]);
    Dataset::new(d, x, y, meta)
}

/// Orthonormal inputs from Gram-Schmidt on Gaussian draws, labelled by a
/// unit linear teacher.
pub fn gen_orthonormal(d: usize, n: usize, stream: RngStream) -> Result<Dataset> {
    if n > d {
        return Err(Error::Domain(format!("cannot place {n} orthonormal vectors in dimension {d}")));
    }
    if n == 0 {
        return Err(Error::InvalidInput("orthonormal dataset needs n >= 1".into()));
    }
    let mut s = stream.sampler();
    let teacher = unit_gaussian(&mut s, d);
    let mut x: Vec<f64> = Vec::with_capacity(n * d);
    while x.len() < n * d {
        let mut v = vec![0.0; d];
        s.fill_gaussian(&mut v);
        // Two passes of modified Gram-Schmidt.
        for _ in 0..2 {
            for q in x.chunks_exact(d) {
                let p = dot(&v, q);
                for (e, qe) in v.iter_mut().zip(q) {
                    *e -= p * qe;
                }
            }
        }
        if norm(&v) > 1e-8 && normalize(&mut v) {
            x.extend_from_slice(&v);
        }
    }
    let y = teacher_responses(&teacher, &x, d);
    let meta = generator_meta("orthonormal", stream, &[("d", d.to_string()), ("n", n.to_string())]);
    Dataset::new(d, x, y, meta)
}

/// `min(||u - v||, ||u + v||)`.
pub fn pair_separation(u: &[f64], v: &[f64]) -> f64 {
    let minus: f64 = u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
    let plus: f64 = u.iter().zip(v).map(|(a, b)| (a + b) * (a + b)).sum();
    minus.min(plus).sqrt()
}

/// Rejection-samples unit vectors until every pair is at least `min_sep`
/// apart up to sign. `max_tries` bounds the total number of candidates.
/// A request of `min_sep >= sqrt(2)` with `n <= d` is served by
/// [`gen_orthonormal`], the only configuration that can meet it.
pub fn gen_separated(d: usize, n: usize, min_sep: f64, stream: RngStream, max_tries: usize) -> Result<Dataset> {
    if !(min_sep > 0.0 && min_sep <= std::f64::consts::SQRT_2) {
        return Err(Error::Domain(format!("separation must lie in (0, sqrt 2], got {min_sep}")));
    }
    if d == 0 || n == 0 {
        return Err(Error::InvalidInput("separated dataset needs d >= 1 and n >= 1".into()));
    }
    if min_sep == std::f64::consts::SQRT_2 {
        if n > d {
            return Err(Error::Capacity { achieved: d, requested: n });
        }
        let mut data = gen_orthonormal(d, n, stream)?;
        data.meta.name = "separated".into();
        data.meta.params.insert("min_sep".into(), format!("{min_sep:?}"));
        return Ok(data);
    }
    let mut s = stream.sampler();
    let teacher = unit_gaussian(&mut s, d);
    let mut x: Vec<f64> = Vec::with_capacity(n * d);
    let mut tries = 0;
    while x.len() < n * d {
        if tries == max_tries {
            return Err(Error::Capacity { achieved: x.len() / d, requested: n });
        }
        tries += 1;
        let candidate = unit_gaussian(&mut s, d);
        if x.chunks_exact(d).all(|q| pair_separation(q, &candidate) >= min_sep) {
            x.extend_from_slice(&candidate);
        }
    }
    let y = teacher_responses(&teacher, &x, d);
    let meta = generator_meta(
        "separated",
        stream,
        &[("d", d.to_string()), ("n", n.to_string()), ("min_sep", format!("{min_sep:?}")), ("tries", tries.to_string())],
    );
    Dataset::new(d, x, y, meta)
}

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

struct IdxCursor<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> IdxCursor<'a> {
    fn u32(&mut self, what: &str) -> Result<u32> {
        let end = self.offset + 4;
        let chunk = self.bytes.get(self.offset..end).ok_or_else(|| Error::Format {
            offset: self.offset as u64,
            message: format!("truncated while reading {what}"),
        })?;
        self.offset = end;
        Ok(u32::from_be_bytes(chunk.try_into().expect("4 bytes")))
    }

    fn take(&mut self, len: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.offset.checked_add(len).filter(|&e| e <= self.bytes.len()).ok_or_else(|| Error::Format {
            offset: self.bytes.len() as u64,
            message: format!("truncated {what}: need {len} bytes from offset {}", self.offset),
        })?;
        let out = &self.bytes[self.offset..end];
        self.offset = end;
        Ok(out)
    }
}

fn expect_magic(cursor: &mut IdxCursor<'_>, expected: u32, what: &str) -> Result<()> {
    let magic = cursor.u32("magic")?;
    if magic != expected {
        return Err(Error::Format {
            offset: 0,
            message: format!("bad {what} magic {magic:#010x}, expected {expected:#010x}"),
        });
    }
    Ok(())
}

/// Parses in-memory IDX image and label files. See [`load_mnist_idx`].
pub fn parse_mnist_idx(images: &[u8], labels: &[u8], limit: usize, positive_class: u8) -> Result<Dataset> {
    let mut img = IdxCursor { bytes: images, offset: 0 };
    expect_magic(&mut img, IDX_IMAGES_MAGIC, "image file")?;
    let count = img.u32("image count")? as usize;
    let rows = img.u32("row count")? as usize;
    let cols = img.u32("column count")? as usize;

    let mut lab = IdxCursor { bytes: labels, offset: 0 };
    expect_magic(&mut lab, IDX_LABELS_MAGIC, "label file")?;
    let label_count = lab.u32("label count")? as usize;
    if label_count != count {
        return Err(Error::Format {
            offset: 4,
            message: format!("label count {label_count} does not match image count {count}"),
        });
    }
    let d = rows * cols;
    if d == 0 {
        return Err(Error::Format { offset: 8, message: "images have zero pixels".into() });
    }
    let take = count.min(limit);
    let pixels = img.take(take * d, "image data")?;
    let label_bytes = lab.take(take, "label data")?;

    let mut x: Vec<f64> = Vec::with_capacity(take * d);
    let mut y = Vec::with_capacity(take);
    let mut dropped_zero = 0;
    let mut dropped_dup = 0;
    for (image, &label) in pixels.chunks_exact(d).zip(label_bytes) {
        let mut v: Vec<f64> = image.iter().map(|&p| p as f64 / 255.0).collect();
        if !normalize(&mut v) {
            dropped_zero += 1;
            continue;
        }
        if x.chunks_exact(d).any(|q| pair_separation(q, &v) <= DEDUP_TOL) {
            dropped_dup += 1;
            continue;
        }
        x.extend_from_slice(&v);
        y.push(if label == positive_class { 1.0 } else { -1.0 });
    }
    if y.is_empty() {
        return Err(Error::InvalidInput("no usable images after filtering".into()));
    }
    let mut meta = DatasetMeta {
        name: "mnist".into(),
        params: [
            ("limit".to_string(), limit.to_string()),
            ("positive_class".to_string(), positive_class.to_string()),
            ("rows".to_string(), rows.to_string()),
            ("cols".to_string(), cols.to_string()),
        ]
        .into_iter()
        .collect(),
        ..Default::default()
    };
    meta.dropped_zero_norm = dropped_zero;
    meta.dropped_duplicates = dropped_dup;
    Dataset::new(d, x, y, meta)
}

/// Loads the first `limit` MNIST examples as a one-vs-rest regression
/// problem: `y = +1` for `positive_class`, `-1` otherwise. Each image is
/// flattened and scaled to unit norm; blank images and duplicates are
/// dropped and counted in the metadata.
pub fn load_mnist_idx(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
    limit: usize,
    positive_class: u8,
) -> Result<Dataset> {
    let images = std::fs::read(images_path)?;
    let labels = std::fs::read(labels_path)?;
    parse_mnist_idx(&images, &labels, limit, positive_class)
}
