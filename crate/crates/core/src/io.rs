//! Binary persistence of datasets and models, plus CSV interchange.
//!
//! Binary layout (little-endian):
//!
//! | bytes        | content                                  |
//! |--------------|------------------------------------------|
//! | 4            | magic `RFOL`                             |
//! | 4            | `u32` format version                     |
//! | 8            | `u64` metadata length `L`                |
//! | `L`          | UTF-8 JSON metadata                      |
//! | rest         | `f64` arrays, in the order listed below  |
//!
//! Dataset arrays: input grid points, output grid points, inputs (row-major
//! `M × n`), outputs (row-major `M × m`).
//! Model arrays: input grid points, output grid points, frequencies
//! (`N × n`), coefficients (`N × m`, each entry as `re, im`).

use std::fs;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::domain::{CollocationGrid, Distribution, OperatorDataset, RfConfig};
use crate::error::{Error, Result};
use crate::features::FeatureEnsemble;
use crate::linalg::{CMatrix, RMatrix};
use crate::operator::OperatorModel;

pub const MAGIC: &[u8; 4] = b"RFOL";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GridMeta {
    dim: usize,
    count: usize,
    domain_lo: Vec<f64>,
    domain_hi: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    shape: Option<Vec<usize>>,
}

impl GridMeta {
    fn of(g: &CollocationGrid) -> Self {
        GridMeta {
            dim: g.dim(),
            count: g.len(),
            domain_lo: g.domain_lo().to_vec(),
            domain_hi: g.domain_hi().to_vec(),
            shape: g.shape().map(<[usize]>::to_vec),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct DatasetMeta {
    kind: String,
    input_grid: GridMeta,
    output_grid: GridMeta,
    samples: usize,
    #[serde(default)]
    config: Value,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FeatureMeta {
    distribution: Distribution,
    gamma: f64,
    n_features: usize,
    seed: u64,
    dim: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelMeta {
    kind: String,
    input_grid: GridMeta,
    output_grid: GridMeta,
    config: FeatureMeta,
    recovery: RfConfig,
    jitter_used: f64,
    relative_residual: f64,
}

fn encode(meta: &impl Serialize, arrays: &[&[f64]]) -> Result<Vec<u8>> {
    let json = serde_json::to_vec(meta).map_err(|e| Error::data(e.to_string()))?;
    let total: usize = arrays.iter().map(|a| a.len()).sum();
    let mut buf = Vec::with_capacity(HEADER_LEN + json.len() + 8 * total);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(json.len() as u64).to_le_bytes());
    buf.extend_from_slice(&json);
    for a in arrays {
        for v in *a {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(buf)
}

fn write_exclusive(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::param(format!("not a file path: {}", path.display())))?;
    let mut tmp_name = file_name.to_os_string();
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn fail(&self, offset: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            offset: offset as u64,
            message: message.into(),
        }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.fail(
                self.bytes.len(),
                format!(
                    "truncated file: {what} needs {n} bytes at offset {}, only {} remain",
                    self.pos,
                    self.bytes.len() - self.pos
                ),
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn header<M: for<'de> Deserialize<'de>>(&mut self, kind: &str) -> Result<M> {
        let magic = self.take(4, "magic bytes")?;
        if magic != MAGIC {
            return Err(self.fail(0, format!("bad magic bytes {magic:?}, expected \"RFOL\"")));
        }
        let version = u32::from_le_bytes(self.take(4, "version")?.try_into().unwrap());
        if version != VERSION {
            return Err(Error::Version {
                found: version,
                supported: VERSION,
            });
        }
        let len_u64 = u64::from_le_bytes(self.take(8, "metadata length")?.try_into().unwrap());
        let len = usize::try_from(len_u64).map_err(|_| self.fail(8, "metadata length overflows"))?;
        let start = self.pos;
        let json = self.take(len, "metadata block")?;
        let value: Value = serde_json::from_slice(json).map_err(|e| {
            let col = byte_offset_of(json, e.line(), e.column());
            self.fail(start + col, format!("invalid metadata JSON: {e}"))
        })?;
        let found = value.get("kind").and_then(Value::as_str).unwrap_or("");
        if found != kind {
            return Err(self.fail(start, format!("file holds a '{found}', expected a '{kind}'")));
        }
        serde_json::from_value(value).map_err(|e| self.fail(start, format!("invalid metadata: {e}")))
    }

    fn f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let bytes_needed = n.checked_mul(8).ok_or_else(|| self.fail(self.pos, "array size overflows"))?;
        let start = self.pos;
        let raw = self.take(bytes_needed, what)?;
        let mut out = Vec::with_capacity(n);
        for (i, c) in raw.chunks_exact(8).enumerate() {
            let v = f64::from_le_bytes(c.try_into().unwrap());
            if !v.is_finite() {
                return Err(self.fail(start + 8 * i, format!("non-finite value in {what}")));
            }
            out.push(v);
        }
        Ok(out)
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(self.fail(
                self.pos,
                format!("{} unexpected trailing bytes", self.bytes.len() - self.pos),
            ));
        }
        Ok(())
    }

    fn grid(&mut self, meta: &GridMeta, what: &str) -> Result<CollocationGrid> {
        let start = self.pos;
        let n = meta
            .count
            .checked_mul(meta.dim)
            .ok_or_else(|| self.fail(start, "grid size overflows"))?;
        let pts = self.f64s(n, what)?;
        CollocationGrid::with_shape(
            meta.dim,
            pts,
            meta.domain_lo.clone(),
            meta.domain_hi.clone(),
            meta.shape.clone(),
        )
        .map_err(|e| self.fail(start, format!("{what}: {e}")))
    }
}

fn byte_offset_of(text: &[u8], line: usize, column: usize) -> usize {
    let mut l = 1;
    for (i, &b) in text.iter().enumerate() {
        if l == line {
            return (i + column.saturating_sub(1)).min(text.len());
        }
        if b == b'\n' {
            l += 1;
        }
    }
    text.len()
}

/// Serializes a dataset; `config` records how it was generated.
pub fn dataset_to_bytes(ds: &OperatorDataset, config: &Value) -> Result<Vec<u8>> {
    let meta = DatasetMeta {
        kind: "dataset".into(),
        input_grid: GridMeta::of(&ds.input_grid),
        output_grid: GridMeta::of(&ds.output_grid),
        samples: ds.len(),
        config: config.clone(),
    };
    encode(
        &meta,
        &[
            ds.input_grid.flat_points(),
            ds.output_grid.flat_points(),
            ds.inputs.as_slice(),
            ds.outputs.as_slice(),
        ],
    )
}

/// Parses a dataset and its generating config.
pub fn dataset_from_bytes(bytes: &[u8]) -> Result<(OperatorDataset, Value)> {
    let mut r = Reader { bytes, pos: 0 };
    let meta: DatasetMeta = r.header("dataset")?;
    let ig = r.grid(&meta.input_grid, "input grid")?;
    let og = r.grid(&meta.output_grid, "output grid")?;
    let n_in = meta.samples.checked_mul(ig.len()).ok_or_else(|| r.fail(r.pos, "input size overflows"))?;
    let start = r.pos;
    let inputs = r.f64s(n_in, "inputs")?;
    let n_out = meta.samples.checked_mul(og.len()).ok_or_else(|| r.fail(r.pos, "output size overflows"))?;
    let outputs = r.f64s(n_out, "outputs")?;
    r.finish()?;
    let ds = OperatorDataset::new(
        ig.clone(),
        og.clone(),
        RMatrix::from_vec(meta.samples, ig.len(), inputs),
        RMatrix::from_vec(meta.samples, og.len(), outputs),
    )
    .map_err(|e| r.fail(start, e.to_string()))?;
    Ok((ds, meta.config))
}

/// Writes a dataset file.
pub fn write_dataset(path: impl AsRef<Path>, ds: &OperatorDataset, config: &Value) -> Result<()> {
    write_exclusive(path.as_ref(), &dataset_to_bytes(ds, config)?)
}

/// Reads a dataset file, discarding the stored config.
pub fn read_dataset(path: impl AsRef<Path>) -> Result<OperatorDataset> {
    Ok(read_dataset_with_config(path)?.0)
}

/// Reads a dataset file together with its stored config.
pub fn read_dataset_with_config(path: impl AsRef<Path>) -> Result<(OperatorDataset, Value)> {
    dataset_from_bytes(&fs::read(path)?)
}

/// Serializes a trained model.
pub fn model_to_bytes(model: &OperatorModel) -> Result<Vec<u8>> {
    let e = &model.input_ensemble;
    let meta = ModelMeta {
        kind: "model".into(),
        input_grid: GridMeta::of(&model.input_grid),
        output_grid: GridMeta::of(&model.output_grid),
        config: FeatureMeta {
            distribution: e.distribution(),
            gamma: e.gamma(),
            n_features: e.count(),
            seed: e.seed(),
            dim: e.dim(),
        },
        recovery: model.recovery_config,
        jitter_used: model.jitter_used,
        relative_residual: model.relative_residual,
    };
    let coeffs = crate::linalg::as_f64(model.coeff_matrix.as_slice());
    encode(
        &meta,
        &[
            model.input_grid.flat_points(),
            model.output_grid.flat_points(),
            e.flat_frequencies(),
            coeffs,
        ],
    )
}

/// Parses a trained model.
pub fn model_from_bytes(bytes: &[u8]) -> Result<OperatorModel> {
    let mut r = Reader { bytes, pos: 0 };
    let meta: ModelMeta = r.header("model")?;
    let ig = r.grid(&meta.input_grid, "input grid")?;
    let og = r.grid(&meta.output_grid, "output grid")?;
    let c = &meta.config;
    let start = r.pos;
    let nf = c.n_features.checked_mul(c.dim).ok_or_else(|| r.fail(start, "frequency size overflows"))?;
    let freqs = r.f64s(nf, "frequencies")?;
    let nc = c
        .n_features
        .checked_mul(og.len())
        .and_then(|v| v.checked_mul(2))
        .ok_or_else(|| r.fail(r.pos, "coefficient size overflows"))?;
    let raw = r.f64s(nc, "coefficients")?;
    r.finish()?;
    let ens = FeatureEnsemble::from_parts(c.dim, freqs, c.distribution, c.gamma, c.seed)
        .map_err(|e| r.fail(start, e.to_string()))?;
    let coeffs: Vec<Complex64> = raw.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect();
    OperatorModel::from_parts(
        ens,
        CMatrix::from_vec(c.n_features, og.len(), coeffs),
        ig,
        og,
        meta.recovery,
        meta.jitter_used,
        meta.relative_residual,
    )
    .map_err(|e| r.fail(start, e.to_string()))
}

pub fn write_model(path: impl AsRef<Path>, model: &OperatorModel) -> Result<()> {
    write_exclusive(path.as_ref(), &model_to_bytes(model)?)
}

pub fn read_model(path: impl AsRef<Path>) -> Result<OperatorModel> {
    model_from_bytes(&fs::read(path)?)
}

/// Writes a grid sidecar: header `kind,x0,..`, rows `lo`, `hi`, then one
/// `pt` row per point.
pub fn write_grid_csv(path: impl AsRef<Path>, grid: &CollocationGrid) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["kind".to_string()];
    header.extend((0..grid.dim()).map(|i| format!("x{i}")));
    w.write_record(&header)?;
    let row = |tag: &str, v: &[f64]| -> Vec<String> {
        std::iter::once(tag.to_string()).chain(v.iter().map(|x| x.to_string())).collect()
    };
    w.write_record(row("lo", grid.domain_lo()))?;
    w.write_record(row("hi", grid.domain_hi()))?;
    for p in grid.points() {
        w.write_record(row("pt", p))?;
    }
    w.flush()?;
    Ok(())
}

fn parse_field(s: &str, line: u64, col: usize) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::data(format!("line {line}, column {col}: invalid number '{s}'")))
}

/// Reads a grid sidecar written by [`write_grid_csv`].
pub fn read_grid_csv(path: impl AsRef<Path>) -> Result<CollocationGrid> {
    let mut r = csv::Reader::from_path(path)?;
    let dim = r.headers()?.len().saturating_sub(1);
    let (mut lo, mut hi, mut pts) = (None, None, Vec::new());
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let vals = rec
            .iter()
            .skip(1)
            .enumerate()
            .map(|(i, s)| parse_field(s, line, i + 1))
            .collect::<Result<Vec<f64>>>()?;
        if vals.len() != dim {
            return Err(Error::data(format!("line {line}: expected {dim} coordinates")));
        }
        match rec.get(0).map(str::trim) {
            Some("lo") => lo = Some(vals),
            Some("hi") => hi = Some(vals),
            Some("pt") => pts.extend(vals),
            other => return Err(Error::data(format!("line {line}: unknown row kind {other:?}"))),
        }
    }
    let lo = lo.ok_or_else(|| Error::data("grid file lacks a 'lo' row"))?;
    let hi = hi.ok_or_else(|| Error::data("grid file lacks a 'hi' row"))?;
    CollocationGrid::new(dim, pts, lo, hi)
}

/// Writes one CSV row per sample (`in_*` columns then `out_*` columns).
pub fn write_dataset_csv(path: impl AsRef<Path>, ds: &OperatorDataset) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let header: Vec<String> = (0..ds.input_grid.len())
        .map(|j| format!("in_{j}"))
        .chain((0..ds.output_grid.len()).map(|j| format!("out_{j}")))
        .collect();
    w.write_record(&header)?;
    for l in 0..ds.len() {
        w.write_record(ds.input(l).iter().chain(ds.output(l)).map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a sample CSV against the two grids.
pub fn read_dataset_csv(
    path: impl AsRef<Path>,
    input_grid: CollocationGrid,
    output_grid: CollocationGrid,
) -> Result<OperatorDataset> {
    let mut r = csv::Reader::from_path(path)?;
    let (n, m) = (input_grid.len(), output_grid.len());
    let cols = r.headers()?.len();
    if cols != n + m {
        return Err(Error::DimensionMismatch {
            expected: n + m,
            got: cols,
            context: "CSV column count vs grid sizes",
        });
    }
    let (mut ins, mut outs, mut rows) = (Vec::new(), Vec::new(), 0);
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != n + m {
            return Err(Error::data(format!("line {line}: expected {} fields, found {}", n + m, rec.len())));
        }
        for (i, s) in rec.iter().enumerate() {
            let v = parse_field(s, line, i)?;
            if i < n {
                ins.push(v);
            } else {
                outs.push(v);
            }
        }
        rows += 1;
    }
    OperatorDataset::new(
        input_grid,
        output_grid,
        RMatrix::from_vec(rows, n, ins),
        RMatrix::from_vec(rows, m, outs),
    )
}

/// Writes `<stem>.csv`, `<stem>.input_grid.csv` and `<stem>.output_grid.csv`.
pub fn export_csv(dir: impl AsRef<Path>, stem: &str, ds: &OperatorDataset) -> Result<()> {
    let dir = dir.as_ref();
    write_dataset_csv(dir.join(format!("{stem}.csv")), ds)?;
    write_grid_csv(dir.join(format!("{stem}.input_grid.csv")), &ds.input_grid)?;
    write_grid_csv(dir.join(format!("{stem}.output_grid.csv")), &ds.output_grid)
}

/// Reads the three files written by [`export_csv`].
pub fn import_csv(dir: impl AsRef<Path>, stem: &str) -> Result<OperatorDataset> {
    let dir = dir.as_ref();
    let ig = read_grid_csv(dir.join(format!("{stem}.input_grid.csv")))?;
    let og = read_grid_csv(dir.join(format!("{stem}.output_grid.csv")))?;
    read_dataset_csv(dir.join(format!("{stem}.csv")), ig, og)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen;
    use crate::operator::{train_operator, TrainConfig};

    #[test]
    fn dataset_bytes_round_trip() {
        let ds = datagen::gen_advection1(7, 12, 3).unwrap();
        let cfg = serde_json::json!({"problem": "advection1", "seed": 3});
        let bytes = dataset_to_bytes(&ds, &cfg).unwrap();
        let (back, c) = dataset_from_bytes(&bytes).unwrap();
        assert_eq!(back, ds);
        assert_eq!(c, cfg);
    }

    #[test]
    fn every_truncation_is_a_parse_error() {
        let ds = datagen::gen_advection1(2, 4, 3).unwrap();
        let bytes = dataset_to_bytes(&ds, &Value::Null).unwrap();
        for cut in 0..bytes.len() {
            match dataset_from_bytes(&bytes[..cut]) {
                Err(Error::Parse { .. }) => {}
                other => panic!("cut {cut}: {other:?}"),
            }
        }
    }

    #[test]
    fn magic_version_and_kind_checked() {
        let ds = datagen::gen_advection1(2, 4, 3).unwrap();
        let mut bytes = dataset_to_bytes(&ds, &Value::Null).unwrap();
        bytes[1] = b'X';
        assert!(matches!(dataset_from_bytes(&bytes), Err(Error::Parse { offset: 0, .. })));
        bytes[1] = b'F';
        bytes[4] = 9;
        assert!(matches!(dataset_from_bytes(&bytes), Err(Error::Version { found: 9, .. })));
        bytes[4] = 1;
        assert!(matches!(model_from_bytes(&bytes), Err(Error::Parse { .. })));
    }

    #[test]
    fn non_finite_payload_reports_offset() {
        let ds = datagen::gen_advection1(2, 4, 3).unwrap();
        let mut bytes = dataset_to_bytes(&ds, &Value::Null).unwrap();
        let last = bytes.len() - 8;
        bytes[last..].copy_from_slice(&f64::NAN.to_le_bytes());
        match dataset_from_bytes(&bytes) {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset as usize, last),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn model_round_trip_bit_exact() {
        let ds = datagen::gen_advection1(6, 8, 1).unwrap();
        let model = train_operator(&ds, &TrainConfig::new(Distribution::Gaussian, 0.1, 30, 2)).unwrap();
        let back = model_from_bytes(&model_to_bytes(&model).unwrap()).unwrap();
        assert_eq!(back, model);
    }
}
