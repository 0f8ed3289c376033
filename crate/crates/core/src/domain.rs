//! Grids, sampled fields, datasets and the configuration records shared by
//! every other module.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::RMatrix;
use crate::parallel;

/// Ordered set of collocation points inside an axis-aligned box.
#[derive(Debug, Clone, PartialEq)]
pub struct CollocationGrid {
    dim: usize,
    points: Vec<f64>,
    domain_lo: Vec<f64>,
    domain_hi: Vec<f64>,
    volume: f64,
    shape: Option<Vec<usize>>,
}

/// Content hash identifying a grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridId(pub u64);

impl CollocationGrid {
    /// Builds a grid from flattened points (`count × dim`, row-major).
    pub fn new(dim: usize, points: Vec<f64>, domain_lo: Vec<f64>, domain_hi: Vec<f64>) -> Result<Self> {
        Self::with_shape(dim, points, domain_lo, domain_hi, None)
    }

    /// Like [`new`](Self::new), additionally tagging a regular tensor layout
    /// (`shape[i]` points along axis `i`, last axis fastest).
    pub fn with_shape(
        dim: usize,
        points: Vec<f64>,
        domain_lo: Vec<f64>,
        domain_hi: Vec<f64>,
        shape: Option<Vec<usize>>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("grid dimension must be positive"));
        }
        if domain_lo.len() != dim || domain_hi.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: domain_lo.len().min(domain_hi.len()),
                context: "grid domain bounds",
            });
        }
        if points.is_empty() || points.len() % dim != 0 {
            return Err(Error::data(format!(
                "grid coordinate array of length {} is not a positive multiple of dim {dim}",
                points.len()
            )));
        }
        let mut volume = 1.0;
        for (lo, hi) in domain_lo.iter().zip(&domain_hi) {
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(Error::data(format!("invalid domain side [{lo}, {hi}]")));
            }
            volume *= hi - lo;
        }
        if !volume.is_finite() {
            return Err(Error::data("domain volume is not finite"));
        }
        for (idx, p) in points.chunks_exact(dim).enumerate() {
            for (i, &c) in p.iter().enumerate() {
                if !c.is_finite() || c < domain_lo[i] || c > domain_hi[i] {
                    return Err(Error::data(format!(
                        "grid point {idx} {p:?} lies outside the domain"
                    )));
                }
            }
        }
        let count = points.len() / dim;
        if let Some(s) = &shape {
            if s.len() != dim || s.iter().product::<usize>() != count {
                return Err(Error::data(format!(
                    "grid shape {s:?} inconsistent with {count} points in dimension {dim}"
                )));
            }
        }
        let mut order: Vec<usize> = (0..count).collect();
        let key = |i: usize| -> Vec<u64> {
            points[i * dim..(i + 1) * dim]
                .iter()
                .map(|x| (x + 0.0).to_bits())
                .collect()
        };
        order.sort_by_key(|&i| key(i));
        for w in order.windows(2) {
            if key(w[0]) == key(w[1]) {
                let (a, b) = (w[0].min(w[1]), w[0].max(w[1]));
                return Err(Error::data(format!("grid points {a} and {b} coincide")));
            }
        }
        Ok(CollocationGrid {
            dim,
            points,
            domain_lo,
            domain_hi,
            volume,
            shape,
        })
    }

    /// `res` cell-centred points `(j + 0.5) / res` on the unit interval.
    pub fn cell_centers_1d(res: usize) -> Result<Self> {
        Self::cell_centers(&[res])
    }

    /// Cell-centred tensor grid on the unit cube, `shape[i]` cells per axis.
    pub fn cell_centers(shape: &[usize]) -> Result<Self> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::param("grid resolution must be positive"));
        }
        let dim = shape.len();
        let count: usize = shape.iter().product();
        let mut points = Vec::with_capacity(count * dim);
        for flat in 0..count {
            let mut rem = flat;
            let mut coord = vec![0.0; dim];
            for ax in (0..dim).rev() {
                let j = rem % shape[ax];
                rem /= shape[ax];
                coord[ax] = (j as f64 + 0.5) / shape[ax] as f64;
            }
            points.extend_from_slice(&coord);
        }
        Self::with_shape(dim, points, vec![0.0; dim], vec![1.0; dim], Some(shape.to_vec()))
    }

    /// `m` equispaced points on `[lo, hi]` including both endpoints.
    pub fn equispaced_closed(m: usize, lo: f64, hi: f64) -> Result<Self> {
        if m < 2 {
            return Err(Error::param("closed equispaced grid needs at least 2 points"));
        }
        let pts = (0..m)
            .map(|j| {
                if j == m - 1 {
                    hi
                } else {
                    lo + (hi - lo) * j as f64 / (m - 1) as f64
                }
            })
            .collect();
        Self::new(1, pts, vec![lo], vec![hi])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, j: usize) -> &[f64] {
        &self.points[j * self.dim..(j + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.points.chunks_exact(self.dim)
    }

    /// Flattened `count × dim` coordinates.
    pub fn flat_points(&self) -> &[f64] {
        &self.points
    }

    pub fn domain_lo(&self) -> &[f64] {
        &self.domain_lo
    }

    pub fn domain_hi(&self) -> &[f64] {
        &self.domain_hi
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    pub fn shape(&self) -> Option<&[usize]> {
        self.shape.as_deref()
    }

    /// Same points in a different order.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: perm.len(),
                context: "grid permutation",
            });
        }
        let mut pts = Vec::with_capacity(self.points.len());
        for &p in perm {
            pts.extend_from_slice(self.point(p));
        }
        Self::new(self.dim, pts, self.domain_lo.clone(), self.domain_hi.clone())
    }

    /// Sub-grid made of the listed points, in the listed order.
    pub fn subset(&self, idx: &[usize]) -> Result<Self> {
        let mut pts = Vec::with_capacity(idx.len() * self.dim);
        for &i in idx {
            if i >= self.len() {
                return Err(Error::param(format!("point index {i} out of range")));
            }
            pts.extend_from_slice(self.point(i));
        }
        Self::new(self.dim, pts, self.domain_lo.clone(), self.domain_hi.clone())
    }

    pub fn id(&self) -> GridId {
        let mut h = Fnv::default();
        h.write_u64(self.dim as u64);
        for v in self.domain_lo.iter().chain(&self.domain_hi).chain(&self.points) {
            h.write_u64(v.to_bits());
        }
        GridId(h.0)
    }
}

struct Fnv(u64);

impl Default for Fnv {
    fn default() -> Self {
        Fnv(0xcbf2_9ce4_8422_2325)
    }
}

impl Fnv {
    fn write_u64(&mut self, v: u64) {
        for b in v.to_le_bytes() {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x100_0000_01b3);
        }
    }
}

/// Values of one field at the points of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample {
    pub grid_id: GridId,
    pub values: Vec<f64>,
}

impl FieldSample {
    /// Checks length and finiteness against `grid`.
    pub fn new(grid: &CollocationGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: values.len(),
                context: "field sample length",
            });
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                index: j,
                point: grid.point(j).to_vec(),
                value: values[j],
            });
        }
        Ok(FieldSample {
            grid_id: grid.id(),
            values,
        })
    }
}

/// Evaluates `f` at every grid point.
pub fn sampling_apply<F>(grid: &CollocationGrid, f: F) -> Result<FieldSample>
where
    F: Fn(&[f64]) -> f64,
{
    let values: Vec<f64> = grid.points().map(f).collect();
    FieldSample::new(grid, values)
}

/// Minimum pairwise Euclidean distance between grid points.
pub fn min_separation(grid: &CollocationGrid) -> Result<f64> {
    let n = grid.len();
    if n < 2 {
        return Err(Error::param("minimum separation needs at least two points"));
    }
    let per_row = parallel::map_range(n - 1, |i| {
        let p = grid.point(i);
        let mut best = f64::INFINITY;
        for j in i + 1..n {
            let q = grid.point(j);
            let d2: f64 = p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
            best = best.min(d2);
        }
        best
    });
    Ok(per_row.into_iter().fold(f64::INFINITY, f64::min).sqrt())
}

/// `M` aligned input/output sample pairs on two grids.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorDataset {
    pub input_grid: CollocationGrid,
    pub output_grid: CollocationGrid,
    /// `M × n`, one input sample per row.
    pub inputs: RMatrix,
    /// `M × m`, one output sample per row.
    pub outputs: RMatrix,
}

impl OperatorDataset {
    pub fn new(
        input_grid: CollocationGrid,
        output_grid: CollocationGrid,
        inputs: RMatrix,
        outputs: RMatrix,
    ) -> Result<Self> {
        if inputs.rows() == 0 {
            return Err(Error::data("dataset needs at least one sample"));
        }
        if inputs.rows() != outputs.rows() {
            return Err(Error::DimensionMismatch {
                expected: inputs.rows(),
                got: outputs.rows(),
                context: "output sample count",
            });
        }
        if inputs.cols() != input_grid.len() {
            return Err(Error::DimensionMismatch {
                expected: input_grid.len(),
                got: inputs.cols(),
                context: "input sample length",
            });
        }
        if outputs.cols() != output_grid.len() {
            return Err(Error::DimensionMismatch {
                expected: output_grid.len(),
                got: outputs.cols(),
                context: "output sample length",
            });
        }
        for (which, mat) in [("input", &inputs), ("output", &outputs)] {
            if let Some(pos) = mat.as_slice().iter().position(|v| !v.is_finite()) {
                return Err(Error::data(format!(
                    "non-finite {which} value in sample {} at point {}",
                    pos / mat.cols(),
                    pos % mat.cols()
                )));
            }
        }
        Ok(OperatorDataset {
            input_grid,
            output_grid,
            inputs,
            outputs,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.rows() == 0
    }

    pub fn input(&self, l: usize) -> &[f64] {
        self.inputs.row(l)
    }

    pub fn output(&self, l: usize) -> &[f64] {
        self.outputs.row(l)
    }

    /// Output samples as field samples on the output grid.
    pub fn output_samples(&self) -> Vec<FieldSample> {
        let id = self.output_grid.id();
        (0..self.len())
            .map(|l| FieldSample {
                grid_id: id,
                values: self.output(l).to_vec(),
            })
            .collect()
    }

    /// Dataset with the output grid restricted to the listed points.
    pub fn restrict_outputs(&self, idx: &[usize]) -> Result<Self> {
        let grid = self.output_grid.subset(idx)?;
        let out = RMatrix::from_fn(self.len(), idx.len(), |l, j| self.outputs.get(l, idx[j]));
        Self::new(self.input_grid.clone(), grid, self.inputs.clone(), out)
    }
}

/// Frequency distribution of a feature ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distribution {
    Cauchy,
    Gaussian,
}

impl std::str::FromStr for Distribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cauchy" => Ok(Distribution::Cauchy),
            "gaussian" | "normal" => Ok(Distribution::Gaussian),
            other => Err(Error::param(format!("unknown distribution '{other}'"))),
        }
    }
}

impl std::fmt::Display for Distribution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Distribution::Cauchy => "cauchy",
            Distribution::Gaussian => "gaussian",
        })
    }
}

/// Everything needed to regenerate a feature ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RfConfig {
    pub distribution: Distribution,
    pub gamma: f64,
    pub n_features: usize,
    pub seed: u64,
}

/// Kernel baseline parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KernelSpec {
    Rbf { gamma: f64 },
    Laplace { gamma: f64 },
    Matern { sigma: f64, nu: f64 },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        match *self {
            KernelSpec::Rbf { gamma } | KernelSpec::Laplace { gamma } if ok(gamma) => Ok(()),
            KernelSpec::Matern { sigma, nu } if ok(sigma) && ok(nu) => Ok(()),
            _ => Err(Error::param(format!("invalid kernel parameters {self:?}"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            KernelSpec::Rbf { .. } => "rbf",
            KernelSpec::Laplace { .. } => "laplace",
            KernelSpec::Matern { .. } => "matern",
        }
    }
}
