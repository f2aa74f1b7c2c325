//! Periodic grid functions and the difference operators built on them.
//!
//! Storage is 0-based: the mathematical node `i` in `1..=M` lives at storage
//! index `i - 1`, so storage index `s` sits at `x_left + (s + 1) * h`. All
//! stencils wrap modulo `M`.

use std::ops::Index;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid needs at least 4 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("period length must be positive and finite, got {0}")]
    BadLength(f64),
    #[error("left endpoint must be finite, got {0}")]
    BadOrigin(f64),
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("non-finite value at node {0}")]
    NonFinite(usize),
    #[error("grid functions live on different grids")]
    SpecMismatch,
}

/// Uniform periodic grid on `[x_left, x_left + length)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    x_left: f64,
    length: f64,
    nodes: usize,
    h: f64,
}

impl GridSpec {
    pub fn new(x_left: f64, length: f64, nodes: usize) -> Result<Self, GridError> {
        if nodes < 4 {
            return Err(GridError::TooFewNodes(nodes));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(GridError::BadLength(length));
        }
        if !x_left.is_finite() {
            return Err(GridError::BadOrigin(x_left));
        }
        Ok(Self {
            x_left,
            length,
            nodes,
            h: length / nodes as f64,
        })
    }

    /// Grid with spacing as close as possible to `h`: `M = round(L / h)`, then
    /// the spacing is recomputed as `L / M` so the period stays exact.
    pub fn with_spacing(x_left: f64, length: f64, h: f64) -> Result<Self, GridError> {
        if !(h.is_finite() && h > 0.0) {
            return Err(GridError::BadLength(h));
        }
        let nodes = (length / h).round();
        if !nodes.is_finite() || nodes < 0.0 {
            return Err(GridError::BadLength(length));
        }
        Self::new(x_left, length, nodes as usize)
    }

    /// The same period with twice as many nodes.
    pub fn refined(&self) -> Self {
        Self {
            nodes: 2 * self.nodes,
            h: self.length / (2 * self.nodes) as f64,
            ..*self
        }
    }

    pub fn x_left(&self) -> f64 {
        self.x_left
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Coordinate of storage index `s`.
    pub fn x(&self, s: usize) -> f64 {
        self.x_left + (s + 1) as f64 * self.h
    }

    pub fn coordinates(&self) -> Vec<f64> {
        (0..self.nodes).map(|s| self.x(s)).collect()
    }

    /// Reduce any signed index into `0..M`.
    #[inline]
    pub fn wrap(&self, i: isize) -> usize {
        i.rem_euclid(self.nodes as isize) as usize
    }
}

/// Nodal values of a periodic function on a [`GridSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFn {
    spec: GridSpec,
    values: Vec<f64>,
}

impl GridFn {
    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != spec.nodes {
            return Err(GridError::LengthMismatch {
                expected: spec.nodes,
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(GridError::NonFinite(i));
        }
        Ok(Self { spec, values })
    }

    pub fn zeros(spec: GridSpec) -> Self {
        Self::constant(spec, 0.0)
    }

    pub fn constant(spec: GridSpec, c: f64) -> Self {
        Self {
            spec,
            values: vec![c; spec.nodes],
        }
    }

    pub fn from_fn(spec: GridSpec, f: impl Fn(f64) -> f64) -> Self {
        Self {
            spec,
            values: (0..spec.nodes).map(|s| f(spec.x(s))).collect(),
        }
    }

    pub(crate) fn from_raw(spec: GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), spec.nodes);
        Self { spec, values }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Periodic access at any signed index.
    #[inline]
    pub fn at(&self, i: isize) -> f64 {
        self.values[self.spec.wrap(i)]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    fn check_same(&self, other: &GridFn) -> Result<(), GridError> {
        if self.spec == other.spec {
            Ok(())
        } else {
            Err(GridError::SpecMismatch)
        }
    }

    fn map(&self, f: impl Fn(usize) -> f64) -> GridFn {
        GridFn::from_raw(self.spec, (0..self.len()).map(f).collect())
    }

    /// Pointwise product `(uv)_i = u_i v_i`.
    pub fn mul(&self, other: &GridFn) -> Result<GridFn, GridError> {
        self.check_same(other)?;
        Ok(self.map(|i| self.values[i] * other.values[i]))
    }

    /// `a * self + b * other`.
    pub fn axpby(&self, a: f64, other: &GridFn, b: f64) -> Result<GridFn, GridError> {
        self.check_same(other)?;
        Ok(self.map(|i| a * self.values[i] + b * other.values[i]))
    }

    pub fn scale(&self, a: f64) -> GridFn {
        self.map(|i| a * self.values[i])
    }

    pub fn shift(&self, c: f64) -> GridFn {
        self.map(|i| self.values[i] + c)
    }

    pub fn max_abs_diff(&self, other: &GridFn) -> Result<f64, GridError> {
        self.check_same(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs())))
    }
}

impl Index<usize> for GridFn {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

/// Centered first difference `(v_{i+1} - v_{i-1}) / 2h`.
pub fn centered_diff(v: &GridFn) -> GridFn {
    let m = v.len();
    let inv = 0.5 / v.spec.h;
    v.map(|i| (v.values[(i + 1) % m] - v.values[(i + m - 1) % m]) * inv)
}

/// Second difference `(v_{i+1} - 2 v_i + v_{i-1}) / h^2`.
pub fn second_diff(v: &GridFn) -> GridFn {
    let m = v.len();
    let inv = 1.0 / (v.spec.h * v.spec.h);
    v.map(|i| (v.values[(i + 1) % m] - 2.0 * v.values[i] + v.values[(i + m - 1) % m]) * inv)
}

/// Backward difference `(v_i - v_{i-1}) / h`, the half-node value at `i - 1/2`.
pub fn backward_diff(v: &GridFn) -> GridFn {
    let m = v.len();
    let inv = 1.0 / v.spec.h;
    v.map(|i| (v.values[i] - v.values[(i + m - 1) % m]) * inv)
}

/// Skew-symmetric bilinear form `psi(u, v)_i = [u_i (D v)_i + D(uv)_i] / 3`
/// with `D` the centered difference. It satisfies `(psi(u, v), v) = 0`.
pub fn psi(u: &GridFn, v: &GridFn) -> Result<GridFn, GridError> {
    u.check_same(v)?;
    let m = u.len();
    let inv = 0.5 / u.spec.h;
    let (uu, vv) = (&u.values, &v.values);
    Ok(u.map(|i| {
        let ip = (i + 1) % m;
        let im = (i + m - 1) % m;
        let dv = (vv[ip] - vv[im]) * inv;
        let duv = (uu[ip] * vv[ip] - uu[im] * vv[im]) * inv;
        (uu[i] * dv + duv) / 3.0
    }))
}

/// Discrete L2 inner product `h * sum u_i v_i`.
pub fn inner(u: &GridFn, v: &GridFn) -> Result<f64, GridError> {
    u.check_same(v)?;
    Ok(u.spec.h * u.values.iter().zip(&v.values).map(|(a, b)| a * b).sum::<f64>())
}

/// Half-node inner product `<dx u, dx v> = h * sum (dx u_{i-1/2}) (dx v_{i-1/2})`.
pub fn inner_h1(u: &GridFn, v: &GridFn) -> Result<f64, GridError> {
    u.check_same(v)?;
    let m = u.len();
    let h = u.spec.h;
    let s: f64 = (0..m)
        .map(|i| {
            let im = (i + m - 1) % m;
            (u.values[i] - u.values[im]) * (v.values[i] - v.values[im])
        })
        .sum();
    Ok(s / h)
}

/// `(v, 1)`.
pub fn integral(v: &GridFn) -> f64 {
    v.spec.h * v.values.iter().sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub l2: f64,
    pub h1_semi: f64,
    pub linf: f64,
}

pub fn norms(v: &GridFn) -> Norms {
    Norms {
        l2: l2_norm(v),
        h1_semi: inner_h1(v, v).expect("same grid").sqrt(),
        linf: linf_norm(v),
    }
}

pub fn l2_norm(v: &GridFn) -> f64 {
    inner(v, v).expect("same grid").sqrt()
}

pub fn linf_norm(v: &GridFn) -> f64 {
    v.values.iter().fold(0.0, |m, x| f64::max(m, x.abs()))
}
