//! Banded linear systems with periodic wrap-around.
//!
//! A [`CyclicBandSystem`] stores, for every row `r`, the coefficients at column
//! offsets `-lower..=upper`; the column of offset `k` is `(r + k) mod n`. The
//! entries whose column wraps across the seam form a low-rank corner term, so
//! the solver factors the plain banded part with partial pivoting and corrects
//! for the corners through a small capacitance system (Woodbury identity).
//! Small or troublesome systems go through [`DenseLu`].

use std::collections::BTreeSet;

use thiserror::Error;

/// Relative pivot threshold below which a factorization is declared singular.
pub const PIVOT_TOL: f64 = 1e-14;

/// Relative residual the cyclic solver aims for.
pub const RESIDUAL_TOL: f64 = 1e-13;

/// Largest system the dense fallback will accept.
pub const DENSE_FALLBACK_MAX: usize = 1024;

const REFINEMENT_STEPS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Band,
    Capacitance,
    Dense,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("singular matrix: pivot {index} ({stage:?} factorization) below tolerance")]
    Singular { stage: Stage, index: usize },
    #[error("right-hand side has length {got}, expected {expected}")]
    RhsLength { expected: usize, got: usize },
    #[error("non-finite entry in row {0}")]
    NonFinite(usize),
}

/// `n x n` banded matrix with periodic corners plus its right-hand side.
#[derive(Debug, Clone, PartialEq)]
pub struct CyclicBandSystem {
    n: usize,
    lower: usize,
    upper: usize,
    // row-major, `width = lower + upper + 1` coefficients per row
    bands: Vec<f64>,
    rhs: Vec<f64>,
}

impl CyclicBandSystem {
    pub fn new(n: usize, lower: usize, upper: usize) -> Self {
        assert!(n > lower.max(upper), "system too small for its bandwidth");
        Self {
            n,
            lower,
            upper,
            bands: vec![0.0; n * (lower + upper + 1)],
            rhs: vec![0.0; n],
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn lower(&self) -> usize {
        self.lower
    }

    pub fn upper(&self) -> usize {
        self.upper
    }

    fn width(&self) -> usize {
        self.lower + self.upper + 1
    }

    #[inline]
    fn slot(&self, row: usize, offset: isize) -> usize {
        debug_assert!(offset >= -(self.lower as isize) && offset <= self.upper as isize);
        row * self.width() + (offset + self.lower as isize) as usize
    }

    /// Coefficient of column `(row + offset) mod n` in `row`.
    pub fn get(&self, row: usize, offset: isize) -> f64 {
        self.bands[self.slot(row, offset)]
    }

    /// Accumulate into the coefficient at `(row, (row + offset) mod n)`.
    #[inline]
    pub fn add(&mut self, row: usize, offset: isize, value: f64) {
        let k = self.slot(row, offset);
        self.bands[k] += value;
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn rhs_mut(&mut self) -> &mut [f64] {
        &mut self.rhs
    }

    pub fn set_rhs(&mut self, rhs: Vec<f64>) -> Result<(), SolveError> {
        if rhs.len() != self.n {
            return Err(SolveError::RhsLength {
                expected: self.n,
                got: rhs.len(),
            });
        }
        self.rhs = rhs;
        Ok(())
    }

    fn entries(&self) -> impl Iterator<Item = (usize, isize, f64)> + '_ {
        let w = self.width();
        let lower = self.lower as isize;
        self.bands
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(move |(k, &v)| (k / w, (k % w) as isize - lower, v))
    }

    fn column(&self, row: usize, offset: isize) -> usize {
        (row as isize + offset).rem_euclid(self.n as isize) as usize
    }

    /// The represented matrix in row-major dense form.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.n;
        let mut a = vec![0.0; n * n];
        for (r, k, v) in self.entries() {
            a[r * n + self.column(r, k)] += v;
        }
        a
    }

    /// `A x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.n];
        for (r, k, v) in self.entries() {
            y[r] += v * x[self.column(r, k)];
        }
        y
    }

    /// `||A x - b||_2 / ||b||_2`, or the absolute residual when `b = 0`.
    pub fn relative_residual(&self, x: &[f64]) -> f64 {
        let ax = self.apply(x);
        let res = ax
            .iter()
            .zip(&self.rhs)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let bn = self.rhs.iter().map(|b| b * b).sum::<f64>().sqrt();
        if bn > 0.0 {
            res / bn
        } else {
            res
        }
    }

    fn row_scales(&self) -> Vec<f64> {
        self.bands
            .chunks(self.width())
            .map(|row| row.iter().fold(0.0_f64, |m, v| m.max(v.abs())))
            .collect()
    }

    /// Solve `A x = rhs` in `O(n * bw^2)`.
    pub fn solve(&self) -> Result<Vec<f64>, SolveError> {
        if let Some(r) = self
            .bands
            .chunks(self.width())
            .position(|row| row.iter().any(|v| !v.is_finite()))
        {
            return Err(SolveError::NonFinite(r));
        }
        if let Some(r) = self.rhs.iter().position(|v| !v.is_finite()) {
            return Err(SolveError::NonFinite(r));
        }

        // Below this size the band and the corners overlap; dense is both
        // simpler and cheap.
        if self.n <= 2 * (self.lower + self.upper + 1) {
            return self.solve_dense();
        }

        let factor = match CyclicFactor::new(self) {
            Ok(f) => f,
            Err(SolveError::Singular {
                stage: Stage::Band,
                index,
            }) if self.n <= DENSE_FALLBACK_MAX => {
                log::warn!("banded pivot {index} collapsed; falling back to dense LU (n = {})", self.n);
                return self.solve_dense();
            }
            Err(e) => return Err(e),
        };

        let mut x = factor.solve(&self.rhs);
        let mut resid = self.relative_residual(&x);
        for _ in 0..REFINEMENT_STEPS {
            if resid <= RESIDUAL_TOL {
                break;
            }
            let ax = self.apply(&x);
            let r: Vec<f64> = self.rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
            let d = factor.solve(&r);
            let candidate: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + b).collect();
            let cr = self.relative_residual(&candidate);
            if cr >= resid {
                break;
            }
            x = candidate;
            resid = cr;
        }
        if resid > RESIDUAL_TOL {
            if self.n <= DENSE_FALLBACK_MAX {
                log::warn!(
                    "cyclic solve residual {resid:.3e} above {RESIDUAL_TOL:.0e}; retrying with dense LU (n = {})",
                    self.n
                );
                let dense = self.solve_dense()?;
                if self.relative_residual(&dense) < resid {
                    return Ok(dense);
                }
            } else {
                log::warn!("cyclic solve residual {resid:.3e} above {RESIDUAL_TOL:.0e} (n = {})", self.n);
            }
        }
        Ok(x)
    }

    /// Reference path: dense LU with partial pivoting, `O(n^3)`.
    pub fn solve_dense(&self) -> Result<Vec<f64>, SolveError> {
        let lu = DenseLu::factor(self.to_dense(), self.n)?;
        let mut x = lu.solve(&self.rhs);
        // one refinement sweep keeps the dense path inside the residual contract
        let ax = self.apply(&x);
        let r: Vec<f64> = self.rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let d = lu.solve(&r);
        let refined: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + b).collect();
        if self.relative_residual(&refined) < self.relative_residual(&x) {
            x = refined;
        }
        Ok(x)
    }
}

/// Banded part factored with partial pivoting plus the corner correction.
struct CyclicFactor {
    band: BandLu,
    wrap_cols: Vec<usize>,
    // B^{-1} U, one column per wrap column
    z: Vec<Vec<f64>>,
    cap: DenseLu,
}

impl CyclicFactor {
    fn new(sys: &CyclicBandSystem) -> Result<Self, SolveError> {
        let n = sys.n;
        let mut band = BandLu::zeros(n, sys.lower, sys.upper);
        let mut corners: Vec<(usize, usize, f64)> = Vec::new();
        for (r, k, v) in sys.entries() {
            let c = r as isize + k;
            if (0..n as isize).contains(&c) {
                band.set(r, c as usize, v);
            } else {
                corners.push((r, sys.column(r, k), v));
            }
        }
        band.factor(&sys.row_scales())?;

        let wrap_cols: Vec<usize> = corners
            .iter()
            .map(|&(_, c, _)| c)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let k = wrap_cols.len();
        let mut z = Vec::with_capacity(k);
        for &wc in &wrap_cols {
            let mut col = vec![0.0; n];
            for &(r, c, v) in &corners {
                if c == wc {
                    col[r] += v;
                }
            }
            band.solve_in_place(&mut col);
            z.push(col);
        }
        let mut cap = vec![0.0; k * k];
        for (i, &wi) in wrap_cols.iter().enumerate() {
            for (j, zj) in z.iter().enumerate() {
                cap[i * k + j] = zj[wi] + if i == j { 1.0 } else { 0.0 };
            }
        }
        let cap = DenseLu::factor(cap, k).map_err(|e| match e {
            SolveError::Singular { index, .. } => SolveError::Singular {
                stage: Stage::Capacitance,
                index,
            },
            other => other,
        })?;
        Ok(Self {
            band,
            wrap_cols,
            z,
            cap,
        })
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut y = b.to_vec();
        self.band.solve_in_place(&mut y);
        if self.wrap_cols.is_empty() {
            return y;
        }
        let vy: Vec<f64> = self.wrap_cols.iter().map(|&c| y[c]).collect();
        let w = self.cap.solve(&vy);
        for (zj, wj) in self.z.iter().zip(&w) {
            for (yi, zi) in y.iter_mut().zip(zj) {
                *yi -= wj * zi;
            }
        }
        y
    }
}

/// LU factorization of a (non-periodic) band matrix with partial pivoting.
///
/// Row `i` keeps a window of columns `i - kl ..= i + kl + ku`, which holds the
/// fill produced by row interchanges.
struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    ab: Vec<f64>,
    mult: Vec<f64>,
    piv: Vec<usize>,
}

impl BandLu {
    fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        Self {
            n,
            kl,
            ku,
            ab: vec![0.0; n * (2 * kl + ku + 1)],
            mult: vec![0.0; n * kl],
            piv: vec![0; n],
        }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.kl + self.ku);
        i * (2 * self.kl + self.ku + 1) + (j + self.kl - i)
    }

    fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.ab[k] += v;
    }

    fn factor(&mut self, scales: &[f64]) -> Result<(), SolveError> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let mut scale = scales.to_vec();
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.ab[self.idx(k, k)].abs();
            for i in k + 1..=last {
                let v = self.ab[self.idx(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= PIVOT_TOL * scale[p] || best == 0.0 {
                return Err(SolveError::Singular {
                    stage: Stage::Band,
                    index: k,
                });
            }
            self.piv[k] = p;
            let right = (k + kl + ku).min(n - 1);
            if p != k {
                for j in k..=right {
                    let (a, b) = (self.idx(k, j), self.idx(p, j));
                    self.ab.swap(a, b);
                }
                scale.swap(k, p);
            }
            let pivot = self.ab[self.idx(k, k)];
            for i in k + 1..=last {
                let lik = self.ab[self.idx(i, k)] / pivot;
                self.mult[k * kl + (i - k - 1)] = lik;
                let ik = self.idx(i, k);
                self.ab[ik] = 0.0;
                if lik != 0.0 {
                    for j in k + 1..=right {
                        let kj = self.ab[self.idx(k, j)];
                        let ij = self.idx(i, j);
                        self.ab[ij] -= lik * kj;
                    }
                }
            }
        }
        Ok(())
    }

    fn solve_in_place(&self, b: &mut [f64]) {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk != 0.0 {
                for i in k + 1..=(k + kl).min(n - 1) {
                    b[i] -= self.mult[k * kl + (i - k - 1)] * bk;
                }
            }
        }
        for k in (0..n).rev() {
            let mut s = b[k];
            for j in k + 1..=(k + kl + ku).min(n - 1) {
                s -= self.ab[self.idx(k, j)] * b[j];
            }
            b[k] = s / self.ab[self.idx(k, k)];
        }
    }
}

/// Dense LU with partial pivoting; the reference solver and fallback path.
#[derive(Debug, Clone)]
pub struct DenseLu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl DenseLu {
    /// Factor a row-major `n x n` matrix.
    pub fn factor(mut a: Vec<f64>, n: usize) -> Result<Self, SolveError> {
        assert_eq!(a.len(), n * n);
        let scale: Vec<f64> = (0..n)
            .map(|i| a[i * n..(i + 1) * n].iter().fold(0.0_f64, |m, v| m.max(v.abs())))
            .collect();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, best) = (k..n)
                .map(|i| (i, a[i * n + k].abs()))
                .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if best <= PIVOT_TOL * scale[perm[p]] || best == 0.0 {
                return Err(SolveError::Singular {
                    stage: Stage::Dense,
                    index: k,
                });
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let pivot = a[k * n + k];
            for i in k + 1..n {
                let lik = a[i * n + k] / pivot;
                a[i * n + k] = lik;
                if lik != 0.0 {
                    for j in k + 1..n {
                        a[i * n + j] -= lik * a[k * n + j];
                    }
                }
            }
        }
        Ok(Self { n, lu: a, perm })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s: f64 = (0..i).map(|j| self.lu[i * n + j] * x[j]).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| self.lu[i * n + j] * x[j]).sum();
            x[i] = (x[i] - s) / self.lu[i * n + i];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand::rngs::StdRng;

    fn periodic_laplacian(n: usize, diag: f64) -> CyclicBandSystem {
        let mut s = CyclicBandSystem::new(n, 1, 1);
        for r in 0..n {
            s.add(r, -1, -1.0);
            s.add(r, 0, diag);
            s.add(r, 1, -1.0);
        }
        s
    }

    #[test]
    fn identity_returns_rhs() {
        let n = 40;
        let mut s = CyclicBandSystem::new(n, 2, 3);
        for r in 0..n {
            s.add(r, 0, 1.0);
        }
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        s.set_rhs(b.clone()).unwrap();
        assert_eq!(s.solve().unwrap(), b);
    }

    #[test]
    fn recovers_known_solution_of_shifted_laplacian() {
        let n = 200;
        let mut s = periodic_laplacian(n, 3.0);
        let x: Vec<f64> = (0..n).map(|i| (0.1 * i as f64).cos() + 0.01 * i as f64).collect();
        let b = s.apply(&x);
        s.set_rhs(b).unwrap();
        let got = s.solve().unwrap();
        let err = got.iter().zip(&x).fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs()));
        assert!(err < 1e-13, "err = {err}");
        assert!(s.relative_residual(&got) <= RESIDUAL_TOL);
    }

    #[test]
    fn pure_periodic_laplacian_is_singular() {
        // 2I - S - S^{-1} annihilates constants
        let mut s = periodic_laplacian(64, 2.0);
        s.set_rhs(vec![1.0; 64]).unwrap();
        match s.solve() {
            Err(SolveError::Singular { .. }) => {}
            other => panic!("expected singular, got {other:?}"),
        }
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let s = periodic_laplacian(50, 4.0);
        let x = s.solve().unwrap();
        assert!(x.iter().all(|v| *v == 0.0));
        assert_eq!(s.relative_residual(&x), 0.0);
    }

    #[test]
    fn dense_and_apply_agree() {
        let mut rng = StdRng::seed_from_u64(7);
        let n = 23;
        let mut s = CyclicBandSystem::new(n, 4, 3);
        for r in 0..n {
            for k in -4..=3 {
                s.add(r, k, rng.gen_range(-1.0..1.0));
            }
        }
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let a = s.to_dense();
        let y = s.apply(&x);
        for i in 0..n {
            let yi: f64 = (0..n).map(|j| a[i * n + j] * x[j]).sum();
            assert!((yi - y[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn pivoting_handles_zero_diagonal() {
        // interior zero diagonal forces a row interchange in the band factor
        let n = 30;
        let mut s = CyclicBandSystem::new(n, 2, 2);
        for r in 0..n {
            s.add(r, 0, if r % 3 == 1 { 0.0 } else { 1.0 });
            s.add(r, 1, 2.0);
            s.add(r, -1, 0.5);
            s.add(r, 2, 0.25);
            s.add(r, -2, -0.3);
        }
        let x: Vec<f64> = (0..n).map(|i| 1.0 + i as f64).collect();
        let b = s.apply(&x);
        s.set_rhs(b).unwrap();
        let dense = s.solve_dense().unwrap();
        let got = s.solve().unwrap();
        for (a, b) in got.iter().zip(&dense) {
            assert!((a - b).abs() < 1e-10 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn non_finite_entries_rejected() {
        let mut s = periodic_laplacian(20, 3.0);
        s.add(5, 0, f64::NAN);
        assert_eq!(s.solve().unwrap_err(), SolveError::NonFinite(5));
        let mut s = periodic_laplacian(20, 3.0);
        assert!(s.set_rhs(vec![0.0; 3]).is_err());
    }
}
