//! Discrete energy, momentum and mass.
//!
//! The raw forms are exactly conserved by the scheme. The shifted forms
//! measure the elevation relative to the rest level `rho = 1` and are
//! conserved as a consequence of the raw ones.

use crate::grid::{self, GridFn};
use crate::scheme::{PhysParams, State};

/// One row of an invariant report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvariantSample {
    pub t: f64,
    pub energy: f64,
    pub momentum: f64,
    pub mass: f64,
    pub energy_shift: f64,
    pub momentum_shift: f64,
    pub picard_iters: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Energy {
    pub raw: f64,
    pub shifted: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Momentum {
    pub raw: f64,
    pub shifted: f64,
}

fn sq(v: &GridFn) -> f64 {
    grid::inner(v, v).expect("same grid")
}

/// `E = [|u|^2 + |u|_1^2 + (1 - 2 Omega kappa) |rho|^2] / 2`, and the same with
/// `rho - 1` in place of `rho`.
pub fn energy(s: &State, p: &PhysParams) -> Energy {
    let kinetic = sq(&s.u) + grid::inner_h1(&s.u, &s.u).expect("same grid");
    let c = p.coupling();
    Energy {
        raw: 0.5 * (kinetic + c * sq(&s.rho)),
        shifted: 0.5 * (kinetic + c * sq(&s.rho.shift(-1.0))),
    }
}

/// `H = (u, 1) + Omega |rho|^2`, and the same with `rho - 1`.
pub fn momentum(s: &State, p: &PhysParams) -> Momentum {
    let drift = grid::integral(&s.u);
    Momentum {
        raw: drift + p.omega() * sq(&s.rho),
        shifted: drift + p.omega() * sq(&s.rho.shift(-1.0)),
    }
}

/// `I = (rho, 1)`.
pub fn mass(s: &State) -> f64 {
    grid::integral(&s.rho)
}

pub fn sample(s: &State, p: &PhysParams, picard_iters: usize) -> InvariantSample {
    let e = energy(s, p);
    let h = momentum(s, p);
    InvariantSample {
        t: s.t,
        energy: e.raw,
        momentum: h.raw,
        mass: mass(s),
        energy_shift: e.shifted,
        momentum_shift: h.shifted,
        picard_iters,
    }
}

/// Largest `|X^n - X^0|` over a series, for energy, momentum and mass.
pub fn max_drift(samples: &[InvariantSample]) -> (f64, f64, f64) {
    let Some(first) = samples.first() else {
        return (0.0, 0.0, 0.0);
    };
    samples.iter().fold((0.0, 0.0, 0.0), |(e, h, i), s| {
        (
            f64::max(e, (s.energy - first.energy).abs()),
            f64::max(h, (s.momentum - first.momentum).abs()),
            f64::max(i, (s.mass - first.mass).abs()),
        )
    })
}
