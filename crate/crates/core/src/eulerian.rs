//! Eulerian description through the cumulative distribution `M_t`.
//!
//! `M_t` is the entropy solution of `∂ₜM + ∂ₓA(M) = 0`, where the flux
//! `A(w) = ∫₀ʷ V₀` is the primitive of the initial velocity in quantile
//! coordinates. [`hopf_solution`] evaluates it exactly by convex duality;
//! [`godunov_oracle`] is an independent finite-volume approximation.

use std::io::Write;

use crate::error::{Error, Result};
use crate::measures::{DiscreteMeasure, MassVelocityState};
use crate::step_fn::{legendre, lower_convex_envelope, primitive, PwLinearFn};

/// Piecewise-linear flux `A` on `[0,1]` with `A(0) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxFunction {
    a: PwLinearFn,
}

impl FluxFunction {
    pub fn as_pw_linear(&self) -> &PwLinearFn {
        &self.a
    }

    pub fn eval(&self, w: f64) -> f64 {
        self.a.eval(w.clamp(0.0, 1.0)).expect("flux is defined on [0,1]")
    }

    /// Largest `|A'|`.
    pub fn max_speed(&self) -> f64 {
        self.a.slopes().iter().fold(0.0, |m, s| m.max(s.abs()))
    }

    /// `min` (if `lo ≤ hi`) or `max` (otherwise) of `A` between the states:
    /// the Godunov flux, exact because `A` is linear between knots.
    pub fn godunov_flux(&self, left: f64, right: f64) -> f64 {
        let (lo, hi) = if left <= right { (left, right) } else { (right, left) };
        let pick: fn(f64, f64) -> f64 = if left <= right { f64::min } else { f64::max };
        let mut best = pick(self.eval(lo), self.eval(hi));
        let xs = self.a.knot_xs();
        let ys = self.a.knot_ys();
        let start = xs.partition_point(|&x| x <= lo);
        for k in start..xs.len() {
            if xs[k] >= hi {
                break;
            }
            best = pick(best, ys[k]);
        }
        best
    }
}

/// `A = ∫V₀` in quantile coordinates.
pub fn flux_of(state0: &MassVelocityState) -> FluxFunction {
    let (_, v) = state0.lagrangian();
    FluxFunction { a: primitive(&v) }
}

/// A right-continuous CDF with finitely many jumps.
#[derive(Debug, Clone, PartialEq)]
pub struct CdfSolution {
    pub t: f64,
    /// Increasing jump locations.
    pub positions: Vec<f64>,
    /// Jump sizes.
    pub masses: Vec<f64>,
}

impl CdfSolution {
    pub fn of_measure(t: f64, rho: &DiscreteMeasure) -> Self {
        Self { t, positions: rho.positions().to_vec(), masses: rho.masses().to_vec() }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let k = self.positions.partition_point(|&p| p <= x);
        self.masses[..k].iter().sum::<f64>().min(1.0)
    }

    pub fn to_measure(&self) -> Result<DiscreteMeasure> {
        let atoms: Vec<(f64, f64)> = self.masses.iter().copied().zip(self.positions.iter().copied()).collect();
        DiscreteMeasure::normalized(&atoms)
    }

    /// Rows `(x, M(x))` at each jump.
    pub fn table(&self) -> Vec<(f64, f64)> {
        let mut acc = 0.0;
        self.positions
            .iter()
            .zip(&self.masses)
            .map(|(&x, &m)| {
                acc += m;
                (x, acc.min(1.0))
            })
            .collect()
    }
}

/// `M_t` from `F_t = (F₀ + tA)**` and `G_t = F_t*`: the knots of `G_t` are the
/// atoms, the slope increments their masses.
pub fn hopf_solution(state0: &MassVelocityState, t: f64) -> Result<CdfSolution> {
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("time must be >= 0, got {t}")));
    }
    let (x0, v0) = state0.lagrangian();
    let f0 = primitive(&x0);
    let a = primitive(&v0);
    let ft = lower_convex_envelope(&f0.add(&a.scale(t))?)?;
    let gt = legendre(&ft)?;
    let xs = gt.knot_xs();
    let slopes = gt.slopes();
    let left = gt.left_tail().unwrap_or(0.0);
    let right = gt.right_tail().unwrap_or(1.0);
    let mut masses = Vec::with_capacity(xs.len());
    for k in 0..xs.len() {
        let before = if k == 0 { left } else { slopes[k - 1] };
        let after = if k + 1 == xs.len() { right } else { slopes[k] };
        masses.push(after - before);
    }
    Ok(CdfSolution { t, positions: xs.to_vec(), masses })
}

/// Cell averages of `M` on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCdf {
    pub t: f64,
    pub x_left: f64,
    pub dx: f64,
    pub values: Vec<f64>,
    pub steps: usize,
}

impl GridCdf {
    pub fn centres(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(|i| self.x_left + (i as f64 + 0.5) * self.dx)
    }

    /// `∫|M_grid − M|` with `M_grid` piecewise constant on cells. Outside the
    /// grid `M_grid` is 0 on the left and 1 on the right.
    pub fn l1_distance(&self, exact: &CdfSolution) -> f64 {
        let x_right = self.x_left + self.dx * self.values.len() as f64;
        let mut total = 0.0;
        // mass outside the grid
        for (&p, &m) in exact.positions.iter().zip(&exact.masses) {
            if p < self.x_left {
                total += m * (self.x_left - p);
            } else if p >= x_right {
                total += m * (p - x_right);
            }
        }
        let mut k = 0;
        let mut below = 0.0;
        while k < exact.positions.len() && exact.positions[k] < self.x_left {
            below += exact.masses[k];
            k += 1;
        }
        for (i, &c) in self.values.iter().enumerate() {
            let a = self.x_left + i as f64 * self.dx;
            let b = a + self.dx;
            let mut lo = a;
            while k < exact.positions.len() && exact.positions[k] < b {
                let p = exact.positions[k].max(a);
                total += (p - lo) * (c - below).abs();
                lo = p;
                below += exact.masses[k];
                k += 1;
            }
            total += (b - lo) * (c - below).abs();
        }
        total
    }

    /// Rows `(centre, M)`.
    pub fn table(&self) -> Vec<(f64, f64)> {
        self.centres().zip(self.values.iter().copied()).collect()
    }
}

/// Godunov scheme for `∂ₜM + ∂ₓA(M) = 0` on a uniform grid covering the
/// support of `ρ_s` for `s ≤ t` plus a margin, started from exact cell
/// averages of `M₀`. `cfl` must lie in `(0, 0.9]`.
pub fn godunov_oracle(state0: &MassVelocityState, t: f64, dx: f64, cfl: f64) -> Result<GridCdf> {
    if !(dx > 0.0) || !dx.is_finite() {
        return Err(Error::InvalidArgument(format!("dx must be positive, got {dx}")));
    }
    if !(cfl > 0.0 && cfl <= 0.9) {
        return Err(Error::InvalidArgument(format!("cfl must lie in (0, 0.9], got {cfl}")));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!("time must be finite and >= 0, got {t}")));
    }
    let flux = flux_of(state0);
    let xs = state0.positions();
    let vs = state0.velocities();
    let vmin = vs.iter().copied().fold(f64::INFINITY, f64::min);
    let vmax = vs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = xs[0] + t * vmin.min(0.0);
    let hi = xs[xs.len() - 1] + t * vmax.max(0.0);
    let margin = 4.0 * dx + 0.05 * (hi - lo);
    let x_left = ((lo - margin) / dx).floor() * dx;
    let cells = (((hi + margin) - x_left) / dx).ceil() as usize;
    // ∫_{-∞}^x M₀ = Σ mₖ (x − pₖ)⁺
    let antiderivative = |x: f64| -> f64 { state0.atoms().map(|(m, p, _)| m * (x - p).max(0.0)).sum() };
    let mut values: Vec<f64> = (0..cells)
        .map(|i| {
            let a = x_left + i as f64 * dx;
            ((antiderivative(a + dx) - antiderivative(a)) / dx).clamp(0.0, 1.0)
        })
        .collect();
    let speed = flux.max_speed();
    let mut time = 0.0;
    let mut steps = 0;
    let mut fluxes = vec![0.0; cells + 1];
    if speed > 0.0 {
        let dt_max = cfl * dx / speed;
        while time < t {
            let dt = dt_max.min(t - time);
            for (i, f) in fluxes.iter_mut().enumerate() {
                let left = if i == 0 { 0.0 } else { values[i - 1] };
                let right = if i == cells { 1.0 } else { values[i] };
                *f = flux.godunov_flux(left, right);
            }
            let ratio = dt / dx;
            for (i, m) in values.iter_mut().enumerate() {
                *m -= ratio * (fluxes[i + 1] - fluxes[i]);
            }
            time += dt;
            steps += 1;
        }
    }
    Ok(GridCdf { t, x_left, dx, values, steps })
}

/// CSV `x,M`.
pub fn write_cdf_csv<W: Write>(rows: &[(f64, f64)], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["x", "M"])?;
    for (x, m) in rows {
        w.write_record([format!("{x:?}"), format!("{m:?}")])?;
    }
    w.flush()?;
    Ok(())
}
