//! Gradient flow of `φ^σ(ρ) = −½W₂²(ρ, σ)` and the limit construction.
//!
//! In quantile coordinates the flow, in the logarithmic time `τ = log t`, is
//! `dX/dτ ∈ −∂I_K(X) + X − X_σ`. With `σ = ρ₀` it reproduces the
//! sticky-particle evolution: `ρ_t = G_{log(t/ε)} ρ_ε`.

use rayon::prelude::*;

use crate::cone::proj_k;
use crate::error::{Error, Result};
use crate::measures::{quantile, wasserstein, DiscreteMeasure, MassVelocityState};
use crate::semigroup::{step, LagrangianState};
use crate::step_fn::{lp_distance, StepFn};

/// `φ^σ(ρ) = −½W₂²(ρ, σ)`.
pub fn phi(rho: &DiscreteMeasure, sigma: &DiscreteMeasure) -> f64 {
    let w = wasserstein(rho, sigma, 2.0).expect("p = 2 is valid");
    -0.5 * w * w
}

/// `φ` on quantile functions.
pub fn phi_quantile(x: &StepFn, x_sigma: &StepFn) -> f64 {
    let w = lp_distance(x, x_sigma, 2.0).expect("p = 2 is valid");
    -0.5 * w * w
}

/// One implicit Euler step `X⁺ = Proj_K((X − hX_σ)/(1 − h))`.
pub fn gradient_flow_step(x: &StepFn, x_sigma: &StepFn, h: f64) -> Result<StepFn> {
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::InvalidArgument(format!("step size must lie in (0,1), got {h}")));
    }
    Ok(proj_k(&x.axpy(-h, x_sigma).scale(1.0 / (1.0 - h))))
}

/// Iterates of the implicit Euler scheme, `τ_k = k·h`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowPath {
    pub h: f64,
    pub iterates: Vec<StepFn>,
}

impl FlowPath {
    pub fn last(&self) -> &StepFn {
        self.iterates.last().expect("path starts with the initial datum")
    }

    pub fn taus(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.iterates.len()).map(|k| k as f64 * self.h)
    }
}

fn step_count(tau_span: f64, h: f64) -> Result<(usize, f64)> {
    if !(tau_span >= 0.0) || !tau_span.is_finite() {
        return Err(Error::InvalidArgument(format!("time span must be finite and >= 0, got {tau_span}")));
    }
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::InvalidArgument(format!("step size must lie in (0,1), got {h}")));
    }
    let n = (tau_span / h).ceil() as usize;
    Ok((n, if n == 0 { h } else { tau_span / n as f64 }))
}

/// Runs the flow for `τ ∈ [0, tau_span]` with step at most `h`, shrunk so
/// that an integer number of steps lands on `tau_span`.
pub fn gradient_flow_run(x_start: &StepFn, x_sigma: &StepFn, tau_span: f64, h: f64) -> Result<FlowPath> {
    let (n, h) = step_count(tau_span, h)?;
    let mut iterates = Vec::with_capacity(n + 1);
    iterates.push(x_start.clone());
    for _ in 0..n {
        let next = gradient_flow_step(iterates.last().expect("nonempty"), x_sigma, h)?;
        iterates.push(next);
    }
    Ok(FlowPath { h, iterates })
}

/// Endpoint of [`gradient_flow_run`] without keeping the path.
pub fn gradient_flow_end(x_start: &StepFn, x_sigma: &StepFn, tau_span: f64, h: f64) -> Result<StepFn> {
    let (n, h) = step_count(tau_span, h)?;
    let mut x = x_start.clone();
    for _ in 0..n {
        x = gradient_flow_step(&x, x_sigma, h)?;
    }
    Ok(x)
}

/// Flow from the exact state at `ε` up to `t` (`τ = log(t/ε)`) compared with
/// the exact state at `t`: returns `‖X_h(t) − X(t)‖₂`.
pub fn rescaled_flow_error(s0: &LagrangianState, eps: f64, t: f64, h: f64) -> Result<f64> {
    if !(eps > 0.0 && eps <= t) {
        return Err(Error::InvalidArgument(format!("need 0 < eps <= t, got eps={eps}, t={t}")));
    }
    let start = step(s0, eps)?;
    let end = gradient_flow_end(start.x(), s0.x(), (t / eps).ln(), h)?;
    lp_distance(&end, step(s0, t)?.x(), 2.0)
}

/// Positive part of
/// `(t/2)·d/dt W₂²(ρ_t, η) − ½W₂²(ρ_t, η) − φ(η) + φ(ρ_t)`, with `φ = φ^{ρ₀}`
/// and a central difference of step `10⁻⁴·t`. `path(t)` is the quantile of `ρ_t`.
pub fn evi_residual(path: &dyn Fn(f64) -> Result<StepFn>, x0: &StepFn, t: f64, eta: &StepFn) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("time must be positive, got {t}")));
    }
    let dt = 1e-4 * t;
    let sq = |x: &StepFn| -> Result<f64> { Ok(lp_distance(x, eta, 2.0)?.powi(2)) };
    let xt = path(t)?;
    let derivative = (sq(&path(t + dt)?)? - sq(&path(t - dt)?)?) / (2.0 * dt);
    let w2 = sq(&xt)?;
    let value = 0.5 * t * derivative - 0.5 * w2 - phi_quantile(eta, x0) + phi_quantile(&xt, x0);
    Ok(value.max(0.0))
}

/// Largest `ε₀` with `x + εv` nondecreasing on the atoms for all `ε ≤ ε₀`:
/// the first free-flight crossing time (`∞` if none).
pub fn monotone_horizon(state0: &MassVelocityState) -> f64 {
    let xs = state0.positions();
    let vs = state0.velocities();
    let mut best = f64::INFINITY;
    for i in 1..xs.len() {
        let closing = vs[i - 1] - vs[i];
        if closing > 0.0 {
            best = best.min((xs[i] - xs[i - 1]) / closing);
        }
    }
    best
}

/// Upper bound for `m_ε = min ‖v₀ − u‖_{L²(ρ₀)}` over `u` with `sup|u| ≤ 1/ε`
/// and `Lip(u) ≤ 1/(2ε)`, from the feasible `u = max_j(c_j − L|x − x_j|)`
/// where `c_j` clamps `v_j` to `±1/ε` and `L = 1/(2ε)`.
pub fn lipschitz_truncation_gap(state0: &MassVelocityState, eps: f64) -> f64 {
    let bound = 1.0 / eps;
    let lip = 0.5 / eps;
    let xs = state0.positions();
    let clamped: Vec<f64> = state0.velocities().iter().map(|v| v.clamp(-bound, bound)).collect();
    let mut total = 0.0;
    for (i, (m, x, v)) in state0.atoms().enumerate() {
        let mut u = clamped[i];
        for (j, &c) in clamped.iter().enumerate() {
            u = u.max(c - lip * (x - xs[j]).abs());
        }
        total += m * (v - u).powi(2);
    }
    total.sqrt()
}

/// One row of the limit-construction table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitRow {
    pub eps: f64,
    /// `W₂(ρ_t, G_{log(t/ε)} ρ̃_ε)` with the finer integrator step.
    pub w2: f64,
    /// `W₂` between the runs with steps `h` and `h/2`: an estimate of the
    /// integrator error in `w2`.
    pub integrator_error: f64,
    /// `2·m_ε·t` with `m_ε` from [`lipschitz_truncation_gap`].
    pub bound: f64,
    /// `ε ≤ ε₀`: free flight up to `ε` has no collision.
    pub collision_free: bool,
}

/// `ρ̃_ε = (x + εv₀)_#ρ₀` flowed for `τ = log(t/ε)` towards `σ = ρ₀`, and
/// compared with the exact `ρ_t`.
pub fn limit_construction(state0: &MassVelocityState, t: f64, eps: &[f64], h: f64) -> Result<Vec<LimitRow>> {
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("time must be positive, got {t}")));
    }
    let s0 = LagrangianState::from_state(state0);
    let exact = step(&s0, t)?;
    let x0 = s0.x().clone();
    let eps0 = monotone_horizon(state0);
    eps.par_iter()
        .map(|&e| {
            if !(e > 0.0 && e <= t) {
                return Err(Error::InvalidArgument(format!("need 0 < eps <= t, got eps={e}")));
            }
            let pushed: Vec<(f64, f64)> = state0.atoms().map(|(m, x, v)| (m, x + e * v)).collect();
            let start = quantile(&DiscreteMeasure::normalized(&pushed)?);
            let tau = (t / e).ln();
            let coarse = gradient_flow_end(&start, &x0, tau, h)?;
            let fine = gradient_flow_end(&start, &x0, tau, 0.5 * h)?;
            Ok(LimitRow {
                eps: e,
                w2: lp_distance(&fine, exact.x(), 2.0)?,
                integrator_error: lp_distance(&fine, &coarse, 2.0)?,
                bound: 2.0 * lipschitz_truncation_gap(state0, e) * t,
                collision_free: e <= eps0,
            })
        })
        .collect()
}

/// `ε_k = t/2ᵏ`, `k = 1..=k_max`.
pub fn geometric_eps(t: f64, k_max: u32) -> Vec<f64> {
    (1..=k_max).map(|k| t / f64::from(1u32 << k)).collect()
}
