//! The sticky-particle semigroup in quantile coordinates.
//!
//! A state is a pair `(X, V)` with `X` nondecreasing and `V` constant on every
//! plateau of `X`. Evolution from time 0 is one projection:
//! `X(t) = Proj_K(X₀ + tV₀)`, `V(t) = Proj_{H_X(t)}(V₀)`. The residual
//! functions measure how well a computed trajectory satisfies the
//! differential-inclusion and rescaled forms of the same law.

use std::io::Write;

use crate::cone::{omega, proj_h, proj_k, subdifferential_violation};
use crate::error::{Error, Result};
use crate::measures::{quantile_cost, Cost, MassVelocityState};
use crate::step_fn::{lp_distance, refine_common, StepFn};

/// Relative tolerance for matching breakpoints of different states.
pub const BREAKPOINT_TOL: f64 = 1e-12;

/// A point `(X, V)` of the Lagrangian phase space at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianState {
    t: f64,
    x: StepFn,
    v: StepFn,
    origin: Option<String>,
}

impl LagrangianState {
    /// Checks that `X` is nondecreasing and every breakpoint of `V` is one of `X`.
    pub fn new(t: f64, x: StepFn, v: StepFn) -> Result<Self> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::InvalidArgument(format!("time must be finite and >= 0, got {t}")));
        }
        if let Some(index) = x.first_decrease() {
            return Err(Error::NotMonotone { index, left: x.values()[index], right: x.values()[index + 1] });
        }
        let xb = x.breakpoints();
        for &w in &v.breakpoints()[1..v.breakpoints().len() - 1] {
            let k = xb.partition_point(|&b| b < w - BREAKPOINT_TOL);
            if k >= xb.len() || (xb[k] - w).abs() > BREAKPOINT_TOL {
                return Err(Error::DomainMismatch(format!("V jumps at w={w} inside a plateau of X")));
            }
        }
        Ok(Self { t, x, v, origin: None })
    }

    /// Initial state of a measure with velocity.
    pub fn from_state(mu: &MassVelocityState) -> Self {
        let (x, v) = mu.lagrangian();
        Self { t: 0.0, x, v, origin: None }
    }

    /// Tags the state with the identifier of the run it belongs to.
    pub fn with_origin(mut self, origin: impl Into<String>) -> Self {
        self.origin = Some(origin.into());
        self
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn x(&self) -> &StepFn {
        &self.x
    }

    pub fn v(&self) -> &StepFn {
        &self.v
    }

    pub fn origin(&self) -> Option<&str> {
        self.origin.as_deref()
    }

    /// Atoms `(m, x, v)`, one per cell of `X`.
    pub fn atoms(&self) -> Vec<(f64, f64, f64)> {
        self.x.cells().map(|(a, b, x)| (b - a, x, self.v.eval(0.5 * (a + b)))).collect()
    }

    pub fn to_state(&self) -> MassVelocityState {
        MassVelocityState::from_lagrangian(&self.x, &self.v).expect("X is nondecreasing")
    }
}

fn evolve(x: &StepFn, v: &StepFn, dt: f64) -> (StepFn, StepFn) {
    let xt = proj_k(&x.axpy(dt, v));
    let vt = proj_h(&omega(&xt), v);
    (xt, vt)
}

/// `S_t` applied to a state at time 0.
pub fn step(s0: &LagrangianState, t: f64) -> Result<LagrangianState> {
    if s0.t != 0.0 {
        return Err(Error::InvalidArgument(format!("step expects a state at t=0, got t={}", s0.t)));
    }
    step_from(s0, t)
}

/// Evolves a state at time `s` to time `t ≥ s`.
pub fn step_from(s: &LagrangianState, t: f64) -> Result<LagrangianState> {
    if !(t >= s.t) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!("cannot step from t={} to t={t}", s.t)));
    }
    if t == s.t {
        return Ok(s.clone());
    }
    let (x, v) = evolve(&s.x, &s.v, t - s.t);
    Ok(LagrangianState { t, x, v, origin: s.origin.clone() })
}

/// Distance of `ξ = V₀ − (X(t+dt) − X(t))/dt` from `∂I_K(X(t))`.
pub fn residual_li(s0: &LagrangianState, t: f64, dt: f64) -> Result<f64> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let a = step(s0, t)?;
    let b = step(s0, t + dt)?;
    let xi = s0.v.sub(&b.x.sub(&a.x).scale(1.0 / dt));
    subdifferential_violation(&xi, &a.x)
}

/// `‖t·V(t) − (X(t) − Proj_{H_X(t)}(X₀))‖₂`.
pub fn residual_liii(s0: &LagrangianState, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::InvalidArgument("the rescaled residual needs t > 0".into()));
    }
    let st = step(s0, t)?;
    let rhs = st.x.sub(&proj_h(&omega(&st.x), &s0.x));
    lp_distance(&st.v.scale(t), &rhs, 2.0)
}

/// `‖t⁻¹(X(t) − X₀) − V₀‖₂` along `times`.
pub fn initial_velocity_check(s0: &LagrangianState, times: &[f64]) -> Result<Vec<(f64, f64)>> {
    times
        .iter()
        .map(|&t| {
            if !(t > 0.0) {
                return Err(Error::InvalidArgument(format!("times must be positive, got {t}")));
            }
            let st = step(s0, t)?;
            let quotient = st.x.sub(&s0.x).scale(1.0 / t);
            Ok((t, lp_distance(&quotient, &s0.v, 2.0)?))
        })
        .collect()
}

/// Monotone assignment of the atoms at time `s` to the atoms at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportMap {
    pub s: f64,
    pub t: f64,
    /// `(m, x, v)` at time `s`.
    pub source: Vec<(f64, f64, f64)>,
    /// `(m, y, v)` at time `t`.
    pub target: Vec<(f64, f64, f64)>,
    /// Target index of every source atom; nondecreasing and onto.
    pub assignment: Vec<usize>,
}

impl TransportMap {
    /// Weights of the disintegration at each target, unnormalized: the source
    /// masses, grouped by target.
    pub fn weights(&self, target: usize) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.assignment
            .iter()
            .zip(&self.source)
            .filter(move |(&j, _)| j == target)
            .map(|(_, &a)| a)
    }

    /// `Σ weights − target mass`, worst case over targets.
    pub fn weight_defect(&self) -> f64 {
        (0..self.target.len())
            .map(|j| (self.weights(j).map(|a| a.0).sum::<f64>() - self.target[j].0).abs())
            .fold(0.0, f64::max)
    }

    /// Average of the source velocities against the disintegration at `j`.
    pub fn mean_velocity(&self, j: usize) -> f64 {
        let (m, p) = self.weights(j).fold((0.0, 0.0), |(m, p), a| (m + a.0, p + a.0 * a.2));
        p / m
    }

    /// Average of the source positions against the disintegration at `j`.
    pub fn mean_position(&self, j: usize) -> f64 {
        let (m, p) = self.weights(j).fold((0.0, 0.0), |(m, p), a| (m + a.0, p + a.0 * a.1));
        p / m
    }

    /// Largest deviation in the two velocity identities: target velocity
    /// versus the averaged source velocity, and versus the displacement of
    /// the averaged source position divided by `t − s` (skipped if `t = s`).
    pub fn identity_residuals(&self) -> (f64, f64) {
        let mut by_velocity = 0.0f64;
        let mut by_position = 0.0f64;
        for (j, &(_, y, v)) in self.target.iter().enumerate() {
            by_velocity = by_velocity.max((v - self.mean_velocity(j)).abs());
            if self.t > self.s {
                let implied = (y - self.mean_position(j)) / (self.t - self.s);
                by_position = by_position.max((v - implied).abs());
            }
        }
        (by_velocity, by_position)
    }
}

/// Builds the map between two states of one trajectory.
pub fn transport_map(s: &LagrangianState, t: &LagrangianState) -> Result<TransportMap> {
    if s.origin != t.origin {
        return Err(Error::NotOnTrajectory(format!("origins differ: {:?} vs {:?}", s.origin, t.origin)));
    }
    if s.t > t.t {
        return Err(Error::NotOnTrajectory(format!("source time {} is after target time {}", s.t, t.t)));
    }
    let source_cells: Vec<(f64, f64)> = s.x.cells().map(|(a, b, _)| (a, b)).collect();
    let target_cells: Vec<(f64, f64)> = t.x.cells().map(|(a, b, _)| (a, b)).collect();
    let mut assignment = Vec::with_capacity(source_cells.len());
    let mut j = 0;
    for &(a, b) in &source_cells {
        while j < target_cells.len() && target_cells[j].1 <= a + BREAKPOINT_TOL {
            j += 1;
        }
        match target_cells.get(j) {
            Some(&(c, d)) if c <= a + BREAKPOINT_TOL && b <= d + BREAKPOINT_TOL => assignment.push(j),
            _ => {
                return Err(Error::NotOnTrajectory(format!("source cell [{a}, {b}) is split at time {}", t.t)));
            }
        }
    }
    let source = s.atoms();
    let target = t.atoms();
    if assignment.last() != Some(&(target.len() - 1)) {
        return Err(Error::NotOnTrajectory("assignment is not onto".into()));
    }
    Ok(TransportMap { s: s.t, t: t.t, source, target, assignment })
}

/// `∫ψ(V) dw = Σ mᵢ ψ(vᵢ)`.
pub fn energy(s: &LagrangianState, psi: &Cost) -> f64 {
    quantile_cost(&s.v, &StepFn::constant(0.0), psi)
}

/// Largest `v(x₂) − v(x₁) − (x₂ − x₁)/t` over atom pairs `x₁ < x₂`.
pub fn oleinik_violation(s: &LagrangianState) -> Result<f64> {
    if !(s.t > 0.0) {
        return Err(Error::InvalidArgument("the one-sided Lipschitz bound needs t > 0".into()));
    }
    // v_j − v_i − (x_j − x_i)/t = g_j − g_i with g = v − x/t
    let mut worst = f64::NEG_INFINITY;
    let mut min_g = f64::INFINITY;
    for (_, x, v) in s.atoms() {
        let g = v - x / s.t;
        worst = worst.max(g - min_g);
        min_g = min_g.min(g);
    }
    Ok(worst.max(0.0))
}

/// One-sided Lipschitz (entropy) condition up to `tol`, relative to the
/// magnitude of `x/t` and `v`.
pub fn oleinik_check(s: &LagrangianState, tol: f64) -> Result<bool> {
    let scale = s.atoms().iter().fold(1.0f64, |m, a| m.max(a.1.abs() / s.t).max(a.2.abs()));
    Ok(oleinik_violation(s)? <= tol * scale)
}

/// Every plateau of `a.X` lies inside a plateau of `b.X`.
pub fn plateaus_nested(a: &LagrangianState, b: &LagrangianState) -> bool {
    let bb = b.x.breakpoints();
    let ab = a.x.breakpoints();
    bb.iter().all(|&w| {
        let k = ab.partition_point(|&x| x < w - BREAKPOINT_TOL);
        k < ab.len() && (ab[k] - w).abs() <= BREAKPOINT_TOL
    })
}

/// Snapshot CSV `t,w_left,X,V`, one row per cell, preceded by a
/// `# scenario=<id>` line.
pub fn write_snapshots_csv<W: Write>(states: &[LagrangianState], scenario_id: &str, mut writer: W) -> Result<()> {
    writeln!(writer, "# scenario={scenario_id}")?;
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["t", "w_left", "X", "V"])?;
    for s in states {
        for (a, _, x, v) in refine_common(&s.x, &s.v).cells() {
            w.write_record([format!("{:?}", s.t), format!("{a:?}"), format!("{x:?}"), format!("{v:?}")])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn head_on() -> LagrangianState {
        LagrangianState::from_state(&MassVelocityState::new(&[(0.5, 0.0, 1.0), (0.5, 1.0, -1.0)]).unwrap())
    }

    #[test]
    fn step_examples() {
        let s0 = head_on();
        assert_eq!(step(&s0, 0.0).unwrap(), s0);
        let s1 = step(&s0, 1.0).unwrap();
        assert_eq!(s1.x(), &StepFn::constant(0.5));
        assert_eq!(s1.v(), &StepFn::constant(0.0));
        let early = step(&s0, 0.25).unwrap();
        assert_eq!(early.x().values(), &[0.25, 0.75]);
        assert!(step(&s1, 2.0).is_err());
    }

    #[test]
    fn invariant_rejects_split_plateau() {
        let x = StepFn::constant(0.0);
        let v = StepFn::uniform(vec![1.0, -1.0]).unwrap();
        assert!(matches!(LagrangianState::new(0.0, x, v), Err(Error::DomainMismatch(_))));
    }

    #[test]
    fn step_from_identities() {
        let s0 = head_on();
        let s1 = step(&s0, 0.3).unwrap();
        assert_eq!(step_from(&s1, 0.3).unwrap(), s1);
        let two = step_from(&s1, 2.0).unwrap();
        assert_eq!(two, step(&s0, 2.0).unwrap());
        assert!(plateaus_nested(&s1, &two));
        assert!(!plateaus_nested(&two, &s1));
    }

    #[test]
    fn residuals() {
        let s0 = head_on();
        assert!(residual_li(&s0, 0.1, 0.01).unwrap() < 1e-12);
        assert!(residual_li(&s0, 1.0, 0.01).unwrap() < 1e-12);
        assert!(residual_liii(&s0, 0.2).unwrap() < 1e-15);
        assert!(residual_liii(&s0, 1.0).unwrap() < 1e-15);
        assert!(residual_liii(&s0, 0.0).is_err());
        let table = initial_velocity_check(&s0, &[0.4, 0.2, 0.1]).unwrap();
        assert!(table.iter().all(|r| r.1 < 1e-15));
    }

    #[test]
    fn transport_map_head_on() {
        let s0 = head_on().with_origin("pair");
        let s1 = step(&s0, 1.0).unwrap();
        let map = transport_map(&s0, &s1).unwrap();
        assert_eq!(map.assignment, vec![0, 0]);
        assert_eq!(map.weight_defect(), 0.0);
        assert_eq!(map.identity_residuals(), (0.0, 0.0));
        let same = transport_map(&s0, &s0).unwrap();
        assert_eq!(same.assignment, vec![0, 1]);
        assert!(transport_map(&s1, &s0).is_err());
        assert!(transport_map(&head_on().with_origin("other"), &s1).is_err());
    }

    #[test]
    fn energy_and_entropy() {
        let s0 = head_on();
        let sq = Cost::power(2.0).unwrap();
        assert_eq!(energy(&step(&s0, 0.4).unwrap(), &sq), 1.0);
        assert_eq!(energy(&step(&s0, 0.5).unwrap(), &sq), 0.0);
        assert!(oleinik_check(&step(&s0, 1.0).unwrap(), 1e-9).unwrap());
        assert!(oleinik_check(&step(&s0, 0.1).unwrap(), 1e-9).unwrap());
        assert!(oleinik_violation(&s0).is_err());
    }

    #[test]
    fn snapshot_csv_header() {
        let mut buf = Vec::new();
        write_snapshots_csv(&[head_on()], "pair", &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "# scenario=pair\nt,w_left,X,V\n0.0,0.0,0.0,1.0\n0.0,0.5,1.0,-1.0\n");
    }
}
