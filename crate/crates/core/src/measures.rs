//! Discrete probability measures on the line, with and without a velocity
//! field, and the transport distances between them.
//!
//! Everything goes through quantile functions: `W_p(ρ¹, ρ²)` is the
//! `L^p(0,1)` distance of the quantiles, and the velocity part `U_p` of the
//! phase-space distance compares `v∘X_ρ` on the common refinement.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::step_fn::{lp_distance, refine_common, PwLinearFn, StepFn};

/// Tolerance on the total mass of a measure built in memory.
pub const MASS_TOL: f64 = 1e-12;
/// Tolerance on the total mass of a measure read from a file.
pub const FILE_MASS_TOL: f64 = 1e-9;

fn validate_atoms(masses: &[f64], positions: &[f64]) -> Result<()> {
    for (i, (&m, &x)) in masses.iter().zip(positions).enumerate() {
        if !(m > 0.0) || !m.is_finite() {
            return Err(Error::InvalidMeasure(format!("atom {i} has mass {m}")));
        }
        if !x.is_finite() {
            return Err(Error::NonFinite { index: i, value: x });
        }
    }
    Ok(())
}

fn check_total(masses: &[f64], tol: f64) -> Result<()> {
    let total: f64 = masses.iter().sum();
    if (total - 1.0).abs() > tol {
        return Err(Error::InvalidMeasure(format!("masses sum to {total}, expected 1")));
    }
    Ok(())
}

/// Finitely many atoms `(mass, position)` with strictly increasing positions.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    masses: Vec<f64>,
    positions: Vec<f64>,
}

impl DiscreteMeasure {
    /// Sorts by position and merges coincident atoms. Masses must sum to 1.
    pub fn new(atoms: &[(f64, f64)]) -> Result<Self> {
        let (m, x): (Vec<f64>, Vec<f64>) = atoms.iter().copied().unzip();
        validate_atoms(&m, &x)?;
        check_total(&m, MASS_TOL)?;
        if m.is_empty() {
            return Err(Error::InvalidMeasure("no atoms".into()));
        }
        let state = MassVelocityState::build(m, x, None);
        Ok(Self { masses: state.masses, positions: state.positions })
    }

    /// Like [`DiscreteMeasure::new`] but rescales the masses to sum to 1.
    pub fn normalized(atoms: &[(f64, f64)]) -> Result<Self> {
        let total: f64 = atoms.iter().map(|a| a.0).sum();
        let scaled: Vec<(f64, f64)> = atoms.iter().map(|&(m, x)| (m / total, x)).collect();
        Self::new(&scaled)
    }

    pub fn dirac(x: f64) -> Self {
        Self { masses: vec![1.0], positions: vec![x] }
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    /// `∫ ζ dρ`.
    pub fn integrate(&self, zeta: impl Fn(f64) -> f64) -> f64 {
        self.masses.iter().zip(&self.positions).map(|(&m, &x)| m * zeta(x)).sum()
    }

    /// Cumulative distribution `M(x) = ρ((−∞, x])`.
    pub fn cdf(&self, x: f64) -> f64 {
        let k = self.positions.partition_point(|&p| p <= x);
        if k == self.len() {
            1.0
        } else {
            self.masses[..k].iter().sum()
        }
    }
}

/// Monotone rearrangement `X_ρ`, the pseudo-inverse of the CDF.
pub fn quantile(rho: &DiscreteMeasure) -> StepFn {
    StepFn::from_widths(&rho.masses, &rho.positions).expect("validated measure")
}

/// `X_#λ`: one atom per distinct value, carrying the total width.
pub fn measure_of(x: &StepFn) -> Result<DiscreteMeasure> {
    if let Some(index) = x.first_decrease() {
        return Err(Error::NotMonotone { index, left: x.values()[index], right: x.values()[index + 1] });
    }
    Ok(DiscreteMeasure { masses: x.widths(), positions: x.values().to_vec() })
}

/// `W_p(ρ¹, ρ²) = ‖X_{ρ¹} − X_{ρ²}‖_{L^p(0,1)}`.
pub fn wasserstein(r1: &DiscreteMeasure, r2: &DiscreteMeasure, p: f64) -> Result<f64> {
    lp_distance(&quantile(r1), &quantile(r2), p)
}

/// Convex, even cost `ψ` for [`transport_cost`].
#[derive(Debug, Clone, PartialEq)]
pub enum Cost {
    /// `ψ(r) = |r|^p`, `p ≥ 1`.
    Power(f64),
    /// A convex, even piecewise-linear function on all of ℝ.
    PiecewiseLinear(PwLinearFn),
}

impl Cost {
    pub fn power(p: f64) -> Result<Self> {
        if !(p >= 1.0) || !p.is_finite() {
            return Err(Error::InvalidCost(format!("|r|^p needs finite p >= 1, got {p}")));
        }
        Ok(Cost::Power(p))
    }

    /// `ψ ≡ 0`.
    pub fn zero() -> Self {
        Cost::PiecewiseLinear(PwLinearFn::with_tails(&[(0.0, 0.0)], Some(0.0), Some(0.0)).expect("valid"))
    }

    /// Validates convexity, evenness, and that `ψ` is defined on all of ℝ.
    pub fn piecewise_linear(psi: PwLinearFn) -> Result<Self> {
        if psi.domain() != (f64::NEG_INFINITY, f64::INFINITY) {
            return Err(Error::InvalidCost("piecewise-linear cost must be defined on all of R".into()));
        }
        if !psi.is_convex(1e-12) {
            return Err(Error::InvalidCost("cost is not convex".into()));
        }
        let probe = psi.knot_xs().iter().map(|x| x.abs()).fold(1.0f64, f64::max) * 2.0;
        let mut xs: Vec<f64> = psi.knot_xs().to_vec();
        xs.push(probe);
        for &x in &xs {
            let (a, b) = (psi.eval(x).expect("total"), psi.eval(-x).expect("total"));
            if (a - b).abs() > 1e-12 * (1.0 + a.abs()) {
                return Err(Error::InvalidCost(format!("cost is not even: psi({x}) = {a}, psi({}) = {b}", -x)));
            }
        }
        Ok(Cost::PiecewiseLinear(psi))
    }

    pub fn eval(&self, r: f64) -> f64 {
        match self {
            Cost::Power(p) if *p == 1.0 => r.abs(),
            Cost::Power(p) if *p == 2.0 => r * r,
            Cost::Power(p) if *p == 4.0 => (r * r) * (r * r),
            Cost::Power(p) => r.abs().powf(*p),
            Cost::PiecewiseLinear(f) => f.eval(r).expect("total"),
        }
    }
}

/// Optimal transport cost `∫₀¹ ψ(X₁ − X₂) dw` under the monotone coupling.
pub fn transport_cost(r1: &DiscreteMeasure, r2: &DiscreteMeasure, psi: &Cost) -> f64 {
    quantile_cost(&quantile(r1), &quantile(r2), psi)
}

/// `∫₀¹ ψ(a − b) dw` for step functions.
pub fn quantile_cost(a: &StepFn, b: &StepFn, psi: &Cost) -> f64 {
    refine_common(a, b).cells().map(|(l, h, x, y)| (h - l) * psi.eval(x - y)).sum()
}

/// Atoms `(mass, position, velocity)` with strictly increasing positions:
/// a discrete point of the phase space of mass/momentum pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct MassVelocityState {
    masses: Vec<f64>,
    positions: Vec<f64>,
    velocities: Vec<f64>,
}

/// One row of the `m,x,v` file format.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomRecord {
    pub m: f64,
    pub x: f64,
    pub v: f64,
}

impl MassVelocityState {
    /// Sorts by position and merges coincident atoms with mass-weighted
    /// velocity. Masses must sum to 1 within [`MASS_TOL`].
    pub fn new(atoms: &[(f64, f64, f64)]) -> Result<Self> {
        Self::with_tolerance(atoms, MASS_TOL, false)
    }

    /// Rescales the masses to sum to 1.
    pub fn normalized(atoms: &[(f64, f64, f64)]) -> Result<Self> {
        Self::with_tolerance(atoms, f64::INFINITY, true)
    }

    fn with_tolerance(atoms: &[(f64, f64, f64)], tol: f64, renormalize: bool) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidMeasure("no atoms".into()));
        }
        let mut m: Vec<f64> = atoms.iter().map(|a| a.0).collect();
        let x: Vec<f64> = atoms.iter().map(|a| a.1).collect();
        let v: Vec<f64> = atoms.iter().map(|a| a.2).collect();
        validate_atoms(&m, &x)?;
        if let Some(index) = v.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index, value: v[index] });
        }
        check_total(&m, tol)?;
        if renormalize {
            let total: f64 = m.iter().sum();
            m.iter_mut().for_each(|mi| *mi /= total);
        }
        Ok(Self::build(m, x, Some(v)))
    }

    /// Sort, merge coincident positions; velocities default to 0.
    fn build(masses: Vec<f64>, positions: Vec<f64>, velocities: Option<Vec<f64>>) -> Self {
        let n = masses.len();
        let velocities = velocities.unwrap_or_else(|| vec![0.0; n]);
        let mut order: Vec<usize> = (0..n).collect();
        if positions.windows(2).any(|w| !(w[0] < w[1])) {
            order.sort_by(|&a, &b| positions[a].total_cmp(&positions[b]));
        }
        let mut out = Self {
            masses: Vec::with_capacity(n),
            positions: Vec::with_capacity(n),
            velocities: Vec::with_capacity(n),
        };
        let mut momentum: Vec<f64> = Vec::with_capacity(n);
        for i in order {
            let (m, x, v) = (masses[i], positions[i], velocities[i]);
            if out.positions.last() == Some(&x) {
                let k = out.masses.len() - 1;
                out.masses[k] += m;
                momentum[k] += m * v;
            } else {
                out.masses.push(m);
                out.positions.push(x);
                momentum.push(m * v);
            }
        }
        out.velocities = momentum.iter().zip(&out.masses).map(|(p, m)| p / m).collect();
        out
    }

    /// From quantile coordinates: `X` nondecreasing, `V` constant on the
    /// plateaus of `X`. Cells of `V` that split a plateau of `X` are averaged.
    pub fn from_lagrangian(x: &StepFn, v: &StepFn) -> Result<Self> {
        if let Some(index) = x.first_decrease() {
            return Err(Error::NotMonotone { index, left: x.values()[index], right: x.values()[index + 1] });
        }
        let r = refine_common(x, v);
        let mut atoms = Vec::with_capacity(r.left.len());
        for (a, b, xi, vi) in r.cells() {
            atoms.push((b - a, xi, vi));
        }
        let (m, p, vel): (Vec<f64>, Vec<f64>, Vec<f64>) = (
            atoms.iter().map(|a| a.0).collect(),
            atoms.iter().map(|a| a.1).collect(),
            atoms.iter().map(|a| a.2).collect(),
        );
        Ok(Self::build(m, p, Some(vel)))
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn velocities(&self) -> &[f64] {
        &self.velocities
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn atoms(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.masses
            .iter()
            .zip(&self.positions)
            .zip(&self.velocities)
            .map(|((&m, &x), &v)| (m, x, v))
    }

    pub fn density(&self) -> DiscreteMeasure {
        DiscreteMeasure { masses: self.masses.clone(), positions: self.positions.clone() }
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn momentum(&self) -> f64 {
        self.atoms().map(|(m, _, v)| m * v).sum()
    }

    pub fn kinetic_energy(&self) -> f64 {
        0.5 * self.atoms().map(|(m, _, v)| m * v * v).sum::<f64>()
    }

    /// `(X, V)` with `V = v∘X`, both on the partition given by the masses.
    pub fn lagrangian(&self) -> (StepFn, StepFn) {
        let x = quantile(&self.density());
        let raw_v = StepFn::from_widths(&self.masses, &self.velocities).expect("validated state");
        if x.cell_count() == self.len() {
            return (x, raw_v);
        }
        // positions closer than the merge tolerance were fused in X
        let v = crate::cone::proj_h(&crate::cone::omega(&x), &raw_v);
        (x, v)
    }

    /// Reads the `m,x,v` CSV format (header required).
    pub fn read_csv<R: Read>(reader: R, renormalize: bool) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let expected = ["m", "x", "v"];
        if headers.len() != 3 || headers.iter().zip(expected).any(|(h, e)| h != e) {
            return Err(Error::Parse(format!("expected header `m,x,v`, got `{}`", headers.iter().collect::<Vec<_>>().join(","))));
        }
        let mut atoms = Vec::new();
        for rec in rdr.deserialize() {
            let r: AtomRecord = rec?;
            atoms.push((r.m, r.x, r.v));
        }
        if renormalize {
            let total: f64 = atoms.iter().map(|a| a.0).sum();
            if !(total > 0.0) {
                return Err(Error::InvalidMeasure(format!("masses sum to {total}")));
            }
            Self::normalized(&atoms)
        } else {
            Self::with_tolerance(&atoms, FILE_MASS_TOL, true)
        }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["m", "x", "v"])?;
        for (m, x, v) in self.atoms() {
            w.write_record([format!("{m:?}"), format!("{x:?}"), format!("{v:?}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Velocity part `U_p` of the phase-space distance:
/// `(∫₀¹ |v¹(X₁) − v²(X₂)|^p dw)^{1/p}`.
pub fn u_dist(m1: &MassVelocityState, m2: &MassVelocityState, p: f64) -> Result<f64> {
    if !(p >= 1.0) || p.is_infinite() {
        return Err(Error::InvalidExponent(p));
    }
    let (_, v1) = m1.lagrangian();
    let (_, v2) = m2.lagrangian();
    lp_distance(&v1, &v2, p)
}

/// `D_p = (W_p^p + U_p^p)^{1/p}`.
pub fn d_dist(m1: &MassVelocityState, m2: &MassVelocityState, p: f64) -> Result<f64> {
    let w = wasserstein(&m1.density(), &m2.density(), p)?;
    let u = u_dist(m1, m2, p)?;
    Ok((w.powf(p) + u.powf(p)).powf(1.0 / p))
}

/// `D_p(μ, (δ₀, 0))`.
pub fn pseudo_norm(m: &MassVelocityState, p: f64) -> Result<f64> {
    let origin = MassVelocityState::new(&[(1.0, 0.0, 0.0)])?;
    d_dist(m, &origin, p)
}

/// How the velocity of a discretized state is prescribed.
pub enum VelocityField<'a> {
    /// `v(x)`, sampled at the atom position.
    OfPosition(&'a dyn Fn(f64) -> f64),
    /// `V(w)` in quantile coordinates, sampled at the atom's midpoint quantile.
    OfQuantile(&'a dyn Fn(f64) -> f64),
}

/// `N` equal-mass atoms at the midpoint quantiles `X((i − ½)/N)`.
pub fn discretize(quantile_fn: &dyn Fn(f64) -> f64, velocity: VelocityField<'_>, n: usize) -> Result<MassVelocityState> {
    if n == 0 {
        return Err(Error::InvalidArgument("discretize needs N >= 1".into()));
    }
    let mass = 1.0 / n as f64;
    let mut atoms = Vec::with_capacity(n);
    for i in 0..n {
        let w = (i as f64 + 0.5) / n as f64;
        let x = quantile_fn(w);
        let v = match velocity {
            VelocityField::OfPosition(f) => f(x),
            VelocityField::OfQuantile(f) => f(w),
        };
        atoms.push((mass, x, v));
    }
    MassVelocityState::normalized(&atoms)
}

/// [`discretize`] for a state given in quantile coordinates.
pub fn discretize_step(x: &StepFn, v: &StepFn, n: usize) -> Result<MassVelocityState> {
    discretize(&|w| x.eval(w), VelocityField::OfQuantile(&|w| v.eval(w)), n)
}

/// Bounded-Lipschitz test functions used as a finite surrogate for weak
/// convergence of the momentum `ρv`.
pub fn momentum_dictionary() -> [fn(f64) -> f64; 8] {
    [
        |x| x.tanh(),
        |x| 1.0 / (1.0 + x * x),
        |x| x.cos(),
        |x| x.sin(),
        |x| (1.0 - x.abs()).max(0.0),
        |x| (-x.abs()).exp(),
        |x| (2.0 * (x - 1.0)).tanh(),
        |x| (2.0 * (x + 1.0)).tanh(),
    ]
}

/// Gaps measured by the weak-convergence surrogate for `μₙ → μ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceGaps {
    pub wasserstein: f64,
    /// `max_k |∫ζ_k vₙ dρₙ − ∫ζ_k v dρ|` over the dictionary.
    pub momentum: f64,
    /// `|∫|vₙ|^p dρₙ − ∫|v|^p dρ|`.
    pub velocity_moment: f64,
}

pub fn convergence_gaps(mu_n: &MassVelocityState, mu: &MassVelocityState, p: f64) -> Result<ConvergenceGaps> {
    let wasserstein = wasserstein(&mu_n.density(), &mu.density(), p)?;
    let pair = |s: &MassVelocityState, z: fn(f64) -> f64| s.atoms().map(|(m, x, v)| m * v * z(x)).sum::<f64>();
    let momentum = momentum_dictionary()
        .iter()
        .map(|&z| (pair(mu_n, z) - pair(mu, z)).abs())
        .fold(0.0, f64::max);
    let moment = |s: &MassVelocityState| s.atoms().map(|(m, _, v)| m * v.abs().powf(p)).sum::<f64>();
    Ok(ConvergenceGaps { wasserstein, momentum, velocity_moment: (moment(mu_n) - moment(mu)).abs() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair() -> DiscreteMeasure {
        DiscreteMeasure::new(&[(0.5, 0.0), (0.5, 1.0)]).unwrap()
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(quantile(&DiscreteMeasure::dirac(0.0)), StepFn::constant(0.0));
        let q = quantile(&pair());
        assert_eq!(q.breakpoints(), &[0.0, 0.5, 1.0]);
        assert_eq!(q.values(), &[0.0, 1.0]);
        assert_eq!(measure_of(&q).unwrap(), pair());
    }

    #[test]
    fn measure_of_merges_and_rejects() {
        let x = StepFn::new(vec![0.0, 0.25, 0.5, 1.0], vec![1.0, 1.0, 2.0]).unwrap();
        let rho = measure_of(&x).unwrap();
        assert_eq!(rho.masses(), &[0.5, 0.5]);
        assert_eq!(rho.positions(), &[1.0, 2.0]);
        assert!(measure_of(&StepFn::uniform(vec![1.0, 0.0]).unwrap()).is_err());
    }

    #[test]
    fn wasserstein_examples() {
        let d0 = DiscreteMeasure::dirac(0.0);
        let d1 = DiscreteMeasure::dirac(1.0);
        for p in [1.0, 2.0, 3.5, f64::INFINITY] {
            assert_eq!(wasserstein(&d0, &d1, p).unwrap(), 1.0);
            assert_eq!(wasserstein(&pair(), &pair(), p).unwrap(), 0.0);
        }
        assert_eq!(wasserstein(&pair(), &DiscreteMeasure::dirac(0.5), 2.0).unwrap(), 0.5);
    }

    #[test]
    fn transport_cost_examples() {
        let half = DiscreteMeasure::dirac(0.5);
        let w2 = wasserstein(&pair(), &half, 2.0).unwrap();
        assert!((transport_cost(&pair(), &half, &Cost::power(2.0).unwrap()) - w2 * w2).abs() < 1e-15);
        assert_eq!(transport_cost(&pair(), &half, &Cost::zero()), 0.0);
        assert_eq!(transport_cost(&pair(), &half, &Cost::power(4.0).unwrap()), 1.0 / 16.0);
    }

    #[test]
    fn nonconvex_or_odd_costs_rejected() {
        let concave = PwLinearFn::with_tails(&[(-1.0, 1.0), (0.0, 0.0), (1.0, 1.0)], Some(0.0), Some(0.0)).unwrap();
        assert!(Cost::piecewise_linear(concave).is_err());
        let odd = PwLinearFn::with_tails(&[(0.0, 0.0)], Some(0.0), Some(1.0)).unwrap();
        assert!(Cost::piecewise_linear(odd).is_err());
        let abs = PwLinearFn::with_tails(&[(0.0, 0.0)], Some(-1.0), Some(1.0)).unwrap();
        assert!(Cost::piecewise_linear(abs).is_ok());
        assert!(Cost::power(0.5).is_err());
    }

    #[test]
    fn merge_on_construction() {
        let s = MassVelocityState::new(&[(0.25, 1.0, 2.0), (0.5, 0.0, 0.0), (0.25, 1.0, 0.0)]).unwrap();
        assert_eq!(s.positions(), &[0.0, 1.0]);
        assert_eq!(s.masses(), &[0.5, 0.5]);
        assert_eq!(s.velocities(), &[0.0, 1.0]);
        assert!(MassVelocityState::new(&[(0.5, 0.0, 0.0)]).is_err());
        assert!(MassVelocityState::new(&[(1.0, 0.0, f64::NAN)]).is_err());
    }

    #[test]
    fn u_dist_examples() {
        let a = MassVelocityState::new(&[(0.5, 0.0, 1.0), (0.5, 1.0, -1.0)]).unwrap();
        assert_eq!(u_dist(&a, &a, 2.0).unwrap(), 0.0);
        let b = MassVelocityState::new(&[(0.5, 0.0, 1.5), (0.5, 1.0, -0.5)]).unwrap();
        assert!((u_dist(&a, &b, 2.0).unwrap() - 0.5).abs() < 1e-15);
        // two atoms vs one atom at rest: ∫|v|² = ½·1 + ½·1
        let c = MassVelocityState::new(&[(1.0, 0.5, 0.0)]).unwrap();
        assert!((u_dist(&a, &c, 2.0).unwrap() - 1.0).abs() < 1e-15);
        let d = d_dist(&a, &c, 2.0).unwrap();
        assert!((d - (0.25f64 + 1.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn discretize_uniform() {
        let s = discretize(&|w| w, VelocityField::OfPosition(&|x| -x), 2).unwrap();
        assert_eq!(s.positions(), &[0.25, 0.75]);
        assert_eq!(s.masses(), &[0.5, 0.5]);
        assert_eq!(s.velocities(), &[-0.25, -0.75]);
    }

    #[test]
    fn csv_round_trip_and_mass_check() {
        let s = MassVelocityState::new(&[(0.3, -1.0, 0.5), (0.7, 2.0, -0.25)]).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert_eq!(MassVelocityState::read_csv(&buf[..], false).unwrap(), s);
        let short = "m,x,v\n0.5,0,0\n0.499999,1,0\n";
        assert!(MassVelocityState::read_csv(short.as_bytes(), false).is_err());
        let fixed = MassVelocityState::read_csv(short.as_bytes(), true).unwrap();
        assert!((fixed.total_mass() - 1.0).abs() < 1e-15);
        assert!(MassVelocityState::read_csv("a,b,c\n1,0,0\n".as_bytes(), false).is_err());
    }
}
