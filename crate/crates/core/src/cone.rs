//! The cone `K` of nondecreasing functions in `L²(0,1)`.
//!
//! [`proj_k`] is the metric projection onto `K`: the right derivative of the
//! convex envelope of the primitive. The remaining operations describe the
//! geometry around a point `g ∈ K`: its plateaus `Ω_g`, the subspace `H_g` of
//! functions constant on those plateaus, the polar cone, and the normal cone
//! `∂I_K(g)`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::step_fn::{lower_convex_envelope, primitive, PwLinearFn, StepFn};

/// Disjoint, ordered open subintervals of `(0,1)` on which a function is
/// constant.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PlateauSet {
    intervals: Vec<(f64, f64)>,
}

impl PlateauSet {
    pub fn new(mut intervals: Vec<(f64, f64)>) -> Result<Self> {
        intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (i, &(a, b)) in intervals.iter().enumerate() {
            if !(a < b) || a < 0.0 || b > 1.0 {
                return Err(Error::InvalidArgument(format!("bad plateau ({a}, {b})")));
            }
            if i > 0 && intervals[i - 1].1 > a {
                return Err(Error::InvalidArgument(format!("plateaus overlap at {a}")));
            }
        }
        Ok(Self { intervals })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Every interval of `self` lies inside some interval of `other`.
    pub fn is_subset_of(&self, other: &PlateauSet) -> bool {
        let mut j = 0;
        for &(a, b) in &self.intervals {
            while j < other.intervals.len() && other.intervals[j].1 <= a {
                j += 1;
            }
            match other.intervals.get(j) {
                Some(&(c, d)) if c <= a && b <= d => {}
                _ => return false,
            }
        }
        true
    }

    /// Endpoints of all intervals, i.e. the points of `[0,1]` outside `Ω`
    /// that bound a plateau.
    pub fn endpoints(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.intervals.len());
        for &(a, b) in &self.intervals {
            if out.last() != Some(&a) {
                out.push(a);
            }
            out.push(b);
        }
        out
    }
}

/// `Proj_K(f)`: the nondecreasing function closest to `f` in `L²(0,1)`.
pub fn proj_k(f: &StepFn) -> StepFn {
    let env = lower_convex_envelope(&primitive(f)).expect("primitive has domain [0,1]");
    env.right_derivative().expect("envelope keeps domain [0,1]")
}

/// `Ω_f`: maximal open intervals where `f` is constant. In canonical form
/// every cell is a maximal plateau.
pub fn omega(f: &StepFn) -> PlateauSet {
    PlateauSet { intervals: f.cells().map(|(a, b, _)| (a, b)).collect() }
}

/// Orthogonal projection onto `H_Ω`: averages `h` over each plateau and
/// leaves it unchanged elsewhere.
pub fn proj_h(plateaus: &PlateauSet, h: &StepFn) -> StepFn {
    if plateaus.is_empty() {
        return h.clone();
    }
    let hb = h.breakpoints();
    let hv = h.values();
    let mut bps = Vec::with_capacity(hb.len() + 2 * plateaus.len());
    let mut vals = Vec::with_capacity(hb.len() + 2 * plateaus.len());
    bps.push(0.0);
    let mut cursor = 0.0; // everything left of cursor is emitted
    let mut k = 0; // current cell of h
    for &(a, b) in plateaus.intervals() {
        // copy h on [cursor, a)
        while cursor < a {
            while hb[k + 1] <= cursor {
                k += 1;
            }
            let end = hb[k + 1].min(a);
            vals.push(hv[k]);
            bps.push(end);
            cursor = end;
        }
        // average over (a, b)
        let mut acc = 0.0;
        while hb[k + 1] <= a {
            k += 1;
        }
        let mut j = k;
        loop {
            let lo = hb[j].max(a);
            let hi = hb[j + 1].min(b);
            if hi > lo {
                acc += (hi - lo) * hv[j];
            }
            if hb[j + 1] >= b {
                break;
            }
            j += 1;
        }
        k = j;
        vals.push(acc / (b - a));
        bps.push(b);
        cursor = b;
    }
    while cursor < 1.0 {
        while hb[k + 1] <= cursor {
            k += 1;
        }
        vals.push(hv[k]);
        bps.push(hb[k + 1]);
        cursor = hb[k + 1];
    }
    StepFn::canonical(bps, vals)
}

/// Membership in the polar cone `K°`: the primitive is nonnegative and
/// vanishes at both endpoints.
pub fn in_polar_cone(f: &StepFn, tol: f64) -> bool {
    let big_f = primitive(f);
    let ys = big_f.knot_ys();
    ys.iter().all(|&y| y >= -tol) && ys[0].abs() <= tol && ys[ys.len() - 1].abs() <= tol
}

/// Default tolerance for [`in_subdifferential`]: `1e-9·(1 + ‖ξ‖_∞)`.
pub fn subdifferential_tol(xi: &StepFn) -> f64 {
    1e-9 * (1.0 + xi.sup_norm())
}

/// How far `ξ` is from `∂I_K(g)`: the larger of the negative part of its
/// primitive `Ξ` and `|Ξ|` at the endpoints and breakpoints of `g`.
pub fn subdifferential_violation(xi: &StepFn, g: &StepFn) -> Result<f64> {
    if let Some(index) = g.first_decrease() {
        return Err(Error::NotMonotone { index, left: g.values()[index], right: g.values()[index + 1] });
    }
    let big_xi = primitive(xi);
    let negative = big_xi.knot_ys().iter().fold(0.0f64, |m, &y| m.max(-y));
    let off_plateau = g.breakpoints().iter().fold(0.0f64, |m, &w| m.max(eval_on_unit(&big_xi, w).abs()));
    Ok(negative.max(off_plateau))
}

fn eval_on_unit(f: &PwLinearFn, w: f64) -> f64 {
    f.eval(w).expect("primitive is defined on [0,1]")
}

/// `ξ ∈ ∂I_K(g)` iff `Ξ ≥ 0` on `[0,1]` and `Ξ = 0` outside `Ω_g`.
pub fn in_subdifferential(xi: &StepFn, g: &StepFn, tol: f64) -> Result<bool> {
    Ok(subdifferential_violation(xi, g)? <= tol)
}

/// Minimal-norm element `Proj_{H_g}(h) − h` of `∂I_K(g)` for nondecreasing `h`.
pub fn minimal_selection(g: &StepFn, h: &StepFn) -> StepFn {
    proj_h(&omega(g), h).sub(h)
}

/// Random element of `∂I_K(g)`: a sum of `bumps` nonnegative multiples of
/// tent derivatives `𝟙_{[a,m)} − 𝟙_{[m,b)}`, each inside one plateau of `g`.
pub fn sample_normal_cone<R: Rng + ?Sized>(g: &StepFn, bumps: usize, scale: f64, rng: &mut R) -> StepFn {
    let plateaus = omega(g);
    let mut xi = StepFn::constant(0.0);
    for _ in 0..bumps {
        let (lo, hi) = plateaus.intervals()[rng.gen_range(0..plateaus.len())];
        let u: f64 = rng.gen();
        let v: f64 = rng.gen();
        let a = lo + (hi - lo) * u.min(v);
        let b = lo + (hi - lo) * u.max(v);
        if !(a < b) {
            continue;
        }
        let m = 0.5 * (a + b);
        let c = scale * rng.gen::<f64>();
        let tent = StepFn::indicator(a, m)
            .and_then(|l| StepFn::indicator(m, b).map(|r| l.sub(&r)))
            .expect("indicators of valid intervals");
        xi = xi.axpy(c, &tent);
    }
    xi
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_fixes_monotone() {
        let f = StepFn::uniform(vec![-1.0, 0.0, 2.0]).unwrap();
        assert_eq!(proj_k(&f), f);
    }

    #[test]
    fn projection_of_step_down_is_mean() {
        let f = StepFn::indicator(0.0, 0.5).unwrap();
        let g = proj_k(&f);
        assert_eq!(g.cell_count(), 1);
        assert_eq!(g.values()[0], 0.5);
    }

    #[test]
    fn projection_of_three_cells() {
        // pooled means: (3,1) -> 2, then 2 vs 2 merges into (3+1+2)/3 = 2
        let g = proj_k(&StepFn::uniform(vec![3.0, 1.0, 2.0]).unwrap());
        assert_eq!(g.cell_count(), 1);
        assert!((g.values()[0] - 2.0).abs() < 1e-15);
        let g = proj_k(&StepFn::uniform(vec![0.0, 3.0, 1.0, 4.0]).unwrap());
        assert_eq!(g.values(), &[0.0, 2.0, 4.0]);
    }

    #[test]
    fn omega_examples() {
        assert_eq!(omega(&StepFn::constant(4.0)).intervals(), &[(0.0, 1.0)]);
        let f = StepFn::new(vec![0.0, 0.3, 0.7, 1.0], vec![1.0, 2.0, 0.0]).unwrap();
        assert_eq!(omega(&f).intervals(), &[(0.0, 0.3), (0.3, 0.7), (0.7, 1.0)]);
    }

    #[test]
    fn proj_h_examples() {
        let h = StepFn::indicator(0.25, 1.0).unwrap();
        let full = PlateauSet::new(vec![(0.0, 1.0)]).unwrap();
        assert_eq!(proj_h(&full, &h), StepFn::constant(0.75));
        assert_eq!(proj_h(&PlateauSet::empty(), &h), h);
        let left = PlateauSet::new(vec![(0.0, 0.5)]).unwrap();
        let out = proj_h(&left, &h);
        assert_eq!(out.breakpoints(), &[0.0, 0.5, 1.0]);
        assert_eq!(out.values(), &[0.5, 1.0]);
    }

    #[test]
    fn polar_cone_examples() {
        let tent = StepFn::uniform(vec![1.0, -1.0]).unwrap();
        assert!(in_polar_cone(&tent, 1e-12));
        assert!(!in_polar_cone(&StepFn::constant(1.0), 1e-12));
        assert!(!in_polar_cone(&StepFn::constant(-1.0), 1e-12));
    }

    #[test]
    fn subdifferential_examples() {
        let g = StepFn::uniform(vec![0.0, 1.0, 2.0]).unwrap();
        assert!(in_subdifferential(&StepFn::constant(0.0), &g, 1e-12).unwrap());
        let tent = StepFn::uniform(vec![1.0, -1.0]).unwrap();
        assert!(in_subdifferential(&tent, &StepFn::constant(3.0), 1e-12).unwrap());
        // the same tent straddles a breakpoint of a two-level g
        let g2 = StepFn::uniform(vec![0.0, 1.0]).unwrap();
        assert!(!in_subdifferential(&tent, &g2, 1e-12).unwrap());
        let bad = StepFn::uniform(vec![1.0, 0.0]).unwrap();
        assert!(matches!(in_subdifferential(&tent, &bad, 1e-12), Err(Error::NotMonotone { .. })));
    }

    #[test]
    fn plateau_containment() {
        let fine = PlateauSet::new(vec![(0.0, 0.2), (0.2, 0.5)]).unwrap();
        let coarse = PlateauSet::new(vec![(0.0, 0.5)]).unwrap();
        assert!(fine.is_subset_of(&coarse));
        assert!(!coarse.is_subset_of(&fine));
        assert!(PlateauSet::new(vec![(0.0, 0.6), (0.5, 0.7)]).is_err());
    }
}
