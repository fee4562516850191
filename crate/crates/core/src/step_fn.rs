//! Exact algebra of step functions on `[0,1)` and continuous piecewise-linear
//! functions.
//!
//! Quantile functions, Lagrangian velocities, and every other `L²(0,1)` object
//! in this crate are right-continuous step functions. Their primitives,
//! convex envelopes, and Legendre conjugates are piecewise linear. Both
//! representations are exact on their breakpoints: nothing here samples a grid
//! or uses quadrature.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Relative tolerance used when merging adjacent cells (or collinear knots)
/// into canonical form.
pub const MERGE_RTOL: f64 = 1e-12;

fn merge_tol(scale: f64) -> f64 {
    MERGE_RTOL * (1.0 + scale)
}

/// Ordered breakpoints `0 = w₀ < w₁ < … < wₙ = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    breakpoints: Vec<f64>,
}

impl Partition {
    pub fn new(breakpoints: Vec<f64>) -> Result<Self> {
        validate_breakpoints(&breakpoints)?;
        Ok(Self { breakpoints })
    }

    /// `n` cells of equal width.
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidPartition("need at least one cell".into()));
        }
        let mut bps: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
        bps[n] = 1.0;
        Ok(Self { breakpoints: bps })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn cell_count(&self) -> usize {
        self.breakpoints.len() - 1
    }

    pub fn widths(&self) -> impl Iterator<Item = f64> + '_ {
        self.breakpoints.windows(2).map(|w| w[1] - w[0])
    }

    /// Index of the cell containing `w` (cells are `[w_{i}, w_{i+1})`, the
    /// last cell also contains `1`).
    pub fn locate(&self, w: f64) -> usize {
        let n = self.cell_count();
        let idx = self.breakpoints.partition_point(|&b| b <= w);
        idx.saturating_sub(1).min(n - 1)
    }
}

fn validate_breakpoints(bps: &[f64]) -> Result<()> {
    if bps.len() < 2 {
        return Err(Error::InvalidPartition("need at least one cell".into()));
    }
    if bps[0] != 0.0 {
        return Err(Error::InvalidPartition(format!("first breakpoint is {}, not 0", bps[0])));
    }
    if bps[bps.len() - 1] != 1.0 {
        return Err(Error::InvalidPartition(format!(
            "last breakpoint is {}, not 1",
            bps[bps.len() - 1]
        )));
    }
    for (i, w) in bps.windows(2).enumerate() {
        if !(w[1] > w[0]) {
            return Err(Error::InvalidPartition(format!(
                "breakpoints not strictly increasing at {}: {} >= {}",
                i, w[0], w[1]
            )));
        }
    }
    Ok(())
}

fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { index, value: values[index] }),
        None => Ok(()),
    }
}

/// Right-continuous piecewise-constant function on `[0,1)`, kept in canonical
/// form: no two adjacent cells carry the same value.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFn {
    partition: Partition,
    values: Vec<f64>,
}

impl StepFn {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        validate_breakpoints(&breakpoints)?;
        if values.len() + 1 != breakpoints.len() {
            return Err(Error::LengthMismatch { expected: breakpoints.len() - 1, got: values.len() });
        }
        check_finite(&values)?;
        Ok(Self::canonical(breakpoints, values))
    }

    pub fn on_partition(partition: &Partition, values: Vec<f64>) -> Result<Self> {
        Self::new(partition.breakpoints.clone(), values)
    }

    pub fn constant(c: f64) -> Self {
        Self { partition: Partition { breakpoints: vec![0.0, 1.0] }, values: vec![c] }
    }

    /// Equal-width cells carrying `values`.
    pub fn uniform(values: Vec<f64>) -> Result<Self> {
        let p = Partition::uniform(values.len())?;
        Self::on_partition(&p, values)
    }

    /// Cells of the given widths (which must sum to 1 within `1e-9`).
    /// Zero-width cells are dropped; the final breakpoint is pinned to 1.
    pub fn from_widths(widths: &[f64], values: &[f64]) -> Result<Self> {
        if widths.len() != values.len() {
            return Err(Error::LengthMismatch { expected: widths.len(), got: values.len() });
        }
        check_finite(values)?;
        let mut bps = Vec::with_capacity(widths.len() + 1);
        let mut vals = Vec::with_capacity(widths.len());
        bps.push(0.0);
        let mut acc = 0.0;
        for (i, (&w, &v)) in widths.iter().zip(values).enumerate() {
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::InvalidPartition(format!("negative or non-finite width {w} at {i}")));
            }
            if w == 0.0 {
                continue;
            }
            acc += w;
            bps.push(acc);
            vals.push(v);
        }
        if vals.is_empty() {
            return Err(Error::InvalidPartition("all widths are zero".into()));
        }
        if (acc - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidPartition(format!("widths sum to {acc}, not 1")));
        }
        let last = bps.len() - 1;
        bps[last] = 1.0;
        // pinning may have collapsed a tiny final cell
        while bps.len() > 2 && !(bps[bps.len() - 2] < 1.0) {
            bps.remove(bps.len() - 2);
            let k = vals.len() - 2;
            vals.remove(k);
        }
        Self::new(bps, vals)
    }

    /// `𝟙_{[a,b)}` restricted to `[0,1)`.
    pub fn indicator(a: f64, b: f64) -> Result<Self> {
        let a = a.clamp(0.0, 1.0);
        let b = b.clamp(0.0, 1.0);
        if !(a < b) {
            return Ok(Self::constant(0.0));
        }
        let mut bps = vec![0.0];
        let mut vals = Vec::new();
        if a > 0.0 {
            bps.push(a);
            vals.push(0.0);
        }
        vals.push(1.0);
        if b < 1.0 {
            bps.push(b);
            vals.push(0.0);
        }
        bps.push(1.0);
        Self::new(bps, vals)
    }

    /// Builds from already validated parts and merges equal neighbours.
    pub(crate) fn canonical(breakpoints: Vec<f64>, values: Vec<f64>) -> Self {
        debug_assert_eq!(breakpoints.len(), values.len() + 1);
        let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tol = merge_tol(scale);
        let n = values.len();
        let mut bps = Vec::with_capacity(n + 1);
        let mut vals: Vec<f64> = Vec::with_capacity(n);
        bps.push(breakpoints[0]);
        let mut cur = values[0];
        let mut cur_w = breakpoints[1] - breakpoints[0];
        for i in 1..n {
            let v = values[i];
            let w = breakpoints[i + 1] - breakpoints[i];
            if (v - cur).abs() <= tol {
                if v != cur {
                    cur = (cur * cur_w + v * w) / (cur_w + w);
                }
                cur_w += w;
            } else {
                bps.push(breakpoints[i]);
                vals.push(cur);
                cur = v;
                cur_w = w;
            }
        }
        bps.push(breakpoints[n]);
        vals.push(cur);
        Self { partition: Partition { breakpoints: bps }, values: vals }
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.partition.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn cell_count(&self) -> usize {
        self.values.len()
    }

    /// `(left, right, value)` for every cell.
    pub fn cells(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.partition.breakpoints.windows(2).zip(&self.values).map(|(w, &v)| (w[0], w[1], v))
    }

    pub fn widths(&self) -> Vec<f64> {
        self.partition.widths().collect()
    }

    /// Right-continuous evaluation; `w = 1` returns the last value.
    pub fn eval(&self, w: f64) -> f64 {
        self.values[self.partition.locate(w)]
    }

    pub fn integral(&self) -> f64 {
        self.cells().map(|(a, b, v)| (b - a) * v).sum()
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Exact comparison of canonical values.
    pub fn is_nondecreasing(&self) -> bool {
        self.values.windows(2).all(|w| w[0] <= w[1])
    }

    pub fn first_decrease(&self) -> Option<usize> {
        self.values.windows(2).position(|w| w[0] > w[1])
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> StepFn {
        let vals = self.values.iter().map(|&v| f(v)).collect();
        Self::canonical(self.partition.breakpoints.clone(), vals)
    }

    pub fn scale(&self, c: f64) -> StepFn {
        self.map(|v| c * v)
    }

    /// Pointwise combination on the common refinement.
    pub fn zip_with(&self, other: &StepFn, f: impl Fn(f64, f64) -> f64) -> StepFn {
        let r = refine_common(self, other);
        let vals = r.left.iter().zip(&r.right).map(|(&a, &b)| f(a, b)).collect();
        Self::canonical(r.breakpoints, vals)
    }

    pub fn add(&self, other: &StepFn) -> StepFn {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &StepFn) -> StepFn {
        self.zip_with(other, |a, b| a - b)
    }

    /// `self + c·other`.
    pub fn axpy(&self, c: f64, other: &StepFn) -> StepFn {
        self.zip_with(other, |a, b| a + c * b)
    }

    /// `L²(0,1)` inner product.
    pub fn dot(&self, other: &StepFn) -> f64 {
        let r = refine_common(self, other);
        r.cells().map(|(a, b, x, y)| (b - a) * x * y).sum()
    }

    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        lp_distance(self, &StepFn::constant(0.0), p)
    }

    /// CSV text: header `w_left,value`, one row per cell, and the sentinel
    /// row `1.0,`. Floats use shortest round-trip formatting.
    pub fn to_csv_string(&self) -> String {
        let mut s = String::from("w_left,value\n");
        for (a, _, v) in self.cells() {
            let _ = writeln!(s, "{a:?},{v:?}");
        }
        s.push_str("1.0,\n");
        s
    }

    pub fn from_csv_str(text: &str) -> Result<StepFn> {
        let mut bps = Vec::new();
        let mut vals = Vec::new();
        let mut sentinel = false;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if sentinel {
                return Err(Error::Parse(format!("line {}: data after sentinel row", lineno + 1)));
            }
            let (w, v) = line
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("line {}: expected `w_left,value`", lineno + 1)))?;
            let w = w.trim();
            let v = v.trim();
            if lineno == 0 && w == "w_left" {
                continue;
            }
            let w: f64 = w
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: bad breakpoint `{w}`", lineno + 1)))?;
            if v.is_empty() {
                if w != 1.0 {
                    return Err(Error::Parse(format!("line {}: sentinel row must be `1.0,`", lineno + 1)));
                }
                bps.push(w);
                sentinel = true;
                continue;
            }
            let v: f64 =
                v.parse().map_err(|_| Error::Parse(format!("line {}: bad value `{v}`", lineno + 1)))?;
            bps.push(w);
            vals.push(v);
        }
        if !sentinel {
            return Err(Error::Parse("missing sentinel row `1.0,`".into()));
        }
        StepFn::new(bps, vals)
    }
}

/// Two step functions expressed on the union of their breakpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct CommonRefinement {
    pub breakpoints: Vec<f64>,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

impl CommonRefinement {
    /// `(a, b, left value, right value)` per cell.
    pub fn cells(&self) -> impl Iterator<Item = (f64, f64, f64, f64)> + '_ {
        self.breakpoints
            .windows(2)
            .zip(self.left.iter().zip(&self.right))
            .map(|(w, (&x, &y))| (w[0], w[1], x, y))
    }

    pub fn partition(&self) -> Partition {
        Partition { breakpoints: self.breakpoints.clone() }
    }

    pub fn into_step_fns(self) -> (StepFn, StepFn) {
        let a = StepFn::canonical(self.breakpoints.clone(), self.left);
        let b = StepFn::canonical(self.breakpoints, self.right);
        (a, b)
    }
}

/// Expresses `a` and `b` on the merged partition; pointwise values unchanged.
pub fn refine_common(a: &StepFn, b: &StepFn) -> CommonRefinement {
    let pa = a.breakpoints();
    let pb = b.breakpoints();
    let mut bps = Vec::with_capacity(pa.len() + pb.len());
    let mut left = Vec::with_capacity(pa.len() + pb.len());
    let mut right = Vec::with_capacity(pa.len() + pb.len());
    bps.push(0.0);
    let (mut i, mut j) = (0usize, 0usize);
    // i, j index the current cell of a and b
    loop {
        left.push(a.values[i]);
        right.push(b.values[j]);
        let ea = pa[i + 1];
        let eb = pb[j + 1];
        let e = ea.min(eb);
        bps.push(e);
        if e >= 1.0 {
            break;
        }
        if ea == e {
            i += 1;
        }
        if eb == e {
            j += 1;
        }
    }
    let last = bps.len() - 1;
    bps[last] = 1.0;
    CommonRefinement { breakpoints: bps, left, right }
}

/// `‖a − b‖_{L^p(0,1)}`, exact cellwise; `p = ∞` gives the essential sup.
pub fn lp_distance(a: &StepFn, b: &StepFn, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidExponent(p));
    }
    let r = refine_common(a, b);
    if p.is_infinite() {
        return Ok(r.cells().fold(0.0, |m, (_, _, x, y)| m.max((x - y).abs())));
    }
    let s: f64 = if p == 1.0 {
        r.cells().map(|(l, h, x, y)| (h - l) * (x - y).abs()).sum()
    } else if p == 2.0 {
        r.cells().map(|(l, h, x, y)| (h - l) * (x - y) * (x - y)).sum()
    } else {
        r.cells().map(|(l, h, x, y)| (h - l) * (x - y).abs().powf(p)).sum()
    };
    Ok(s.powf(1.0 / p))
}

/// `sup |a − b|` over cells of the common refinement wider than
/// `min_width`. Cumulative masses computed along different paths can place
/// the same breakpoint a few ulps apart; the resulting slivers carry no mass.
pub fn sup_distance(a: &StepFn, b: &StepFn, min_width: f64) -> f64 {
    refine_common(a, b)
        .cells()
        .filter(|(l, h, _, _)| h - l > min_width)
        .fold(0.0, |m, (_, _, x, y)| m.max((x - y).abs()))
}

/// Continuous piecewise-linear function.
///
/// The domain is `[first knot, last knot]`, optionally extended affinely to
/// `-∞` and/or `+∞` by a tail slope. Conjugates of functions on bounded
/// intervals carry tails; primitives and envelopes do not.
#[derive(Debug, Clone, PartialEq)]
pub struct PwLinearFn {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
    left_tail: Option<f64>,
    right_tail: Option<f64>,
}

impl PwLinearFn {
    /// Interpolates the knots on the bounded interval they span.
    pub fn from_knots(knots: &[(f64, f64)]) -> Result<Self> {
        Self::with_tails(knots, None, None)
    }

    pub fn with_tails(knots: &[(f64, f64)], left_tail: Option<f64>, right_tail: Option<f64>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::InvalidArgument("piecewise-linear function needs a knot".into()));
        }
        let xs: Vec<f64> = knots.iter().map(|k| k.0).collect();
        let ys: Vec<f64> = knots.iter().map(|k| k.1).collect();
        check_finite(&xs)?;
        check_finite(&ys)?;
        for t in [left_tail, right_tail].into_iter().flatten() {
            if !t.is_finite() {
                return Err(Error::InvalidArgument(format!("tail slope {t} is not finite")));
            }
        }
        for (i, w) in xs.windows(2).enumerate() {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidArgument(format!(
                    "knot abscissae not strictly increasing at {i}: {} >= {}",
                    w[0], w[1]
                )));
            }
        }
        let slopes = xs
            .windows(2)
            .zip(ys.windows(2))
            .map(|(x, y)| (y[1] - y[0]) / (x[1] - x[0]))
            .collect();
        Ok(Self::from_parts(xs, ys, slopes, left_tail, right_tail))
    }

    /// Assembles from consistent parts and removes redundant knots.
    fn from_parts(
        xs: Vec<f64>,
        ys: Vec<f64>,
        slopes: Vec<f64>,
        left_tail: Option<f64>,
        right_tail: Option<f64>,
    ) -> Self {
        debug_assert_eq!(xs.len(), ys.len());
        debug_assert_eq!(slopes.len() + 1, xs.len());
        let n = xs.len();
        let scale = slopes
            .iter()
            .chain(left_tail.iter())
            .chain(right_tail.iter())
            .fold(0.0f64, |m, s| m.max(s.abs()));
        let tol = merge_tol(scale);
        let mut ox = Vec::with_capacity(n);
        let mut oy = Vec::with_capacity(n);
        let mut os: Vec<f64> = Vec::with_capacity(n);
        ox.push(xs[0]);
        oy.push(ys[0]);
        for i in 1..n {
            let s = slopes[i - 1];
            let dx = xs[i] - xs[i - 1];
            if let Some(last) = os.last_mut() {
                if (s - *last).abs() <= tol {
                    let prev_dx = ox[ox.len() - 1] - ox[ox.len() - 2];
                    *last = (*last * prev_dx + s * dx) / (prev_dx + dx);
                    let k = ox.len() - 1;
                    ox[k] = xs[i];
                    oy[k] = ys[i];
                    continue;
                }
            }
            ox.push(xs[i]);
            oy.push(ys[i]);
            os.push(s);
        }
        // endpoint knots that only continue a tail are not kinks
        if let (Some(t), Some(&s)) = (left_tail, os.first()) {
            if (t - s).abs() <= tol {
                ox.remove(0);
                oy.remove(0);
                os.remove(0);
            }
        }
        if let (Some(t), Some(&s)) = (right_tail, os.last()) {
            if (t - s).abs() <= tol {
                ox.pop();
                oy.pop();
                os.pop();
            }
        }
        Self { xs: ox, ys: oy, slopes: os, left_tail, right_tail }
    }

    pub fn knots(&self) -> Vec<(f64, f64)> {
        self.xs.iter().copied().zip(self.ys.iter().copied()).collect()
    }

    pub fn knot_xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn knot_ys(&self) -> &[f64] {
        &self.ys
    }

    /// Slopes of the bounded segments between consecutive knots.
    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    pub fn left_tail(&self) -> Option<f64> {
        self.left_tail
    }

    pub fn right_tail(&self) -> Option<f64> {
        self.right_tail
    }

    /// `(lo, hi)`, infinite where a tail extends the function.
    pub fn domain(&self) -> (f64, f64) {
        let lo = if self.left_tail.is_some() { f64::NEG_INFINITY } else { self.xs[0] };
        let hi = if self.right_tail.is_some() { f64::INFINITY } else { self.xs[self.xs.len() - 1] };
        (lo, hi)
    }

    /// `None` outside the domain.
    pub fn eval(&self, x: f64) -> Option<f64> {
        let n = self.xs.len();
        if x < self.xs[0] {
            return self.left_tail.map(|s| self.ys[0] + s * (x - self.xs[0]));
        }
        if x > self.xs[n - 1] {
            return self.right_tail.map(|s| self.ys[n - 1] + s * (x - self.xs[n - 1]));
        }
        if n == 1 {
            return Some(self.ys[0]);
        }
        let i = self.xs.partition_point(|&k| k <= x).saturating_sub(1).min(n - 2);
        Some(self.ys[i] + self.slopes[i] * (x - self.xs[i]))
    }

    /// Every slope, tails included, in left-to-right order.
    fn all_slopes(&self) -> impl Iterator<Item = f64> + '_ {
        self.left_tail.into_iter().chain(self.slopes.iter().copied()).chain(self.right_tail)
    }

    pub fn is_convex(&self, tol: f64) -> bool {
        self.first_nonconvex(tol).is_none()
    }

    fn first_nonconvex(&self, tol: f64) -> Option<(usize, f64, f64)> {
        let s: Vec<f64> = self.all_slopes().collect();
        s.windows(2).enumerate().find(|(_, w)| w[0] > w[1] + tol).map(|(i, w)| (i, w[0], w[1]))
    }

    pub fn scale(&self, c: f64) -> PwLinearFn {
        Self::from_parts(
            self.xs.clone(),
            self.ys.iter().map(|y| c * y).collect(),
            self.slopes.iter().map(|s| c * s).collect(),
            self.left_tail.map(|s| c * s),
            self.right_tail.map(|s| c * s),
        )
    }

    /// Sum of two functions on the same bounded interval.
    pub fn add(&self, other: &PwLinearFn) -> Result<PwLinearFn> {
        if self.left_tail.is_some() || self.right_tail.is_some() || other.left_tail.is_some() || other.right_tail.is_some() {
            return Err(Error::DomainMismatch("sum is defined for bounded domains only".into()));
        }
        let (a0, a1) = (self.xs[0], self.xs[self.xs.len() - 1]);
        let (b0, b1) = (other.xs[0], other.xs[other.xs.len() - 1]);
        if a0 != b0 || a1 != b1 {
            return Err(Error::DomainMismatch(format!("[{a0}, {a1}] vs [{b0}, {b1}]")));
        }
        if self.xs.len() == 1 {
            return Ok(Self::from_parts(self.xs.clone(), vec![self.ys[0] + other.ys[0]], vec![], None, None));
        }
        let mut xs = Vec::with_capacity(self.xs.len() + other.xs.len());
        let mut ys = Vec::with_capacity(xs.capacity());
        let mut slopes = Vec::with_capacity(xs.capacity());
        xs.push(a0);
        ys.push(self.ys[0] + other.ys[0]);
        let (mut i, mut j) = (0usize, 0usize);
        loop {
            slopes.push(self.slopes[i] + other.slopes[j]);
            let ea = self.xs[i + 1];
            let eb = other.xs[j + 1];
            let e = ea.min(eb);
            let ya = if ea == e { self.ys[i + 1] } else { self.ys[i] + self.slopes[i] * (e - self.xs[i]) };
            let yb = if eb == e { other.ys[j + 1] } else { other.ys[j] + other.slopes[j] * (e - other.xs[j]) };
            xs.push(e);
            ys.push(ya + yb);
            if e >= a1 {
                break;
            }
            if ea == e {
                i += 1;
            }
            if eb == e {
                j += 1;
            }
        }
        Ok(Self::from_parts(xs, ys, slopes, None, None))
    }

    /// Right derivative as a step function; the domain must be `[0,1]`.
    pub fn right_derivative(&self) -> Result<StepFn> {
        if self.left_tail.is_some() || self.right_tail.is_some() || self.xs[0] != 0.0 || self.xs[self.xs.len() - 1] != 1.0 {
            return Err(Error::DomainMismatch("right derivative needs the domain [0,1]".into()));
        }
        if self.xs.len() < 2 {
            return Err(Error::DomainMismatch("degenerate domain".into()));
        }
        Ok(StepFn::canonical(self.xs.clone(), self.slopes.clone()))
    }
}

/// `F(w) = ∫₀ʷ f`, with slope on each cell equal to the value of `f` there.
pub fn primitive(f: &StepFn) -> PwLinearFn {
    let xs = f.breakpoints().to_vec();
    let mut ys = Vec::with_capacity(xs.len());
    let mut acc = 0.0;
    ys.push(0.0);
    for (a, b, v) in f.cells() {
        acc += (b - a) * v;
        ys.push(acc);
    }
    PwLinearFn::from_parts(xs, ys, f.values.clone(), None, None)
}

/// Greatest convex minorant of `f` on its (bounded) domain.
///
/// Single left-to-right monotone-chain pass over the segments: each new
/// segment is pooled with the top of the stack while the slopes fail to
/// increase. Hull vertices are original knots, and each hull slope is the
/// length-weighted mean of the slopes it absorbs.
pub fn lower_convex_envelope(f: &PwLinearFn) -> Result<PwLinearFn> {
    if f.left_tail.is_some() || f.right_tail.is_some() {
        return Err(Error::DomainMismatch("convex envelope needs a bounded domain".into()));
    }
    let n = f.slopes.len();
    if n == 0 {
        return Ok(f.clone());
    }
    // (start knot index, width, slope)
    let mut stack: Vec<(usize, f64, f64)> = Vec::with_capacity(n);
    for i in 0..n {
        let mut seg = (i, f.xs[i + 1] - f.xs[i], f.slopes[i]);
        while let Some(&(start, w, s)) = stack.last() {
            if s < seg.2 {
                break;
            }
            let width = w + seg.1;
            seg = (start, width, (s * w + seg.2 * seg.1) / width);
            stack.pop();
        }
        stack.push(seg);
    }
    let mut xs = Vec::with_capacity(stack.len() + 1);
    let mut ys = Vec::with_capacity(stack.len() + 1);
    let mut slopes = Vec::with_capacity(stack.len());
    for &(start, _, s) in &stack {
        xs.push(f.xs[start]);
        ys.push(f.ys[start]);
        slopes.push(s);
    }
    xs.push(f.xs[n]);
    ys.push(f.ys[n]);
    Ok(PwLinearFn::from_parts(xs, ys, slopes, None, None))
}

/// Legendre–Fenchel conjugate `f*(x) = sup_w (x·w − f(w))` of a convex
/// piecewise-linear function.
///
/// The graph is transposed: slopes of `f` become knot abscissae of `f*` and
/// knot abscissae of `f` become slopes of `f*`. An end of the domain where
/// `f` has no tail turns into a tail of `f*` (slope = that endpoint), and a
/// tail of `f` turns into a bounded end of `f*`. Applying it twice returns
/// the input.
pub fn legendre(f: &PwLinearFn) -> Result<PwLinearFn> {
    let scale = f.all_slopes().fold(0.0f64, |m, s| m.max(s.abs()));
    if let Some((index, left, right)) = f.first_nonconvex(1e-9 * (1.0 + scale)) {
        return Err(Error::NotConvex { index, left, right });
    }
    let n = f.xs.len();
    // conjugate knots: one per affine piece of f (tails included)
    let mut cx: Vec<f64> = Vec::with_capacity(n + 1);
    let mut cy: Vec<f64> = Vec::with_capacity(n + 1);
    // slope of f* to the right of each conjugate knot (= knot of f)
    let mut right_of: Vec<f64> = Vec::with_capacity(n + 1);
    let push = |cx: &mut Vec<f64>, cy: &mut Vec<f64>, right_of: &mut Vec<f64>, s: f64, y: f64, r: f64| {
        if let Some(&last) = cx.last() {
            if !(s > last) {
                // slope repeated within round-off: keep the later piece's data
                let k = cx.len() - 1;
                right_of[k] = r;
                return;
            }
        }
        cx.push(s);
        cy.push(y);
        right_of.push(r);
    };
    if let Some(s) = f.left_tail {
        push(&mut cx, &mut cy, &mut right_of, s, s * f.xs[0] - f.ys[0], f.xs[0]);
    }
    for i in 0..f.slopes.len() {
        let s = f.slopes[i];
        push(&mut cx, &mut cy, &mut right_of, s, s * f.xs[i] - f.ys[i], f.xs[i + 1]);
    }
    if let Some(s) = f.right_tail {
        push(&mut cx, &mut cy, &mut right_of, s, s * f.xs[n - 1] - f.ys[n - 1], f.xs[n - 1]);
    }
    let left_tail = if f.left_tail.is_none() { Some(f.xs[0]) } else { None };
    let right_tail = if f.right_tail.is_none() { Some(f.xs[n - 1]) } else { None };
    if cx.is_empty() {
        // f is a single point: f*(x) = x·w₀ − y₀ on all of ℝ
        let w0 = f.xs[0];
        return Ok(PwLinearFn { xs: vec![0.0], ys: vec![-f.ys[0]], slopes: vec![], left_tail: Some(w0), right_tail: Some(w0) });
    }
    let slopes: Vec<f64> = right_of[..cx.len() - 1].to_vec();
    Ok(PwLinearFn::from_parts(cx, cy, slopes, left_tail, right_tail))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn refine_common_merges_breakpoints() {
        let a = StepFn::indicator(0.0, 0.5).unwrap();
        let b = StepFn::indicator(0.3, 1.0).unwrap();
        let r = refine_common(&a, &b);
        assert_eq!(r.breakpoints, vec![0.0, 0.3, 0.5, 1.0]);
        assert_eq!(r.left, vec![1.0, 1.0, 0.0]);
        assert_eq!(r.right, vec![0.0, 1.0, 1.0]);
    }

    #[test]
    fn refine_common_identity_and_constants() {
        let f = StepFn::uniform(vec![1.0, -2.0, 3.0]).unwrap();
        let (a, b) = refine_common(&f, &f).into_step_fns();
        assert_eq!(a, f);
        assert_eq!(b, f);
        let r = refine_common(&StepFn::constant(2.0), &StepFn::constant(3.0));
        assert_eq!(r.breakpoints, vec![0.0, 1.0]);
        assert_eq!((r.left[0], r.right[0]), (2.0, 3.0));
    }

    #[test]
    fn canonical_form_merges_equal_neighbours() {
        let f = StepFn::new(vec![0.0, 0.25, 0.5, 1.0], vec![1.0, 1.0, 2.0]).unwrap();
        assert_eq!(f.breakpoints(), &[0.0, 0.5, 1.0]);
        assert_eq!(f.values(), &[1.0, 2.0]);
        // round-off sized differences are absorbed
        let g = StepFn::new(vec![0.0, 0.5, 1.0], vec![1.0, 1.0 + 1e-15]).unwrap();
        assert_eq!(g.cell_count(), 1);
    }

    #[test]
    fn invalid_partitions_rejected() {
        assert!(StepFn::new(vec![0.0, 0.5, 0.5, 1.0], vec![1.0, 2.0, 3.0]).is_err());
        assert!(StepFn::new(vec![0.1, 1.0], vec![1.0]).is_err());
        assert!(StepFn::new(vec![0.0, 0.9], vec![1.0]).is_err());
        assert!(StepFn::new(vec![0.0, 1.0], vec![1.0, 2.0]).is_err());
        assert!(StepFn::new(vec![0.0, 1.0], vec![f64::NAN]).is_err());
        assert!(Partition::uniform(0).is_err());
    }

    #[test]
    fn primitive_examples() {
        let f = primitive(&StepFn::constant(1.0));
        assert_eq!(f.knots(), vec![(0.0, 0.0), (1.0, 1.0)]);
        let f = primitive(&StepFn::indicator(0.0, 0.5).unwrap());
        assert_eq!(f.knots(), vec![(0.0, 0.0), (0.5, 0.5), (1.0, 0.5)]);
        let tent = primitive(&StepFn::uniform(vec![1.0, -1.0]).unwrap());
        assert_eq!(tent.knots(), vec![(0.0, 0.0), (0.5, 0.5), (1.0, 0.0)]);
    }

    #[test]
    fn envelope_of_convex_is_identity() {
        let f = primitive(&StepFn::uniform(vec![-1.0, 0.0, 2.0]).unwrap());
        assert_eq!(lower_convex_envelope(&f).unwrap(), f);
    }

    #[test]
    fn envelope_examples() {
        let tent = PwLinearFn::from_knots(&[(0.0, 0.0), (0.5, 0.5), (1.0, 0.0)]).unwrap();
        let env = lower_convex_envelope(&tent).unwrap();
        assert_eq!(env.knots(), vec![(0.0, 0.0), (1.0, 0.0)]);
        let concave = PwLinearFn::from_knots(&[(0.0, 0.0), (0.5, 0.5), (1.0, 0.5)]).unwrap();
        let env = lower_convex_envelope(&concave).unwrap();
        assert_eq!(env.knots(), vec![(0.0, 0.0), (1.0, 0.5)]);
        assert_eq!(env.slopes(), &[0.5]);
    }

    #[test]
    fn legendre_examples() {
        let f = PwLinearFn::from_knots(&[(0.0, 0.0), (1.0, 1.0)]).unwrap();
        let g = legendre(&f).unwrap();
        for x in [0.0, 0.25, 0.5, 1.0] {
            assert!(close(g.eval(x).unwrap(), 0.0, 1e-15), "x={x}");
        }
        assert!(close(g.eval(2.0).unwrap(), 1.0, 1e-15));

        let f = PwLinearFn::from_knots(&[(0.0, 0.0), (0.5, 0.0), (1.0, 0.5)]).unwrap();
        let g = legendre(&f).unwrap();
        for x in [0.0, 0.3, 0.7, 1.0] {
            assert!(close(g.eval(x).unwrap(), 0.5 * x, 1e-15));
        }
        assert_eq!(legendre(&g).unwrap(), f);
    }

    #[test]
    fn legendre_rejects_nonconvex() {
        let tent = PwLinearFn::from_knots(&[(0.0, 0.0), (0.5, 0.5), (1.0, 0.0)]).unwrap();
        assert!(matches!(legendre(&tent), Err(Error::NotConvex { .. })));
    }

    #[test]
    fn lp_distance_examples() {
        let a = StepFn::indicator(0.0, 0.5).unwrap();
        let z = StepFn::constant(0.0);
        assert_eq!(lp_distance(&a, &a, 2.0).unwrap(), 0.0);
        assert_eq!(lp_distance(&z, &StepFn::constant(1.0), 2.0).unwrap(), 1.0);
        assert!(close(lp_distance(&a, &z, 2.0).unwrap(), 0.5f64.sqrt(), 1e-15));
        assert_eq!(lp_distance(&a, &z, f64::INFINITY).unwrap(), 1.0);
        assert!(matches!(lp_distance(&a, &z, 0.5), Err(Error::InvalidExponent(_))));
    }

    #[test]
    fn csv_round_trip_and_sentinel() {
        let f = StepFn::new(vec![0.0, 0.1, 0.7, 1.0], vec![-3.5, 1e-7, 2.0 / 3.0]).unwrap();
        let text = f.to_csv_string();
        assert!(text.ends_with("1.0,\n"));
        assert_eq!(StepFn::from_csv_str(&text).unwrap(), f);
        assert!(StepFn::from_csv_str("0.0,1.0\n").is_err());
        assert!(StepFn::from_csv_str("0.0,1.0\n0.5,\n").is_err());
    }

    #[test]
    fn from_widths_pins_last_breakpoint() {
        let f = StepFn::from_widths(&[0.1, 0.2, 0.7], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(*f.breakpoints().last().unwrap(), 1.0);
        assert_eq!(f.cell_count(), 3);
        assert!(StepFn::from_widths(&[0.1, 0.2], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn pwlinear_add_and_derivative() {
        let f = primitive(&StepFn::uniform(vec![1.0, 3.0]).unwrap());
        let g = primitive(&StepFn::indicator(0.0, 0.25).unwrap());
        let h = f.add(&g).unwrap();
        let d = h.right_derivative().unwrap();
        assert_eq!(d.breakpoints(), &[0.0, 0.25, 0.5, 1.0]);
        assert_eq!(d.values(), &[2.0, 1.0, 3.0]);
        assert!(close(h.eval(1.0).unwrap(), 2.25, 1e-15));
    }
}
