//! Small deterministic optimizers: a bracketed 1-D maximizer, Armijo gradient
//! descent, grid seeding and a finite-difference gradient check.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Local maxima of the coarse grid that get refined.
const MAX_REFINED_PEAKS: usize = 8;
/// Backtracking halvings before a descent step is declared stuck.
pub const MAX_HALVINGS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchSpec {
    lo: f64,
    hi: f64,
    coarse_step: f64,
    refine_tol: f64,
}

impl LineSearchSpec {
    pub fn new(lo: f64, hi: f64, coarse_step: f64, refine_tol: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Validation(format!("invalid search window [{lo}, {hi}]")));
        }
        if !(coarse_step > 0.0 && coarse_step < hi - lo) {
            return Err(Error::Validation(format!(
                "coarse step {coarse_step} must be positive and below the window width {}",
                hi - lo
            )));
        }
        if !(refine_tol > 0.0 && refine_tol < coarse_step) {
            return Err(Error::Validation("refine_tol must be positive and below the coarse step".into()));
        }
        Ok(Self {
            lo,
            hi,
            coarse_step,
            refine_tol,
        })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }
    pub fn hi(&self) -> f64 {
        self.hi
    }
    pub fn coarse_step(&self) -> f64 {
        self.coarse_step
    }
    pub fn refine_tol(&self) -> f64 {
        self.refine_tol
    }
}

/// Global maximizer of `f` on `[lo, hi]`.
///
/// Evaluates a uniform grid, refines the best few local maxima by golden
/// section inside one grid cell on either side, and breaks ties toward the
/// smaller abscissa. Window end points are candidates too, so a monotone `f`
/// returns the boundary exactly.
pub fn maximize_scalar<F: Fn(f64) -> f64>(f: F, spec: &LineSearchSpec) -> (f64, f64) {
    let n = ((spec.hi - spec.lo) / spec.coarse_step).ceil() as usize;
    let xs: Vec<f64> = (0..=n)
        .map(|k| if k == n { spec.hi } else { spec.lo + k as f64 * spec.coarse_step })
        .collect();
    let fs: Vec<f64> = xs.iter().map(|&x| f(x)).collect();

    let mut peaks: Vec<usize> = (0..xs.len())
        .filter(|&k| {
            let left = k == 0 || fs[k] >= fs[k - 1];
            let right = k == xs.len() - 1 || fs[k] >= fs[k + 1];
            left && right
        })
        .collect();
    peaks.sort_by(|&a, &b| fs[b].total_cmp(&fs[a]).then(a.cmp(&b)));
    peaks.truncate(MAX_REFINED_PEAKS);

    let mut best = (xs[0], fs[0]);
    let mut consider = |x: f64, v: f64| {
        if is_better(v, x, best.1, best.0) {
            best = (x, v);
        }
    };
    for &k in &peaks {
        consider(xs[k], fs[k]);
        let a = if k == 0 { xs[0] } else { xs[k - 1] };
        let b = if k + 1 == xs.len() { xs[k] } else { xs[k + 1] };
        if b > a {
            let (x, v) = golden_max(&f, a, b, spec.refine_tol);
            consider(x, v);
        }
    }
    best
}

fn is_better(v: f64, x: f64, best_v: f64, best_x: f64) -> bool {
    let tie = 1e-12 * best_v.abs().max(v.abs()).max(f64::MIN_POSITIVE);
    if v > best_v + tie {
        true
    } else if v >= best_v - tie {
        x < best_x
    } else {
        false
    }
}

fn golden_max<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if b - a <= tol {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescentSpec {
    pub step_init: f64,
    pub backtrack_ratio: f64,
    pub armijo_c: f64,
    pub grad_tol: f64,
    pub max_iter: usize,
}

impl Default for DescentSpec {
    fn default() -> Self {
        Self {
            step_init: 1.0,
            backtrack_ratio: 0.5,
            armijo_c: 1e-4,
            grad_tol: 1e-9,
            max_iter: 20_000,
        }
    }
}

impl DescentSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_init > 0.0
            && self.backtrack_ratio > 0.0
            && self.backtrack_ratio < 1.0
            && self.armijo_c > 0.0
            && self.armijo_c < 1.0
            && self.grad_tol > 0.0
            && self.max_iter > 0)
        {
            return Err(Error::Validation(format!("invalid descent parameters {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescentOutcome {
    pub x: DVector<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Steepest descent with Armijo backtracking. Every accepted step strictly
/// decreases `f`.
pub fn minimize_descent<F, G>(f: F, grad: G, x0: DVector<f64>, spec: &DescentSpec) -> Result<DescentOutcome>
where
    F: Fn(&DVector<f64>) -> f64,
    G: Fn(&DVector<f64>) -> DVector<f64>,
{
    spec.validate()?;
    let mut x = x0;
    let mut fx = f(&x);
    for it in 0..spec.max_iter {
        let g = grad(&x);
        let g2 = g.norm_squared();
        if g2.sqrt() < spec.grad_tol {
            return Ok(DescentOutcome {
                x,
                value: fx,
                iterations: it,
                converged: true,
            });
        }
        let mut t = spec.step_init;
        let mut halvings = 0;
        loop {
            let cand = &x - &g * t;
            let fc = f(&cand);
            if fc <= fx - spec.armijo_c * t * g2 && fc < fx {
                x = cand;
                fx = fc;
                break;
            }
            t *= spec.backtrack_ratio;
            halvings += 1;
            if halvings >= MAX_HALVINGS {
                // A full step could not lower f by a representable amount:
                // the point is stationary to working precision.
                if spec.armijo_c * spec.step_init * g2 <= 1e3 * f64::EPSILON * fx.abs() {
                    return Ok(DescentOutcome {
                        x,
                        value: fx,
                        iterations: it,
                        converged: true,
                    });
                }
                return Err(Error::NoDescentProgress(halvings));
            }
        }
    }
    Ok(DescentOutcome {
        x,
        value: fx,
        iterations: spec.max_iter,
        converged: false,
    })
}

/// Axis-aligned box `[lo_k, hi_k]` in any dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl BoundingBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::Validation("bounding box corners must have equal, nonzero dimension".into()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a.is_finite() && b.is_finite() && a < b)) {
            return Err(Error::Validation("bounding box needs lo < hi on every axis".into()));
        }
        Ok(Self { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }
    pub fn lo(&self) -> &[f64] {
        &self.lo
    }
    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    fn grid_axis(&self, k: usize, n: usize) -> Vec<f64> {
        if n == 1 {
            return vec![(self.lo[k] + self.hi[k]) / 2.0];
        }
        let step = (self.hi[k] - self.lo[k]) / (n - 1) as f64;
        (0..n).map(|i| self.lo[k] + i as f64 * step).collect()
    }
}

/// Values of `f` on an `n^D` grid in row-major order (last axis fastest).
struct GridEval {
    axes: Vec<Vec<f64>>,
    values: Vec<f64>,
}

impl GridEval {
    fn new<F: Fn(&DVector<f64>) -> f64>(f: &F, bbox: &BoundingBox, n: usize) -> Self {
        let axes: Vec<Vec<f64>> = (0..bbox.dim()).map(|k| bbox.grid_axis(k, n)).collect();
        let total = n.pow(bbox.dim() as u32);
        let values = (0..total).map(|i| f(&Self::point_of(&axes, n, i))).collect();
        Self { axes, values }
    }

    fn point_of(axes: &[Vec<f64>], n: usize, mut flat: usize) -> DVector<f64> {
        let mut p = DVector::zeros(axes.len());
        for k in (0..axes.len()).rev() {
            p[k] = axes[k][flat % n];
            flat /= n;
        }
        p
    }

    fn point(&self, flat: usize) -> DVector<f64> {
        Self::point_of(&self.axes, self.axes[0].len(), flat)
    }

    fn is_local_min(&self, flat: usize) -> bool {
        let n = self.axes[0].len();
        let dim = self.axes.len();
        let mut idx = vec![0usize; dim];
        let mut rem = flat;
        for k in (0..dim).rev() {
            idx[k] = rem % n;
            rem /= n;
        }
        let v = self.values[flat];
        // walk the 3^D - 1 neighbours
        for code in 0..3usize.pow(dim as u32) {
            let mut c = code;
            let mut nb = 0usize;
            let mut inside = true;
            let mut centre = true;
            for &i in &idx {
                let off = (c % 3) as isize - 1;
                c /= 3;
                centre &= off == 0;
                let j = i as isize + off;
                if j < 0 || j >= n as isize {
                    inside = false;
                    break;
                }
                nb = nb * n + j as usize;
            }
            if inside && !centre && self.values[nb] < v {
                return false;
            }
        }
        true
    }
}

/// Grid point with the smallest `f`; ties go to the first in row-major order.
pub fn grid_min_seed<F: Fn(&DVector<f64>) -> f64>(f: F, bbox: &BoundingBox, points_per_axis: usize) -> DVector<f64> {
    let grid = GridEval::new(&f, bbox, points_per_axis.max(1));
    let mut best = 0;
    for (i, v) in grid.values.iter().enumerate() {
        if *v < grid.values[best] {
            best = i;
        }
    }
    grid.point(best)
}

/// Up to `max_count` grid local minima, best first.
pub fn grid_local_minima<F: Fn(&DVector<f64>) -> f64>(
    f: F,
    bbox: &BoundingBox,
    points_per_axis: usize,
    max_count: usize,
) -> Vec<DVector<f64>> {
    let grid = GridEval::new(&f, bbox, points_per_axis.max(1));
    let mut mins: Vec<usize> = (0..grid.values.len()).filter(|&i| grid.is_local_min(i)).collect();
    mins.sort_by(|&a, &b| grid.values[a].total_cmp(&grid.values[b]).then(a.cmp(&b)));
    mins.truncate(max_count.max(1));
    mins.into_iter().map(|i| grid.point(i)).collect()
}

/// Largest componentwise relative error between `grad` and central
/// differences of `f` at `x`.
pub fn check_grad<F, G>(f: F, grad: G, x: &DVector<f64>, h: f64) -> f64
where
    F: Fn(&DVector<f64>) -> f64,
    G: Fn(&DVector<f64>) -> DVector<f64>,
{
    let g = grad(x);
    let fd: Vec<f64> = (0..x.len())
        .map(|k| {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += h;
            xm[k] -= h;
            (f(&xp) - f(&xm)) / (2.0 * h)
        })
        .collect();
    let scale = fd.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    fd.iter()
        .zip(g.iter())
        .map(|(fd, g)| (fd - g).abs() / fd.abs().max(1e-8 * scale).max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max)
}
