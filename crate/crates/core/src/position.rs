//! Position-domain analysis: the pseudo-true position implied by biased
//! delays, and the MCRB/LB of a range-based position fit.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{grid_local_minima, minimize_descent, BoundingBox, DescentSpec};
use crate::ser;

/// Relative eigenvalue floor below which a Fisher-type matrix is singular.
const SINGULAR_RATIO: f64 = 1e-12;
/// Grid minima used as descent seeds.
const MAX_SEEDS: usize = 6;
/// Two descents ending closer than this (m) found the same basin.
const SAME_BASIN: f64 = 1e-6;

/// Diagonal delay covariances of the eavesdroppers: the true one (the MCRB
/// of each pseudo-true delay) and the one the position fit assumes (the CRB).
#[derive(Debug, Clone, PartialEq)]
pub struct DelayCovariances {
    true_cov: DVector<f64>,
    model_cov: DVector<f64>,
}

impl DelayCovariances {
    pub fn new(true_cov: DVector<f64>, model_cov: DVector<f64>) -> Result<Self> {
        if true_cov.len() != model_cov.len() {
            return Err(Error::Validation("covariance diagonals differ in length".into()));
        }
        if true_cov.iter().chain(model_cov.iter()).any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Validation("delay variances must be positive and finite".into()));
        }
        Ok(Self { true_cov, model_cov })
    }

    pub fn true_cov(&self) -> &DVector<f64> {
        &self.true_cov
    }
    pub fn model_cov(&self) -> &DVector<f64> {
        &self.model_cov
    }
}

/// How the outer-product matrix `B` of the position sandwich is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BMode {
    /// Model covariance only, residual measured from Alice's true delays.
    #[default]
    PaperLiteral,
    /// Residual at the pseudo-true position and the true delay covariance in
    /// the score variance.
    TrueCovariance,
}

impl std::str::FromStr for BMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" | "paper_literal" => Ok(BMode::PaperLiteral),
            "true" | "true_covariance" => Ok(BMode::TrueCovariance),
            other => Err(Error::Validation(format!("unknown B mode `{other}` (expected paper|true)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizedFimMatrix {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub mode: BMode,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PositionBoundReport {
    #[serde(serialize_with = "ser::vector")]
    pub pseudo_true: DVector<f64>,
    #[serde(serialize_with = "ser::matrix")]
    pub mcrb_matrix: DMatrix<f64>,
    #[serde(serialize_with = "ser::matrix")]
    pub bias_matrix: DMatrix<f64>,
    #[serde(serialize_with = "ser::matrix")]
    pub lb_matrix: DMatrix<f64>,
    pub rmse_lb: f64,
    pub bias_norm: f64,
    pub mcrb_rmse: f64,
    pub crb_legit_rmse: Option<f64>,
}

fn check_point(p: &DVector<f64>, anchors: &[DVector<f64>]) -> Result<Vec<f64>> {
    anchors
        .iter()
        .enumerate()
        .map(|(i, a)| {
            if a.len() != p.len() {
                return Err(Error::Validation(format!("anchor {i} has dimension {}, expected {}", a.len(), p.len())));
            }
            let d = (p - a).norm();
            if d == 0.0 {
                Err(Error::CoincidentPoint(i))
            } else {
                Ok(d)
            }
        })
        .collect()
}

/// `||p - p_i|| / c` for every anchor.
pub fn true_delays(p: &DVector<f64>, anchors: &[DVector<f64>], c: f64) -> Result<DVector<f64>> {
    Ok(DVector::from_iterator(anchors.len(), check_point(p, anchors)?.into_iter().map(|d| d / c)))
}

/// Rows `(p - p_i)^T / (c ||p - p_i||)`.
pub fn delay_jacobian(p: &DVector<f64>, anchors: &[DVector<f64>], c: f64) -> Result<DMatrix<f64>> {
    let dists = check_point(p, anchors)?;
    let mut j = DMatrix::zeros(anchors.len(), p.len());
    for (i, (a, d)) in anchors.iter().zip(dists).enumerate() {
        let row = (p - a) / (c * d);
        j.row_mut(i).copy_from(&row.transpose());
    }
    Ok(j)
}

/// Diagonal second-derivative factor `1 / (c ||p - p_i||)` of each delay.
pub fn delay_hessian_diag(p: &DVector<f64>, anchors: &[DVector<f64>], c: f64) -> Result<DVector<f64>> {
    Ok(DVector::from_iterator(anchors.len(), check_point(p, anchors)?.into_iter().map(|d| 1.0 / (c * d))))
}

/// Weighted range residual `sum_i w_i (||p - p_i|| - r_i)^2`, in m^2.
///
/// Equivalent to the delay-domain fit `sum_i (tau_i(p) - tau_bar_i)^2 / var_i`
/// up to the positive factor `c^2 / max_i(1/var_i)`, so both share minimizers.
#[derive(Debug, Clone)]
pub struct RangeObjective {
    anchors: Vec<DVector<f64>>,
    ranges: Vec<f64>,
    weights: Vec<f64>,
}

impl RangeObjective {
    pub fn new(anchors: &[DVector<f64>], delays: &DVector<f64>, variances: &DVector<f64>, c: f64) -> Result<Self> {
        if anchors.len() != delays.len() || anchors.len() != variances.len() {
            return Err(Error::Validation("anchors, delays and variances must have equal length".into()));
        }
        if anchors.is_empty() {
            return Err(Error::Validation("position fit needs at least one anchor".into()));
        }
        if variances.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Validation("fit variances must be positive and finite".into()));
        }
        let inv: Vec<f64> = variances.iter().map(|v| 1.0 / v).collect();
        let top = inv.iter().copied().fold(0.0, f64::max);
        Ok(Self {
            anchors: anchors.to_vec(),
            ranges: delays.iter().map(|t| t * c).collect(),
            weights: inv.into_iter().map(|w| w / top).collect(),
        })
    }

    pub fn value(&self, p: &DVector<f64>) -> f64 {
        self.anchors
            .iter()
            .zip(&self.ranges)
            .zip(&self.weights)
            .map(|((a, r), w)| w * ((p - a).norm() - r).powi(2))
            .sum()
    }

    pub fn gradient(&self, p: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(p.len());
        for ((a, r), w) in self.anchors.iter().zip(&self.ranges).zip(&self.weights) {
            let diff = p - a;
            let d = diff.norm();
            if d > 0.0 {
                g += diff * (2.0 * w * (d - r) / d);
            }
        }
        g
    }
}

/// Solution of a position fit plus the best competing basin, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionFit {
    pub point: DVector<f64>,
    pub value: f64,
    pub alternate: Option<DVector<f64>>,
}

/// Minimizer of the weighted range residual over the seed box.
///
/// Descents start from the best grid minima. Basins whose residuals tie
/// (e.g. the two exact intersections of two range circles) are resolved in
/// favour of the one nearest `reference`; without a reference the best grid
/// point's basin wins. The best other basin is returned as `alternate`.
pub fn pseudo_true_position(
    anchors: &[DVector<f64>],
    delays: &DVector<f64>,
    variances: &DVector<f64>,
    c: f64,
    seed_box: &BoundingBox,
    reference: Option<&DVector<f64>>,
) -> Result<PositionFit> {
    if seed_box.dim() != anchors.first().map_or(0, |a| a.len()) {
        return Err(Error::Validation("seed box dimension does not match the anchors".into()));
    }
    let obj = RangeObjective::new(anchors, delays, variances, c)?;
    let per_axis = if seed_box.dim() <= 2 { 81 } else { 31 };
    let seeds = grid_local_minima(|p| obj.value(p), seed_box, per_axis, MAX_SEEDS);
    let spec = DescentSpec {
        grad_tol: 1e-11,
        ..DescentSpec::default()
    };

    let mut basins: Vec<(DVector<f64>, f64)> = Vec::new();
    let mut last_err = None;
    for seed in seeds {
        match minimize_descent(|p| obj.value(p), |p| obj.gradient(p), seed, &spec) {
            Ok(out) => {
                if !basins.iter().any(|(x, _)| (x - &out.x).norm() < SAME_BASIN) {
                    basins.push((out.x, out.value));
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    if basins.is_empty() {
        return Err(last_err.unwrap_or(Error::SingularGeometry));
    }

    let best = basins.iter().map(|(_, v)| *v).fold(f64::INFINITY, f64::min);
    let tied = |v: f64| v <= best * (1.0 + 1e-6) + 1e-10;
    let chosen = match reference {
        Some(r) => basins
            .iter()
            .enumerate()
            .filter(|(_, (_, v))| tied(*v))
            .min_by(|(_, (a, _)), (_, (b, _))| (a - r).norm().total_cmp(&(b - r).norm()))
            .map(|(i, _)| i),
        None => basins.iter().position(|(_, v)| tied(*v)),
    }
    .unwrap_or(0);
    let alternate = basins
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != chosen)
        .min_by(|(_, (_, a)), (_, (_, b))| a.total_cmp(b))
        .map(|(_, (x, _))| x.clone());
    let (point, value) = basins.swap_remove(chosen);
    Ok(PositionFit { point, value, alternate })
}

/// Generalized Fisher matrices of the position fit at `p_bar`.
///
/// The delay residual is `tau(residual_at) - tau_bar`; the Jacobian and the
/// second-derivative factors are evaluated at `p_bar`.
pub fn generalized_fims(
    p_bar: &DVector<f64>,
    anchors: &[DVector<f64>],
    tau_bar: &DVector<f64>,
    residual_at: &DVector<f64>,
    cov: &DelayCovariances,
    mode: BMode,
    c: f64,
) -> Result<GeneralizedFimMatrix> {
    if tau_bar.len() != anchors.len() || cov.model_cov().len() != anchors.len() {
        return Err(Error::Validation("delay vectors must match the anchor count".into()));
    }
    let j = delay_jacobian(p_bar, anchors, c)?;
    let psi = delay_hessian_diag(p_bar, anchors, c)?;
    let eps = true_delays(residual_at, anchors, c)? - tau_bar;
    let inv_model = cov.model_cov().map(|v| 1.0 / v);
    let dim = p_bar.len();

    let w = DMatrix::from_diagonal(&inv_model);
    let fisher = j.transpose() * &w * &j;
    let curvature: f64 = psi.iter().zip(eps.iter()).zip(inv_model.iter()).map(|((p, e), w)| p * e * w).sum();
    let a = DMatrix::identity(dim, dim) * curvature - &fisher;

    let g = j.transpose() * eps.component_mul(&inv_model);
    let spread = match mode {
        BMode::PaperLiteral => fisher,
        BMode::TrueCovariance => {
            let mid = DMatrix::from_diagonal(&inv_model.component_mul(cov.true_cov()).component_mul(&inv_model));
            j.transpose() * mid * &j
        }
    };
    let b = &g * g.transpose() + spread;
    Ok(GeneralizedFimMatrix { a, b, mode })
}

/// `A^-1 B A^-1`, symmetrized.
pub fn mcrb_position(gf: &GeneralizedFimMatrix) -> Result<DMatrix<f64>> {
    let sv = gf.a.clone().svd(false, false).singular_values;
    let (lo, hi) = (sv.min(), sv.max());
    if !(hi > 0.0 && lo > SINGULAR_RATIO * hi) {
        return Err(Error::SingularA);
    }
    let inv = gf.a.clone().try_inverse().ok_or(Error::SingularA)?;
    let m = &inv * &gf.b * inv.transpose();
    Ok((&m + m.transpose()) * 0.5)
}

/// Bias outer product and total bound around the true position.
pub fn lb_position(p_a: &DVector<f64>, p_bar: &DVector<f64>, mcrb: &DMatrix<f64>) -> PositionBoundReport {
    let bias = p_a - p_bar;
    let bias_matrix = &bias * bias.transpose();
    let lb_matrix = mcrb + &bias_matrix;
    PositionBoundReport {
        pseudo_true: p_bar.clone(),
        rmse_lb: lb_matrix.trace().sqrt(),
        bias_norm: bias.norm(),
        mcrb_rmse: mcrb.trace().sqrt(),
        mcrb_matrix: mcrb.clone(),
        bias_matrix,
        lb_matrix,
        crb_legit_rmse: None,
    }
}

/// Classical position CRB `(J^T Xi^-1 J)^-1` from per-anchor delay variances.
pub fn crb_position(p: &DVector<f64>, anchors: &[DVector<f64>], variances: &DVector<f64>, c: f64) -> Result<DMatrix<f64>> {
    if variances.len() != anchors.len() || variances.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::Validation("delay variances must be positive, one per anchor".into()));
    }
    let j = delay_jacobian(p, anchors, c)?;
    let fisher = j.transpose() * DMatrix::from_diagonal(&variances.map(|v| 1.0 / v)) * &j;
    let eig = fisher.clone().symmetric_eigen().eigenvalues;
    if !(eig.max() > 0.0 && eig.min() > SINGULAR_RATIO * eig.max()) {
        return Err(Error::SingularGeometry);
    }
    let inv = fisher.try_inverse().ok_or(Error::SingularGeometry)?;
    Ok((&inv + inv.transpose()) * 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::check_grad;
    use approx::assert_relative_eq;

    const C: f64 = crate::signal::SPEED_OF_LIGHT;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    fn eve_pair() -> Vec<DVector<f64>> {
        vec![v(&[0.0, 0.0]), v(&[80.0, 160.0])]
    }

    fn square_box() -> BoundingBox {
        BoundingBox::new(vec![0.0, 0.0], vec![200.0, 200.0]).unwrap()
    }

    #[test]
    fn geometry_examples() {
        let origin = vec![v(&[0.0, 0.0])];
        assert_relative_eq!(true_delays(&v(&[3.0, 4.0]), &origin, C).unwrap()[0], 5.0 / C);
        let d = true_delays(&v(&[80.0, 80.0]), &origin, C).unwrap()[0];
        assert_relative_eq!(d * C, 113.137, max_relative = 1e-5);

        let j = delay_jacobian(&v(&[7.0, 0.0]), &origin, C).unwrap();
        assert_relative_eq!(j[(0, 0)], 1.0 / C);
        assert_eq!(j[(0, 1)], 0.0);
        assert_relative_eq!(delay_hessian_diag(&v(&[3.0, 4.0]), &origin, C).unwrap()[0], 1.0 / (5.0 * C));

        assert!(matches!(true_delays(&v(&[0.0, 0.0]), &origin, C), Err(Error::CoincidentPoint(0))));
    }

    #[test]
    fn delays_are_translation_invariant() {
        let shift = v(&[-13.0, 42.5]);
        let p = v(&[80.0, 80.0]);
        let moved: Vec<_> = eve_pair().iter().map(|a| a + &shift).collect();
        let a = true_delays(&p, &eve_pair(), C).unwrap();
        let b = true_delays(&(&p + &shift), &moved, C).unwrap();
        assert!((a - b).amax() < 1e-20);
    }

    #[test]
    fn fit_recovers_exact_delays() {
        let p = v(&[80.0, 80.0]);
        let tau = true_delays(&p, &eve_pair(), C).unwrap();
        let var = v(&[1e-22, 2e-22]);
        let fit = pseudo_true_position(&eve_pair(), &tau, &var, C, &square_box(), Some(&p)).unwrap();
        assert!((&fit.point - &p).norm() < 1e-9, "{}", fit.point);
        // the mirror intersection is the other basin
        let alt = fit.alternate.expect("mirror basin");
        assert!((alt - v(&[16.0, 112.0])).norm() < 1e-6);
    }

    #[test]
    fn range_gradient_matches_finite_differences() {
        let tau = v(&[110.0 / C, 85.0 / C]);
        let obj = RangeObjective::new(&eve_pair(), &tau, &v(&[3e-22, 1e-22]), C).unwrap();
        let x = v(&[70.0, 95.0]);
        assert!(check_grad(|p| obj.value(p), |p| obj.gradient(p), &x, 1e-5) < 1e-6);
    }

    #[test]
    fn sandwich_identity() {
        let gf = GeneralizedFimMatrix {
            a: -DMatrix::identity(2, 2),
            b: DMatrix::identity(2, 2),
            mode: BMode::PaperLiteral,
        };
        assert_eq!(mcrb_position(&gf).unwrap(), DMatrix::identity(2, 2));
        let singular = GeneralizedFimMatrix {
            a: DMatrix::zeros(2, 2),
            ..gf
        };
        assert!(matches!(mcrb_position(&singular), Err(Error::SingularA)));
    }

    #[test]
    fn mismatch_free_mcrb_is_crb() {
        let p = v(&[80.0, 80.0]);
        let tau = true_delays(&p, &eve_pair(), C).unwrap();
        let var = v(&[1.2e-24, 0.6e-24]);
        let cov = DelayCovariances::new(var.clone(), var.clone()).unwrap();
        let crb = crb_position(&p, &eve_pair(), &var, C).unwrap();
        for mode in [BMode::PaperLiteral, BMode::TrueCovariance] {
            let gf = generalized_fims(&p, &eve_pair(), &tau, &p, &cov, mode, C).unwrap();
            let m = mcrb_position(&gf).unwrap();
            assert!((&m - &crb).amax() < 1e-9 * crb.amax());
        }
    }

    #[test]
    fn orthogonal_anchors_crb() {
        let p = v(&[0.0, 0.0]);
        let anchors = vec![v(&[10.0, 0.0]), v(&[0.0, 25.0])];
        let s2 = 4e-20;
        let crb = crb_position(&p, &anchors, &v(&[s2, s2]), C).unwrap();
        let want = DMatrix::identity(2, 2) * (C * C * s2);
        assert!((&crb - &want).amax() < 1e-12 * want.amax());
    }

    #[test]
    fn collinear_geometry_is_singular() {
        let p = v(&[5.0, 0.0]);
        let anchors = vec![v(&[0.0, 0.0]), v(&[10.0, 0.0])];
        let r = crb_position(&p, &anchors, &v(&[1e-20, 1e-20]), C);
        assert!(matches!(r, Err(Error::SingularGeometry)));
    }

    #[test]
    fn lb_is_mcrb_plus_bias() {
        let mcrb = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 3.0]);
        let r = lb_position(&v(&[80.0, 80.0]), &v(&[83.0, 76.0]), &mcrb);
        assert_eq!(r.lb_matrix, &mcrb + &r.bias_matrix);
        assert_relative_eq!(r.bias_norm, 5.0, max_relative = 1e-15);
        assert_relative_eq!(r.rmse_lb.powi(2), r.mcrb_rmse.powi(2) + 25.0, max_relative = 1e-12);
        let same = lb_position(&v(&[1.0, 1.0]), &v(&[1.0, 1.0]), &mcrb);
        assert_eq!(same.lb_matrix, mcrb);
    }

    #[test]
    fn bmode_parsing() {
        assert_eq!("paper".parse::<BMode>().unwrap(), BMode::PaperLiteral);
        assert_eq!("true".parse::<BMode>().unwrap(), BMode::TrueCovariance);
        assert!("both".parse::<BMode>().is_err());
    }
}
