//! Generalized Wahba cost on SO(3), the weight construction that makes it a
//! Morse function with prescribed eigenvalues, and its critical points.
//!
//! Direction sets are stored column-wise as `3 x k` matrices. With exactly two
//! directions the normalized cross product is appended as a third column, on
//! both the inertial and the measured side.

use nalgebra::{DMatrix, Dyn, OMatrix, SymmetricEigen, U3};

use crate::error::{GeoError, Result};
use crate::liegroup::{vex_skew, Mat3, Rotation, Vec3};

pub type Mat3xK = OMatrix<f64, U3, Dyn>;

const UNIT_TOL: f64 = 1e-9;
const RANK_TOL: f64 = 1e-9;
const GAP_TOL: f64 = 1e-9;

fn augment(m: Mat3xK) -> Mat3xK {
    if m.ncols() != 2 {
        return m;
    }
    let c = m.column(0).cross(&m.column(1));
    let n = c.norm();
    let c = if n > 0.0 { c / n } else { c };
    let mut out = m.insert_column(2, 0.0);
    out.set_column(2, &c);
    out
}

/// Inertially known unit directions, one per column.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionSet {
    e: Mat3xK,
}

impl DirectionSet {
    /// Requires at least two unit columns. Two columns get their cross product appended.
    pub fn new(e: Mat3xK) -> Result<Self> {
        if e.ncols() < 2 {
            return Err(GeoError::DimensionMismatch(format!(
                "need at least two directions, got {}",
                e.ncols()
            )));
        }
        for (j, c) in e.column_iter().enumerate() {
            let n = c.norm();
            if !((n - 1.0).abs() <= UNIT_TOL) {
                return Err(GeoError::DimensionMismatch(format!(
                    "direction {j} has norm {n}, expected 1"
                )));
            }
        }
        Ok(DirectionSet { e: augment(e) })
    }

    /// Normalizes every column first. Useful for tabulated data printed to a few digits.
    pub fn normalized(mut e: Mat3xK) -> Result<Self> {
        for mut c in e.column_iter_mut() {
            let n = c.norm();
            if n > 0.0 {
                c /= n;
            }
        }
        Self::new(e)
    }

    pub fn from_columns(cols: &[Vec3]) -> Result<Self> {
        Self::new(Mat3xK::from_columns(cols))
    }

    pub fn matrix(&self) -> &Mat3xK {
        &self.e
    }

    /// Number of columns after augmentation.
    pub fn len(&self) -> usize {
        self.e.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.e.ncols() == 0
    }
}

/// Measured body-frame directions, one per column, aligned with a [`DirectionSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct BodyMeasurementSet {
    u: Mat3xK,
}

impl BodyMeasurementSet {
    /// Column norms are not checked; noise perturbs them.
    pub fn new(u: Mat3xK) -> Self {
        BodyMeasurementSet { u: augment(u) }
    }

    pub fn from_columns(cols: &[Vec3]) -> Self {
        Self::new(Mat3xK::from_columns(cols))
    }

    pub fn matrix(&self) -> &Mat3xK {
        &self.u
    }

    pub fn len(&self) -> usize {
        self.u.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.u.ncols() == 0
    }
}

/// Symmetric positive definite `k x k` weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    w: DMatrix<f64>,
}

impl WeightMatrix {
    pub fn new(w: DMatrix<f64>) -> Result<Self> {
        if !w.is_square() {
            return Err(GeoError::DimensionMismatch(format!("weight matrix is {}x{}", w.nrows(), w.ncols())));
        }
        let asym = (&w - w.transpose()).amax();
        if asym > 1e-12 * w.amax().max(1.0) {
            return Err(GeoError::Config(format!("weight matrix is not symmetric ({asym:.3e})")));
        }
        let min = SymmetricEigen::new(w.clone()).eigenvalues.min();
        if !(min > 0.0) {
            return Err(GeoError::Config(format!("weight matrix is not positive definite (min eigenvalue {min:.3e})")));
        }
        Ok(WeightMatrix { w })
    }

    pub fn diagonal(d: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(d)))
    }

    /// Wraps a symmetric matrix without the definiteness check.
    pub fn new_unchecked(w: DMatrix<f64>) -> Self {
        WeightMatrix { w }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn dim(&self) -> usize {
        self.w.nrows()
    }
}

/// `K = E W E^T` with its eigen-decomposition, eigenvalues sorted descending.
#[derive(Debug, Clone, PartialEq)]
pub struct KMatrix {
    k: Mat3,
    d: Vec3,
    ue: Mat3,
}

impl KMatrix {
    /// Decomposes a symmetric 3x3 matrix. Eigenvalues must be positive and distinct.
    pub fn new(k: Mat3) -> Result<Self> {
        let k = (k + k.transpose()) * 0.5;
        let eig = SymmetricEigen::new(k);
        let mut idx = [0usize, 1, 2];
        idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let d = Vec3::new(eig.eigenvalues[idx[0]], eig.eigenvalues[idx[1]], eig.eigenvalues[idx[2]]);
        check_distinct(&[d.x, d.y, d.z])?;
        let mut ue = Mat3::from_columns(&[
            eig.eigenvectors.column(idx[0]).into_owned(),
            eig.eigenvectors.column(idx[1]).into_owned(),
            eig.eigenvectors.column(idx[2]).into_owned(),
        ]);
        if ue.determinant() < 0.0 {
            ue.column_mut(2).neg_mut();
        }
        Ok(KMatrix { k, d, ue })
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.k
    }

    /// Eigenvalues `d1 > d2 > d3`.
    pub fn eigenvalues(&self) -> &Vec3 {
        &self.d
    }

    /// Eigenvectors as columns, matching [`Self::eigenvalues`], with `det = +1`.
    pub fn eigenvectors(&self) -> &Mat3 {
        &self.ue
    }
}

fn check_distinct(d: &[f64; 3]) -> Result<()> {
    let scale = d.iter().fold(0.0f64, |a, &b| a.max(b.abs())).max(1.0);
    let positive = d.iter().all(|&x| x > 0.0 && x.is_finite());
    let distinct = (d[0] - d[1]).abs() > GAP_TOL * scale
        && (d[1] - d[2]).abs() > GAP_TOL * scale
        && (d[0] - d[2]).abs() > GAP_TOL * scale;
    if positive && distinct {
        Ok(())
    } else {
        Err(GeoError::DegenerateEigenvalues(*d))
    }
}

/// Scalar reshaping of the cost: `Phi(0) = 0`, `Phi' > 0`.
#[derive(Debug, Clone, Copy)]
pub struct PhiFunction {
    name: &'static str,
    f: fn(f64) -> f64,
    df: fn(f64) -> f64,
    linear: bool,
}

impl PhiFunction {
    pub fn identity() -> Self {
        PhiFunction { name: "identity", f: |x| x, df: |_| 1.0, linear: true }
    }

    /// `Phi(x) = x + x^2`.
    pub fn quadratic() -> Self {
        PhiFunction { name: "quadratic", f: |x| x + x * x, df: |x| 1.0 + 2.0 * x, linear: false }
    }

    /// Validates `Phi(0) = 0` and `Phi' > 0` on a grid over `[0, 100]`.
    pub fn custom(name: &'static str, f: fn(f64) -> f64, df: fn(f64) -> f64) -> Result<Self> {
        if f(0.0).abs() > 1e-12 {
            return Err(GeoError::Config(format!("phi function {name} has phi(0) = {}", f(0.0))));
        }
        for i in 0..=1000 {
            let x = 0.1 * i as f64;
            if !(df(x) > 0.0) {
                return Err(GeoError::Config(format!("phi function {name} has phi'({x}) <= 0")));
            }
        }
        Ok(PhiFunction { name, f, df, linear: false })
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn value(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        (self.df)(x)
    }

    /// True when `Phi'` is identically one, so callers may skip evaluating the cost.
    pub fn is_identity(&self) -> bool {
        self.linear
    }
}

impl Default for PhiFunction {
    fn default() -> Self {
        Self::identity()
    }
}

fn check_dims(um: &BodyMeasurementSet, e: &DirectionSet, w: &WeightMatrix) -> Result<()> {
    if um.len() != e.len() || w.dim() != e.len() {
        return Err(GeoError::DimensionMismatch(format!(
            "{} inertial directions, {} measurements, {}x{} weights",
            e.len(),
            um.len(),
            w.dim(),
            w.dim()
        )));
    }
    Ok(())
}

/// `U0 = 1/2 <E - R U, (E - R U) W>`.
pub fn wahba_cost0(rhat: &Rotation, um: &BodyMeasurementSet, e: &DirectionSet, w: &WeightMatrix) -> Result<f64> {
    check_dims(um, e, w)?;
    let r = e.matrix() - rhat.matrix() * um.matrix();
    let rw = &r * w.matrix();
    Ok(0.5 * r.component_mul(&rw).sum())
}

pub fn generalized_cost(
    rhat: &Rotation,
    um: &BodyMeasurementSet,
    e: &DirectionSet,
    w: &WeightMatrix,
    phi: &PhiFunction,
) -> Result<f64> {
    Ok(phi.value(wahba_cost0(rhat, um, e, w)?))
}

/// `L = E W U^T`.
pub fn l_matrix(e: &DirectionSet, w: &WeightMatrix, um: &BodyMeasurementSet) -> Result<Mat3> {
    check_dims(um, e, w)?;
    Ok(e.matrix() * w.matrix() * um.matrix().transpose())
}

/// `S_L(R) = vex(L^T R - R^T L)`. The cost varies as `S_L^T Sigma` along `R exp(Sigma^)`.
pub fn s_l(rhat: &Rotation, l: &Mat3) -> Vec3 {
    vex_skew(&(l.transpose() * rhat.matrix())) * 2.0
}

/// `S_K(Q) = vex(K Q - Q^T K)`.
pub fn s_k(q: &Rotation, k: &KMatrix) -> Vec3 {
    vex_skew(&(k.matrix() * q.matrix())) * 2.0
}

/// Lemma-1 weights: the first three right singular directions of `E` get weights
/// `d_i / sigma_i^2`, the rest get 1. Then `E W E^T` has eigenvalues exactly `d`.
///
/// `d` is paired with the singular values in descending order.
pub fn build_weights(e: &DirectionSet, d: [f64; 3]) -> Result<(WeightMatrix, KMatrix)> {
    check_distinct(&d)?;
    let k = e.len();
    let svd = e.matrix().clone().svd(true, true);
    let (u, vt) = (svd.u.expect("svd u"), svd.v_t.expect("svd v_t"));
    let s = svd.singular_values;
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    let ratio = s[idx[2]] / s[idx[0]];
    if !(ratio >= RANK_TOL) {
        return Err(GeoError::RankDeficientDirections { ratio });
    }
    let mut w = DMatrix::<f64>::identity(k, k);
    let mut kmat = Mat3::zeros();
    for (slot, &i) in idx.iter().enumerate() {
        let v = vt.row(i).transpose();
        let sig = s[i];
        // Replace the unit weight along v with d / sigma^2.
        w += &v * v.transpose() * (d[slot] / (sig * sig) - 1.0);
        let ue = u.column(i);
        kmat += ue * ue.transpose() * d[slot];
    }
    let w = (&w + w.transpose()) * 0.5;
    let km = KMatrix::new(kmat)?;
    Ok((WeightMatrix::new_unchecked(w), km))
}

/// `K = E W E^T` for arbitrary SPD weights.
pub fn k_from_weights(e: &DirectionSet, w: &WeightMatrix) -> Result<KMatrix> {
    if w.dim() != e.len() {
        return Err(GeoError::DimensionMismatch(format!("{} directions, {}x{} weights", e.len(), w.dim(), w.dim())));
    }
    KMatrix::new(e.matrix() * w.matrix() * e.matrix().transpose())
}

/// Hessian of `<I - Q, K>` at a critical point: `tr(Q^T K) I - Q^T K`.
pub fn hessian_k(q: &Rotation, k: &KMatrix) -> Mat3 {
    let qk = q.matrix().transpose() * k.matrix();
    Mat3::identity() * qk.trace() - qk
}

/// A critical point of `<I - Q, K>` with its Morse index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalPoint {
    pub q: Rotation,
    pub index: usize,
}

/// `{I, Q1, Q2, Q3}` with `Q_i = 2 u_i u_i^T - I`, in order of increasing index.
pub fn critical_points(k: &KMatrix) -> Result<[CriticalPoint; 4]> {
    let d = k.eigenvalues();
    check_distinct(&[d.x, d.y, d.z])?;
    let mut out = [CriticalPoint { q: Rotation::identity(), index: 0 }; 4];
    for i in 0..4 {
        let q = if i == 0 {
            Rotation::identity()
        } else {
            let u = k.eigenvectors().column(i - 1).into_owned();
            Rotation::from_matrix_unchecked(u * u.transpose() * 2.0 - Mat3::identity())
        };
        let h = hessian_k(&q, k);
        let ev = SymmetricEigen::new((h + h.transpose()) * 0.5).eigenvalues;
        let scale = d.x.abs();
        let index = ev.iter().filter(|&&x| x < -1e-12 * scale).count();
        out[i] = CriticalPoint { q, index };
    }
    Ok(out)
}
