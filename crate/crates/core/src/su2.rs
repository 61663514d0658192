//! SU(2), its Lie algebra, the covering map onto SO(3) and the spin-s
//! irreducible representations.
//!
//! Group elements are stored as unit quaternions `(q0, q1, q2, q3)` standing
//! for the 2×2 matrix `q0·𝟙 − i(q1 σ₁ + q2 σ₂ + q3 σ₃)`. With this convention
//! the matrix product is the Hamilton product of quaternions and
//! `exp(−(i/2) α σ·n)` is the quaternion `(cos α/2, sin α/2 · n)`.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Mul, Neg};

use nalgebra::{DMatrix, Matrix2, Matrix3, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on `|q|² − 1` accepted by the checked constructors.
pub const UNIT_NORM_TOL: f64 = 1e-10;

/// Below this vector-part norm an element is treated as `±𝟙` and its axis is
/// flagged as arbitrary.
pub const DEGENERATE_AXIS_TOL: f64 = 1e-8;

const FOUR_PI: f64 = 4.0 * PI;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Su2Error {
    #[error("quaternion is not unit-norm: |q|² = {norm_sq}")]
    NotUnit { norm_sq: f64 },
    #[error("spin must be a non-negative multiple of 1/2, got {0}")]
    InvalidSpin(f64),
    #[error("eigenvalue decomposition of the spin-{0} representation failed")]
    Diagonalisation(f64),
}

/// Element of SU(2) in quaternion form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Su2Element {
    pub q0: f64,
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
}

impl Su2Element {
    pub const IDENTITY: Su2Element = Su2Element { q0: 1.0, q1: 0.0, q2: 0.0, q3: 0.0 };

    /// Checked constructor: the components must already be unit-norm.
    pub fn new(q0: f64, q1: f64, q2: f64, q3: f64) -> Result<Self, Su2Error> {
        let g = Su2Element { q0, q1, q2, q3 };
        let norm_sq = g.norm_sq();
        if !norm_sq.is_finite() || (norm_sq - 1.0).abs() > UNIT_NORM_TOL {
            return Err(Su2Error::NotUnit { norm_sq });
        }
        Ok(g)
    }

    /// Projects arbitrary (non-zero) components onto the unit sphere.
    pub fn normalized(q0: f64, q1: f64, q2: f64, q3: f64) -> Self {
        let n = (q0 * q0 + q1 * q1 + q2 * q2 + q3 * q3).sqrt();
        Su2Element { q0: q0 / n, q1: q1 / n, q2: q2 / n, q3: q3 / n }
    }

    pub fn from_array(q: [f64; 4]) -> Self {
        Su2Element { q0: q[0], q1: q[1], q2: q[2], q3: q[3] }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.q0, self.q1, self.q2, self.q3]
    }

    pub fn vector(self) -> Vector3<f64> {
        Vector3::new(self.q1, self.q2, self.q3)
    }

    pub fn norm_sq(self) -> f64 {
        self.q0 * self.q0 + self.q1 * self.q1 + self.q2 * self.q2 + self.q3 * self.q3
    }

    pub fn renormalize(self) -> Self {
        Self::normalized(self.q0, self.q1, self.q2, self.q3)
    }

    /// Inverse, which for unit quaternions is the conjugate.
    pub fn inverse(self) -> Self {
        Su2Element { q0: self.q0, q1: -self.q1, q2: -self.q2, q3: -self.q3 }
    }

    /// The 2×2 complex matrix `q0·𝟙 − i q·σ`.
    pub fn matrix(self) -> Matrix2<Complex64> {
        let c = Complex64::new;
        Matrix2::new(
            c(self.q0, -self.q3),
            c(-self.q2, -self.q1),
            c(self.q2, -self.q1),
            c(self.q0, self.q3),
        )
    }

    /// Largest absolute component difference.
    pub fn max_abs_diff(self, other: Su2Element) -> f64 {
        self.to_array()
            .iter()
            .zip(other.to_array().iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Component distance modulo the kernel `{±𝟙}` of the covering map.
    pub fn distance_mod_sign(self, other: Su2Element) -> f64 {
        self.max_abs_diff(other).min(self.max_abs_diff(-other))
    }

    pub fn is_central(self) -> bool {
        self.vector().norm() <= DEGENERATE_AXIS_TOL
    }

    /// Signed rotation angle of `self` about a given unit axis, assuming the
    /// element lies in the one-parameter subgroup generated by that axis.
    /// Reduced to `[0, 4π)`.
    pub fn angle_about(self, axis: &Vector3<f64>) -> f64 {
        reduce_4pi(2.0 * self.vector().dot(axis).atan2(self.q0))
    }
}

impl Mul for Su2Element {
    type Output = Su2Element;

    fn mul(self, rhs: Su2Element) -> Su2Element {
        let (a, b, c, d) = (self.q0, self.q1, self.q2, self.q3);
        let (e, f, g, h) = (rhs.q0, rhs.q1, rhs.q2, rhs.q3);
        Su2Element {
            q0: a * e - b * f - c * g - d * h,
            q1: a * f + b * e + c * h - d * g,
            q2: a * g - b * h + c * e + d * f,
            q3: a * h + b * g - c * f + d * e,
        }
    }
}

impl Neg for Su2Element {
    type Output = Su2Element;

    fn neg(self) -> Su2Element {
        Su2Element { q0: -self.q0, q1: -self.q1, q2: -self.q2, q3: -self.q3 }
    }
}

impl fmt::Display for Su2Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.q0, self.q1, self.q2, self.q3)
    }
}

/// Coefficients `b` of the algebra element `(i/2) σ·b`. Used as precession
/// field (angular velocity of classical spin).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlgebraVector(pub Vector3<f64>);

impl AlgebraVector {
    pub const ZERO: AlgebraVector = AlgebraVector(Vector3::new(0.0, 0.0, 0.0));

    pub fn new(b1: f64, b2: f64, b3: f64) -> Self {
        AlgebraVector(Vector3::new(b1, b2, b3))
    }

    pub fn as_vector(&self) -> &Vector3<f64> {
        &self.0
    }
}

impl From<Vector3<f64>> for AlgebraVector {
    fn from(v: Vector3<f64>) -> Self {
        AlgebraVector(v)
    }
}

/// Proper rotation matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation3(pub Matrix3<f64>);

impl Rotation3 {
    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn apply(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.0 * v
    }

    /// `max(|RᵀR − 𝟙|, |det R − 1|)`.
    pub fn orthogonality_defect(&self) -> f64 {
        let rtr = self.0.transpose() * self.0 - Matrix3::identity();
        rtr.amax().max((self.0.determinant() - 1.0).abs())
    }
}

impl Mul for Rotation3 {
    type Output = Rotation3;

    fn mul(self, rhs: Rotation3) -> Rotation3 {
        Rotation3(self.0 * rhs.0)
    }
}

/// Axis-angle form `g = exp(−(i/2) alpha σ·axis)` with `alpha ∈ [0, 4π)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisAngle {
    pub axis: Vector3<f64>,
    pub alpha: f64,
    /// Set for `±𝟙`, where the axis is arbitrary and reported as `e_z`.
    pub degenerate: bool,
}

pub fn reduce_4pi(alpha: f64) -> f64 {
    let r = alpha.rem_euclid(FOUR_PI);
    // rem_euclid may round up to exactly 4π for tiny negative inputs
    if r >= FOUR_PI {
        0.0
    } else {
        r
    }
}

/// `exp(−(i/2) σ·v t)`.
pub fn exp_algebra(v: &AlgebraVector, t: f64) -> Su2Element {
    let b = v.0 * t;
    let theta = b.norm();
    if theta == 0.0 {
        return Su2Element::IDENTITY;
    }
    let half = 0.5 * theta;
    let s = half.sin() / theta;
    Su2Element { q0: half.cos(), q1: s * b.x, q2: s * b.y, q3: s * b.z }
}

/// The covering homomorphism `φ: SU(2) → SO(3)`, defined by
/// `g (z·σ) g⁻¹ = (φ(g) z)·σ`.
pub fn covering_map(g: &Su2Element) -> Result<Rotation3, Su2Error> {
    let norm_sq = g.norm_sq();
    if !norm_sq.is_finite() || (norm_sq - 1.0).abs() > UNIT_NORM_TOL {
        return Err(Su2Error::NotUnit { norm_sq });
    }
    let w = g.q0;
    let q = g.vector();
    let m = Matrix3::identity() * (w * w - q.norm_squared())
        + q * q.transpose() * 2.0
        + q.cross_matrix() * (2.0 * w);
    Ok(Rotation3(m))
}

/// Canonical orientation of a rotation axis: the largest-magnitude component
/// is made positive.
fn canonical_axis(v: Vector3<f64>) -> Vector3<f64> {
    let imax = v.iamax();
    if v[imax] < 0.0 {
        -v
    } else {
        v
    }
}

/// Axis and angle of `g`. The axis sign is canonicalised, so `alpha` covers
/// the full range `[0, 4π)`.
pub fn axis_angle_of(g: &Su2Element) -> AxisAngle {
    let q = g.vector();
    let qn = q.norm();
    if qn <= DEGENERATE_AXIS_TOL {
        return AxisAngle {
            axis: Vector3::z(),
            alpha: reduce_4pi(2.0 * qn.atan2(g.q0)),
            degenerate: true,
        };
    }
    let axis = canonical_axis(q / qn);
    AxisAngle { axis, alpha: g.angle_about(&axis), degenerate: false }
}

/// Reconstructs the group element from axis-angle form.
pub fn from_axis_angle(aa: &AxisAngle) -> Su2Element {
    exp_algebra(&AlgebraVector(aa.axis), aa.alpha)
}

/// Spin quantum number `s ∈ ℕ₀/2`, stored as `2s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Spin {
    twice: u32,
}

impl Spin {
    pub const ZERO: Spin = Spin { twice: 0 };
    pub const HALF: Spin = Spin { twice: 1 };

    pub fn from_twice(twice: u32) -> Self {
        Spin { twice }
    }

    pub fn new(s: f64) -> Result<Self, Su2Error> {
        let t = 2.0 * s;
        if !t.is_finite() || t < 0.0 || (t - t.round()).abs() > 1e-12 || t > 1e6 {
            return Err(Su2Error::InvalidSpin(s));
        }
        Ok(Spin { twice: t.round() as u32 })
    }

    pub fn value(self) -> f64 {
        0.5 * self.twice as f64
    }

    pub fn twice(self) -> u32 {
        self.twice
    }

    pub fn dim(self) -> usize {
        self.twice as usize + 1
    }

    /// `m_s = −s, −s+1, …, s`.
    pub fn projections(self) -> impl Iterator<Item = f64> {
        let s = self.value();
        (0..=self.twice).map(move |k| k as f64 - s)
    }
}

impl fmt::Display for Spin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.twice.is_multiple_of(2) {
            write!(f, "{}", self.twice / 2)
        } else {
            write!(f, "{}/2", self.twice)
        }
    }
}

/// Eigenvalues `exp(−i m α)` of `π_s(g)`, `m = −s…s`, from the axis-angle
/// form of `g`.
pub fn spin_s_rep_eigenphases(s: Spin, g: &Su2Element) -> Vec<Complex64> {
    let alpha = axis_angle_of(g).alpha;
    s.projections().map(|m| Complex64::from_polar(1.0, -m * alpha)).collect()
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

fn binomial(n: u32, k: u32) -> f64 {
    factorial(n) / (factorial(k) * factorial(n - k))
}

fn complex_pow(z: Complex64, n: u32) -> Complex64 {
    (0..n).fold(Complex64::new(1.0, 0.0), |acc, _| acc * z)
}

/// Matrix of the spin-s representation `π_s(g)` acting on homogeneous
/// polynomials of degree 2s, `(π(g)p)(v) = p(v g)`, in the orthonormal basis
/// `ξ^k η^{2s−k} / √(k!(2s−k)!)`. Basis index `k` carries `m = k − s`.
pub fn representation_matrix(s: Spin, g: &Su2Element) -> DMatrix<Complex64> {
    let n = s.twice();
    let dim = s.dim();
    let gm = g.matrix();
    let (a, b, c, d) = (gm[(0, 0)], gm[(0, 1)], gm[(1, 0)], gm[(1, 1)]);
    let mut out = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
    for k in 0..=n {
        let norm_k = (factorial(k) * factorial(n - k)).sqrt();
        // (aξ + cη)^k (bξ + dη)^{n−k}
        for i in 0..=k {
            let t1 = complex_pow(a, i) * complex_pow(c, k - i) * binomial(k, i);
            for j in 0..=(n - k) {
                let t2 = complex_pow(b, j) * complex_pow(d, n - k - j) * binomial(n - k, j);
                let row = (i + j) as usize;
                let norm_row = (factorial(i + j) * factorial(n - i - j)).sqrt();
                out[(row, k as usize)] += t1 * t2 * (norm_row / norm_k);
            }
        }
    }
    out
}

/// Angular-momentum matrices `(J_x, J_y, J_z)` of spin `s` from the ladder
/// operator elements `J_± |m⟩ = √(s(s+1) − m(m±1)) |m±1⟩`, basis index
/// `k = m + s`.
pub fn spin_matrices(s: Spin) -> [DMatrix<Complex64>; 3] {
    let dim = s.dim();
    let sv = s.value();
    let zero = Complex64::new(0.0, 0.0);
    let mut jp = DMatrix::from_element(dim, dim, zero);
    let mut jz = DMatrix::from_element(dim, dim, zero);
    for k in 0..dim {
        let m = k as f64 - sv;
        jz[(k, k)] = Complex64::new(m, 0.0);
        if k + 1 < dim {
            jp[(k + 1, k)] = Complex64::new((sv * (sv + 1.0) - m * (m + 1.0)).sqrt(), 0.0);
        }
    }
    let jm = jp.adjoint();
    let jx = (&jp + &jm) * Complex64::new(0.5, 0.0);
    let jy = (&jp - &jm) * Complex64::new(0.0, -0.5);
    [jx, jy, jz]
}

/// Eigenvalues of the explicitly constructed representation matrix
/// `π_s(g)`, obtained by complex Schur decomposition.
pub fn rep_eigenvalues_by_diagonalisation(
    s: Spin,
    g: &Su2Element,
) -> Result<Vec<Complex64>, Su2Error> {
    let m = representation_matrix(s, g);
    let schur = nalgebra::linalg::Schur::new(m);
    let ev = schur.eigenvalues().ok_or(Su2Error::Diagonalisation(s.value()))?;
    Ok(ev.iter().copied().collect())
}

/// Greedy multiset distance between two lists of complex numbers of equal
/// length: the largest distance of a matched pair.
pub fn multiset_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut used = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    for za in a {
        let (idx, d) = b
            .iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .map(|(i, zb)| (i, (za - zb).norm()))
            .fold((usize::MAX, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
        if idx == usize::MAX {
            return f64::INFINITY;
        }
        used[idx] = true;
        worst = worst.max(d);
    }
    worst
}
