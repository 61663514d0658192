//! Numeric checks of commuting skew products: Poisson brackets, the spin
//! involution condition, the skew commutator `Δ(t, t′)`, holonomy
//! commutativity and latitude conservation.
//!
//! Bracket convention: `{f, g} = Σ ∂f/∂x_i ∂g/∂p_i − ∂f/∂p_i ∂g/∂x_i`, so
//! `{x_i, p_j} = δ_ij` and `d f/dt = {f, A}` along the flow of `A`.

use std::f64::consts::TAU;

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::actions_angles::{frequencies, ActionError};
use crate::dynamics::{
    evolve_skew, fd_grad_p, fd_grad_x, flow_and_cocycle, DynamicsError, HamiltonianModel, PhasePoint, SkewState,
};
use crate::models::SphericalModel;
use crate::su2::{axis_angle_of, Su2Element};

/// Default residual threshold for models with analytic gradients.
pub const ANALYTIC_TOL: f64 = 1e-6;
/// Default residual threshold when gradients come from finite differences.
pub const FINITE_DIFFERENCE_TOL: f64 = 1e-4;
/// Relative step for field Jacobians.
const FIELD_FD_STEP: f64 = 1e-5;

#[derive(Debug, Error)]
pub enum IntegrabilityError {
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Action(#[from] ActionError),
    #[error("non-finite bracket at p = {p:?}, x = {x:?}")]
    NonFinite { p: [f64; 3], x: [f64; 3] },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

fn non_finite(pt: &PhasePoint) -> IntegrabilityError {
    IntegrabilityError::NonFinite { p: pt.p.into(), x: pt.x.into() }
}

/// `{f, g}` at `pt` by central differences.
pub fn poisson_bracket<F, G>(f: F, g: G, pt: &PhasePoint) -> Result<f64, IntegrabilityError>
where
    F: Fn(&PhasePoint) -> f64,
    G: Fn(&PhasePoint) -> f64,
{
    let v = fd_grad_x(&f, pt).dot(&fd_grad_p(&g, pt)) - fd_grad_p(&f, pt).dot(&fd_grad_x(&g, pt));
    if v.is_finite() {
        Ok(v)
    } else {
        Err(non_finite(pt))
    }
}

/// `{A, B}` of two observables using their own gradients.
pub fn model_bracket<A, B>(a: &A, b: &B, pt: &PhasePoint) -> Result<f64, IntegrabilityError>
where
    A: HamiltonianModel + ?Sized,
    B: HamiltonianModel + ?Sized,
{
    let v = a.grad_x(pt).dot(&b.grad_p(pt)) - a.grad_p(pt).dot(&b.grad_x(pt));
    if v.is_finite() {
        Ok(v)
    } else {
        Err(non_finite(pt))
    }
}

/// Jacobians `(∂ℬ/∂x, ∂ℬ/∂p)` of the precession field, rows = components.
pub fn field_jacobians<M: HamiltonianModel + ?Sized>(model: &M, pt: &PhasePoint) -> (Matrix3<f64>, Matrix3<f64>) {
    let field = |q: &PhasePoint| model.precession_field(q).0;
    let hx = FIELD_FD_STEP * pt.x.norm().max(f64::MIN_POSITIVE);
    let hp = FIELD_FD_STEP * pt.p.norm().max(f64::MIN_POSITIVE);
    let mut jx = Matrix3::zeros();
    let mut jp = Matrix3::zeros();
    for i in 0..3 {
        let (mut a, mut b) = (*pt, *pt);
        a.x[i] += hx;
        b.x[i] -= hx;
        jx.set_column(i, &((field(&a) - field(&b)) / (2.0 * hx)));
        let (mut a, mut b) = (*pt, *pt);
        a.p[i] += hp;
        b.p[i] -= hp;
        jp.set_column(i, &((field(&a) - field(&b)) / (2.0 * hp)));
    }
    (jx, jp)
}

/// Componentwise `{ℬ_B, A}`.
pub fn field_bracket<B, A>(field_of: &B, a: &A, pt: &PhasePoint) -> Vector3<f64>
where
    B: HamiltonianModel + ?Sized,
    A: HamiltonianModel + ?Sized,
{
    let (jx, jp) = field_jacobians(field_of, pt);
    jx * a.grad_p(pt) - jp * a.grad_x(pt)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InvolutionResidual {
    pub vector: [f64; 3],
    pub norm: f64,
    /// Size of the individual terms; `norm / scale` is scale-free.
    pub scale: f64,
    pub relative: f64,
}

/// `{ℬ_k, A_j} + {A_k, ℬ_j} − ℬ_j × ℬ_k` for `j = a`, `k = b`. Vanishes iff
/// the two skew products commute to second order.
pub fn spin_involution_residual<A, B>(a: &A, b: &B, pt: &PhasePoint) -> Result<InvolutionResidual, IntegrabilityError>
where
    A: HamiltonianModel + ?Sized,
    B: HamiltonianModel + ?Sized,
{
    let ba = a.precession_field(pt).0;
    let bb = b.precession_field(pt).0;
    let (jxa, jpa) = field_jacobians(a, pt);
    let (jxb, jpb) = field_jacobians(b, pt);
    let (gpa, gxa) = (a.grad_p(pt), a.grad_x(pt));
    let (gpb, gxb) = (b.grad_p(pt), b.grad_x(pt));
    let t1 = jxb * gpa - jpb * gxa;
    let t2 = -(jxa * gpb - jpa * gxb);
    let t3 = ba.cross(&bb);
    let r = t1 + t2 - t3;
    let scale = ba.norm() * bb.norm()
        + jxb.norm() * gpa.norm()
        + jpb.norm() * gxa.norm()
        + jxa.norm() * gpb.norm()
        + jpa.norm() * gxb.norm();
    let norm = r.norm();
    if !norm.is_finite() || !scale.is_finite() {
        return Err(non_finite(pt));
    }
    let relative = if scale > 0.0 { norm / scale } else { norm };
    Ok(InvolutionResidual { vector: r.into(), norm, scale, relative })
}

/// Axis-aligned box in phase space for quasi-random sampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct SampleBox {
    pub p_lo: [f64; 3],
    pub p_hi: [f64; 3],
    pub x_lo: [f64; 3],
    pub x_hi: [f64; 3],
    #[serde(default)]
    pub min_radius: f64,
    #[serde(default)]
    pub min_momentum: f64,
}

/// Points with `|L| < MIN_SIN·|x||p|` are skipped: `L̂` is singular on `p ∥ x`.
pub const MIN_SIN: f64 = 0.2;
const HALTON_BASES: [u8; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

impl SampleBox {
    pub fn validate(&self) -> Result<(), IntegrabilityError> {
        for i in 0..3 {
            let ok = |lo: f64, hi: f64| lo.is_finite() && hi.is_finite() && lo < hi;
            if !ok(self.p_lo[i], self.p_hi[i]) || !ok(self.x_lo[i], self.x_hi[i]) {
                return Err(IntegrabilityError::InvalidInput(format!("empty sample box along axis {i}")));
            }
        }
        Ok(())
    }

    /// `n` Halton points (starting at index `skip + 1`) with two extra
    /// coordinates in `[0, 1)` each, filtered by radius, momentum and
    /// `|L|/(|x||p|) ≥ MIN_SIN`.
    pub fn sample(&self, n: usize, skip: usize) -> Result<Vec<(PhasePoint, [f64; 2])>, IntegrabilityError> {
        self.validate()?;
        let mut out = Vec::with_capacity(n);
        let mut idx = skip;
        let limit = skip + 1000 * n.max(1);
        while out.len() < n {
            idx += 1;
            if idx > limit {
                return Err(IntegrabilityError::InvalidInput(
                    "sample box contains too few admissible points".into(),
                ));
            }
            let u: Vec<f64> = HALTON_BASES.iter().map(|&b| halton::number(b, idx)).collect();
            let lerp = |lo: f64, hi: f64, t: f64| lo + (hi - lo) * t;
            let p = Vector3::from_fn(|i, _| lerp(self.p_lo[i], self.p_hi[i], u[i]));
            let x = Vector3::from_fn(|i, _| lerp(self.x_lo[i], self.x_hi[i], u[3 + i]));
            let pt = PhasePoint::new(p, x);
            if x.norm() < self.min_radius || p.norm() < self.min_momentum {
                continue;
            }
            if pt.angular_momentum().norm() < MIN_SIN * x.norm() * p.norm() {
                continue;
            }
            out.push((pt, [u[6], u[7]]));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvolutionReport {
    pub pair: (String, String),
    pub points: Vec<PhasePoint>,
    /// Scale-free residuals `|R|/scale`.
    pub residuals: Vec<f64>,
    pub absolute: Vec<f64>,
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

pub fn involution_report<A, B>(
    a: &A,
    b: &B,
    points: &[PhasePoint],
    tolerance: f64,
) -> Result<InvolutionReport, IntegrabilityError>
where
    A: HamiltonianModel + ?Sized,
    B: HamiltonianModel + ?Sized,
{
    if points.is_empty() {
        return Err(IntegrabilityError::InvalidInput("no sample points".into()));
    }
    let res: Vec<InvolutionResidual> =
        points.par_iter().map(|pt| spin_involution_residual(a, b, pt)).collect::<Result<_, _>>()?;
    let residuals: Vec<f64> = res.iter().map(|r| r.relative).collect();
    let max_residual = residuals.iter().copied().fold(0.0, f64::max);
    Ok(InvolutionReport {
        pair: (a.name().to_string(), b.name().to_string()),
        points: points.to_vec(),
        absolute: res.iter().map(|r| r.norm).collect(),
        residuals,
        max_residual,
        tolerance,
        pass: max_residual < tolerance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SkewCommutator {
    /// Raw quaternion difference `Δ(t, t′)`.
    pub delta: [f64; 4],
    /// `min_± max_i |Δ_i|` with the sign of one factor aligned.
    pub norm: f64,
    /// `|φ_a^{t′} φ_b^t ξ − φ_b^t φ_a^{t′} ξ|`.
    pub base_mismatch: f64,
}

/// `Δ(t, t′) = d_a(φ_b^t ξ, t′) d_b(ξ, t) − d_b(φ_a^{t′} ξ, t) d_a(ξ, t′)`.
pub fn skew_commutator<A, B>(
    a: &A,
    b: &B,
    pt: &PhasePoint,
    t: f64,
    t_prime: f64,
    tol: f64,
) -> Result<SkewCommutator, IntegrabilityError>
where
    A: HamiltonianModel + ?Sized,
    B: HamiltonianModel + ?Sized,
{
    let (pb, db) = flow_and_cocycle(b, pt, t, tol)?;
    let (pba, dab) = flow_and_cocycle(a, &pb, t_prime, tol)?;
    let (pa, da) = flow_and_cocycle(a, pt, t_prime, tol)?;
    let (pab, dba) = flow_and_cocycle(b, &pa, t, tol)?;
    let left = dab * db;
    let right = dba * da;
    let (l, r) = (left.to_array(), right.to_array());
    let delta = [l[0] - r[0], l[1] - r[1], l[2] - r[2], l[3] - r[3]];
    let base_mismatch = (pba.x - pab.x).norm() + (pba.p - pab.p).norm();
    Ok(SkewCommutator { delta, norm: left.distance_mod_sign(right), base_mismatch })
}

/// Norm of `Δ(t, t′)` modulo the double-cover sign.
pub fn skew_commutator_delta<A, B>(a: &A, b: &B, pt: &PhasePoint, t: f64, t_prime: f64, tol: f64) -> Result<f64, IntegrabilityError>
where
    A: HamiltonianModel + ?Sized,
    B: HamiltonianModel + ?Sized,
{
    Ok(skew_commutator(a, b, pt, t, t_prime, tol)?.norm)
}

/// `∂²Δ/∂t∂t′(0, 0)` by the symmetric four-point stencil with step `h`.
pub fn delta_mixed_derivative<A, B>(a: &A, b: &B, pt: &PhasePoint, h: f64, tol: f64) -> Result<[f64; 4], IntegrabilityError>
where
    A: HamiltonianModel + ?Sized,
    B: HamiltonianModel + ?Sized,
{
    let d = |s: f64, u: f64| skew_commutator(a, b, pt, s * h, u * h, tol).map(|c| c.delta);
    let (pp, pm, mp, mm) = (d(1.0, 1.0)?, d(1.0, -1.0)?, d(-1.0, 1.0)?, d(-1.0, -1.0)?);
    Ok(std::array::from_fn(|i| (pp[i] - pm[i] - mp[i] + mm[i]) / (4.0 * h * h)))
}

/// Leading-order prediction `∂²Δ/∂t∂t′(0, 0) = (i/2) σ·R`, i.e. the
/// quaternion `(0, −R/2)`, with `R` the involution residual of `(a, b)`.
pub fn delta_taylor_prediction<A, B>(a: &A, b: &B, pt: &PhasePoint) -> Result<[f64; 4], IntegrabilityError>
where
    A: HamiltonianModel + ?Sized,
    B: HamiltonianModel + ?Sized,
{
    let r = spin_involution_residual(a, b, pt)?.vector;
    Ok([0.0, -0.5 * r[0], -0.5 * r[1], -0.5 * r[2]])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HolonomyReport {
    pub commute: bool,
    pub max_commutator: f64,
    /// All non-central elements share one rotation axis (up to sign).
    pub shared_axis: bool,
    pub axis: Option<[f64; 3]>,
    pub max_axis_deviation: f64,
}

/// Pairwise commutators `‖d_j d_k − d_k d_j‖` and the common axis.
pub fn holonomy_commutativity(elements: &[Su2Element], tol: f64) -> HolonomyReport {
    let mut max_commutator: f64 = 0.0;
    for (i, a) in elements.iter().enumerate() {
        for b in &elements[i + 1..] {
            max_commutator = max_commutator.max((*a * *b).max_abs_diff(*b * *a));
        }
    }
    let axes: Vec<Vector3<f64>> =
        elements.iter().map(axis_angle_of).filter(|aa| !aa.degenerate).map(|aa| aa.axis).collect();
    let axis = axes.first().copied();
    let max_axis_deviation =
        axis.map(|n| axes.iter().map(|m| m.cross(&n).norm()).fold(0.0, f64::max)).unwrap_or(0.0);
    HolonomyReport {
        commute: max_commutator <= tol,
        max_commutator,
        shared_axis: max_axis_deviation <= tol,
        axis: axis.map(Into::into),
        max_axis_deviation,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LoopHolonomies {
    pub d_r: Su2Element,
    pub d_l: Su2Element,
    pub d_m: Su2Element,
    /// Phase-space distance between start and end of the radial loop.
    pub closure: f64,
}

/// Cocycles of the three basis cycles through `pt`: the radial loop is one
/// radial period of `H` followed by the `L`-flow for `−2π ω_L/ω_r`; the
/// `L` and `M` loops are their flows for time `2π`.
pub fn torus_loop_holonomies<S, L, M>(
    model: &S,
    l_gen: &L,
    m_gen: &M,
    pt: &PhasePoint,
    tol: f64,
) -> Result<LoopHolonomies, IntegrabilityError>
where
    S: SphericalModel + ?Sized,
    L: HamiltonianModel + ?Sized,
    M: HamiltonianModel + ?Sized,
{
    let energy = model.hamiltonian(pt);
    let l = pt.angular_momentum().norm();
    let fr = frequencies(model, energy, l)?;
    let (p1, d1) = flow_and_cocycle(model, pt, fr.radial_period(), tol)?;
    let (p2, d2) = flow_and_cocycle(l_gen, &p1, -TAU * fr.ratio(), tol)?;
    let closure = (p2.x - pt.x).norm() + (p2.p - pt.p).norm();
    let (_, d_l) = flow_and_cocycle(l_gen, pt, TAU, tol)?;
    let (_, d_m) = flow_and_cocycle(m_gen, pt, TAU, tol)?;
    Ok(LoopHolonomies { d_r: d2 * d1, d_l, d_m, closure })
}

fn angle_between(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

/// Runs the skew products `gens[i]` for `times[i]` in sequence and returns
/// the largest change of `∠(s, n(p, x))` seen after any leg.
pub fn latitude_drift<N>(
    gens: &[&dyn HamiltonianModel],
    times: &[f64],
    start: &SkewState,
    axis: N,
    tol: f64,
) -> Result<f64, IntegrabilityError>
where
    N: Fn(&PhasePoint) -> Vector3<f64>,
{
    if gens.len() != times.len() {
        return Err(IntegrabilityError::InvalidInput("one time per generator required".into()));
    }
    let theta0 = angle_between(&start.spin, &axis(&start.phase));
    let mut st = *start;
    let mut drift: f64 = 0.0;
    for (g, &t) in gens.iter().zip(times) {
        st = evolve_skew(*g, &st, t, tol)?;
        drift = drift.max((angle_between(&st.spin, &axis(&st.phase)) - theta0).abs());
    }
    Ok(drift)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{
        broken_axial_generator, ho_model, kepler_model, AxialAngularMomentum, KeplerModel, TotalAngularMomentum, UnitPreset,
    };
    use crate::su2::{exp_algebra, AlgebraVector};
    use proptest::prelude::*;

    fn box_atomic() -> SampleBox {
        SampleBox {
            p_lo: [-1.0; 3],
            p_hi: [1.0; 3],
            x_lo: [-2.0; 3],
            x_hi: [2.0; 3],
            min_radius: 0.5,
            min_momentum: 0.3,
        }
    }

    fn l_hat(pt: &PhasePoint) -> Vector3<f64> {
        pt.angular_momentum().normalize()
    }

    #[test]
    fn canonical_brackets() {
        let pt = PhasePoint::from_arrays([0.3, -0.2, 0.7], [1.1, 0.4, -0.6]);
        for i in 0..3 {
            for j in 0..3 {
                let v = poisson_bracket(|q| q.x[i], |q| q.p[j], &pt).unwrap();
                assert!((v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn angular_momentum_brackets_vanish() {
        let k = KeplerModel::from_preset(UnitPreset::Atomic);
        let k1 = kepler_model(1.0, 1.0, 0.5).unwrap();
        for (pt, _) in box_atomic().sample(20, 0).unwrap() {
            assert!(model_bracket(&TotalAngularMomentum, &AxialAngularMomentum, &pt).unwrap().abs() < 1e-12);
            assert!(model_bracket(&k, &TotalAngularMomentum, &pt).unwrap().abs() < 1e-7);
            let fd = poisson_bracket(|q| k1.hamiltonian(q), |q| q.angular_momentum().norm(), &pt).unwrap();
            assert!(fd.abs() < 1e-7, "{fd}");
        }
    }

    #[test]
    fn residual_of_spherical_pairs_is_small() {
        let k = KeplerModel::from_preset(UnitPreset::Atomic);
        let h = ho_model(1.0, 1.0, 0.3).unwrap();
        let pts: Vec<_> = box_atomic().sample(30, 0).unwrap().into_iter().map(|p| p.0).collect();
        for rep in [
            involution_report(&TotalAngularMomentum, &AxialAngularMomentum, &pts, ANALYTIC_TOL).unwrap(),
            involution_report(&k, &TotalAngularMomentum, &pts, ANALYTIC_TOL).unwrap(),
            involution_report(&k, &AxialAngularMomentum, &pts, ANALYTIC_TOL).unwrap(),
            involution_report(&h, &TotalAngularMomentum, &pts, ANALYTIC_TOL).unwrap(),
        ] {
            assert!(rep.pass, "{:?} max {}", rep.pair, rep.max_residual);
        }
    }

    #[test]
    fn broken_pair_has_analytic_residual() {
        // R = {e_x, L} + {M, L̂} − L̂ × e_x = (e_x − e_z) × L̂
        let pt = PhasePoint::from_arrays([0.3, -0.2, 0.7], [1.1, 0.4, -0.6]);
        let r = spin_involution_residual(&TotalAngularMomentum, &broken_axial_generator(), &pt).unwrap();
        let n = l_hat(&pt);
        let expect = (Vector3::x() - Vector3::z()).cross(&n);
        assert!((Vector3::from(r.vector) - expect).norm() < 1e-8);
        assert!(r.relative > 1e-2);
    }

    #[test]
    fn commutator_vanishes_at_zero_time() {
        let pt = PhasePoint::from_arrays([0.3, -0.2, 0.7], [1.1, 0.4, -0.6]);
        let b = broken_axial_generator();
        assert!(skew_commutator_delta(&TotalAngularMomentum, &b, &pt, 0.0, 1.3, 1e-10).unwrap() < 1e-12);
        assert!(skew_commutator_delta(&TotalAngularMomentum, &b, &pt, 0.7, 0.0, 1e-10).unwrap() < 1e-12);
    }

    #[test]
    fn commuting_pairs_have_small_delta() {
        let k = KeplerModel::from_preset(UnitPreset::Atomic);
        for (pt, u) in box_atomic().sample(5, 0).unwrap() {
            let (t, tp) = (TAU * u[0], TAU * u[1]);
            let c = skew_commutator(&TotalAngularMomentum, &AxialAngularMomentum, &pt, t, tp, 1e-10).unwrap();
            assert!(c.norm < 1e-6 && c.base_mismatch < 1e-6, "{c:?}");
            let c = skew_commutator(&k, &TotalAngularMomentum, &pt, t, tp, 1e-10).unwrap();
            assert!(c.norm < 1e-6, "{c:?}");
        }
    }

    #[test]
    fn broken_pair_matches_taylor_prediction() {
        let pt = PhasePoint::from_arrays([0.3, -0.2, 0.7], [1.1, 0.4, -0.6]);
        let b = broken_axial_generator();
        let num = delta_mixed_derivative(&TotalAngularMomentum, &b, &pt, 1e-3, 1e-12).unwrap();
        let pred = delta_taylor_prediction(&TotalAngularMomentum, &b, &pt).unwrap();
        let diff: f64 = (0..4).map(|i| (num[i] - pred[i]).powi(2)).sum::<f64>().sqrt();
        let size: f64 = pred.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(diff < 0.05 * size, "{num:?} vs {pred:?}");
        assert!(skew_commutator_delta(&TotalAngularMomentum, &b, &pt, 1.0, 1.0, 1e-10).unwrap() > 1e-2);
    }

    #[test]
    fn holonomies_of_one_parameter_subgroup_commute() {
        let v = AlgebraVector::new(0.3, -0.5, 0.8);
        let els: Vec<_> = [0.2, 1.1, 2.5, 4.0].iter().map(|&t| exp_algebra(&v, t)).collect();
        let r = holonomy_commutativity(&els, 1e-12);
        assert!(r.commute && r.shared_axis);
        let g = [exp_algebra(&AlgebraVector::new(1.0, 0.0, 0.0), 0.7), exp_algebra(&AlgebraVector::new(0.0, 1.0, 0.0), 0.9)];
        assert!(!holonomy_commutativity(&g, 1e-6).commute);
    }

    #[test]
    fn kepler_loop_holonomies_commute() {
        let k = KeplerModel::from_preset(UnitPreset::Atomic);
        let pt = PhasePoint::from_arrays([0.1, 0.8, 0.3], [1.0, 0.2, -0.3]);
        let lh = torus_loop_holonomies(&k, &TotalAngularMomentum, &AxialAngularMomentum, &pt, 1e-11).unwrap();
        assert!(lh.closure < 1e-6, "{}", lh.closure);
        let r = holonomy_commutativity(&[lh.d_r, lh.d_l, lh.d_m], 1e-6);
        assert!(r.commute && r.shared_axis, "{r:?}");
        // α_r = 2π: every loop holonomy is −𝟙
        for d in [lh.d_r, lh.d_l, lh.d_m] {
            assert!(d.max_abs_diff(-Su2Element::IDENTITY) < 1e-6, "{d}");
        }
        let h = ho_model(1.0, 1.0, 0.3).unwrap();
        let lh = torus_loop_holonomies(&h, &TotalAngularMomentum, &AxialAngularMomentum, &pt, 1e-11).unwrap();
        assert!(lh.closure < 1e-6, "{}", lh.closure);
        let r = holonomy_commutativity(&[lh.d_r, lh.d_l, lh.d_m], 1e-6);
        assert!(r.commute && r.shared_axis, "{r:?}");
        let n = Vector3::from(r.axis.unwrap());
        assert!(n.cross(&l_hat(&pt)).norm() < 1e-6);
    }

    #[test]
    fn latitude_conserved_along_commuting_flows() {
        let k = KeplerModel::from_preset(UnitPreset::Atomic);
        let pt = PhasePoint::from_arrays([0.1, 0.8, 0.3], [1.0, 0.2, -0.3]);
        let s0 = Vector3::new(0.3, -0.4, 0.866).normalize();
        let st = SkewState::with_spin(pt, s0);
        let gens: [&dyn HamiltonianModel; 4] = [&k, &TotalAngularMomentum, &AxialAngularMomentum, &k];
        let drift = latitude_drift(&gens, &[3.0, 1.2, -2.0, -1.5], &st, l_hat, 1e-11).unwrap();
        assert!(drift < 1e-6, "{drift}");
        let broken: [&dyn HamiltonianModel; 2] = [&TotalAngularMomentum, &broken_axial_generator()];
        assert!(latitude_drift(&broken, &[1.0, 1.0], &st, l_hat, 1e-11).unwrap() > 1e-2);
    }

    #[test]
    fn empty_box_rejected() {
        let mut b = box_atomic();
        b.x_hi[1] = b.x_lo[1];
        assert!(b.sample(3, 0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn bracket_is_antisymmetric(p in prop::array::uniform3(-1.0f64..1.0), x in prop::array::uniform3(-2.0f64..2.0)) {
            let pt = PhasePoint::from_arrays(p, x);
            let h = ho_model(1.0, 1.3, 0.1).unwrap();
            let f = |q: &PhasePoint| q.x[0] * q.p[1] + q.x[2].powi(2);
            let ab = poisson_bracket(|q| h.hamiltonian(q), f, &pt).unwrap();
            let ba = poisson_bracket(f, |q| h.hamiltonian(q), &pt).unwrap();
            prop_assert!((ab + ba).abs() <= 1e-8 * (1.0 + ab.abs()));
        }
    }
}
