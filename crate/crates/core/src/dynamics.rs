//! Hamiltonian flow, SU(2) spin transport and classical spin precession,
//! integrated together as one coupled system.
//!
//! Phase space is always three-dimensional here; planar problems embed with
//! `z = p_z = 0`.

use std::io::{self, Write};

use nalgebra::{Matrix6, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ode::{self, Control, IntegrationError, IntegratorConfig, OdeSystem};
use crate::su2::{covering_map, AlgebraVector, Su2Element};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub p: Vector3<f64>,
    pub x: Vector3<f64>,
}

impl PhasePoint {
    pub fn new(p: Vector3<f64>, x: Vector3<f64>) -> Self {
        PhasePoint { p, x }
    }

    pub fn from_arrays(p: [f64; 3], x: [f64; 3]) -> Self {
        PhasePoint { p: Vector3::from(p), x: Vector3::from(x) }
    }

    pub fn angular_momentum(&self) -> Vector3<f64> {
        self.x.cross(&self.p)
    }

    pub fn radius(&self) -> f64 {
        self.x.norm()
    }

    /// Radial momentum `x·p / |x|`.
    pub fn radial_momentum(&self) -> f64 {
        self.x.dot(&self.p) / self.x.norm()
    }

    pub fn is_finite(&self) -> bool {
        self.p.iter().chain(self.x.iter()).all(|v| v.is_finite())
    }
}

/// Relative step for finite-difference derivatives.
pub const FD_STEP: f64 = 1e-6;

fn fd_step(v: f64) -> f64 {
    FD_STEP * (1.0 + v.abs())
}

/// Central-difference gradient of `f` with respect to momentum.
pub fn fd_grad_p<F: Fn(&PhasePoint) -> f64>(f: F, pt: &PhasePoint) -> Vector3<f64> {
    Vector3::from_fn(|i, _| {
        let h = fd_step(pt.p[i]);
        let mut a = *pt;
        let mut b = *pt;
        a.p[i] += h;
        b.p[i] -= h;
        (f(&a) - f(&b)) / (2.0 * h)
    })
}

/// Central-difference gradient of `f` with respect to position.
pub fn fd_grad_x<F: Fn(&PhasePoint) -> f64>(f: F, pt: &PhasePoint) -> Vector3<f64> {
    Vector3::from_fn(|i, _| {
        let h = fd_step(pt.x[i]);
        let mut a = *pt;
        let mut b = *pt;
        a.x[i] += h;
        b.x[i] -= h;
        (f(&a) - f(&b)) / (2.0 * h)
    })
}

/// A classical observable together with its spin precession field.
/// Implementors provide at least the Hamiltonian and the field; gradients
/// default to central differences.
pub trait HamiltonianModel: Send + Sync {
    fn name(&self) -> &str {
        "model"
    }

    fn hamiltonian(&self, pt: &PhasePoint) -> f64;

    fn grad_p(&self, pt: &PhasePoint) -> Vector3<f64> {
        fd_grad_p(|q| self.hamiltonian(q), pt)
    }

    fn grad_x(&self, pt: &PhasePoint) -> Vector3<f64> {
        fd_grad_x(|q| self.hamiltonian(q), pt)
    }

    fn precession_field(&self, pt: &PhasePoint) -> AlgebraVector;

    /// Trajectories entering `|x| < r_min` are aborted.
    fn min_radius(&self) -> Option<f64> {
        None
    }
}

impl<T: HamiltonianModel + ?Sized> HamiltonianModel for &T {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn hamiltonian(&self, pt: &PhasePoint) -> f64 {
        (**self).hamiltonian(pt)
    }
    fn grad_p(&self, pt: &PhasePoint) -> Vector3<f64> {
        (**self).grad_p(pt)
    }
    fn grad_x(&self, pt: &PhasePoint) -> Vector3<f64> {
        (**self).grad_x(pt)
    }
    fn precession_field(&self, pt: &PhasePoint) -> AlgebraVector {
        (**self).precession_field(pt)
    }
    fn min_radius(&self) -> Option<f64> {
        (**self).min_radius()
    }
}

impl<T: HamiltonianModel + ?Sized> HamiltonianModel for Box<T> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn hamiltonian(&self, pt: &PhasePoint) -> f64 {
        (**self).hamiltonian(pt)
    }
    fn grad_p(&self, pt: &PhasePoint) -> Vector3<f64> {
        (**self).grad_p(pt)
    }
    fn grad_x(&self, pt: &PhasePoint) -> Vector3<f64> {
        (**self).grad_x(pt)
    }
    fn precession_field(&self, pt: &PhasePoint) -> AlgebraVector {
        (**self).precession_field(pt)
    }
    fn min_radius(&self) -> Option<f64> {
        (**self).min_radius()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error(transparent)]
    Integration(#[from] IntegrationError),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Point of the combined flow: phase point, cocycle and classical spin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SkewState {
    pub phase: PhasePoint,
    pub cocycle: Su2Element,
    pub spin: Vector3<f64>,
}

impl SkewState {
    /// Identity cocycle and spin along `e_z`.
    pub fn new(phase: PhasePoint) -> Self {
        SkewState { phase, cocycle: Su2Element::IDENTITY, spin: Vector3::z() }
    }

    pub fn with_spin(phase: PhasePoint, spin: Vector3<f64>) -> Self {
        SkewState { phase, cocycle: Su2Element::IDENTITY, spin }
    }

    fn validate(&self) -> Result<(), DynamicsError> {
        if !self.phase.is_finite() {
            return Err(DynamicsError::InvalidInput("non-finite phase point".into()));
        }
        if (self.spin.norm() - 1.0).abs() > 1e-10 {
            return Err(DynamicsError::InvalidInput(format!(
                "spin vector must be a unit vector (|s| = {})",
                self.spin.norm()
            )));
        }
        if (self.cocycle.norm_sq() - 1.0).abs() > 1e-10 {
            return Err(DynamicsError::InvalidInput("cocycle is not unit-norm".into()));
        }
        Ok(())
    }
}

pub(crate) const STATE_DIM: usize = 16;

pub(crate) fn pack(state: &SkewState, field_integral: &Vector3<f64>) -> Vec<f64> {
    let mut y = Vec::with_capacity(STATE_DIM);
    y.extend(state.phase.x.iter());
    y.extend(state.phase.p.iter());
    y.extend(state.cocycle.to_array());
    y.extend(state.spin.iter());
    y.extend(field_integral.iter());
    y
}

pub(crate) fn unpack_phase(y: &[f64]) -> PhasePoint {
    PhasePoint {
        x: Vector3::new(y[0], y[1], y[2]),
        p: Vector3::new(y[3], y[4], y[5]),
    }
}

pub(crate) fn unpack(y: &[f64]) -> (SkewState, Vector3<f64>) {
    let state = SkewState {
        phase: unpack_phase(y),
        cocycle: Su2Element::from_array([y[6], y[7], y[8], y[9]]),
        spin: Vector3::new(y[10], y[11], y[12]),
    };
    (state, Vector3::new(y[13], y[14], y[15]))
}

/// The coupled system: Hamilton's equations, `ḋ = -(i/2)σ·ℬ d`,
/// `ṡ = ℬ × s`, and the running integral of ℬ.
pub(crate) struct SkewSystem<'a, M: HamiltonianModel + ?Sized> {
    pub model: &'a M,
}

impl<M: HamiltonianModel + ?Sized> OdeSystem for SkewSystem<'_, M> {
    fn dim(&self) -> usize {
        STATE_DIM
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        let pt = unpack_phase(y);
        let xdot = self.model.grad_p(&pt);
        let pdot = -self.model.grad_x(&pt);
        let b = self.model.precession_field(&pt).0;
        let half = 0.5 * b;
        let q0 = y[6];
        let qv = Vector3::new(y[7], y[8], y[9]);
        let dq0 = -half.dot(&qv);
        let dqv = q0 * half + half.cross(&qv);
        let s = Vector3::new(y[10], y[11], y[12]);
        let ds = b.cross(&s);
        dy[0..3].copy_from_slice(xdot.as_slice());
        dy[3..6].copy_from_slice(pdot.as_slice());
        dy[6] = dq0;
        dy[7..10].copy_from_slice(dqv.as_slice());
        dy[10..13].copy_from_slice(ds.as_slice());
        dy[13..16].copy_from_slice(b.as_slice());
    }

    fn project(&self, y: &mut [f64]) -> f64 {
        let qn2: f64 = y[6..10].iter().map(|v| v * v).sum();
        let sn2: f64 = y[10..13].iter().map(|v| v * v).sum();
        let qn = qn2.sqrt();
        let sn = sn2.sqrt();
        y[6..10].iter_mut().for_each(|v| *v /= qn);
        y[10..13].iter_mut().for_each(|v| *v /= sn);
        (qn2 - 1.0).abs().max((sn2 - 1.0).abs())
    }

    fn check(&self, _t: f64, y: &[f64]) -> Result<(), String> {
        if let Some(r_min) = self.model.min_radius() {
            let r = (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt();
            if r < r_min {
                return Err(format!("trajectory entered r = {r:e} below r_min = {r_min:e}"));
            }
        }
        Ok(())
    }
}

/// Maps a user tolerance to integrator settings. The local tolerance is
/// tightened so that the accumulated energy drift stays within a small
/// multiple of `tol`.
pub fn integrator_config(tol: f64) -> IntegratorConfig {
    let local = (0.01 * tol).max(1e-15);
    IntegratorConfig { rtol: local, atol: local, ..Default::default() }
}

fn check_tol(tol: f64) -> Result<(), DynamicsError> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(DynamicsError::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct TrajectoryStats {
    pub steps: usize,
    pub rejected: usize,
    /// Largest `|H(t) - H(0)|` over accepted steps.
    pub max_energy_drift: f64,
    /// Largest `|‖d‖² - 1|` or `|‖s‖² - 1|` before renormalisation.
    pub max_unitarity_defect: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub state: SkewState,
    /// `∫_0^t ℬ dt` along the orbit.
    pub field_integral: Vector3<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    pub stats: TrajectoryStats,
}

impl Trajectory {
    pub fn last(&self) -> &TrajectorySample {
        self.samples.last().expect("trajectory always holds the start sample")
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,x1,x2,x3,p1,p2,p3,q0,q1,q2,q3,s1,s2,s3")?;
        for s in &self.samples {
            let ph = &s.state.phase;
            let q = s.state.cocycle.to_array();
            let vals = [
                s.t, ph.x[0], ph.x[1], ph.x[2], ph.p[0], ph.p[1], ph.p[2], q[0], q[1], q[2], q[3],
                s.state.spin[0], s.state.spin[1], s.state.spin[2],
            ];
            let line: Vec<String> = vals.iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }
}

/// Integrates the combined flow from `state` for time `t_final` (which may
/// be negative), recording every accepted step.
pub fn integrate_skew<M: HamiltonianModel + ?Sized>(
    model: &M,
    state: &SkewState,
    t_final: f64,
    tol: f64,
) -> Result<Trajectory, DynamicsError> {
    check_tol(tol)?;
    state.validate()?;
    let sys = SkewSystem { model };
    let y0 = pack(state, &Vector3::zeros());
    let h0 = model.hamiltonian(&state.phase);
    let mut samples = vec![TrajectorySample { t: 0.0, state: *state, field_integral: Vector3::zeros() }];
    let mut drift: f64 = 0.0;
    let (_, _, stats) = ode::integrate(&sys, 0.0, &y0, t_final, &integrator_config(tol), |step| {
        let (st, fi) = unpack(step.y1);
        drift = drift.max((model.hamiltonian(&st.phase) - h0).abs());
        samples.push(TrajectorySample { t: step.t1, state: st, field_integral: fi });
        Control::Continue
    })?;
    Ok(Trajectory {
        samples,
        stats: TrajectoryStats {
            steps: stats.steps,
            rejected: stats.rejected,
            max_energy_drift: drift,
            max_unitarity_defect: stats.max_projection_defect,
        },
    })
}

/// Phase-space orbit (the cocycle and spin columns are carried along but
/// start from the identity and `e_z`).
pub fn integrate_flow<M: HamiltonianModel + ?Sized>(
    model: &M,
    start: &PhasePoint,
    t_final: f64,
    tol: f64,
) -> Result<Trajectory, DynamicsError> {
    integrate_skew(model, &SkewState::new(*start), t_final, tol)
}

/// Orbit together with the transport cocycle `d(ξ, t)`, `d(ξ, 0) = 𝟙`.
pub fn integrate_cocycle<M: HamiltonianModel + ?Sized>(
    model: &M,
    start: &PhasePoint,
    t_final: f64,
    tol: f64,
) -> Result<Trajectory, DynamicsError> {
    integrate_skew(model, &SkewState::new(*start), t_final, tol)
}

/// Orbit together with the classical spin `ṡ = ℬ × s`.
pub fn precess_spin<M: HamiltonianModel + ?Sized>(
    model: &M,
    start: &PhasePoint,
    s0: &Vector3<f64>,
    t_final: f64,
    tol: f64,
) -> Result<Trajectory, DynamicsError> {
    integrate_skew(model, &SkewState::with_spin(*start, *s0), t_final, tol)
}

/// Final state of the combined flow; the cocycle becomes `d(ξ, t)·g`.
pub fn evolve_skew<M: HamiltonianModel + ?Sized>(
    model: &M,
    state: &SkewState,
    t_final: f64,
    tol: f64,
) -> Result<SkewState, DynamicsError> {
    Ok(evolve_with_integral(model, state, t_final, tol)?.0)
}

/// Like `evolve_skew`, also returning `∫ℬ dt`.
pub fn evolve_with_integral<M: HamiltonianModel + ?Sized>(
    model: &M,
    state: &SkewState,
    t_final: f64,
    tol: f64,
) -> Result<(SkewState, Vector3<f64>), DynamicsError> {
    check_tol(tol)?;
    state.validate()?;
    let sys = SkewSystem { model };
    let y0 = pack(state, &Vector3::zeros());
    let (_, y, _) = ode::integrate(&sys, 0.0, &y0, t_final, &integrator_config(tol), |_| Control::Continue)?;
    Ok(unpack(&y))
}

/// Endpoint of the phase flow alone.
pub fn flow_map<M: HamiltonianModel + ?Sized>(
    model: &M,
    start: &PhasePoint,
    t: f64,
    tol: f64,
) -> Result<PhasePoint, DynamicsError> {
    Ok(evolve_skew(model, &SkewState::new(*start), t, tol)?.phase)
}

/// Endpoint and cocycle `d(ξ, t)`.
pub fn flow_and_cocycle<M: HamiltonianModel + ?Sized>(
    model: &M,
    start: &PhasePoint,
    t: f64,
    tol: f64,
) -> Result<(PhasePoint, Su2Element), DynamicsError> {
    let st = evolve_skew(model, &SkewState::new(*start), t, tol)?;
    Ok((st.phase, st.cocycle))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventState {
    pub t: f64,
    pub state: SkewState,
    pub field_integral: Vector3<f64>,
    pub steps: usize,
}

/// Integrates until `event` crosses zero in the given direction (the start
/// point itself is never reported).
pub fn integrate_to_event<M, G>(
    model: &M,
    state: &SkewState,
    t_max: f64,
    tol: f64,
    rising: bool,
    event: G,
) -> Result<EventState, DynamicsError>
where
    M: HamiltonianModel + ?Sized,
    G: Fn(&PhasePoint) -> f64,
{
    check_tol(tol)?;
    state.validate()?;
    let sys = SkewSystem { model };
    let y0 = pack(state, &Vector3::zeros());
    let t_tol = 1e-12 * t_max.abs().max(1.0);
    let hit = ode::integrate_until_event(&sys, 0.0, &y0, t_max, &integrator_config(tol), rising, t_tol, |y| {
        event(&unpack_phase(y))
    })?;
    let (st, fi) = unpack(&hit.y);
    Ok(EventState { t: hit.t, state: st, field_integral: fi, steps: hit.stats.steps })
}

/// `‖φ(d(t)) s₀ − s(t)‖` maximised over a trajectory started with the
/// identity cocycle.
pub fn covering_consistency(traj: &Trajectory) -> f64 {
    let s0 = traj.samples[0].state.spin;
    traj.samples
        .iter()
        .map(|smp| match covering_map(&smp.state.cocycle) {
            Ok(r) => (r.apply(&s0) - smp.state.spin).norm(),
            Err(_) => f64::INFINITY,
        })
        .fold(0.0, f64::max)
}

/// Determinant of the phase-flow Jacobian at `start` after time `t`,
/// by central differences with step `h`. Liouville's theorem gives 1.
pub fn phase_volume_ratio<M: HamiltonianModel + ?Sized>(
    model: &M,
    start: &PhasePoint,
    t: f64,
    tol: f64,
    h: f64,
) -> Result<f64, DynamicsError> {
    let coords = |pt: &PhasePoint| [pt.x[0], pt.x[1], pt.x[2], pt.p[0], pt.p[1], pt.p[2]];
    let mut jac = Matrix6::zeros();
    for j in 0..6 {
        let mut a = *start;
        let mut b = *start;
        if j < 3 {
            a.x[j] += h;
            b.x[j] -= h;
        } else {
            a.p[j - 3] += h;
            b.p[j - 3] -= h;
        }
        let fa = coords(&flow_map(model, &a, t, tol)?);
        let fb = coords(&flow_map(model, &b, t, tol)?);
        for i in 0..6 {
            jac[(i, j)] = (fa[i] - fb[i]) / (2.0 * h);
        }
    }
    Ok(jac.determinant())
}
