//! Action variables, turning points, frequencies, Maslov indices and spin
//! rotation angles for spherically symmetric tori.
//!
//! Actions are normalised as `I = (1/2π)∮ p dq` (units of ħ).

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::Vector3;
use serde::Serialize;
use thiserror::Error;

use crate::dynamics::{
    integrate_skew, integrate_to_event, DynamicsError, HamiltonianModel, PhasePoint, SkewState,
};
use crate::models::{ModelError, SphericalModel};
use crate::numeric::{brent_root, golden_max, integrate_adaptive, NumericError};
use crate::su2::{axis_angle_of, reduce_4pi, AxisAngle};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ActionError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("radial period not detected: {0}")]
    PeriodDetection(String),
}

/// Rotation angle about `L̂` for one cycle of `L`, and about `e_z` for `M`.
pub const ALPHA_L: f64 = TAU;
pub const ALPHA_M: f64 = TAU;

/// Maslov indices of the angular cycles (libration in θ, rotation in φ).
pub const MU_THETA: i32 = 2;
pub const MU_PHI: i32 = 0;
/// Radial libration between two turning points.
pub const MU_R: i32 = 2;

/// Width of the log-radius window searched around the model length scale.
const LOG_WINDOW: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TorusSpec {
    pub energy: f64,
    pub l: f64,
    pub m: f64,
}

impl TorusSpec {
    pub fn new<S: SphericalModel + ?Sized>(model: &S, energy: f64, l: f64, m: f64) -> Result<Self, ActionError> {
        model.check_angular_momentum(l)?;
        if m.abs() > l {
            return Err(ModelError::Domain(format!("|M| = {} exceeds L = {l}", m.abs())).into());
        }
        radial_turning_points(model, energy, l)?;
        Ok(TorusSpec { energy, l, m })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CircularOrbit {
    pub energy: f64,
    pub radius: f64,
}

/// Bottom of the effective potential at angular momentum `l`: the
/// circular orbit, which is the lowest bound energy.
pub fn circular_orbit<S: SphericalModel + ?Sized>(model: &S, l: f64) -> Result<CircularOrbit, ActionError> {
    model.check_angular_momentum(l)?;
    let s0 = model.length_scale(l).ln();
    let (s, neg_e) = golden_max(|s| -model.effective_potential(l, s.exp()), s0 - LOG_WINDOW, s0 + LOG_WINDOW);
    if !neg_e.is_finite() {
        return Err(NumericError::NonFinite { x: s.exp() }.into());
    }
    Ok(CircularOrbit { energy: -neg_e, radius: s.exp() })
}

/// `(r_min, r_max)` of the radial libration; equal for the circular orbit.
pub fn radial_turning_points<S: SphericalModel + ?Sized>(
    model: &S,
    energy: f64,
    l: f64,
) -> Result<(f64, f64), ActionError> {
    model.check_angular_momentum(l)?;
    if !energy.is_finite() {
        return Err(ModelError::Domain(format!("energy {energy} is not finite")).into());
    }
    let escape = model.escape_energy(l);
    if energy >= escape {
        return Err(ModelError::Domain(format!("energy {energy} at or above the escape threshold {escape}")).into());
    }
    let p2 = |r: f64| model.radial_momentum_sq(energy, l, r);
    let s0 = model.length_scale(l).ln();
    let (s_peak, p2_max) = golden_max(|s| p2(s.exp()), s0 - LOG_WINDOW, s0 + LOG_WINDOW);
    let r_peak = s_peak.exp();
    if p2_max <= 0.0 {
        let circ = circular_orbit(model, l)?;
        if energy >= circ.energy - 1e-12 * energy.abs().max(f64::MIN_POSITIVE) {
            return Ok((circ.radius, circ.radius));
        }
        return Err(ModelError::Domain(format!(
            "energy {energy} below the circular-orbit energy {} at L = {l}",
            circ.energy
        ))
        .into());
    }
    let mut r_lo = 0.5 * r_peak;
    let mut n = 0;
    while p2(r_lo) >= 0.0 {
        r_lo *= 0.5;
        n += 1;
        if n > 400 {
            return Err(ModelError::Domain(format!("no inner turning point at L = {l} (collision orbit)")).into());
        }
    }
    let mut r_hi = 2.0 * r_peak;
    n = 0;
    while p2(r_hi) >= 0.0 {
        r_hi *= 2.0;
        n += 1;
        if n > 400 {
            return Err(ModelError::Domain(format!("no outer turning point for energy {energy} (unbound)")).into());
        }
    }
    let r_min = brent_root(p2, r_lo, r_peak, 0.0, 400)?;
    let r_max = brent_root(p2, r_peak, r_hi, 0.0, 400)?;
    Ok((r_min, r_max))
}

/// Relative target accuracy of the action quadratures.
pub const QUADRATURE_RTOL: f64 = 1e-13;

fn radial_integral<S, F>(
    model: &S,
    energy: f64,
    l: f64,
    r_min: f64,
    r_max: f64,
    integrand: F,
) -> Result<f64, ActionError>
where
    S: SphericalModel + ?Sized,
    F: Fn(f64, f64, f64) -> f64,
{
    // r = r_min + Δ sin²u; integrand receives (u, r, √g)
    let delta = r_max - r_min;
    let val = integrate_adaptive(
        |u| {
            let s = u.sin();
            let r = r_min + delta * s * s;
            let g = model.radial_factor(energy, l, r, r_min, r_max).max(0.0);
            integrand(u, r, g.sqrt())
        },
        0.0,
        FRAC_PI_2,
        QUADRATURE_RTOL,
        0.0,
    )?;
    Ok(val)
}

/// `I_r = (1/π) ∫_{r_min}^{r_max} |p_r| dr`.
pub fn radial_action<S: SphericalModel + ?Sized>(model: &S, energy: f64, l: f64) -> Result<f64, ActionError> {
    let (r_min, r_max) = radial_turning_points(model, energy, l)?;
    radial_action_between(model, energy, l, r_min, r_max)
}

fn radial_action_between<S: SphericalModel + ?Sized>(
    model: &S,
    energy: f64,
    l: f64,
    r_min: f64,
    r_max: f64,
) -> Result<f64, ActionError> {
    if r_max <= r_min {
        return Ok(0.0);
    }
    let delta = r_max - r_min;
    let v = radial_integral(model, energy, l, r_min, r_max, |u, _r, sg| {
        let (s, c) = u.sin_cos();
        2.0 * delta * delta * s * s * c * c * sg
    })?;
    Ok(v / PI)
}

/// `(∂I_r/∂E, ∂I_r/∂L)` from the differentiated action integrals.
pub fn radial_action_derivatives<S: SphericalModel + ?Sized>(
    model: &S,
    energy: f64,
    l: f64,
) -> Result<(f64, f64), ActionError> {
    let (r_min, r_max) = radial_turning_points(model, energy, l)?;
    if r_max <= r_min {
        let r = r_min;
        let sg = model.radial_factor(energy, l, r, r, r).sqrt();
        let de = model.radial_momentum_sq_de(energy, l, r) / (2.0 * sg);
        let dl = -2.0 * l / (r * r) / (2.0 * sg);
        return Ok((de, dl));
    }
    let de = radial_integral(model, energy, l, r_min, r_max, |_u, r, sg| {
        model.radial_momentum_sq_de(energy, l, r) / sg
    })? / PI;
    let dl = radial_integral(model, energy, l, r_min, r_max, |_u, r, sg| -2.0 * l / (r * r) / sg)? / PI;
    Ok((de, dl))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Frequencies {
    pub omega_r: f64,
    pub omega_l: f64,
}

impl Frequencies {
    pub fn ratio(&self) -> f64 {
        self.omega_l / self.omega_r
    }

    pub fn radial_period(&self) -> f64 {
        TAU / self.omega_r
    }
}

/// `ω_r = ∂H̄/∂I_r`, `ω_L = ∂H̄/∂L`, by implicit differentiation of `I_r(E, L)`.
pub fn frequencies<S: SphericalModel + ?Sized>(model: &S, energy: f64, l: f64) -> Result<Frequencies, ActionError> {
    let (de, dl) = radial_action_derivatives(model, energy, l)?;
    if !(de > 0.0) || !de.is_finite() {
        return Err(ModelError::Domain(format!("degenerate Jacobian ∂I_r/∂E = {de}")).into());
    }
    Ok(Frequencies { omega_r: 1.0 / de, omega_l: -dl / de })
}

/// Perihelion in the xy-plane with `L = l e_z`.
pub fn perihelion_point(r_min: f64, l: f64) -> PhasePoint {
    PhasePoint::from_arrays([0.0, l / r_min, 0.0], [r_min, 0.0, 0.0])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadialRotation {
    /// `|∮ℬ dt − 2π(ω_L/ω_r) L̂|` reduced to `[0, 4π)`.
    pub alpha_r: f64,
    /// Component of the same vector along `L̂`, mapped to `(−2π, 2π]`.
    /// A value within 1e−6 of −2π is assigned +2π (holonomy −𝟙).
    pub signed: f64,
    /// `∮ℬ dt` over one radial period.
    pub field_integral: Vector3<f64>,
    pub radial_period: f64,
    pub frequencies: Frequencies,
    /// Axis-angle form of the cocycle over the radial period.
    pub holonomy: AxisAngle,
}

/// Maps a lift to `(−2π, 2π]`, identifying −2π with +2π.
pub fn wrap_signed_angle(a: f64) -> f64 {
    let mut w = a - 2.0 * TAU * ((a + TAU) / (2.0 * TAU)).floor();
    if w <= -TAU + 1e-6 {
        w += 2.0 * TAU;
    }
    if w > TAU + 1e-6 {
        w -= 2.0 * TAU;
    }
    w
}

/// Integrates one radial period from perihelion (perihelion to
/// perihelion by event location, or `2π/ω_r` on a circular orbit).
pub fn rotation_angle_radial<S: SphericalModel + ?Sized>(
    model: &S,
    energy: f64,
    l: f64,
    tol: f64,
) -> Result<RadialRotation, ActionError> {
    let (r_min, r_max) = radial_turning_points(model, energy, l)?;
    let freq = frequencies(model, energy, l)?;
    let start = SkewState::new(perihelion_point(r_min, l));
    let t_est = freq.radial_period();
    let (period, fi, cocycle) = if r_max - r_min <= 1e-9 * r_max {
        let tr = integrate_skew(model, &start, t_est, tol)?;
        let last = tr.last();
        (t_est, last.field_integral, last.state.cocycle)
    } else {
        let hit = integrate_to_event(model, &start, 1.5 * t_est, tol, true, |pt| pt.x.dot(&pt.p)).map_err(
            |e| match e {
                DynamicsError::Integration(crate::ode::IntegrationError::EventNotFound { t }) => {
                    ActionError::PeriodDetection(format!("no perihelion passage before t = {t}"))
                }
                other => other.into(),
            },
        )?;
        (hit.t, hit.field_integral, hit.state.cocycle)
    };
    let lhat = Vector3::z();
    let v = fi - TAU * freq.ratio() * lhat;
    Ok(RadialRotation {
        alpha_r: reduce_4pi(v.norm()),
        signed: wrap_signed_angle(v.dot(&lhat)),
        field_integral: fi,
        radial_period: period,
        frequencies: freq,
        holonomy: axis_angle_of(&cocycle),
    })
}

/// Rotation angle accumulated by `ṡ = ℬ_A × s` over one `2π` cycle of a
/// generator flow started at `pt`, with the closure error of the cycle.
pub fn generator_rotation_angle<G: HamiltonianModel + ?Sized>(
    generator: &G,
    pt: &PhasePoint,
    tol: f64,
) -> Result<(f64, f64), ActionError> {
    let tr = integrate_skew(generator, &SkewState::new(*pt), TAU, tol)?;
    let last = tr.last();
    let closure = (last.state.phase.x - pt.x).norm() + (last.state.phase.p - pt.p).norm();
    Ok((last.field_integral.norm(), closure))
}

/// Max-norm residual of `ℬ − (ω_r ℬ_r + ω_L ℬ_L)` along one radial period,
/// with `ℬ_L = L̂` and `ℬ_r = (ℬ − ω_L ℬ_L)/ω_r`.
pub fn consistency_decomposition<S: SphericalModel + ?Sized>(
    model: &S,
    energy: f64,
    l: f64,
    tol: f64,
) -> Result<f64, ActionError> {
    let (r_min, _) = radial_turning_points(model, energy, l)?;
    let freq = frequencies(model, energy, l)?;
    let tr = integrate_skew(model, &SkewState::new(perihelion_point(r_min, l)), freq.radial_period(), tol)?;
    let mut worst: f64 = 0.0;
    for s in &tr.samples {
        let pt = &s.state.phase;
        let b = model.precession_field(pt).0;
        let b_l = pt.angular_momentum().normalize();
        let b_r = (b - freq.omega_l * b_l) / freq.omega_r;
        let res = b - (freq.omega_r * b_r + freq.omega_l * b_l);
        worst = worst.max(res.amax());
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MaslovIndices {
    pub mu_r: i32,
    pub mu_theta: i32,
    pub mu_phi: i32,
}

fn sign_changes(values: impl Iterator<Item = f64>) -> i32 {
    let mut count = 0;
    let mut last: Option<bool> = None;
    for v in values {
        if v == 0.0 {
            continue;
        }
        let pos = v > 0.0;
        if let Some(prev) = last {
            if prev != pos {
                count += 1;
            }
        }
        last = Some(pos);
    }
    count
}

/// Counts turning points along a numeric orbit on the torus `(E, L, M)`:
/// sign changes of `p_r` over one radial period, of `ż` over one
/// revolution in the orbital plane, and of `p_φ = L_z` (ignoring values
/// below `1e−9 L`).
pub fn maslov_indices<S: SphericalModel + ?Sized>(
    model: &S,
    energy: f64,
    l: f64,
    m: f64,
    tol: f64,
) -> Result<MaslovIndices, ActionError> {
    if m.abs() > l {
        return Err(ModelError::Domain(format!("|M| = {} exceeds L = {l}", m.abs())).into());
    }
    let (r_min, _) = radial_turning_points(model, energy, l)?;
    let freq = frequencies(model, energy, l)?;
    let incl = (m / l).clamp(-1.0, 1.0).acos();
    let (si, ci) = incl.sin_cos();
    let v = l / r_min;
    let start = PhasePoint::from_arrays([0.0, v * ci, v * si], [r_min, 0.0, 0.0]);
    let t_r = freq.radial_period();
    let t_l = TAU / freq.omega_l.abs();
    let t_end = (1.25 * t_r).max(1.5 * t_l);
    let tr = integrate_skew(model, &SkewState::new(start), t_end, tol)?;

    let mu_r = sign_changes(
        tr.samples
            .iter()
            .filter(|s| s.t >= 0.25 * t_r && s.t <= 1.25 * t_r)
            .map(|s| s.state.phase.x.dot(&s.state.phase.p)),
    );

    // in-plane angle measured from perihelion, unwrapped
    let lhat = start.angular_momentum().normalize();
    let e1 = Vector3::x();
    let e2 = lhat.cross(&e1);
    let mut psi_prev = 0.0;
    let mut offset = 0.0;
    let mut zdots = Vec::new();
    for s in &tr.samples {
        let x = s.state.phase.x;
        let raw = x.dot(&e2).atan2(x.dot(&e1));
        let mut psi = raw + offset;
        while psi - psi_prev > PI {
            offset -= TAU;
            psi -= TAU;
        }
        while psi - psi_prev < -PI {
            offset += TAU;
            psi += TAU;
        }
        psi_prev = psi;
        if psi > TAU {
            break;
        }
        if si.abs() > 1e-12 {
            zdots.push(model.grad_p(&s.state.phase)[2]);
        }
    }
    let mu_theta = if si.abs() > 1e-12 { sign_changes(zdots.into_iter()) } else { MU_THETA };
    let mu_phi = sign_changes(tr.samples.iter().map(|s| {
        let lz = s.state.phase.angular_momentum()[2];
        if lz.abs() < 1e-9 * l {
            0.0
        } else {
            lz
        }
    }));
    Ok(MaslovIndices { mu_r, mu_theta, mu_phi })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ActionData {
    pub energy: f64,
    pub i_r: f64,
    pub i_theta: f64,
    pub i_phi: f64,
    pub omega_r: f64,
    pub omega_l: f64,
    pub mu_r: i32,
    pub mu_theta: i32,
    pub mu_phi: i32,
    pub alpha_r: f64,
    pub alpha_l: f64,
    pub alpha_m: f64,
}

/// Complete action-angle data of one torus. Maslov indices are the values
/// for radial and polar libration; see `maslov_indices` for the numeric
/// count.
pub fn action_data<S: SphericalModel + ?Sized>(model: &S, torus: &TorusSpec, tol: f64) -> Result<ActionData, ActionError> {
    let i_r = radial_action(model, torus.energy, torus.l)?;
    let rot = rotation_angle_radial(model, torus.energy, torus.l, tol)?;
    Ok(ActionData {
        energy: torus.energy,
        i_r,
        i_theta: torus.l - torus.m,
        i_phi: torus.m,
        omega_r: rot.frequencies.omega_r,
        omega_l: rot.frequencies.omega_l,
        mu_r: MU_R,
        mu_theta: MU_THETA,
        mu_phi: MU_PHI,
        alpha_r: rot.alpha_r,
        alpha_l: ALPHA_L,
        alpha_m: ALPHA_M,
    })
}
