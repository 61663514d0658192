//! Model catalog: Dirac symbol utilities, the oscillator with spin-orbit
//! coupling, the relativistic Kepler problem, and the angular-momentum
//! generators used for integrability checks.

use std::fmt;
use std::sync::Arc;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{HamiltonianModel, PhasePoint};
use crate::su2::AlgebraVector;

/// Fine-structure constant.
pub const ALPHA_S: f64 = 0.0072973525693;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("no bound motion: {0}")]
    Domain(String),
    #[error("inadmissible quantum numbers: {0}")]
    Inadmissible(String),
}

fn positive(name: &str, v: f64) -> Result<(), ModelError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ModelError::InvalidParameter(format!("{name} must be positive and finite, got {v}")))
    }
}

// ---------------------------------------------------------------------------
// Dirac symbols

/// Electromagnetic potentials entering the Dirac symbol.
pub trait Potential: Send + Sync + fmt::Debug {
    /// Scalar potential φ(x).
    fn scalar(&self, x: &Vector3<f64>) -> f64;
    /// Vector potential A(x).
    fn vector(&self, x: &Vector3<f64>) -> Vector3<f64>;
    /// Electric field −∇φ.
    fn electric(&self, x: &Vector3<f64>) -> Vector3<f64>;
    /// Magnetic field ∇×A.
    fn magnetic(&self, x: &Vector3<f64>) -> Vector3<f64>;
}

/// φ = −q/r (attractive Coulomb centre for a particle of charge `q`).
#[derive(Debug, Clone, Copy)]
pub struct CoulombPotential {
    pub q: f64,
}

impl Potential for CoulombPotential {
    fn scalar(&self, x: &Vector3<f64>) -> f64 {
        -self.q / x.norm()
    }
    fn vector(&self, _x: &Vector3<f64>) -> Vector3<f64> {
        Vector3::zeros()
    }
    fn electric(&self, x: &Vector3<f64>) -> Vector3<f64> {
        -self.q * x / x.norm().powi(3)
    }
    fn magnetic(&self, _x: &Vector3<f64>) -> Vector3<f64> {
        Vector3::zeros()
    }
}

/// Uniform magnetic field, A = B×x/2.
#[derive(Debug, Clone, Copy)]
pub struct UniformMagneticField {
    pub b: Vector3<f64>,
}

impl Potential for UniformMagneticField {
    fn scalar(&self, _x: &Vector3<f64>) -> f64 {
        0.0
    }
    fn vector(&self, x: &Vector3<f64>) -> Vector3<f64> {
        0.5 * self.b.cross(x)
    }
    fn electric(&self, _x: &Vector3<f64>) -> Vector3<f64> {
        Vector3::zeros()
    }
    fn magnetic(&self, _x: &Vector3<f64>) -> Vector3<f64> {
        self.b
    }
}

/// Isotropic harmonic potential energy eφ = mω²r²/2.
#[derive(Debug, Clone, Copy)]
pub struct HarmonicPotential {
    pub m: f64,
    pub omega: f64,
    pub charge: f64,
}

impl Potential for HarmonicPotential {
    fn scalar(&self, x: &Vector3<f64>) -> f64 {
        0.5 * self.m * self.omega * self.omega * x.norm_squared() / self.charge
    }
    fn vector(&self, _x: &Vector3<f64>) -> Vector3<f64> {
        Vector3::zeros()
    }
    fn electric(&self, x: &Vector3<f64>) -> Vector3<f64> {
        -self.m * self.omega * self.omega * x / self.charge
    }
    fn magnetic(&self, _x: &Vector3<f64>) -> Vector3<f64> {
        Vector3::zeros()
    }
}

#[derive(Debug, Clone)]
pub struct DiracSymbolParams {
    pub m: f64,
    pub c: f64,
    pub e: f64,
    pub potential: Arc<dyn Potential>,
}

impl DiracSymbolParams {
    pub fn new(m: f64, c: f64, e: f64, potential: Arc<dyn Potential>) -> Result<Self, ModelError> {
        positive("m", m)?;
        positive("c", c)?;
        if !e.is_finite() {
            return Err(ModelError::InvalidParameter("charge must be finite".into()));
        }
        Ok(DiracSymbolParams { m, c, e, potential })
    }

    /// Kinetic momentum times c: `cp − eA`.
    pub fn kinetic(&self, pt: &PhasePoint) -> Vector3<f64> {
        self.c * pt.p - self.e * self.potential.vector(&pt.x)
    }

    /// ε = √((cp − eA)² + m²c⁴), never below mc².
    pub fn epsilon(&self, pt: &PhasePoint) -> f64 {
        let mc2 = self.m * self.c * self.c;
        (self.kinetic(pt).norm_squared() + mc2 * mc2).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    Plus,
    Minus,
}

/// Both eigenvalue branches `eφ ± ε`. Each is doubly degenerate as a
/// matrix eigenvalue of the Dirac symbol.
pub fn dirac_hamiltonians(params: &DiracSymbolParams, pt: &PhasePoint) -> (f64, f64) {
    let ephi = params.e * params.potential.scalar(&pt.x);
    let eps = params.epsilon(pt);
    (ephi + eps, ephi - eps)
}

/// Precession field of the chosen branch:
/// `∓(ec/ε)B + ec/(ε(ε+mc²)) (cp − eA) × E`.
pub fn dirac_precession_field(params: &DiracSymbolParams, branch: Branch, pt: &PhasePoint) -> AlgebraVector {
    let eps = params.epsilon(pt);
    let mc2 = params.m * params.c * params.c;
    let ec = params.e * params.c;
    let sign = match branch {
        Branch::Plus => -1.0,
        Branch::Minus => 1.0,
    };
    let magnetic = sign * ec / eps * params.potential.magnetic(&pt.x);
    let thomas = ec / (eps * (eps + mc2)) * params.kinetic(pt).cross(&params.potential.electric(&pt.x));
    AlgebraVector(magnetic + thomas)
}

/// A Dirac branch as a model (gradients by finite differences).
#[derive(Debug, Clone)]
pub struct DiracModel {
    pub params: DiracSymbolParams,
    pub branch: Branch,
}

impl HamiltonianModel for DiracModel {
    fn name(&self) -> &str {
        match self.branch {
            Branch::Plus => "dirac+",
            Branch::Minus => "dirac-",
        }
    }
    fn hamiltonian(&self, pt: &PhasePoint) -> f64 {
        let (hp, hm) = dirac_hamiltonians(&self.params, pt);
        match self.branch {
            Branch::Plus => hp,
            Branch::Minus => hm,
        }
    }
    fn precession_field(&self, pt: &PhasePoint) -> AlgebraVector {
        dirac_precession_field(&self.params, self.branch, pt)
    }
}

// ---------------------------------------------------------------------------
// Spherically symmetric models

/// Extra structure of rotation-invariant models with a field `ℬ = f(r, p) L`.
pub trait SphericalModel: HamiltonianModel {
    /// `p_r²` at radius `r` on the shell `H = energy`, `|L| = l`.
    fn radial_momentum_sq(&self, energy: f64, l: f64, r: f64) -> f64;

    /// `∂(p_r²)/∂E`.
    fn radial_momentum_sq_de(&self, energy: f64, l: f64, r: f64) -> f64;

    /// Smooth factor `g` with `p_r² = (r − r_min)(r_max − r) g(r)`, given the
    /// turning points; finite (and equal to `−½ ∂²p_r²/∂r²`) when they
    /// coincide.
    fn radial_factor(&self, energy: f64, l: f64, r: f64, r_min: f64, r_max: f64) -> f64;

    /// Supremum of bound energies (may be infinite).
    fn escape_energy(&self, l: f64) -> f64;

    /// Rejects angular momenta for which no regular torus exists.
    fn check_angular_momentum(&self, l: f64) -> Result<(), ModelError> {
        if l > 0.0 && l.is_finite() {
            Ok(())
        } else {
            Err(ModelError::Domain(format!("L must be positive, got {l}")))
        }
    }

    /// Energy of the effective potential `H(p = L/r e_φ, r e_x)`.
    fn effective_potential(&self, l: f64, r: f64) -> f64 {
        let pt = PhasePoint::from_arrays([0.0, l / r, 0.0], [r, 0.0, 0.0]);
        self.hamiltonian(&pt)
    }

    /// Reference energy subtracted before relative degeneracy grouping
    /// (rest energy for relativistic models).
    fn energy_reference(&self) -> f64 {
        0.0
    }

    /// Characteristic length, used to seed turning-point searches.
    fn length_scale(&self, l: f64) -> f64;
}

/// `H = p²/2m + mω²r²/2` with `ℬ = κL`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoModel {
    pub m: f64,
    pub omega: f64,
    pub kappa: f64,
}

pub fn ho_model(m: f64, omega: f64, kappa: f64) -> Result<HoModel, ModelError> {
    positive("m", m)?;
    positive("omega", omega)?;
    if !kappa.is_finite() {
        return Err(ModelError::InvalidParameter("kappa must be finite".into()));
    }
    Ok(HoModel { m, omega, kappa })
}

impl HoModel {
    /// Thomas coupling κ = ω²/(2mc²).
    pub fn thomas(m: f64, omega: f64, c: f64) -> Result<Self, ModelError> {
        positive("c", c)?;
        ho_model(m, omega, omega * omega / (2.0 * m * c * c))
    }

    /// `H̄(I_r, L) = ω(2I_r + L)`.
    pub fn hbar_actions(&self, i_r: f64, l: f64) -> f64 {
        self.omega * (2.0 * i_r + l)
    }

    /// Closed-form level `ω(2n_r + l + 3/2) + m_s κ(l + 1/2 + m_s)` (ħ = 1).
    pub fn reference_energy(&self, n_r: i64, l: i64, m_s: f64) -> f64 {
        let (n_r, l) = (n_r as f64, l as f64);
        self.omega * (2.0 * n_r + l + 1.5) + m_s * self.kappa * (l + 0.5 + m_s)
    }
}

impl HamiltonianModel for HoModel {
    fn name(&self) -> &str {
        "ho"
    }
    fn hamiltonian(&self, pt: &PhasePoint) -> f64 {
        pt.p.norm_squared() / (2.0 * self.m) + 0.5 * self.m * self.omega * self.omega * pt.x.norm_squared()
    }
    fn grad_p(&self, pt: &PhasePoint) -> Vector3<f64> {
        pt.p / self.m
    }
    fn grad_x(&self, pt: &PhasePoint) -> Vector3<f64> {
        self.m * self.omega * self.omega * pt.x
    }
    fn precession_field(&self, pt: &PhasePoint) -> AlgebraVector {
        AlgebraVector(self.kappa * pt.angular_momentum())
    }
}

impl SphericalModel for HoModel {
    fn radial_momentum_sq(&self, energy: f64, l: f64, r: f64) -> f64 {
        2.0 * self.m * energy - (self.m * self.omega * r).powi(2) - (l / r).powi(2)
    }
    fn radial_momentum_sq_de(&self, _energy: f64, _l: f64, _r: f64) -> f64 {
        2.0 * self.m
    }
    fn radial_factor(&self, _energy: f64, _l: f64, r: f64, r_min: f64, r_max: f64) -> f64 {
        (self.m * self.omega / r).powi(2) * (r + r_min) * (r + r_max)
    }
    fn escape_energy(&self, _l: f64) -> f64 {
        f64::INFINITY
    }
    fn length_scale(&self, l: f64) -> f64 {
        (l / (self.m * self.omega)).sqrt()
    }
}

/// Constants of the rosette `1/r = C + A cos(γφ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KeplerOrbitConstants {
    pub c: f64,
    pub a: f64,
    pub gamma: f64,
}

/// `H = −e²/r + √(c²p² + m²c⁴)` with the Thomas field of the positive
/// Dirac branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeplerModel {
    pub m: f64,
    pub c: f64,
    pub e: f64,
    /// Collision guard radius.
    pub r_min: f64,
}

pub fn kepler_model(m: f64, c: f64, e: f64) -> Result<KeplerModel, ModelError> {
    positive("m", m)?;
    positive("c", c)?;
    positive("e", e)?;
    let r_min = 1e-6 * e * e / (m * c * c);
    Ok(KeplerModel { m, c, e, r_min })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnitPreset {
    /// ħ = m = c = 1, e² = α_S.
    Natural,
    /// ħ = m = e = 1, c = 1/α_S.
    Atomic,
}

impl UnitPreset {
    /// `(m, c, e)` for this preset.
    pub fn kepler_params(self) -> (f64, f64, f64) {
        match self {
            UnitPreset::Natural => (1.0, 1.0, ALPHA_S.sqrt()),
            UnitPreset::Atomic => (1.0, 1.0 / ALPHA_S, 1.0),
        }
    }
}

impl KeplerModel {
    pub fn from_preset(preset: UnitPreset) -> Self {
        let (m, c, e) = preset.kepler_params();
        kepler_model(m, c, e).expect("preset parameters are positive")
    }

    pub fn rest_energy(&self) -> f64 {
        self.m * self.c * self.c
    }

    pub fn e2(&self) -> f64 {
        self.e * self.e
    }

    /// Coupling `e²/(ħc)`.
    pub fn coupling(&self) -> f64 {
        self.e2() / self.c
    }

    pub fn dirac_params(&self) -> DiracSymbolParams {
        DiracSymbolParams::new(self.m, self.c, self.e, Arc::new(CoulombPotential { q: self.e }))
            .expect("validated at construction")
    }

    /// `γ = √(c²L² − e⁴)/(cL)`.
    pub fn gamma(&self, l: f64) -> Result<f64, ModelError> {
        let cl = self.c * l;
        let e2 = self.e2();
        if cl <= e2 {
            return Err(ModelError::Domain(format!("collision regime: cL = {cl} ≤ e² = {e2}")));
        }
        Ok((cl * cl - e2 * e2).sqrt() / cl)
    }

    pub fn orbit_constants(&self, energy: f64, l: f64) -> Result<KeplerOrbitConstants, ModelError> {
        let gamma = self.gamma(l)?;
        let (c, e2, mc2) = (self.c, self.e2(), self.rest_energy());
        let d = c * c * l * l - e2 * e2;
        let disc = c * c * l * l * energy * energy - d * mc2 * mc2;
        if disc < 0.0 {
            return Err(ModelError::Domain(format!("energy {energy} below the circular orbit")));
        }
        Ok(KeplerOrbitConstants { c: e2 * energy / d, a: disc.sqrt() / d, gamma })
    }

    /// `H̄(I_r, L) = mc² [1 + (e⁴/c²)/(I_r + √(L² − e⁴/c²))²]^{-1/2}`.
    pub fn hbar_actions(&self, i_r: f64, l: f64) -> f64 {
        let k2 = self.coupling().powi(2);
        let denom = i_r + (l * l - k2).sqrt();
        self.rest_energy() / (1.0 + k2 / (denom * denom)).sqrt()
    }

    /// Radius of the circular orbit with angular momentum `l`.
    pub fn circular_radius(&self, l: f64) -> Result<f64, ModelError> {
        let g = self.gamma(l)?;
        let k = self.orbit_constants(g * self.rest_energy(), l)?;
        Ok(1.0 / k.c)
    }

    /// Spin rotation angle for one revolution on the circular orbit of
    /// energy `energy` and radius `r`: `2πe²/((ε + mc²) r)` with `ε = E + e²/r`.
    pub fn circular_spin_rotation(&self, energy: f64, r: f64) -> f64 {
        let eps = energy + self.e2() / r;
        2.0 * std::f64::consts::PI * self.e2() / ((eps + self.rest_energy()) * r)
    }

    /// Field magnitude along an orbit in the plane ⊥ e_z, as a function of
    /// angular velocity: `e² φ̇ / ((E + mc²) r + e²)`.
    pub fn orbit_field_from_angular_velocity(&self, energy: f64, r: f64, phi_dot: f64) -> f64 {
        self.e2() * phi_dot / ((energy + self.rest_energy()) * r + self.e2())
    }
}

impl HamiltonianModel for KeplerModel {
    fn name(&self) -> &str {
        "kepler"
    }
    fn hamiltonian(&self, pt: &PhasePoint) -> f64 {
        let mc2 = self.rest_energy();
        -self.e2() / pt.x.norm() + (self.c * self.c * pt.p.norm_squared() + mc2 * mc2).sqrt()
    }
    fn grad_p(&self, pt: &PhasePoint) -> Vector3<f64> {
        let mc2 = self.rest_energy();
        let eps = (self.c * self.c * pt.p.norm_squared() + mc2 * mc2).sqrt();
        self.c * self.c * pt.p / eps
    }
    fn grad_x(&self, pt: &PhasePoint) -> Vector3<f64> {
        self.e2() * pt.x / pt.x.norm().powi(3)
    }
    fn precession_field(&self, pt: &PhasePoint) -> AlgebraVector {
        let mc2 = self.rest_energy();
        let eps = (self.c * self.c * pt.p.norm_squared() + mc2 * mc2).sqrt();
        let r = pt.x.norm();
        let coef = self.e2() * self.c * self.c / (eps * (eps + mc2) * r * r * r);
        AlgebraVector(coef * pt.angular_momentum())
    }
    fn min_radius(&self) -> Option<f64> {
        Some(self.r_min)
    }
}

impl SphericalModel for KeplerModel {
    fn radial_momentum_sq(&self, energy: f64, l: f64, r: f64) -> f64 {
        let (c, mc2) = (self.c, self.rest_energy());
        let w = energy + self.e2() / r;
        (w - mc2) * (w + mc2) / (c * c) - (l / r).powi(2)
    }
    fn radial_momentum_sq_de(&self, energy: f64, _l: f64, r: f64) -> f64 {
        2.0 * (energy + self.e2() / r) / (self.c * self.c)
    }
    fn radial_factor(&self, _energy: f64, l: f64, r: f64, r_min: f64, r_max: f64) -> f64 {
        let k2 = self.coupling().powi(2);
        (l * l - k2) / (r * r * r_min * r_max)
    }
    fn escape_energy(&self, _l: f64) -> f64 {
        self.rest_energy()
    }
    fn check_angular_momentum(&self, l: f64) -> Result<(), ModelError> {
        self.gamma(l).map(|_| ())
    }
    fn energy_reference(&self) -> f64 {
        self.rest_energy()
    }
    fn length_scale(&self, l: f64) -> f64 {
        // nonrelativistic circular radius L²/(m e²)
        l * l / (self.m * self.e2())
    }
}

/// Closed-form spin-1/2 Kepler level (ħ = 1), from
/// `I_r = n_r + 1/2 + m_s` and `L = l + 1/2 + m_s`.
pub fn fine_structure_energy(n_r: i64, l: i64, m_s: f64, alpha_s: f64, mc2: f64) -> Result<f64, ModelError> {
    if (m_s.abs() - 0.5).abs() > 1e-12 {
        return Err(ModelError::Inadmissible(format!("m_s = {m_s} is not ±1/2")));
    }
    if l < 0 {
        return Err(ModelError::Inadmissible(format!("l = {l} < 0")));
    }
    let i_r = n_r as f64 + 0.5 + m_s;
    let big_l = l as f64 + 0.5 + m_s;
    if i_r < 0.0 {
        return Err(ModelError::Inadmissible(format!("I_r = {i_r} < 0")));
    }
    if big_l <= alpha_s {
        return Err(ModelError::Inadmissible(format!("L = {big_l} not above the collision threshold")));
    }
    let d = i_r + (big_l * big_l - alpha_s * alpha_s).sqrt();
    Ok(mc2 / (1.0 + alpha_s * alpha_s / (d * d)).sqrt())
}

/// Historical spinless relativistic level with `n_r ≥ 0`, `l ≥ 1`.
pub fn sommerfeld_energy(n_r: i64, l: i64, alpha_s: f64, mc2: f64) -> Result<f64, ModelError> {
    if n_r < 0 || l < 1 {
        return Err(ModelError::Inadmissible(format!("(n_r, l) = ({n_r}, {l}) requires n_r ≥ 0, l ≥ 1")));
    }
    let l = l as f64;
    let d = n_r as f64 + (l * l - alpha_s * alpha_s).sqrt();
    Ok(mc2 / (1.0 + alpha_s * alpha_s / (d * d)).sqrt())
}

// ---------------------------------------------------------------------------
// Angular-momentum generators

/// `A = |L|`, `ℬ_L = L/|L|`. The flow rotates the phase point about `L̂`
/// with unit angular velocity.
#[derive(Debug, Clone, Copy, Default)]
pub struct TotalAngularMomentum;

impl HamiltonianModel for TotalAngularMomentum {
    fn name(&self) -> &str {
        "L"
    }
    fn hamiltonian(&self, pt: &PhasePoint) -> f64 {
        pt.angular_momentum().norm()
    }
    fn grad_p(&self, pt: &PhasePoint) -> Vector3<f64> {
        let n = pt.angular_momentum().normalize();
        n.cross(&pt.x)
    }
    fn grad_x(&self, pt: &PhasePoint) -> Vector3<f64> {
        let n = pt.angular_momentum().normalize();
        pt.p.cross(&n)
    }
    fn precession_field(&self, pt: &PhasePoint) -> AlgebraVector {
        AlgebraVector(pt.angular_momentum().normalize())
    }
}

/// `A = L_z`, `ℬ_M = e_z`.
#[derive(Debug, Clone, Copy, Default)]
pub struct AxialAngularMomentum;

impl HamiltonianModel for AxialAngularMomentum {
    fn name(&self) -> &str {
        "M"
    }
    fn hamiltonian(&self, pt: &PhasePoint) -> f64 {
        pt.x[0] * pt.p[1] - pt.x[1] * pt.p[0]
    }
    fn grad_p(&self, pt: &PhasePoint) -> Vector3<f64> {
        Vector3::new(-pt.x[1], pt.x[0], 0.0)
    }
    fn grad_x(&self, pt: &PhasePoint) -> Vector3<f64> {
        Vector3::new(pt.p[1], -pt.p[0], 0.0)
    }
    fn precession_field(&self, _pt: &PhasePoint) -> AlgebraVector {
        AlgebraVector(Vector3::z())
    }
}

/// Keeps the observable of `inner` but replaces its field by a constant.
/// Used to build deliberately non-commuting pairs.
#[derive(Debug, Clone, Copy)]
pub struct ConstantFieldOverride<M> {
    pub inner: M,
    pub field: Vector3<f64>,
}

impl<M: HamiltonianModel> HamiltonianModel for ConstantFieldOverride<M> {
    fn name(&self) -> &str {
        "override"
    }
    fn hamiltonian(&self, pt: &PhasePoint) -> f64 {
        self.inner.hamiltonian(pt)
    }
    fn grad_p(&self, pt: &PhasePoint) -> Vector3<f64> {
        self.inner.grad_p(pt)
    }
    fn grad_x(&self, pt: &PhasePoint) -> Vector3<f64> {
        self.inner.grad_x(pt)
    }
    fn precession_field(&self, _pt: &PhasePoint) -> AlgebraVector {
        AlgebraVector(self.field)
    }
    fn min_radius(&self) -> Option<f64> {
        self.inner.min_radius()
    }
}

/// `M` with its field replaced by `e_x`: does not commute with `(L, ℬ_L)`.
pub fn broken_axial_generator() -> ConstantFieldOverride<AxialAngularMomentum> {
    ConstantFieldOverride { inner: AxialAngularMomentum, field: Vector3::x() }
}
