//! TOML run configuration. Every section is optional; missing keys take
//! the defaults below. Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use spinebk::integrability::{SampleBox, ANALYTIC_TOL};
use spinebk::models::{ho_model, kepler_model, HoModel, KeplerModel, SphericalModel, UnitPreset};
use spinebk::su2::Spin;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelConfig,
    /// Spin quantum number `s` (non-negative multiple of 1/2).
    pub spin: f64,
    /// Integration tolerance.
    pub tol: f64,
    /// Offset into the quasi-random sample sequence.
    pub seed: u64,
    pub spectrum: SpectrumConfig,
    pub verify: VerifyConfig,
    pub orbit: OrbitConfig,
    pub angles: AnglesConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelConfig::default(),
            spin: 0.5,
            tol: 1e-10,
            seed: 0,
            spectrum: SpectrumConfig::default(),
            verify: VerifyConfig::default(),
            orbit: OrbitConfig::default(),
            angles: AnglesConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    /// `kepler` or `ho`.
    pub name: String,
    /// Kepler unit preset; `m`, `c`, `e` override single constants.
    pub units: UnitPreset,
    pub m: Option<f64>,
    pub c: Option<f64>,
    pub e: Option<f64>,
    pub omega: f64,
    /// Spin-orbit coupling of the oscillator; ignored when `thomas_c` is set.
    pub kappa: f64,
    /// Use the Thomas value `κ = ω²/(2mc²)` with this `c`.
    pub thomas_c: Option<f64>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            name: "kepler".into(),
            units: UnitPreset::Natural,
            m: None,
            c: None,
            e: None,
            omega: 1.0,
            kappa: 0.0,
            thomas_c: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumConfig {
    pub n_r_max: i64,
    pub l_max: i64,
    /// Cut on the principal number `n = n_r + l + 1 + 2m_s`.
    pub n_max: Option<i64>,
    /// Emit the spinless closed-form Kepler lines instead (Kepler only).
    pub sommerfeld: bool,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        SpectrumConfig { n_r_max: 3, l_max: 3, n_max: None, sommerfeld: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub samples: usize,
    /// Residual threshold on the scale-free involution residual.
    pub tolerance: f64,
    /// Threshold on `‖Δ(t, t′)‖`, `t, t′` sampled in `[0, t_max]`.
    pub delta_tolerance: f64,
    pub t_max: f64,
    /// Sample box; defaults to a box scaled to the model's natural orbit size.
    #[serde(rename = "box")]
    pub sample_box: Option<SampleBox>,
    /// Replace the field of `M` by `e_x` (negative control).
    pub broken: bool,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            samples: 200,
            tolerance: ANALYTIC_TOL,
            delta_tolerance: 1e-6,
            t_max: std::f64::consts::TAU,
            sample_box: None,
            broken: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OrbitConfig {
    /// Initial point; alternatively give `energy` and `l` to start at the
    /// inner turning point in the `xy` plane.
    pub p: Option<[f64; 3]>,
    pub x: Option<[f64; 3]>,
    pub energy: Option<f64>,
    pub l: Option<f64>,
    pub spin: [f64; 3],
    pub t_final: Option<f64>,
    /// Duration in radial periods (with `energy`, `l`).
    pub periods: Option<f64>,
}

impl Default for OrbitConfig {
    fn default() -> Self {
        OrbitConfig { p: None, x: None, energy: None, l: None, spin: [0.0, 0.0, 1.0], t_final: None, periods: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct AnglesConfig {
    pub energies: Vec<f64>,
    pub l_values: Vec<f64>,
}

pub enum Model {
    Kepler(KeplerModel),
    Ho(HoModel),
}

impl Model {
    pub fn spherical(&self) -> &dyn SphericalModel {
        match self {
            Model::Kepler(k) => k,
            Model::Ho(h) => h,
        }
    }

    /// Characteristic `(length, momentum)` of bound orbits.
    pub fn scales(&self) -> (f64, f64) {
        match self {
            Model::Kepler(k) => {
                let a0 = 1.0 / (k.m * k.e2());
                (a0, 1.0 / a0)
            }
            Model::Ho(h) => {
                let a0 = 1.0 / (h.m * h.omega).sqrt();
                (a0, 1.0 / a0)
            }
        }
    }
}

fn cfg_err(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {msg}"))
}

fn positive(field: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(cfg_err(field, format!("must be positive and finite, got {v}")))
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| cfg_err(&path.display().to_string(), e))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn spin(&self) -> Result<Spin, CliError> {
        Spin::new(self.spin).map_err(|e| cfg_err("spin", e))
    }

    pub fn build_model(&self) -> Result<Model, CliError> {
        let m = &self.model;
        match m.name.as_str() {
            "kepler" => {
                let (m0, c0, e0) = m.units.kepler_params();
                let mass = positive("model.m", m.m.unwrap_or(m0))?;
                let c = positive("model.c", m.c.unwrap_or(c0))?;
                let e = positive("model.e", m.e.unwrap_or(e0))?;
                kepler_model(mass, c, e).map(Model::Kepler).map_err(|e| cfg_err("model", e))
            }
            "ho" => {
                let mass = positive("model.m", m.m.unwrap_or(1.0))?;
                let omega = positive("model.omega", m.omega)?;
                let h = match m.thomas_c {
                    Some(c) => HoModel::thomas(mass, omega, positive("model.thomas_c", c)?),
                    None => ho_model(mass, omega, m.kappa),
                };
                h.map(Model::Ho).map_err(|e| cfg_err("model", e))
            }
            other => Err(cfg_err("model.name", format!("unknown model id '{other}' (expected 'kepler' or 'ho')"))),
        }
    }

    /// Checks that do not depend on the subcommand.
    pub fn validate(&self) -> Result<(), CliError> {
        positive("tol", self.tol)?;
        self.spin()?;
        Ok(())
    }

    pub fn validate_spectrum(&self) -> Result<(), CliError> {
        let s = &self.spectrum;
        if s.n_r_max < 0 {
            return Err(cfg_err("spectrum.n_r_max", "must be ≥ 0"));
        }
        if s.l_max < 0 {
            return Err(cfg_err("spectrum.l_max", "must be ≥ 0"));
        }
        if let Some(n) = s.n_max {
            if n < 1 {
                return Err(cfg_err("spectrum.n_max", "must be ≥ 1"));
            }
        }
        if s.sommerfeld && self.model.name != "kepler" {
            return Err(cfg_err("spectrum.sommerfeld", "only available for the kepler model"));
        }
        Ok(())
    }

    pub fn validate_verify(&self) -> Result<(), CliError> {
        let v = &self.verify;
        if v.samples == 0 {
            return Err(cfg_err("verify.samples", "must be ≥ 1"));
        }
        positive("verify.tolerance", v.tolerance)?;
        positive("verify.delta_tolerance", v.delta_tolerance)?;
        positive("verify.t_max", v.t_max)?;
        if let Some(b) = &v.sample_box {
            b.validate().map_err(|e| cfg_err("verify.box", e))?;
        }
        Ok(())
    }

    pub fn default_box(&self, model: &Model) -> SampleBox {
        let (a0, p0) = model.scales();
        SampleBox {
            p_lo: [-p0; 3],
            p_hi: [p0; 3],
            x_lo: [-2.0 * a0; 3],
            x_hi: [2.0 * a0; 3],
            min_radius: 0.5 * a0,
            min_momentum: 0.3 * p0,
        }
    }

    pub fn default_angle_grid(&self, model: &Model) -> (Vec<f64>, Vec<f64>) {
        match model {
            Model::Kepler(k) => {
                // bindings (in units of α²mc²) under the circular value 1/(2L²) for L ≤ 3
                let (mc2, a2) = (k.rest_energy(), k.coupling().powi(2));
                let es = [0.05, 0.03, 0.02].iter().map(|b| mc2 * (1.0 - b * a2)).collect();
                (es, vec![1.0, 2.0, 3.0])
            }
            Model::Ho(h) => (vec![2.0 * h.omega, 3.0 * h.omega, 5.0 * h.omega], vec![0.5, 1.0, 1.5]),
        }
    }
}
