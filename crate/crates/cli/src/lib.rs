//! Subcommand implementations behind the `spinebk` binary. Each command
//! returns its CSV table and a JSON summary; `write_output` places them.

pub mod config;

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use spinebk::actions_angles::{
    frequencies, perihelion_point, radial_action, radial_turning_points, rotation_angle_radial, ActionError,
};
use spinebk::dynamics::{covering_consistency, integrate_skew, DynamicsError, HamiltonianModel, PhasePoint, SkewState};
use spinebk::integrability::{involution_report, skew_commutator, IntegrabilityError};
use spinebk::models::{
    broken_axial_generator, AxialAngularMomentum, ModelError, TotalAngularMomentum,
};
use spinebk::quantizer::{build_spectrum, group_levels, numeric_alpha, sommerfeld_spectrum, SpectralLine, SpectrumRanges};

pub use config::{Model, RunConfig};

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Config(String),
    Numeric(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Numeric(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric failure: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

fn numeric(e: impl std::fmt::Display) -> CliError {
    CliError::Numeric(e.to_string())
}

/// Result of one subcommand. `failure` is set when the run completed but
/// some item hit a numeric error; outputs are still written.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub csv: String,
    pub summary: Value,
    pub failure: Option<String>,
}

/// Fixed 17-significant-digit float format used in every CSV.
pub fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn row(values: &[String]) -> String {
    let mut s = values.join(",");
    s.push('\n');
    s
}

fn is_domain(e: &ActionError) -> bool {
    matches!(e, ActionError::Model(ModelError::Domain(_)) | ActionError::Model(ModelError::Inadmissible(_)))
}

pub const SPECTRUM_HEADER: &str = "n,n_r,l,m_l,m_s,s,j,m_j,energy,multiplicity,i_r,big_l,alpha_r";

fn spectrum_csv(states: &[SpectralLine]) -> String {
    let mut out = String::from(SPECTRUM_HEADER);
    out.push('\n');
    for s in states {
        out.push_str(&row(&[
            s.n.to_string(),
            s.n_r.to_string(),
            s.l.to_string(),
            s.m_l.to_string(),
            s.m_s.to_string(),
            s.s.to_string(),
            s.j.to_string(),
            s.m_j.to_string(),
            fmt(s.energy),
            s.multiplicity.to_string(),
            fmt(s.i_r),
            fmt(s.big_l),
            s.alpha_r.map(fmt).unwrap_or_default(),
        ]));
    }
    out
}

pub fn run_spectrum(cfg: &RunConfig) -> Result<Output, CliError> {
    cfg.validate()?;
    cfg.validate_spectrum()?;
    let model = cfg.build_model()?;
    let sm = model.spherical();
    let sc = &cfg.spectrum;
    if sc.sommerfeld {
        let Model::Kepler(k) = &model else { unreachable!("validated") };
        let mut lines: Vec<SpectralLine> = sommerfeld_spectrum(sc.n_r_max, sc.l_max.max(1), k.coupling(), k.rest_energy())
            .into_iter()
            .filter(|l| sc.n_max.is_none_or(|n| l.n <= n))
            .collect();
        let levels = group_levels(&mut lines, sm.energy_reference());
        for l in &mut lines {
            l.multiplicity = 1;
        }
        return Ok(Output {
            csv: spectrum_csv(&lines),
            summary: json!({ "command": "spectrum", "method": "sommerfeld", "model": cfg.model, "states": lines.len(), "levels": levels }),
            failure: None,
        });
    }
    let spin = cfg.spin()?;
    let alpha = numeric_alpha(sm, cfg.tol);
    let ranges = SpectrumRanges { n_r_max: sc.n_r_max, l_max: sc.l_max, n_max: sc.n_max };
    let sp = build_spectrum(sm, spin, &ranges, &alpha);
    let failures: Vec<_> = sp.diagnostics.iter().filter(|d| !d.inadmissible).collect();
    let failure = (!failures.is_empty()).then(|| format!("{} line(s) failed to converge", failures.len()));
    Ok(Output {
        csv: spectrum_csv(&sp.states),
        summary: json!({
            "command": "spectrum",
            "method": "numeric",
            "model": cfg.model,
            "spin": cfg.spin,
            "tol": cfg.tol,
            "ranges": ranges,
            "states": sp.states.len(),
            "levels": sp.levels,
            "diagnostics": sp.diagnostics,
        }),
        failure,
    })
}

#[derive(Debug, Clone, Serialize)]
struct VerifyFailure {
    index: usize,
    p: [f64; 3],
    x: [f64; 3],
    residual: f64,
    delta: f64,
}

pub const VERIFY_HEADER: &str = "pair,index,p1,p2,p3,x1,x2,x3,t,t_prime,residual,abs_residual,delta";

pub fn run_verify(cfg: &RunConfig) -> Result<Output, CliError> {
    cfg.validate()?;
    cfg.validate_verify()?;
    let model = cfg.build_model()?;
    let v = &cfg.verify;
    let bx = v.sample_box.unwrap_or_else(|| cfg.default_box(&model));
    let seed = usize::try_from(cfg.seed).map_err(|_| CliError::Config("seed: out of range".into()))?;
    let pts = bx.sample(v.samples, seed).map_err(|e| CliError::Config(format!("verify.box: {e}")))?;
    let phase: Vec<PhasePoint> = pts.iter().map(|p| p.0).collect();
    let broken = broken_axial_generator();
    let h: &dyn HamiltonianModel = model.spherical();
    let m: &dyn HamiltonianModel = if v.broken { &broken } else { &AxialAngularMomentum };
    let gens: [(&str, &dyn HamiltonianModel); 3] = [("H", h), ("L", &TotalAngularMomentum), ("M", m)];

    let mut csv = String::from(VERIFY_HEADER);
    csv.push('\n');
    let mut pairs = Vec::new();
    let mut all_pass = true;
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        let (a, b) = (gens[i].1, gens[j].1);
        let name = format!("{}{}", gens[i].0, gens[j].0);
        let rep = involution_report(a, b, &phase, v.tolerance).map_err(numeric)?;
        let deltas: Vec<f64> = pts
            .par_iter()
            .map(|(pt, u)| skew_commutator(a, b, pt, v.t_max * u[0], v.t_max * u[1], cfg.tol).map(|c| c.norm))
            .collect::<Result<_, IntegrabilityError>>()
            .map_err(numeric)?;
        let mut failures = Vec::new();
        for (k, (pt, u)) in pts.iter().enumerate() {
            let (res, d) = (rep.residuals[k], deltas[k]);
            csv.push_str(&row(&[
                name.clone(),
                k.to_string(),
                fmt(pt.p[0]),
                fmt(pt.p[1]),
                fmt(pt.p[2]),
                fmt(pt.x[0]),
                fmt(pt.x[1]),
                fmt(pt.x[2]),
                fmt(v.t_max * u[0]),
                fmt(v.t_max * u[1]),
                fmt(res),
                fmt(rep.absolute[k]),
                fmt(d),
            ]));
            if res >= v.tolerance || d >= v.delta_tolerance {
                failures.push(VerifyFailure { index: k, p: pt.p.into(), x: pt.x.into(), residual: res, delta: d });
            }
        }
        let max_delta = deltas.iter().copied().fold(0.0, f64::max);
        let pass = failures.is_empty();
        all_pass &= pass;
        pairs.push(json!({
            "pair": [gens[i].0, gens[j].0],
            "max_residual": rep.max_residual,
            "max_delta": max_delta,
            "pass": pass,
            "failures": failures,
            "report": rep,
        }));
    }
    Ok(Output {
        csv,
        summary: json!({
            "command": "verify",
            "model": cfg.model,
            "broken": v.broken,
            "samples": pts.len(),
            "seed": cfg.seed,
            "tolerance": v.tolerance,
            "delta_tolerance": v.delta_tolerance,
            "t_max": v.t_max,
            "box": bx,
            "pass": all_pass,
            "pairs": pairs,
        }),
        failure: None,
    })
}

pub const ORBIT_HEADER: &str = "t,x1,x2,x3,p1,p2,p3,q0,q1,q2,q3,s1,s2,s3,r,phi,energy";

pub fn run_orbit(cfg: &RunConfig) -> Result<Output, CliError> {
    cfg.validate()?;
    let model = cfg.build_model()?;
    let sm = model.spherical();
    let o = &cfg.orbit;
    let (start, radial_period) = match (o.p, o.x, o.energy, o.l) {
        (Some(p), Some(x), None, None) => (PhasePoint::from_arrays(p, x), None),
        (None, None, Some(e), Some(l)) => {
            let (r_min, _) = radial_turning_points(sm, e, l).map_err(|err| {
                if is_domain(&err) {
                    CliError::Config(format!("orbit.energy: {err}"))
                } else {
                    numeric(err)
                }
            })?;
            let period = frequencies(sm, e, l).map_err(numeric)?.radial_period();
            (perihelion_point(r_min, l), Some(period))
        }
        _ => {
            return Err(CliError::Config(
                "orbit: give either both `p` and `x`, or both `energy` and `l`".into(),
            ))
        }
    };
    let t_final = match (o.t_final, o.periods) {
        (Some(t), None) => t,
        (None, Some(n)) => {
            let period = match radial_period {
                Some(p) => p,
                None => {
                    let e = sm.hamiltonian(&start);
                    let l = start.angular_momentum().norm();
                    frequencies(sm, e, l).map_err(numeric)?.radial_period()
                }
            };
            n * period
        }
        _ => return Err(CliError::Config("orbit: give exactly one of `t_final` and `periods`".into())),
    };
    if !t_final.is_finite() {
        return Err(CliError::Config("orbit.t_final: must be finite".into()));
    }
    let s0 = Vector3::from(o.spin);
    if !(s0.norm() > 0.0) {
        return Err(CliError::Config("orbit.spin: must be a non-zero vector".into()));
    }
    let st = SkewState::with_spin(start, s0.normalize());
    let traj = integrate_skew(sm, &st, t_final, cfg.tol).map_err(|e: DynamicsError| numeric(e))?;

    let mut csv = String::from(ORBIT_HEADER);
    csv.push('\n');
    let mut phi = 0.0;
    let mut last: Option<f64> = None;
    for smp in &traj.samples {
        let ph = &smp.state.phase;
        let a = ph.x[1].atan2(ph.x[0]);
        if let Some(prev) = last {
            let mut d = a - prev;
            if d > PI {
                d -= 2.0 * PI;
            } else if d < -PI {
                d += 2.0 * PI;
            }
            phi += d;
        } else {
            phi = a;
        }
        last = Some(a);
        let q = smp.state.cocycle.to_array();
        let s = smp.state.spin;
        let mut fields: Vec<String> = vec![fmt(smp.t)];
        fields.extend(ph.x.iter().chain(ph.p.iter()).map(|v| fmt(*v)));
        fields.extend(q.iter().map(|v| fmt(*v)));
        fields.extend(s.iter().map(|v| fmt(*v)));
        fields.push(fmt(ph.radius()));
        fields.push(fmt(phi));
        fields.push(fmt(sm.hamiltonian(ph)));
        csv.push_str(&row(&fields));
    }
    Ok(Output {
        csv,
        summary: json!({
            "command": "orbit",
            "model": cfg.model,
            "t_final": t_final,
            "samples": traj.samples.len(),
            "steps": traj.stats.steps,
            "rejected": traj.stats.rejected,
            "max_energy_drift": traj.stats.max_energy_drift,
            "max_unitarity_defect": traj.stats.max_unitarity_defect,
            "covering_defect": covering_consistency(&traj),
        }),
        failure: None,
    })
}

pub const ANGLES_HEADER: &str = "energy,l,i_r,omega_r,omega_l,alpha_r,alpha_signed";

pub fn run_angles(cfg: &RunConfig) -> Result<Output, CliError> {
    cfg.validate()?;
    let model = cfg.build_model()?;
    let sm = model.spherical();
    let (mut es, mut ls) = (cfg.angles.energies.clone(), cfg.angles.l_values.clone());
    if es.is_empty() && ls.is_empty() {
        (es, ls) = cfg.default_angle_grid(&model);
    } else if es.is_empty() || ls.is_empty() {
        return Err(CliError::Config("angles: give both `energies` and `l_values`".into()));
    }
    let grid: Vec<(f64, f64)> = es.iter().flat_map(|&e| ls.iter().map(move |&l| (e, l))).collect();
    let results: Vec<_> = grid
        .par_iter()
        .map(|&(e, l)| -> Result<[f64; 7], ActionError> {
            let i_r = radial_action(sm, e, l)?;
            let rot = rotation_angle_radial(sm, e, l, cfg.tol)?;
            Ok([e, l, i_r, rot.frequencies.omega_r, rot.frequencies.omega_l, rot.alpha_r, rot.signed])
        })
        .collect();
    let mut csv = String::from(ANGLES_HEADER);
    csv.push('\n');
    let mut skipped = Vec::new();
    let mut errors = Vec::new();
    for ((e, l), r) in grid.iter().zip(results) {
        match r {
            Ok(vals) => csv.push_str(&row(&vals.map(fmt))),
            Err(err) if is_domain(&err) => skipped.push(json!({ "energy": e, "l": l, "reason": err.to_string() })),
            Err(err) => errors.push(json!({ "energy": e, "l": l, "error": err.to_string() })),
        }
    }
    let failure = (!errors.is_empty()).then(|| format!("{} grid point(s) failed", errors.len()));
    Ok(Output {
        csv,
        summary: json!({
            "command": "angles",
            "model": cfg.model,
            "tol": cfg.tol,
            "points": grid.len(),
            "skipped": skipped,
            "errors": errors,
        }),
        failure,
    })
}

/// `(csv_path, json_path)` for `--out PATH`: the CSV goes to `PATH` (or
/// `PATH` with extension `csv` when it ends in `.json`), the summary next
/// to it with extension `json`.
pub fn output_paths(out: &Path) -> (PathBuf, PathBuf) {
    let csv = if out.extension().is_some_and(|e| e == "json") { out.with_extension("csv") } else { out.to_path_buf() };
    (csv, out.with_extension("json"))
}

/// Writes the CSV and summary to `--out`, or the CSV to stdout when no
/// path is given.
pub fn write_output(out: &Output, path: Option<&Path>) -> Result<Option<(PathBuf, PathBuf)>, CliError> {
    let io = |p: &Path, e: std::io::Error| CliError::Io(format!("{}: {e}", p.display()));
    match path {
        Some(p) => {
            let (csv, js) = output_paths(p);
            std::fs::write(&csv, &out.csv).map_err(|e| io(&csv, e))?;
            let mut text = serde_json::to_string_pretty(&out.summary).map_err(|e| CliError::Io(e.to_string()))?;
            let _ = writeln!(text);
            std::fs::write(&js, text).map_err(|e| io(&js, e))?;
            Ok(Some((csv, js)))
        }
        None => {
            print!("{}", out.csv);
            Ok(None)
        }
    }
}
