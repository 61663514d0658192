//! Spin-extended torus quantisation for spherically symmetric models.
//!
//! Angular conditions: `L = l + 1/2 + m_s = j + 1/2`, `M = m_j`.
//! Radial condition: `I_r = n_r + 1/2 + m_s α_r/2π`, solved for `E`
//! self-consistently when `α_r` depends on the torus. Units: ħ = 1.

use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::Serialize;

use crate::actions_angles::{circular_orbit, radial_action, rotation_angle_radial, ActionError};
use crate::models::{ModelError, SphericalModel};
use crate::numeric::brent_root;
use crate::su2::Spin;

/// Targets this close to zero are the circular torus `I_r = 0`.
pub const CIRCULAR_SNAP: f64 = 1e-7;
/// Two labellings are the same torus when their radial targets agree to this.
pub const TORUS_MATCH: f64 = 1e-6;
/// Self-consistency threshold on the radial target (units of ħ).
pub const SELF_CONSISTENCY: f64 = 1e-9;
pub const MAX_SELF_CONSISTENT_ITERATIONS: usize = 100;

/// One admissible angular assignment. Half-integers are stored doubled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct AngularTuple {
    pub l: i64,
    pub twice_m_s: i64,
    pub twice_j: i64,
    pub twice_m_j: i64,
}

impl AngularTuple {
    pub fn m_s(&self) -> f64 {
        self.twice_m_s as f64 / 2.0
    }
    pub fn j(&self) -> f64 {
        self.twice_j as f64 / 2.0
    }
    pub fn m_j(&self) -> f64 {
        self.twice_m_j as f64 / 2.0
    }
    /// `m_l = m_j − m_s`.
    pub fn m_l(&self) -> i64 {
        (self.twice_m_j - self.twice_m_s) / 2
    }
    /// `L = j + 1/2`.
    pub fn big_l(&self) -> f64 {
        self.j() + 0.5
    }
    /// `M = m_j`.
    pub fn big_m(&self) -> f64 {
        self.m_j()
    }
}

/// All admissible `(l, m_s, j, m_j)` for spin `s` and `0 ≤ l ≤ l_max`:
/// `j = l + m_s ≥ 0`, `m_j ∈ {−j, …, j}`.
pub fn quantize_angular(s: Spin, l_max: i64) -> Vec<AngularTuple> {
    let mut out = Vec::new();
    let ts = s.twice() as i64;
    for l in 0..=l_max.max(-1) {
        for twice_m_s in (-ts..=ts).step_by(2) {
            let twice_j = 2 * l + twice_m_s;
            if twice_j < 0 {
                continue;
            }
            for twice_m_j in (-twice_j..=twice_j).step_by(2) {
                out.push(AngularTuple { l, twice_m_s, twice_j, twice_m_j });
            }
        }
    }
    out
}

/// Signed spin rotation angle `α_r(E, L)` in `(−2π, 2π]`.
pub type AlphaProvider<'a> = dyn Fn(f64, f64) -> Result<f64, ActionError> + Sync + 'a;

/// `α_r` from numeric orbit integration at tolerance `tol`.
pub fn numeric_alpha<S: SphericalModel + ?Sized>(model: &S, tol: f64) -> impl Fn(f64, f64) -> Result<f64, ActionError> + Sync + '_ {
    move |e, l| Ok(rotation_angle_radial(model, e, l, tol)?.signed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadialSolution {
    pub energy: f64,
    /// Radial action target `n_r + 1/2 + m_s α_r/2π`.
    pub i_r: f64,
    pub alpha_r: Option<f64>,
    pub circular: bool,
    pub iterations: usize,
}

/// Energy with `I_r(E, L) = target`, by Brent's method on
/// `[E_circular, E_hi]` with `E_hi` expanded toward the escape threshold.
pub fn solve_energy_for_action<S: SphericalModel + ?Sized>(
    model: &S,
    l: f64,
    target: f64,
) -> Result<f64, ActionError> {
    let e_min = circular_orbit(model, l)?.energy;
    if target <= 0.0 {
        return Ok(e_min);
    }
    let escape = model.escape_energy(l);
    let f = |e: f64| radial_action(model, e, l).map(|i| i - target);
    let mut e_hi;
    let mut k = 0;
    loop {
        e_hi = if escape.is_finite() {
            escape - (escape - e_min) * 0.5f64.powi(k + 1)
        } else {
            e_min + (1.0 + e_min.abs()) * 2f64.powi(k)
        };
        if e_hi >= escape || e_hi <= e_min {
            return Err(ModelError::Domain(format!("no bound torus with I_r = {target} at L = {l}")).into());
        }
        if f(e_hi)? > 0.0 {
            break;
        }
        k += 1;
        if k > 200 {
            return Err(ModelError::Domain(format!("no bound torus with I_r = {target} at L = {l}")).into());
        }
    }
    let mut err = None;
    let root = brent_root(
        |e| match f(e) {
            Ok(v) => v,
            Err(x) => {
                err.get_or_insert(x);
                f64::NAN
            }
        },
        e_min,
        e_hi,
        0.0,
        500,
    );
    if let Some(x) = err {
        return Err(x);
    }
    Ok(root?)
}

/// Solves the radial condition for one `(n_r, l, m_s)` label.
/// Inadmissible labels (negative radial action) are reported as errors.
pub fn quantize_radial<S: SphericalModel + ?Sized>(
    model: &S,
    tuple: &AngularTuple,
    n_r: i64,
    alpha: &AlphaProvider<'_>,
) -> Result<RadialSolution, ActionError> {
    let l = tuple.big_l();
    model.check_angular_momentum(l)?;
    let base = n_r as f64 + 0.5;
    let m_s = tuple.m_s();
    if tuple.twice_m_s == 0 {
        if base < 0.0 {
            return Err(ModelError::Inadmissible(format!("I_r = {base} < 0")).into());
        }
        let energy = solve_energy_for_action(model, l, base)?;
        return Ok(RadialSolution { energy, i_r: base, alpha_r: None, circular: false, iterations: 0 });
    }
    let mut energy = solve_energy_for_action(model, l, base.max(0.5))?;
    let mut prev_target: Option<f64> = None;
    for it in 1..=MAX_SELF_CONSISTENT_ITERATIONS {
        let a = alpha(energy, l)?;
        let target = base + m_s * a / TAU;
        if target < -CIRCULAR_SNAP {
            return Err(ModelError::Inadmissible(format!(
                "I_r = {target:.6} < 0 for (n_r, l, m_s) = ({n_r}, {}, {m_s})",
                tuple.l
            ))
            .into());
        }
        if target.abs() <= CIRCULAR_SNAP {
            let e = circular_orbit(model, l)?.energy;
            return Ok(RadialSolution { energy: e, i_r: 0.0, alpha_r: Some(a), circular: true, iterations: it });
        }
        if let Some(p) = prev_target {
            if (target - p).abs() <= SELF_CONSISTENCY {
                return Ok(RadialSolution { energy, i_r: target, alpha_r: Some(a), circular: false, iterations: it });
            }
        }
        energy = solve_energy_for_action(model, l, target)?;
        prev_target = Some(target);
    }
    Err(ModelError::Domain(format!(
        "self-consistent α_r did not converge after {MAX_SELF_CONSISTENT_ITERATIONS} iterations"
    ))
    .into())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralLine {
    pub n_r: i64,
    pub l: i64,
    pub m_l: i64,
    pub m_s: f64,
    pub s: f64,
    pub j: f64,
    pub m_j: f64,
    /// `n = n_r + l + 1 + 2m_s`.
    pub n: i64,
    pub energy: f64,
    /// Size of the degenerate level this state belongs to.
    pub multiplicity: usize,
    pub i_r: f64,
    pub big_l: f64,
    pub alpha_r: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Level {
    pub energy: f64,
    pub multiplicity: usize,
    /// Distinct `(n, j)` labels in the level.
    pub labels: Vec<(i64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LineDiagnostic {
    pub n_r: i64,
    pub l: i64,
    pub m_s: f64,
    pub message: String,
    /// True when the label is excluded by `I_r ≥ 0` or `L` admissibility
    /// rather than by a numeric failure.
    pub inadmissible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    pub states: Vec<SpectralLine>,
    pub levels: Vec<Level>,
    pub diagnostics: Vec<LineDiagnostic>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectrumRanges {
    pub n_r_max: i64,
    pub l_max: i64,
    /// Optional cut on `n = n_r + l + 1 + 2m_s`.
    pub n_max: Option<i64>,
}

/// Grouping tolerance `1e−9·|E − E_ref| + 16ε|E|`.
pub fn grouping_tolerance(energy: f64, e_ref: f64) -> f64 {
    1e-9 * (energy - e_ref).abs() + 16.0 * f64::EPSILON * energy.abs()
}

/// Sorts states by energy and merges neighbours within the grouping
/// tolerance; writes the level size into each state.
pub fn group_levels(states: &mut [SpectralLine], e_ref: f64) -> Vec<Level> {
    states.sort_by(|a, b| {
        a.energy.total_cmp(&b.energy).then(a.n_r.cmp(&b.n_r)).then(a.l.cmp(&b.l)).then(a.m_j.total_cmp(&b.m_j))
    });
    let mut levels: Vec<(usize, usize)> = Vec::new();
    let mut start = 0;
    for i in 1..=states.len() {
        if i == states.len() || states[i].energy - states[start].energy > grouping_tolerance(states[start].energy, e_ref)
        {
            if i > start {
                levels.push((start, i));
            }
            start = i;
        }
    }
    levels
        .into_iter()
        .map(|(a, b)| {
            let members = &mut states[a..b];
            let energy = members.iter().map(|s| s.energy).sum::<f64>() / members.len() as f64;
            let mut labels: Vec<(i64, f64)> = Vec::new();
            for s in members.iter_mut() {
                s.multiplicity = b - a;
                if !labels.iter().any(|&(n, j)| n == s.n && j == s.j) {
                    labels.push((s.n, s.j));
                }
            }
            labels.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.total_cmp(&y.1)));
            Level { energy, multiplicity: b - a, labels }
        })
        .collect()
}

/// Enumerates admissible labels, solves each radial condition (in
/// parallel), merges labellings of the same torus `(I_r, L, M)` and groups
/// degenerate energies.
pub fn build_spectrum<S: SphericalModel + ?Sized>(
    model: &S,
    s: Spin,
    ranges: &SpectrumRanges,
    alpha: &AlphaProvider<'_>,
) -> Spectrum {
    let ts = s.twice() as i64;
    let n_r_min = -((ts + 1) / 2);
    let mut labels = Vec::new();
    for l in 0..=ranges.l_max {
        for twice_m_s in (-ts..=ts).step_by(2) {
            if 2 * l + twice_m_s < 0 {
                continue;
            }
            for n_r in n_r_min..=ranges.n_r_max {
                let n = n_r + l + 1 + twice_m_s;
                if ranges.n_max.is_some_and(|nm| n > nm) {
                    continue;
                }
                labels.push((n_r, l, twice_m_s));
            }
        }
    }
    let solved: Vec<_> = labels
        .par_iter()
        .map(|&(n_r, l, twice_m_s)| {
            let tuple = AngularTuple { l, twice_m_s, twice_j: 2 * l + twice_m_s, twice_m_j: 0 };
            (n_r, tuple, quantize_radial(model, &tuple, n_r, alpha))
        })
        .collect();

    let mut diagnostics = Vec::new();
    let mut tori: Vec<(i64, AngularTuple, RadialSolution)> = Vec::new();
    for (n_r, tuple, res) in solved {
        match res {
            Ok(sol) => tori.push((n_r, tuple, sol)),
            Err(e) => {
                let inadmissible = matches!(
                    e,
                    ActionError::Model(ModelError::Inadmissible(_)) | ActionError::Model(ModelError::Domain(_))
                );
                diagnostics.push(LineDiagnostic {
                    n_r,
                    l: tuple.l,
                    m_s: tuple.m_s(),
                    message: e.to_string(),
                    inadmissible,
                });
            }
        }
    }
    // preferred label first: n_r ≥ 0, then lower l
    tori.sort_by_key(|(n_r, t, _)| (*n_r < 0, t.l, t.twice_m_s, *n_r));
    let mut kept: Vec<(i64, AngularTuple, RadialSolution)> = Vec::new();
    for t in tori {
        let dup = kept
            .iter()
            .any(|k| k.1.twice_j == t.1.twice_j && (k.2.i_r - t.2.i_r).abs() <= TORUS_MATCH);
        if !dup {
            kept.push(t);
        }
    }
    let mut states = Vec::new();
    for (n_r, t, sol) in &kept {
        for twice_m_j in (-t.twice_j..=t.twice_j).step_by(2) {
            let tuple = AngularTuple { twice_m_j, ..*t };
            states.push(SpectralLine {
                n_r: *n_r,
                l: t.l,
                m_l: tuple.m_l(),
                m_s: t.m_s(),
                s: s.value(),
                j: t.j(),
                m_j: tuple.m_j(),
                n: n_r + t.l + 1 + t.twice_m_s,
                energy: sol.energy,
                multiplicity: 1,
                i_r: sol.i_r,
                big_l: t.big_l(),
                alpha_r: sol.alpha_r,
            });
        }
    }
    let levels = group_levels(&mut states, model.energy_reference());
    Spectrum { states, levels, diagnostics }
}

/// Historical spinless relativistic spectrum, one non-degenerate line per
/// `(n_r, l)` with `n_r ≥ 0`, `l ≥ 1`.
pub fn sommerfeld_spectrum(n_r_max: i64, l_max: i64, alpha_s: f64, mc2: f64) -> Vec<SpectralLine> {
    let mut out = Vec::new();
    for n_r in 0..=n_r_max {
        for l in 1..=l_max {
            let energy = crate::models::sommerfeld_energy(n_r, l, alpha_s, mc2).expect("n_r ≥ 0, l ≥ 1");
            out.push(SpectralLine {
                n_r,
                l,
                m_l: 0,
                m_s: 0.0,
                s: 0.0,
                j: l as f64,
                m_j: 0.0,
                n: n_r + l,
                energy,
                multiplicity: 1,
                i_r: n_r as f64,
                big_l: l as f64,
                alpha_r: None,
            });
        }
    }
    out
}
