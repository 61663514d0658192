//! Adaptive Dormand–Prince 5(4) integrator with constraint projection after
//! accepted steps, cubic Hermite dense output and event location.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegrationError {
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
    #[error("maximum number of steps ({steps}) exceeded at t = {t}")]
    MaxSteps { t: f64, steps: usize },
    #[error("integration aborted at t = {t}: {reason}")]
    Aborted { t: f64, reason: String },
    #[error("event not found before t = {t}")]
    EventNotFound { t: f64 },
}

/// A first-order system `y' = f(t, y)`.
pub trait OdeSystem {
    fn dim(&self) -> usize;

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]);

    /// Projects `y` back onto the constraint manifold after an accepted step
    /// and returns the constraint defect measured before projection.
    fn project(&self, _y: &mut [f64]) -> f64 {
        0.0
    }

    /// Validity check on accepted states (e.g. a collision guard).
    fn check(&self, _t: f64, _y: &[f64]) -> Result<(), String> {
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: Option<f64>,
    pub h_min: f64,
    pub max_steps: usize,
}

impl IntegratorConfig {
    pub fn with_tol(tol: f64) -> Self {
        IntegratorConfig { rtol: tol, atol: tol, ..Default::default() }
    }
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig { rtol: 1e-10, atol: 1e-10, h_init: None, h_min: 1e-14, max_steps: 5_000_000 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OdeStats {
    pub steps: usize,
    pub rejected: usize,
    pub evaluations: usize,
    /// Largest constraint defect reported by `OdeSystem::project`.
    pub max_projection_defect: f64,
}

/// One accepted step, with derivatives at both ends for Hermite
/// interpolation.
#[derive(Debug, Clone)]
pub struct Step<'a> {
    pub t0: f64,
    pub y0: &'a [f64],
    pub f0: &'a [f64],
    pub t1: f64,
    pub y1: &'a [f64],
    pub f1: &'a [f64],
}

impl Step<'_> {
    /// Cubic Hermite interpolant at `t` inside the step.
    pub fn interpolate(&self, t: f64) -> Vec<f64> {
        let h = self.t1 - self.t0;
        let s = (t - self.t0) / h;
        let h00 = 2.0 * s * s * s - 3.0 * s * s + 1.0;
        let h10 = s * s * s - 2.0 * s * s + s;
        let h01 = -2.0 * s * s * s + 3.0 * s * s;
        let h11 = s * s * s - s * s;
        (0..self.y0.len())
            .map(|i| {
                h00 * self.y0[i] + h10 * h * self.f0[i] + h01 * self.y1[i] + h11 * h * self.f1[i]
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B: [f64; 7] =
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// A single Dormand–Prince step of size `h` from `(t, y)` with `f = f(t, y)`.
/// Returns the fifth-order solution and the embedded error estimate.
pub fn dopri_step<S: OdeSystem + ?Sized>(
    sys: &S,
    t: f64,
    y: &[f64],
    f: &[f64],
    h: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = y.len();
    let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
    k.push(f.to_vec());
    let mut tmp = vec![0.0; n];
    for stage in 1..7 {
        for i in 0..n {
            let mut acc = 0.0;
            for (j, kj) in k.iter().enumerate() {
                acc += A[stage][j] * kj[i];
            }
            tmp[i] = y[i] + h * acc;
        }
        let mut ks = vec![0.0; n];
        sys.rhs(t + C[stage] * h, &tmp, &mut ks);
        k.push(ks);
    }
    let mut y_new = vec![0.0; n];
    let mut err = vec![0.0; n];
    for i in 0..n {
        let mut acc = 0.0;
        let mut acc_e = 0.0;
        for s in 0..7 {
            acc += B[s] * k[s][i];
            acc_e += E[s] * k[s][i];
        }
        y_new[i] = y[i] + h * acc;
        err[i] = h * acc_e;
    }
    (y_new, err)
}

fn error_norm(y0: &[f64], y1: &[f64], err: &[f64], cfg: &IntegratorConfig) -> f64 {
    let n = y0.len() as f64;
    let sum: f64 = y0
        .iter()
        .zip(y1)
        .zip(err)
        .map(|((a, b), e)| {
            let sc = cfg.atol + cfg.rtol * a.abs().max(b.abs());
            (e / sc).powi(2)
        })
        .sum();
    (sum / n).sqrt()
}

fn initial_step<S: OdeSystem + ?Sized>(
    sys: &S,
    t0: f64,
    y0: &[f64],
    f0: &[f64],
    dir: f64,
    span: f64,
    cfg: &IntegratorConfig,
) -> f64 {
    let scale: Vec<f64> = y0.iter().map(|y| cfg.atol + cfg.rtol * y.abs()).collect();
    let rms = |v: &[f64]| -> f64 {
        (v.iter().zip(&scale).map(|(a, s)| (a / s).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
    };
    let d0 = rms(y0);
    let d1 = rms(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(span);
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, f)| y + dir * h0 * f).collect();
    let mut f1 = vec![0.0; y0.len()];
    sys.rhs(t0 + dir * h0, &y1, &mut f1);
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = rms(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(1.0 / 5.0)
    };
    (100.0 * h0).min(h1).min(span)
}

/// Integrates from `t0` to `t_end` (either direction), calling `on_step`
/// after each accepted (and projected) step. Returns the final state.
pub fn integrate<S, F>(
    sys: &S,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    cfg: &IntegratorConfig,
    mut on_step: F,
) -> Result<(f64, Vec<f64>, OdeStats), IntegrationError>
where
    S: OdeSystem + ?Sized,
    F: FnMut(&Step<'_>) -> Control,
{
    let n = sys.dim();
    debug_assert_eq!(n, y0.len());
    let mut stats = OdeStats::default();
    let mut t = t0;
    let mut y = y0.to_vec();
    if t_end == t0 {
        return Ok((t, y, stats));
    }
    let dir = (t_end - t0).signum();
    let mut f = vec![0.0; n];
    sys.rhs(t, &y, &mut f);
    stats.evaluations += 1;
    let span = (t_end - t0).abs();
    let mut h = cfg.h_init.unwrap_or_else(|| initial_step(sys, t, &y, &f, dir, span, cfg));
    let h_min = cfg.h_min * t0.abs().max(span).max(1.0);

    loop {
        if stats.steps >= cfg.max_steps {
            return Err(IntegrationError::MaxSteps { t, steps: stats.steps });
        }
        let remaining = (t_end - t).abs();
        let last = h >= remaining * (1.0 - 1e-12);
        let h_try = if last { remaining } else { h };
        let (mut y_new, err) = dopri_step(sys, t, &y, &f, dir * h_try);
        stats.evaluations += 6;
        let en = error_norm(&y, &y_new, &err, cfg);
        if !en.is_finite() {
            if h_try <= h_min {
                return Err(IntegrationError::NonFinite { t });
            }
            stats.rejected += 1;
            h = h_try * 0.1;
            continue;
        }
        if en > 1.0 {
            stats.rejected += 1;
            let fac = (0.9 * en.powf(-0.2)).clamp(0.1, 0.9);
            h = h_try * fac;
            if h < h_min {
                return Err(IntegrationError::StepSizeUnderflow { t, h });
            }
            continue;
        }
        let defect = sys.project(&mut y_new);
        stats.max_projection_defect = stats.max_projection_defect.max(defect);
        let t_new = if last { t_end } else { t + dir * h_try };
        if y_new.iter().any(|v| !v.is_finite()) {
            return Err(IntegrationError::NonFinite { t: t_new });
        }
        sys.check(t_new, &y_new).map_err(|reason| IntegrationError::Aborted { t: t_new, reason })?;
        let mut f_new = vec![0.0; n];
        sys.rhs(t_new, &y_new, &mut f_new);
        stats.evaluations += 1;
        stats.steps += 1;
        let control = on_step(&Step { t0: t, y0: &y, f0: &f, t1: t_new, y1: &y_new, f1: &f_new });
        t = t_new;
        y = y_new;
        f = f_new;
        if last || control == Control::Stop {
            return Ok((t, y, stats));
        }
        let fac = if en == 0.0 { 5.0 } else { (0.9 * en.powf(-0.2)).clamp(0.2, 5.0) };
        h = h_try * fac;
    }
}

/// Result of an event search.
#[derive(Debug, Clone)]
pub struct EventHit {
    pub t: f64,
    pub y: Vec<f64>,
    pub stats: OdeStats,
}

/// Integrates until `event(y)` changes sign from negative to non-negative
/// (`rising = true`) or from positive to non-positive (`rising = false`),
/// excluding the starting point. The event time is located on the Hermite
/// interpolant and then refined with exact single steps from the start of
/// the bracketing step until `|Δt| ≤ t_tol`.
pub fn integrate_until_event<S, G>(
    sys: &S,
    t0: f64,
    y0: &[f64],
    t_max: f64,
    cfg: &IntegratorConfig,
    rising: bool,
    t_tol: f64,
    event: G,
) -> Result<EventHit, IntegrationError>
where
    S: OdeSystem + ?Sized,
    G: Fn(&[f64]) -> f64,
{
    let crossed = |g0: f64, g1: f64| if rising { g0 < 0.0 && g1 >= 0.0 } else { g0 > 0.0 && g1 <= 0.0 };
    let mut bracket: Option<(f64, Vec<f64>, Vec<f64>, f64, Vec<f64>, Vec<f64>)> = None;
    let (t_last, _, stats) = integrate(sys, t0, y0, t_max, cfg, |step| {
        if step.t0 == t0 {
            // the start may sit exactly on the event surface
            return Control::Continue;
        }
        if crossed(event(step.y0), event(step.y1)) {
            bracket = Some((
                step.t0,
                step.y0.to_vec(),
                step.f0.to_vec(),
                step.t1,
                step.y1.to_vec(),
                step.f1.to_vec(),
            ));
            return Control::Stop;
        }
        Control::Continue
    })?;
    let Some((ta, ya, fa, tb, yb, fb)) = bracket else {
        return Err(IntegrationError::EventNotFound { t: t_last });
    };
    let step = Step { t0: ta, y0: &ya, f0: &fa, t1: tb, y1: &yb, f1: &fb };

    // bisection on the interpolant
    let (mut lo, mut hi) = (ta, tb);
    let g_lo = event(&ya);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let gm = event(&step.interpolate(mid));
        if (gm < 0.0) == (g_lo < 0.0) && gm != 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo).abs() <= t_tol * 1e-3 {
            break;
        }
    }
    let mut t_star = 0.5 * (lo + hi);

    // secant refinement with exact steps from the bracket start
    let exact = |t: f64| -> Vec<f64> {
        if t == ta {
            return ya.clone();
        }
        let (mut y, _) = dopri_step(sys, ta, &ya, &fa, t - ta);
        sys.project(&mut y);
        y
    };
    let mut y_star = exact(t_star);
    let mut g_star = event(&y_star);
    let dt = (tb - ta) * 1e-4;
    let mut t_prev = t_star - dt;
    let mut g_prev = event(&exact(t_prev));
    for _ in 0..20 {
        if g_star == g_prev {
            break;
        }
        let t_next = t_star - g_star * (t_star - t_prev) / (g_star - g_prev);
        let t_next = t_next.clamp(ta, tb);
        let converged = (t_next - t_star).abs() <= t_tol;
        t_prev = t_star;
        g_prev = g_star;
        t_star = t_next;
        y_star = exact(t_star);
        g_star = event(&y_star);
        if converged {
            break;
        }
    }
    Ok(EventHit { t: t_star, y: y_star, stats })
}
