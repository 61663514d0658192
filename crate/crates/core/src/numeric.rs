//! Scalar root finding, unimodal extremum search and adaptive
//! Gauss–Legendre quadrature.

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::legendre::GaussLegendre;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericError {
    #[error("root not bracketed: f({a}) = {fa}, f({b}) = {fb}")]
    NotBracketed { a: f64, b: f64, fa: f64, fb: f64 },
    #[error("root search did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("quadrature did not converge with {nodes} nodes (last change {change:e})")]
    Quadrature { nodes: usize, change: f64 },
    #[error("non-finite function value at x = {x}")]
    NonFinite { x: f64 },
}

/// Brent's method on `[a, b]`. Stops when the bracket is narrower than
/// `2·(xtol + 2ε|x|)` or `f` vanishes exactly; the returned point is the
/// end of the final bracket with the smaller `|f|`.
pub fn brent_root<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    xtol: f64,
    max_iter: usize,
) -> Result<f64, NumericError> {
    let (mut a, mut b) = (a, b);
    let mut fa = f(a);
    let mut fb = f(b);
    if !fa.is_finite() {
        return Err(NumericError::NonFinite { x: a });
    }
    if !fb.is_finite() {
        return Err(NumericError::NonFinite { x: b });
    }
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(NumericError::NotBracketed { a, b, fa, fb });
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = d;
            }
        } else {
            d = m;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
        if !fb.is_finite() {
            return Err(NumericError::NonFinite { x: b });
        }
    }
    Err(NumericError::NoConvergence { iterations: max_iter })
}

/// Golden-section search for the maximiser of a unimodal function on
/// `[a, b]`, iterated until the bracket stops shrinking in floating point.
pub fn golden_max<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (a, b);
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..200 {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        }
        if (b - a).abs() <= 4.0 * f64::EPSILON * (a.abs() + b.abs()) || !(x1 < x2) {
            break;
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

const GL_BASE: usize = 16;
const GL_LEVELS: usize = 10;

fn gl_rule(level: usize) -> &'static GaussLegendre {
    static RULES: OnceLock<Vec<OnceLock<GaussLegendre>>> = OnceLock::new();
    let rules = RULES.get_or_init(|| (0..GL_LEVELS).map(|_| OnceLock::new()).collect());
    rules[level].get_or_init(|| {
        GaussLegendre::new(NonZeroUsize::new(GL_BASE << level).expect("positive degree"))
    })
}

/// Largest node count tried by `integrate_adaptive`.
pub const GL_MAX_NODES: usize = GL_BASE << (GL_LEVELS - 1);

/// Gauss–Legendre quadrature with node doubling until two successive
/// estimates agree to `rtol` (relative) or `atol` (absolute).
pub fn integrate_adaptive<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    rtol: f64,
    atol: f64,
) -> Result<f64, NumericError> {
    let mut prev = gl_rule(0).integrate(a, b, &mut f);
    let mut change = f64::INFINITY;
    for level in 1..GL_LEVELS {
        let cur = gl_rule(level).integrate(a, b, &mut f);
        if !cur.is_finite() {
            return Err(NumericError::NonFinite { x: f64::NAN });
        }
        change = (cur - prev).abs();
        if change <= rtol * cur.abs() || change <= atol {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(NumericError::Quadrature { nodes: GL_MAX_NODES, change })
}
