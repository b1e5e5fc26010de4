//! Bracketed scalar root finding.
//!
//! Brent's method (inverse quadratic interpolation with bisection
//! safeguards), after the layout of the classic `brentq` routine. The
//! objective may return `-inf` near the edge of a utility's domain; any
//! non-finite value is treated by sign only and forces a bisection step.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub xtol: f64,
    pub rtol: f64,
    pub max_iter: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            xtol: 1e-13,
            rtol: 4.0 * f64::EPSILON,
            max_iter: 200,
        }
    }
}

impl Tolerance {
    pub fn with_xtol(xtol: f64) -> Self {
        Self {
            xtol,
            ..Self::default()
        }
    }
}

/// Finds a root of `f` in `[a, b]`; `f(a)` and `f(b)` must have opposite signs.
pub fn brent<F>(mut f: F, a: f64, b: f64, tol: Tolerance) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let fa = f(a);
    let fb = f(b);
    brent_with_values(&mut f, a, fa, b, fb, tol)
}

/// As [`brent`] when the endpoint values are already known.
pub fn brent_with_values<F>(
    f: &mut F,
    a: f64,
    fa: f64,
    b: f64,
    fb: f64,
    tol: Tolerance,
) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    if fa.is_nan() || fb.is_nan() {
        return Err(Error::RootNotFound("objective is NaN at the bracket".into()));
    }
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::RootNotFound(format!(
            "no sign change on [{a}, {b}] (f = {fa}, {fb})"
        )));
    }

    let (mut xpre, mut fpre) = (a, fa);
    let (mut xcur, mut fcur) = (b, fb);
    let (mut xblk, mut fblk) = (0.0, 0.0);
    let (mut spre, mut scur) = (0.0f64, 0.0f64);

    for _ in 0..tol.max_iter {
        if fpre != 0.0 && fcur != 0.0 && fpre.signum() != fcur.signum() {
            xblk = xpre;
            fblk = fpre;
            spre = xcur - xpre;
            scur = spre;
        }
        if fblk.abs() < fcur.abs() {
            xpre = xcur;
            xcur = xblk;
            xblk = xpre;
            fpre = fcur;
            fcur = fblk;
            fblk = fpre;
        }

        let delta = 0.5 * (tol.xtol + tol.rtol * xcur.abs());
        let sbis = 0.5 * (xblk - xcur);
        if fcur == 0.0 || sbis.abs() < delta {
            return Ok(xcur);
        }

        let interpolate = spre.abs() > delta
            && fcur.abs() < fpre.abs()
            && fcur.is_finite()
            && fpre.is_finite()
            && fblk.is_finite();
        if interpolate {
            let stry = if xpre == xblk {
                -fcur * (xcur - xpre) / (fcur - fpre)
            } else {
                let dpre = (fpre - fcur) / (xpre - xcur);
                let dblk = (fblk - fcur) / (xblk - xcur);
                -fcur * (fblk * dblk - fpre * dpre) / (dblk * dpre * (fblk - fpre))
            };
            if stry.is_finite() && 2.0 * stry.abs() < spre.abs().min(3.0 * sbis.abs() - delta) {
                spre = scur;
                scur = stry;
            } else {
                spre = sbis;
                scur = sbis;
            }
        } else {
            spre = sbis;
            scur = sbis;
        }

        xpre = xcur;
        fpre = fcur;
        if scur.abs() > delta {
            xcur += scur;
        } else {
            xcur += if sbis > 0.0 { delta } else { -delta };
        }
        fcur = f(xcur);
        if fcur.is_nan() {
            return Err(Error::RootNotFound(format!("objective is NaN at {xcur}")));
        }
    }
    Err(Error::RootNotFound(format!(
        "no convergence after {} iterations",
        tol.max_iter
    )))
}

/// Grows `hi` geometrically (keeping `lo` fixed) until `f(hi) > 0`.
/// `f` must be increasing with `f(lo) < 0`.
pub fn expand_upper<F>(f: &mut F, lo: f64, mut hi: f64, max_doublings: usize) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> f64,
{
    let mut step = hi - lo;
    for _ in 0..max_doublings {
        let fh = f(hi);
        if fh.is_nan() {
            return Err(Error::RootNotFound(format!("objective is NaN at {hi}")));
        }
        if fh >= 0.0 {
            return Ok((hi, fh));
        }
        step *= 2.0;
        hi = lo + step;
    }
    Err(Error::RootNotFound("could not bracket root from above".into()))
}
