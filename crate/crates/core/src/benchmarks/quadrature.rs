use crate::{Error, Result};

/// Adaptive Simpson integration of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    const MAX_DEPTH: u32 = 50;
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    recurse(&f, a, b, fa, fm, fb, whole, tol, MAX_DEPTH).ok_or(Error::Quadrature { lo: a, hi: b })
}

#[allow(clippy::too_many_arguments)]
fn recurse<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Option<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if !delta.is_finite() {
        return None;
    }
    if delta.abs() <= 15.0 * tol {
        return Some(left + right + delta / 15.0);
    }
    if depth == 0 {
        return None;
    }
    let l = recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?;
    let r = recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?;
    Some(l + r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_and_gaussians() {
        let v = adaptive_simpson(|x| x * x, 0.0, 3.0, 1e-12).unwrap();
        assert!((v - 9.0).abs() < 1e-10);
        let g = adaptive_simpson(|x| (-0.5 * x * x).exp(), -12.0, 12.0, 1e-12).unwrap();
        assert!((g - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-10);
    }

    #[test]
    fn non_finite_integrand_fails() {
        assert!(adaptive_simpson(|x| 1.0 / x, -1.0, 1.0, 1e-10).is_err());
    }
}
