//! Adaptive 1D quadrature used by the mass integrals and the test-function
//! energy. Plain recursive Simpson with the standard 15x error cancellation;
//! integrands here are smooth away from scale transitions, which the caller
//! handles by splitting the interval.

/// Adaptive Simpson on `[a, b]` to absolute tolerance `tol`. A panel is also
/// accepted once its correction falls to relative rounding level, so the
/// recursion terminates even when `tol` is below what f64 can resolve.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 48)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let refined = left + right;
    let delta = refined - whole;
    let rounding_floor = 2e-16 * (left.abs() + right.abs());
    if depth == 0 || delta.abs() <= (15.0 * tol).max(rounding_floor) {
        refined + delta / 15.0
    } else {
        simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

/// Integrate over `[a, b]` split at the given interior breakpoints; out-of-range
/// breakpoints are ignored.
pub fn adaptive_simpson_split<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: f64,
) -> f64 {
    let mut pts = vec![a];
    for &c in breaks {
        if c > a && c < b {
            pts.push(c);
        }
    }
    pts.push(b);
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let n = (pts.len() - 1) as f64;
    pts.windows(2)
        .map(|w| adaptive_simpson(f, w[0], w[1], tol / n))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_is_exact() {
        let v = adaptive_simpson(&|x| x * x * x - 2.0 * x, 0.0, 2.0, 1e-14);
        assert!((v - (4.0 - 4.0)).abs() < 1e-13);
    }

    #[test]
    fn smooth_oscillatory() {
        let v = adaptive_simpson(&|x: f64| x.sin(), 0.0, PI, 1e-13);
        assert!((v - 2.0).abs() < 1e-11);
    }

    #[test]
    fn split_handles_kinks() {
        // |x| has a kink at 0; exact integral over [-1, 2] is 2.5
        let v = adaptive_simpson_split(&|x: f64| x.abs(), -1.0, 2.0, &[0.0], 1e-13);
        assert!((v - 2.5).abs() < 1e-12);
    }
}
