//! Closed-form solutions of the Liouville system
//!
//! ```text
//!   -ΔU = e^V,  -ΔV = e^U  in R²,   ∫e^U, ∫e^V < ∞,
//! ```
//!
//! whose solutions are all of the form `U = V = log 8λ²/(1+λ²|x-y|²)²`, the
//! limit profiles `(U_θ, V_θ)` that rescaled Lane-Emden solutions converge to,
//! their masses, finite-difference residual checks, and a nonlinear
//! least-squares bubble fit for validating numerically rescaled profiles.

use crate::error::{Error, Result};
use crate::geom::Point;
use crate::quad::adaptive_simpson_split;

/// Parameters of a Liouville bubble: the classification solution
/// `log 8λ²/(1+λ²|x-center|²)²` together with the exponent gap θ and the
/// limiting peak height l it encodes (λ² = l^θ/8 for the limit profile).
#[derive(Clone, Copy, Debug)]
pub struct BubbleProfile {
    pub theta: f64,
    pub l: f64,
    pub lambda: f64,
    pub center: Point,
}

impl BubbleProfile {
    /// Profile with the scale tied to the peak height, λ² = l^θ/8.
    pub fn from_peak(theta: f64, l: f64, center: Point) -> Result<Self> {
        check_theta_l(theta, l)?;
        Ok(BubbleProfile {
            theta,
            l,
            lambda: (l.powf(theta) / 8.0).sqrt(),
            center,
        })
    }

    pub fn validate(&self) -> Result<()> {
        check_theta_l(self.theta, self.l)?;
        if !(self.lambda > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        Ok(())
    }
}

fn check_theta_l(theta: f64, l: f64) -> Result<()> {
    if !(theta >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "theta must be nonnegative, got {theta}"
        )));
    }
    if !(l > 0.0) {
        return Err(Error::InvalidParameter(format!("l must be positive, got {l}")));
    }
    Ok(())
}

/// The classification solution `log 8λ²/(1 + λ²|x-center|²)²`.
pub fn liouville_value(lambda: f64, center: Point, x: Point) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    let d2 = (x - center).norm2();
    Ok((8.0 * lambda * lambda).ln() - 2.0 * (lambda * lambda * d2).ln_1p())
}

/// The limit profile pair `(U_θ(x), V_θ(x))` with
/// `U_θ = log 1/(1 + (l^θ/8)|x|²)²` and `V_θ = U_θ + θ log l`.
/// `(U_θ + θ log l, V_θ)` solves the Liouville system.
pub fn profile_pair(theta: f64, l: f64, x: Point) -> Result<(f64, f64)> {
    check_theta_l(theta, l)?;
    let c = l.powf(theta) / 8.0;
    let u = -2.0 * (c * x.norm2()).ln_1p();
    Ok((u, u + theta * l.ln()))
}

/// Truncated masses `(∫_{|x|≤R} e^{U_θ}, ∫_{|x|≤R} e^{V_θ})` by adaptive
/// radial quadrature. As R → ∞ these tend to `(8π l^{-θ}, 8π)`.
pub fn bubble_mass_numeric(theta: f64, l: f64, r_cut: f64) -> Result<(f64, f64)> {
    check_theta_l(theta, l)?;
    if !(r_cut >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "r_cut must be nonnegative, got {r_cut}"
        )));
    }
    if r_cut == 0.0 {
        return Ok((0.0, 0.0));
    }
    let c = l.powf(theta) / 8.0;
    // e^{U} = 1/(1+c r²)²; the integrand r/(1+c r²)² transitions at r ~ 1/√c
    let f = |r: f64| {
        let d = 1.0 + c * r * r;
        r / (d * d)
    };
    let scale = 1.0 / c.sqrt();
    let breaks = [0.5 * scale, scale, 4.0 * scale, 32.0 * scale];
    let iu = 2.0 * std::f64::consts::PI * adaptive_simpson_split(&f, 0.0, r_cut, &breaks, 1e-14);
    Ok((iu, l.powf(theta) * iu))
}

/// Analytic tails `(∫_{|x|>R} e^{U_θ}, ∫_{|x|>R} e^{V_θ})`, reported alongside
/// the truncated masses; both are O(1/R²).
pub fn bubble_mass_tail(theta: f64, l: f64, r_cut: f64) -> Result<(f64, f64)> {
    check_theta_l(theta, l)?;
    if !(r_cut > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "r_cut must be positive, got {r_cut}"
        )));
    }
    let c = l.powf(theta) / 8.0;
    let tail_u = std::f64::consts::PI / (c * (1.0 + c * r_cut * r_cut));
    Ok((tail_u, l.powf(theta) * tail_u))
}

/// Result of [`fit_bubble`].
#[derive(Clone, Debug)]
pub struct BubbleFit {
    pub lambda: f64,
    pub center: Point,
    /// Peak height implied by λ² = l^θ/8; undefined at θ = 0.
    pub l: Option<f64>,
    pub rms: f64,
    /// Fitted additive offset of the log profile.
    pub offset: f64,
}

/// Nonlinear least-squares fit of samples `(x_i, y_i)` to
/// `y ≈ log 1/(1 + λ²|x - center|²)² + const`, Gauss-Newton with Levenberg
/// damping, initialized from the sample peak and the curvature around it.
pub fn fit_bubble(samples: &[(Point, f64)], theta: f64) -> Result<BubbleFit> {
    if samples.len() < 4 {
        return Err(Error::InvalidInput(format!(
            "need at least 4 samples, got {}",
            samples.len()
        )));
    }

    // initial guess: peak location and value
    let (ipk, &(c0, a0)) = samples
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.partial_cmp(&b.1 .1).unwrap())
        .ok_or_else(|| Error::InvalidInput("empty sample set".into()))?;
    let _ = ipk;
    // curvature: y ≈ a0 - 2λ²|x-c0|² near the peak
    let mut num = 0.0;
    let mut den = 0.0;
    for &(x, y) in samples {
        let d2 = (x - c0).norm2();
        if d2 > 0.0 {
            let w = (-d2).exp() + 1e-12;
            num += w * (a0 - y);
            den += w * 2.0 * d2;
        }
    }
    let mut lambda = if den > 0.0 && num > 0.0 {
        (num / den).sqrt().max(1e-6)
    } else {
        1.0
    };
    let (mut cx, mut cy, mut off) = (c0.x, c0.y, a0);

    let mut mu = 1e-3; // Levenberg parameter
    let mut last_cost = f64::INFINITY;
    for _iter in 0..200 {
        // residuals and Jacobian for params (lambda, cx, cy, off)
        let mut jtj = [[0.0f64; 4]; 4];
        let mut jtr = [0.0f64; 4];
        let mut cost = 0.0;
        for &(x, y) in samples {
            let dx = x.x - cx;
            let dy = x.y - cy;
            let d2 = dx * dx + dy * dy;
            let den = 1.0 + lambda * lambda * d2;
            let model = -2.0 * den.ln() + off;
            let r = model - y;
            cost += r * r;
            let dl = -4.0 * lambda * d2 / den;
            let dcx = 4.0 * lambda * lambda * dx / den;
            let dcy = 4.0 * lambda * lambda * dy / den;
            let grad = [dl, dcx, dcy, 1.0];
            for i in 0..4 {
                jtr[i] += grad[i] * r;
                for j in 0..4 {
                    jtj[i][j] += grad[i] * grad[j];
                }
            }
        }
        let cond = condition_estimate(&jtj);
        if cond > 1e14 {
            return Err(Error::FitFailure {
                message: "degenerate sample set, normal equations ill-conditioned".into(),
                condition: cond,
            });
        }
        let rms = (cost / samples.len() as f64).sqrt();
        if (last_cost - cost).abs() <= 1e-30 + 1e-16 * cost {
            last_cost = cost;
            break;
        }
        last_cost = cost;
        if rms < 1e-15 {
            break;
        }

        // damped step; retry with larger mu on cost increase
        let mut accepted = false;
        for _ in 0..40 {
            let mut a = jtj;
            for (i, row) in a.iter_mut().enumerate() {
                row[i] *= 1.0 + mu;
            }
            let mut rhs = [-jtr[0], -jtr[1], -jtr[2], -jtr[3]];
            if solve4(&mut a, &mut rhs).is_err() {
                mu *= 10.0;
                continue;
            }
            let (nl, ncx, ncy, noff) = (lambda + rhs[0], cx + rhs[1], cy + rhs[2], off + rhs[3]);
            if nl <= 0.0 {
                mu *= 10.0;
                continue;
            }
            let mut ncost = 0.0;
            for &(x, y) in samples {
                let d2 = (x.x - ncx).powi(2) + (x.y - ncy).powi(2);
                let r = -2.0 * (1.0 + nl * nl * d2).ln() + noff - y;
                ncost += r * r;
            }
            if ncost <= cost {
                lambda = nl;
                cx = ncx;
                cy = ncy;
                off = noff;
                mu = (mu * 0.3).max(1e-12);
                accepted = true;
                break;
            }
            mu *= 10.0;
        }
        if !accepted {
            break;
        }
    }

    let rms = (last_cost / samples.len() as f64).sqrt();
    let l = if theta > 0.0 {
        Some((8.0 * lambda * lambda).powf(1.0 / theta))
    } else {
        None
    };
    Ok(BubbleFit {
        lambda,
        center: Point::new(cx, cy),
        l,
        rms,
        offset: off,
    })
}

fn condition_estimate(a: &[[f64; 4]; 4]) -> f64 {
    let mut dmax: f64 = 0.0;
    let mut dmin = f64::INFINITY;
    for (i, row) in a.iter().enumerate() {
        dmax = dmax.max(row[i].abs());
        dmin = dmin.min(row[i].abs());
    }
    if dmin == 0.0 {
        f64::INFINITY
    } else {
        dmax / dmin
    }
}

fn solve4(a: &mut [[f64; 4]; 4], b: &mut [f64; 4]) -> Result<()> {
    for k in 0..4 {
        let piv = (k..4)
            .max_by(|&i, &j| a[i][k].abs().partial_cmp(&a[j][k].abs()).unwrap())
            .unwrap();
        if a[piv][k].abs() < 1e-300 {
            return Err(Error::LinearSolve("singular 4x4 system".into()));
        }
        a.swap(k, piv);
        b.swap(k, piv);
        for i in k + 1..4 {
            let f = a[i][k] / a[k][k];
            for j in k..4 {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    for k in (0..4).rev() {
        let mut s = b[k];
        for j in k + 1..4 {
            s -= a[k][j] * b[j];
        }
        b[k] = s / a[k][k];
    }
    Ok(())
}

/// Scalar field sampled on a uniform grid of spacing `h`; `values[j*nx + i]`
/// holds the value at `(x0 + i h, y0 + j h)`.
#[derive(Clone, Debug)]
pub struct GridField {
    pub nx: usize,
    pub ny: usize,
    pub values: Vec<f64>,
}

impl GridField {
    pub fn new(nx: usize, ny: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != nx * ny {
            return Err(Error::InvalidInput(format!(
                "{} values for a {nx} x {ny} grid",
                values.len()
            )));
        }
        Ok(GridField { nx, ny, values })
    }

    pub fn from_fn(nx: usize, ny: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                values.push(f(i, j));
            }
        }
        GridField { nx, ny, values }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }
}

/// Max-norm residuals of the 5-point discretization of
/// `(-ΔU - e^V, -ΔV - e^U)` over interior grid nodes.
pub fn liouville_residual(u: &GridField, v: &GridField, h: f64) -> Result<(f64, f64)> {
    if u.nx != v.nx || u.ny != v.ny {
        return Err(Error::InvalidInput(format!(
            "grid shapes differ: {}x{} vs {}x{}",
            u.nx, u.ny, v.nx, v.ny
        )));
    }
    if u.nx < 3 || u.ny < 3 {
        return Err(Error::InvalidInput(
            "grid must have at least a 3x3 interior stencil".into(),
        ));
    }
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("h must be positive, got {h}")));
    }
    let h2 = h * h;
    let mut ru: f64 = 0.0;
    let mut rv: f64 = 0.0;
    for j in 1..u.ny - 1 {
        for i in 1..u.nx - 1 {
            let lap_u = (u.at(i - 1, j) + u.at(i + 1, j) + u.at(i, j - 1) + u.at(i, j + 1)
                - 4.0 * u.at(i, j))
                / h2;
            let lap_v = (v.at(i - 1, j) + v.at(i + 1, j) + v.at(i, j - 1) + v.at(i, j + 1)
                - 4.0 * v.at(i, j))
                / h2;
            ru = ru.max((-lap_u - v.at(i, j).exp()).abs());
            rv = rv.max((-lap_v - u.at(i, j).exp()).abs());
        }
    }
    Ok((ru, rv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::SQRT_E;
    use std::f64::consts::PI;

    #[test]
    fn value_at_center_and_scale() {
        let v = liouville_value(1.0, Point::ORIGIN, Point::ORIGIN).unwrap();
        assert!((v - 8.0f64.ln()).abs() < 1e-14);
        // |x - center|² = 7 -> log(8/64)
        let x = Point::new(7.0f64.sqrt(), 0.0);
        let v = liouville_value(1.0, Point::ORIGIN, x).unwrap();
        assert!((v - (8.0f64 / 64.0).ln()).abs() < 1e-14);
        let v = liouville_value(2.0, Point::ORIGIN, Point::ORIGIN).unwrap();
        assert!((v - 32.0f64.ln()).abs() < 1e-14);
        assert!(liouville_value(0.0, Point::ORIGIN, Point::ORIGIN).is_err());
        assert!(liouville_value(-1.0, Point::ORIGIN, Point::ORIGIN).is_err());
    }

    #[test]
    fn profile_pair_examples() {
        let (u, v) = profile_pair(0.0, 1.0, Point::ORIGIN).unwrap();
        assert_eq!((u, v), (0.0, 0.0));
        let (u, v) = profile_pair(2.0, SQRT_E, Point::ORIGIN).unwrap();
        assert!(u.abs() < 1e-15 && (v - 1.0).abs() < 1e-14);
        let x = Point::new(8.0f64.sqrt(), 0.0);
        let (u, v) = profile_pair(0.0, 1.0, x).unwrap();
        assert!((u + 2.0 * 2.0f64.ln()).abs() < 1e-14);
        assert_eq!(u, v);
        assert!(profile_pair(0.0, 0.0, x).is_err());
        assert!(profile_pair(-0.5, 1.0, x).is_err());
    }

    #[test]
    fn pair_solves_liouville_system() {
        // (U_θ + θ log l, V_θ) must both equal the classification solution
        let (theta, l) = (1.3f64, 1.9f64);
        let lam = (l.powf(theta) / 8.0).sqrt();
        for r in [0.0, 0.7, 3.0, 40.0] {
            let x = Point::new(r, -0.3 * r);
            let (u, v) = profile_pair(theta, l, x).unwrap();
            let cls = liouville_value(lam, Point::ORIGIN, x).unwrap();
            assert!((u + theta * l.ln() - cls).abs() < 1e-12);
            assert!((v - cls).abs() < 1e-12);
        }
    }

    #[test]
    fn gap_identity_and_monotonicity() {
        for &(theta, l) in &[(0.0, 1.0), (1.0, SQRT_E), (2.5, 0.7)] {
            let mut prev = f64::INFINITY;
            for i in 0..60 {
                let r = 0.15 * i as f64;
                let (u, v) = profile_pair(theta, l, Point::new(r, 0.0)).unwrap();
                assert!((v - u - theta * l.ln()).abs() < 1e-12);
                if i > 0 {
                    assert!(u < prev, "U must strictly decrease in |x|");
                }
                prev = u;
            }
        }
    }

    #[test]
    fn decay_envelope() {
        // U(x) + 4 log |x| = -2 log(c + 1/|x|²) is pinched for |x| >= 1
        let c = 1.0f64 / 8.0;
        let lo = -2.0 * (c + 1.0).ln();
        let hi = -2.0 * c.ln();
        for i in 0..40 {
            let r = 1.0 + (i as f64) * 25.0;
            let (u, _) = profile_pair(0.0, 1.0, Point::new(r, 0.0)).unwrap();
            let e = u + 4.0 * r.ln();
            assert!(e >= lo - 1e-12 && e <= hi + 1e-12);
        }
    }

    #[test]
    fn masses_converge_to_8pi() {
        let (mu, mv) = bubble_mass_numeric(0.0, 1.0, 0.0).unwrap();
        assert_eq!((mu, mv), (0.0, 0.0));

        // R = 100: relative error vs 8π must be within 2e-3
        let (_, mv) = bubble_mass_numeric(0.0, 1.0, 100.0).unwrap();
        let rel = (mv - 8.0 * PI).abs() / (8.0 * PI);
        assert!(rel < 2e-3, "relative mass error {rel:.2e} at R=100");

        // huge R: both components at their limits
        let (mu, mv) = bubble_mass_numeric(0.0, 1.0, 1e6).unwrap();
        assert!((mu - 8.0 * PI).abs() / (8.0 * PI) < 1e-9);
        assert!((mv - 8.0 * PI).abs() / (8.0 * PI) < 1e-9);

        // θ=2, l=√e: limits (8π/e, 8π); quadrature + analytic tail vs closed form
        let (mu, mv) = bubble_mass_numeric(2.0, SQRT_E, 1e4).unwrap();
        let (tu, tv) = bubble_mass_tail(2.0, SQRT_E, 1e4).unwrap();
        let exact_u = 8.0 * PI * (-1.0f64).exp();
        assert!((mu + tu - exact_u).abs() / exact_u < 1e-10);
        assert!((mv + tv - 8.0 * PI).abs() / (8.0 * PI) < 1e-10);

        assert!(bubble_mass_numeric(0.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn tail_is_inverse_square() {
        let (t1, _) = bubble_mass_tail(0.0, 1.0, 100.0).unwrap();
        let (t2, _) = bubble_mass_tail(0.0, 1.0, 200.0).unwrap();
        let ratio = t1 / t2;
        assert!((ratio - 4.0).abs() < 0.1, "tail must scale like 1/R², ratio {ratio}");
    }

    fn sample_grid(lambda: f64, center: Point, offset: f64, noise: f64) -> Vec<(Point, f64)> {
        let mut out = Vec::new();
        let mut k = 0u64;
        for j in 0..21 {
            for i in 0..21 {
                let x = Point::new(-5.0 + 0.5 * i as f64, -5.0 + 0.5 * j as f64);
                let y = -2.0 * (1.0 + lambda * lambda * (x - center).norm2()).ln() + offset;
                // deterministic pseudo-noise
                k = k.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let n = ((k >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0;
                out.push((x, y + noise * n));
            }
        }
        out
    }

    #[test]
    fn fit_roundtrip_and_translation() {
        let s = sample_grid(1.0, Point::ORIGIN, 0.0, 0.0);
        let fit = fit_bubble(&s, 0.0).unwrap();
        assert!((fit.lambda - 1.0).abs() < 1e-10);
        assert!(fit.center.norm() < 1e-10);
        assert!(fit.rms <= 1e-10, "rms {}", fit.rms);

        let s = sample_grid(1.0, Point::new(0.3, -0.2), 0.0, 0.0);
        let fit = fit_bubble(&s, 0.0).unwrap();
        assert!((fit.center.x - 0.3).abs() < 1e-8 && (fit.center.y + 0.2).abs() < 1e-8);
    }

    #[test]
    fn fit_with_noise() {
        let s = sample_grid(1.0, Point::ORIGIN, 0.0, 1e-3);
        let fit = fit_bubble(&s, 0.0).unwrap();
        assert!((fit.lambda - 1.0).abs() < 1e-2, "lambda {}", fit.lambda);
    }

    #[test]
    fn fit_recovers_l_for_positive_theta() {
        // λ² = l^θ/8 with θ=2, l=√e gives λ = √(e/8)
        let lam = (std::f64::consts::E / 8.0f64).sqrt();
        let s = sample_grid(lam, Point::ORIGIN, 0.5, 0.0);
        let fit = fit_bubble(&s, 2.0).unwrap();
        let l = fit.l.unwrap();
        assert!((l - SQRT_E).abs() < 1e-8, "l = {l}");
    }

    #[test]
    fn fit_rejects_degenerate_input() {
        assert!(fit_bubble(&[(Point::ORIGIN, 1.0); 3], 0.0).is_err());
        // all samples at the same location: underdetermined
        let s = vec![(Point::new(1.0, 1.0), 0.5); 8];
        assert!(fit_bubble(&s, 0.0).is_err());
    }

    fn classification_grid(h: f64, n: usize) -> GridField {
        GridField::from_fn(n, n, |i, j| {
            let x = Point::new(
                -0.5 * (n - 1) as f64 * h + i as f64 * h,
                -0.5 * (n - 1) as f64 * h + j as f64 * h,
            );
            liouville_value(1.0, Point::ORIGIN, x).unwrap()
        })
    }

    #[test]
    fn residual_second_order() {
        let (r1, _) = {
            let g = classification_grid(0.1, 21);
            liouville_residual(&g, &g, 0.1).unwrap()
        };
        let (r2, _) = {
            let g = classification_grid(0.05, 41);
            liouville_residual(&g, &g, 0.05).unwrap()
        };
        let ratio = r1 / r2;
        assert!((3.3..4.7).contains(&ratio), "O(h²) decay expected, ratio {ratio}");
    }

    #[test]
    fn residual_zero_fields() {
        let z = GridField::from_fn(5, 5, |_, _| 0.0);
        let (ru, rv) = liouville_residual(&z, &z, 0.3).unwrap();
        assert_eq!((ru, rv), (1.0, 1.0));
    }

    #[test]
    fn residual_shifted_profile() {
        // (U_θ + θ log l, V_θ) solves the system; check O(h²) on both equations
        let (theta, l) = (1.0, SQRT_E);
        let make = |h: f64, n: usize| {
            let mut u = GridField::from_fn(n, n, |_, _| 0.0);
            let mut v = u.clone();
            for j in 0..n {
                for i in 0..n {
                    let x = Point::new(
                        -0.5 * (n - 1) as f64 * h + i as f64 * h,
                        -0.5 * (n - 1) as f64 * h + j as f64 * h,
                    );
                    let (pu, pv) = profile_pair(theta, l, x).unwrap();
                    u.values[j * n + i] = pu + theta * l.ln();
                    v.values[j * n + i] = pv;
                }
            }
            liouville_residual(&u, &v, h).unwrap()
        };
        let (a1, b1) = make(0.1, 21);
        let (a2, b2) = make(0.05, 41);
        assert!((3.3..4.7).contains(&(a1 / a2)));
        assert!((3.3..4.7).contains(&(b1 / b2)));
    }

    #[test]
    fn residual_shape_mismatch() {
        let a = GridField::from_fn(5, 5, |_, _| 0.0);
        let b = GridField::from_fn(5, 6, |_, _| 0.0);
        assert!(liouville_residual(&a, &b, 0.1).is_err());
    }
}
