//! Limit estimation for p → ∞ families: least-squares fit of
//! `value(p) ≈ a0 + a1/p (+ a2/p²)` and report `a0`.

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct Extrapolation {
    /// Estimated limit `a0`.
    pub limit: f64,
    /// Fit coefficients `[a0, a1]` or `[a0, a1, a2]`.
    pub coeffs: Vec<f64>,
    /// Root-mean-square residual of the fit.
    pub fit_residual: f64,
}

/// Least-squares fit in powers of 1/p. `order` is 1 or 2; at least
/// `order + 2` samples with distinct increasing `p_values` are required.
pub fn extrapolate_limit(p_values: &[f64], values: &[f64], order: usize) -> Result<Extrapolation> {
    if !(order == 1 || order == 2) {
        return Err(Error::InvalidParameter(format!("order must be 1 or 2, got {order}")));
    }
    if p_values.len() != values.len() {
        return Err(Error::InvalidInput(format!(
            "{} p-values vs {} values",
            p_values.len(),
            values.len()
        )));
    }
    if p_values.len() < order + 2 {
        return Err(Error::InvalidInput(format!(
            "need at least {} points for order {order}, got {}",
            order + 2,
            p_values.len()
        )));
    }
    if p_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput(
            "p_values must be strictly increasing".into(),
        ));
    }

    let m = order + 1;
    // normal equations G c = r with basis {1, 1/p, 1/p^2}
    let mut g = [[0.0f64; 3]; 3];
    let mut r = [0.0f64; 3];
    for (&p, &v) in p_values.iter().zip(values) {
        let phi = [1.0, 1.0 / p, 1.0 / (p * p)];
        for i in 0..m {
            r[i] += phi[i] * v;
            for j in 0..m {
                g[i][j] += phi[i] * phi[j];
            }
        }
    }
    let c = solve_small(&mut g, &mut r, m)?;

    let mut ss = 0.0;
    for (&p, &v) in p_values.iter().zip(values) {
        let phi = [1.0, 1.0 / p, 1.0 / (p * p)];
        let fit: f64 = (0..m).map(|i| c[i] * phi[i]).sum();
        ss += (v - fit) * (v - fit);
    }
    Ok(Extrapolation {
        limit: c[0],
        coeffs: c[..m].to_vec(),
        fit_residual: (ss / p_values.len() as f64).sqrt(),
    })
}

/// Gaussian elimination with partial pivoting on an m x m system, m <= 3.
fn solve_small(g: &mut [[f64; 3]; 3], r: &mut [f64; 3], m: usize) -> Result<[f64; 3]> {
    for k in 0..m {
        let piv = (k..m)
            .max_by(|&i, &j| g[i][k].abs().partial_cmp(&g[j][k].abs()).unwrap())
            .unwrap();
        if g[piv][k].abs() < 1e-300 {
            return Err(Error::FitFailure {
                message: "rank-deficient design matrix".into(),
                condition: f64::INFINITY,
            });
        }
        g.swap(k, piv);
        r.swap(k, piv);
        for i in k + 1..m {
            let f = g[i][k] / g[k][k];
            for j in k..m {
                g[i][j] -= f * g[k][j];
            }
            r[i] -= f * r[k];
        }
    }
    let mut c = [0.0f64; 3];
    for k in (0..m).rev() {
        let mut s = r[k];
        for j in k + 1..m {
            s -= g[k][j] * c[j];
        }
        c[k] = s / g[k][k];
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_model_recovered() {
        let ps = [50.0, 100.0, 200.0, 400.0];
        let vals: Vec<f64> = ps.iter().map(|p| 3.25 - 7.5 / p).collect();
        let e = extrapolate_limit(&ps, &vals, 1).unwrap();
        assert!((e.limit - 3.25).abs() < 1e-12);
        assert!((e.coeffs[1] + 7.5).abs() < 1e-9);
        assert!(e.fit_residual < 1e-12);
    }

    #[test]
    fn constant_data() {
        let ps = [10.0, 20.0, 40.0, 80.0];
        let vals = [1.5; 4];
        let e = extrapolate_limit(&ps, &vals, 1).unwrap();
        assert!((e.limit - 1.5).abs() < 1e-12);
        assert!(e.coeffs[1].abs() < 1e-10);
    }

    #[test]
    fn order_two_needs_four_points() {
        let ps = [10.0, 20.0, 40.0];
        let vals = [1.0, 2.0, 3.0];
        assert!(extrapolate_limit(&ps, &vals, 2).is_err());
        let ps5 = [10.0, 20.0, 40.0, 80.0, 160.0];
        let vals5: Vec<f64> = ps5.iter().map(|p| 2.0 + 3.0 / p - 40.0 / (p * p)).collect();
        let e = extrapolate_limit(&ps5, &vals5, 2).unwrap();
        assert!((e.limit - 2.0).abs() < 1e-10);
    }

    #[test]
    fn rejects_unsorted() {
        assert!(extrapolate_limit(&[10.0, 10.0, 20.0], &[0.0; 3], 1).is_err());
    }
}
