use lel_core::quad::{adaptive_simpson, adaptive_simpson_split};

#[test]
fn probe() {
    let t0 = std::time::Instant::now();
    let v = adaptive_simpson(&|x: f64| x.sin(), 0.0, 3.14, 1e-30);
    println!("tight tol: {v} in {:?}", t0.elapsed());
    // mimic the f_lap integrand at p=50
    let p = 50.0f64;
    let eps2 = 1.0 / (p * ((p - 1.0) / 2.0).exp());
    let amp = (1.6487212707001282f64 / (p * eps2)).powf(1.0 + 1.0 / p);
    let c = 1.0f64 / 8.0;
    let one_p = 1.0 + 1.0 / p;
    let f = |ly: f64| {
        let y: f64 = ly.exp();
        let z = -2.0 * (c * y * y).ln_1p();
        amp * (z * one_p).exp() * y * y
    };
    let l_upper = (0.3 / eps2.sqrt()).ln();
    let l_scale = (1.0 / c.sqrt()).ln();
    let t0 = std::time::Instant::now();
    let v = adaptive_simpson_split(&f, -30.0, l_upper, &[l_scale - 3.0, l_scale, l_scale + 4.0, l_scale + 12.0], 1e-14 * amp.max(1.0));
    println!("core: {v:.6e} expected ~{:.6e} in {:?}", amp * 4.0 * p / (p + 2.0), t0.elapsed());
}
