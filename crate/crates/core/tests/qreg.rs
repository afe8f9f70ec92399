use std::time::Instant;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use zadr::linalg::Lu;
use zadr::qreg::{fit_qr, mean_loss, pinball};

/// Minimum mean pinball loss over all fits interpolating `p + 1` rows; some
/// optimal solution of the linear program is always of this form.
fn interpolation_oracle(rows: &[Vec<f64>], y: &[f64], tau: f64) -> f64 {
    let n = y.len();
    let k = rows[0].len() + 1;
    let mut best = f64::INFINITY;
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        let mut a = Vec::with_capacity(k * k);
        for &i in &idx {
            a.push(1.0);
            a.extend_from_slice(&rows[i]);
        }
        if let Some(lu) = Lu::factor(&a, k) {
            let b: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
            let beta = lu.solve(&b);
            let loss: f64 = (0..n)
                .map(|i| {
                    let z = beta[0] + rows[i].iter().zip(&beta[1..]).map(|(x, b)| x * b).sum::<f64>();
                    pinball(tau, z, y[i])
                })
                .sum::<f64>()
                / n as f64;
            best = best.min(loss);
        }
        // next combination
        let mut i = k;
        while i > 0 && idx[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return best;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn random_instance(rng: &mut ChaCha8Rng, n: usize, p: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| rng.random_range(0.0..10.0)).collect()).collect();
    let y = rows
        .iter()
        .map(|r| {
            let noise: f64 = rng.random_range(-3.0..3.0);
            1.0 + r.iter().sum::<f64>() * 0.5 + noise * noise.abs()
        })
        .collect();
    (rows, y)
}

#[test]
fn matches_interpolation_oracle_and_balance() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for inst in 0..50 {
        let n = rng.random_range(8..=50);
        let p = rng.random_range(1..=3);
        let tau = [0.05, 0.25, 0.5, 0.8, 0.95][inst % 5];
        let (rows, y) = random_instance(&mut rng, n, p);
        let m = fit_qr(&rows, &y, tau).unwrap();
        let loss = mean_loss(&m, &rows, &y).unwrap();
        let oracle = interpolation_oracle(&rows, &y, tau);
        assert!(loss <= oracle + 1e-8, "instance {inst}: {loss} > {oracle}");
        assert!(loss >= oracle - 1e-8, "instance {inst}: {loss} below the oracle {oracle}");

        let below = rows.iter().zip(&y).filter(|(r, &v)| v - m.linear_predict(r).unwrap() < -1e-9).count();
        let frac = below as f64 / n as f64;
        let slack = (p + 1) as f64 / n as f64;
        assert!((frac - tau).abs() <= slack + 1e-12, "instance {inst}: {frac} vs tau {tau}");
    }
    assert!(start.elapsed().as_secs() < 30);
}

#[test]
fn beats_every_raw_column() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..10 {
        let (rows, y) = random_instance(&mut rng, 120, 4);
        for tau in [0.1, 0.5, 0.9] {
            let m = fit_qr(&rows, &y, tau).unwrap();
            let fitted = mean_loss(&m, &rows, &y).unwrap();
            for j in 0..4 {
                let raw = rows.iter().zip(&y).map(|(r, &v)| pinball(tau, r[j], v)).sum::<f64>() / y.len() as f64;
                assert!(fitted <= raw + 1e-9);
            }
        }
    }
}

#[test]
fn combiner_scale_solves_quickly() {
    // four strongly correlated quantile-like columns, as in stacking
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 4000;
    let mut rows = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let base: f64 = rng.random_range(5.0..120.0);
        rows.push((0..4).map(|k| base * (0.8 + 0.1 * k as f64) + rng.random_range(0.0..5.0)).collect::<Vec<f64>>());
        y.push(if rng.random_bool(0.15) { 0.0 } else { base * rng.random_range(0.2..1.8) });
    }
    let start = Instant::now();
    for tau in [0.01, 0.3, 0.5, 0.9, 0.99] {
        let m = fit_qr(&rows, &y, tau).unwrap();
        // tied zero targets allow more than p + 1 zero residuals, so check
        // the exact subgradient condition N- <= n tau <= N- + N0
        let resid: Vec<f64> = rows.iter().zip(&y).map(|(r, &v)| v - m.linear_predict(r).unwrap()).collect();
        let below = resid.iter().filter(|&&r| r < -1e-9).count() as f64;
        let zero = resid.iter().filter(|&&r| r.abs() <= 1e-9).count() as f64;
        let nt = tau * n as f64;
        assert!(below <= nt + 1e-9 && nt <= below + zero + 1e-9, "tau {tau}: {below} below, {zero} zero");
    }
    eprintln!("5 fits at n = {n}: {:?}", start.elapsed());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn positive_scaling_is_equivariant(seed in 0u64..10_000, c in 0.1f64..20.0, tau in 0.05f64..0.95) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (rows, y) = random_instance(&mut rng, 25, 2);
        let m = fit_qr(&rows, &y, tau).unwrap();
        let scaled_rows: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|v| v * c).collect()).collect();
        let scaled_y: Vec<f64> = y.iter().map(|v| v * c).collect();
        let ms = fit_qr(&scaled_rows, &scaled_y, tau).unwrap();
        // scaling maps the simplex path onto itself, so the same vertex is reached
        let l = mean_loss(&m, &rows, &y).unwrap();
        let ls = mean_loss(&ms, &scaled_rows, &scaled_y).unwrap();
        prop_assert!((ls - c * l).abs() <= 1e-9 * (1.0 + c * l));
        for (r, sr) in rows.iter().zip(&scaled_rows) {
            let a = m.linear_predict(r).unwrap() * c;
            let b = ms.linear_predict(sr).unwrap();
            prop_assert!((a - b).abs() <= 1e-6 * (1.0 + a.abs()));
        }
    }
}
