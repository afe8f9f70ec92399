//! Special functions backing the gamma and inverse-Gaussian CDFs and the
//! ZAGA scoring equations: log-gamma, digamma/trigamma, the regularized
//! incomplete gamma function and the standard normal CDF.

use std::f64::consts::PI;

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Relative accuracy targeted by the incomplete gamma series and continued fraction.
const GAMMA_EPS: f64 = 1e-15;
const GAMMA_MAX_ITER: usize = 1_000_000;
/// Above this shape the series/continued fraction become too slow; a
/// Wilson–Hilferty normal approximation is used instead.
const GAMMA_LARGE_SHAPE: f64 = 1e10;

/// Natural log of the gamma function for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS_COEF[0];
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Digamma function ψ(x) for `x > 0`.
pub fn digamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 10.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    acc + x.ln() - 0.5 * inv
        - inv2
            * (1.0 / 12.0
                - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 / 132.0))))
}

/// Trigamma function ψ'(x) for `x > 0`.
pub fn trigamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 10.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    acc + inv
        + 0.5 * inv2
        + inv * inv2 * (1.0 / 6.0 - inv2 * (1.0 / 30.0 - inv2 * (1.0 / 42.0 - inv2 * (1.0 / 30.0 - inv2 * (5.0 / 66.0 - inv2 * 691.0 / 2730.0)))))
}

/// `ln a − ψ(a)`, without cancellation for large `a`.
pub fn ln_minus_digamma(a: f64) -> f64 {
    if a < 10.0 {
        return a.ln() - digamma(a);
    }
    let inv = 1.0 / a;
    let inv2 = inv * inv;
    0.5 * inv + inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 / 240.0)))
}

/// `ψ'(a) − 1/a`, without cancellation for large `a`.
pub fn trigamma_minus_recip(a: f64) -> f64 {
    if a < 10.0 {
        return trigamma(a) - 1.0 / a;
    }
    let inv = 1.0 / a;
    let inv2 = inv * inv;
    0.5 * inv2 + inv * inv2 * (1.0 / 6.0 - inv2 * (1.0 / 30.0 - inv2 * (1.0 / 42.0 - inv2 * (1.0 / 30.0 - inv2 * (5.0 / 66.0 - inv2 * 691.0 / 2730.0)))))
}

/// `a ln a − a − ln Γ(a)`: the shape-only part of the gamma log-density,
/// evaluated stably for large shapes via the Stirling remainder.
pub fn gamma_shape_term(a: f64) -> f64 {
    if a < 10.0 {
        return a * a.ln() - a - ln_gamma(a);
    }
    let inv = 1.0 / a;
    let inv2 = inv * inv;
    let stirling_remainder =
        inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)));
    0.5 * a.ln() - 0.5 * (2.0 * PI).ln() - stirling_remainder
}

fn ln_prefactor(a: f64, x: f64) -> f64 {
    -x + a * x.ln() - ln_gamma(a)
}

/// Series `Σ xⁿ / (a(a+1)…(a+n))`, converging for `x < a + 1`.
fn lower_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut term = 1.0 / a;
    let mut sum = term;
    for _ in 0..GAMMA_MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * GAMMA_EPS {
            break;
        }
    }
    sum
}

/// Modified Lentz continued fraction for `Q(a, x) / prefactor`, for `x ≥ a + 1`.
fn upper_fraction(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..GAMMA_MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < GAMMA_EPS {
            break;
        }
    }
    h
}

fn wilson_hilferty_lower(a: f64, x: f64) -> f64 {
    let z = ((x / a).cbrt() - 1.0 + 1.0 / (9.0 * a)) * (9.0 * a).sqrt();
    std_normal_cdf(z)
}

/// Regularized lower incomplete gamma `P(a, x)`.
pub fn reg_lower_gamma(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    if a > GAMMA_LARGE_SHAPE {
        return wilson_hilferty_lower(a, x);
    }
    if x < a + 1.0 {
        (ln_prefactor(a, x).exp() * lower_series(a, x)).min(1.0)
    } else {
        1.0 - (ln_prefactor(a, x).exp() * upper_fraction(a, x)).min(1.0)
    }
}

/// Natural log of the regularized upper incomplete gamma `Q(a, x)`.
pub fn ln_reg_upper_gamma(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return f64::NEG_INFINITY;
    }
    if a > GAMMA_LARGE_SHAPE {
        return (1.0 - wilson_hilferty_lower(a, x)).ln();
    }
    if x < a + 1.0 {
        (-(ln_prefactor(a, x).exp() * lower_series(a, x)).min(1.0)).ln_1p()
    } else {
        ln_prefactor(a, x) + upper_fraction(a, x).ln()
    }
}

/// Regularized upper incomplete gamma `Q(a, x) = 1 − P(a, x)`.
pub fn reg_upper_gamma(a: f64, x: f64) -> f64 {
    ln_reg_upper_gamma(a, x).exp()
}

/// Standard normal CDF Φ(z).
pub fn std_normal_cdf(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    let half_sq = 0.5 * z * z;
    if z < 0.0 {
        0.5 * reg_upper_gamma(0.5, half_sq)
    } else {
        1.0 - 0.5 * reg_upper_gamma(0.5, half_sq)
    }
}

/// ln Φ(z), accurate deep in the lower tail.
pub fn ln_std_normal_cdf(z: f64) -> f64 {
    let half_sq = 0.5 * z * z;
    if z < 0.0 {
        -std::f64::consts::LN_2 + ln_reg_upper_gamma(0.5, half_sq)
    } else {
        (-0.5 * reg_upper_gamma(0.5, half_sq)).ln_1p()
    }
}
