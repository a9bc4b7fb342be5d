//! Log-domain special functions used by the tail families and the oracle.

const SQRT_PI: f64 = 1.772_453_850_905_516;

/// `ln erfc(z)` without underflow for large positive `z`.
pub fn ln_erfc(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    if z < 0.0 {
        libm::erfc(z).ln()
    } else if z < 0.5 {
        (-libm::erf(z)).ln_1p()
    } else if z < 10.0 {
        libm::erfc(z).ln()
    } else if z.is_infinite() {
        f64::NEG_INFINITY
    } else {
        -z * z - erfc_cf_tail(z).ln()
    }
}

/// `sqrt(pi) * exp(z^2) * erfc(z)` inverted: returns the continued-fraction
/// denominator `z + (1/2)/(z + 1/(z + (3/2)/(z + ...)))` times `sqrt(pi)`.
fn erfc_cf_tail(z: f64) -> f64 {
    let mut t = z;
    for k in (1..=60).rev() {
        t = z + 0.5 * k as f64 / t;
    }
    t * SQRT_PI
}

/// Derivative of `ln erfc(z)` with respect to `z`.
pub fn d_ln_erfc(z: f64) -> f64 {
    -2.0 / SQRT_PI * (-z * z - ln_erfc(z)).exp()
}

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

pub fn gamma_fn(x: f64) -> f64 {
    libm::tgamma(x)
}

/// `ln Γ(x + a) − ln Γ(x)` computed without cancellation when `x` is large.
pub fn ln_gamma_ratio(x: f64, a: f64) -> f64 {
    if x < 10.0 || x + a < 10.0 {
        return ln_gamma(x + a) - ln_gamma(x);
    }
    // Stirling: ln Γ(z) = (z − 1/2) ln z − z + ln(2π)/2 + c(z)
    let y = x + a;
    (x - 0.5) * (a / x).ln_1p() + a * y.ln() - a + stirling_tail(y) - stirling_tail(x)
}

fn stirling_tail(z: f64) -> f64 {
    let r = 1.0 / z;
    let r2 = r * r;
    r * (1.0 / 12.0
        - r2 * (1.0 / 360.0 - r2 * (1.0 / 1260.0 - r2 * (1.0 / 1680.0 - r2 * (1.0 / 1188.0)))))
}

/// `ln(1 − e^x)` for `x ≤ 0`.
pub fn ln_one_minus_exp(x: f64) -> f64 {
    if x > -std::f64::consts::LN_2 {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

/// Numerically stable `ln Σ e^{x_i}`; the empty sum is `-inf`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m.is_infinite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}
