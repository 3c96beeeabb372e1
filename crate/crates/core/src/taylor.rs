//! Taylor-mode derivatives of the bump φ(x) = exp(-1/x - 1/(1-x)) on (0, 1).
//!
//! The exponent u has the closed-form expansion
//! u(x + h) = -Σ_k ((-1)^k / x^(k+1) + 1 / (1-x)^(k+1)) h^k, and the
//! coefficients of exp(u) follow from e_k = (1/k) Σ_{j=1..k} j u_j e_{k-j}.
//! Coefficients are rescaled by r^k, r = min(x, 1-x), so that nothing
//! overflows near the endpoints; results are returned in log form.

use crate::logmath::ln_factorial;

/// A derivative value sign · exp(log_abs); zero has log_abs = -∞.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogValue {
    pub sign: f64,
    pub log_abs: f64,
}

impl LogValue {
    pub const ZERO: LogValue = LogValue {
        sign: 0.0,
        log_abs: f64::NEG_INFINITY,
    };

    pub fn value(self) -> f64 {
        if self.sign == 0.0 {
            0.0
        } else {
            self.sign * self.log_abs.exp()
        }
    }
}

/// Derivatives φ^(k)(x) for k = 0..=order. Outside (0, 1) all vanish.
pub fn bump01_jet(x: f64, order: usize) -> Vec<LogValue> {
    if !(x > 0.0 && x < 1.0) {
        return vec![LogValue::ZERO; order + 1];
    }
    let y = 1.0 - x;
    let r = x.min(y);
    let (a, b) = (r / x, r / y);
    // Scaled exponent coefficients û_j = u_j r^j for j >= 1.
    let mut u = vec![0.0; order + 1];
    let (mut pa, mut pb) = (1.0 / x, 1.0 / y);
    let sign_alt = |k: usize| if k.is_multiple_of(2) { 1.0 } else { -1.0 };
    for (k, uk) in u.iter_mut().enumerate().skip(1) {
        pa *= a;
        pb *= b;
        *uk = -(sign_alt(k) * pa + pb);
    }
    let u0 = -(1.0 / x + 1.0 / y);
    let mut e = vec![0.0; order + 1];
    e[0] = 1.0;
    for k in 1..=order {
        let mut acc = 0.0;
        for j in 1..=k {
            acc += j as f64 * u[j] * e[k - j];
        }
        e[k] = acc / k as f64;
    }
    e.iter()
        .enumerate()
        .map(|(k, &ek)| {
            if ek == 0.0 {
                LogValue::ZERO
            } else {
                LogValue {
                    sign: ek.signum(),
                    log_abs: u0 + ln_factorial(k) + ek.abs().ln() - k as f64 * r.ln(),
                }
            }
        })
        .collect()
}

/// φ^(k)(x) as a plain number (underflows to 0 near the endpoints).
pub fn bump01_derivative(x: f64, k: usize) -> f64 {
    bump01_jet(x, k)[k].value()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn phi(x: f64) -> f64 {
        (-1.0 / x - 1.0 / (1.0 - x)).exp()
    }

    #[test]
    fn first_derivative_closed_form() {
        for x in [0.05, 0.3, 0.5, 0.77, 0.99] {
            let d = bump01_derivative(x, 1);
            let exact = phi(x) * (1.0 / (x * x) - 1.0 / ((1.0 - x) * (1.0 - x)));
            assert!((d - exact).abs() <= 1e-12 * exact.abs().max(1e-300), "x = {x}");
        }
    }

    #[test]
    fn matches_finite_differences() {
        let x = 0.4;
        let h = 1e-4;
        let d2 = (phi(x + h) - 2.0 * phi(x) + phi(x - h)) / (h * h);
        assert!((bump01_derivative(x, 2) - d2).abs() < 1e-6);
    }

    #[test]
    fn vanishes_outside() {
        assert_eq!(bump01_derivative(0.0, 3), 0.0);
        assert_eq!(bump01_derivative(1.2, 0), 0.0);
    }
}
