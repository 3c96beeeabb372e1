//! Log-domain numerics shared by every module: log-sum-exp accumulation,
//! log-Gamma, harmonic numbers and small regression helpers.

use std::sync::OnceLock;

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Harmonic numbers below this bound come from an exact summation table.
pub const HARMONIC_TABLE_MAX: u64 = 1 << 20;

#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    if a >= b {
        a + (b - a).exp().ln_1p()
    } else {
        b + (a - b).exp().ln_1p()
    }
}

/// log(exp(a) - exp(b)) for a >= b.
#[inline]
pub fn log_sub_exp(a: f64, b: f64) -> f64 {
    if b == f64::NEG_INFINITY {
        return a;
    }
    if b >= a {
        return f64::NEG_INFINITY;
    }
    a + (-(b - a).exp()).ln_1p()
}

pub fn log_sum_exp<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    xs.into_iter().fold(f64::NEG_INFINITY, log_add_exp)
}

/// Compensated (Neumaier) running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

fn stirling_ln_gamma(x: f64) -> f64 {
    // Bernoulli terms B_{2n} / (2n (2n-1) x^{2n-1}).
    const C: [f64; 8] = [
        1.0 / 12.0,
        -1.0 / 360.0,
        1.0 / 1260.0,
        -1.0 / 1680.0,
        1.0 / 1188.0,
        -691.0 / 360360.0,
        1.0 / 156.0,
        -3617.0 / 122400.0,
    ];
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let mut series = 0.0;
    let mut pow = inv;
    for c in C {
        series += c * pow;
        pow *= inv2;
    }
    (x - 0.5) * x.ln() - x + HALF_LN_2PI + series
}

/// Natural log of Gamma(x) for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    if x >= 15.0 {
        return stirling_ln_gamma(x);
    }
    let mut y = x;
    let mut prod = 1.0;
    while y < 15.0 {
        prod *= y;
        y += 1.0;
    }
    stirling_ln_gamma(y) - prod.ln()
}

/// ln(p!) for integer p.
pub fn ln_factorial(p: usize) -> f64 {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(171);
        let mut f = 1.0f64;
        t.push(0.0);
        for k in 1..=170 {
            f *= k as f64;
            t.push(f.ln());
        }
        t
    });
    match table.get(p) {
        Some(v) => *v,
        None => ln_gamma(p as f64 + 1.0),
    }
}

fn harmonic_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let n = HARMONIC_TABLE_MAX as usize;
        let mut t = Vec::with_capacity(n + 1);
        let mut acc = NeumaierSum::default();
        t.push(0.0);
        for k in 1..=n {
            acc.add(1.0 / k as f64);
            t.push(acc.value());
        }
        t
    })
}

/// Asymptotic expansion of H_n given ln n and 1/n.
fn harmonic_asymptotic(ln_n: f64, inv_n: f64) -> f64 {
    let inv2 = inv_n * inv_n;
    ln_n + EULER_GAMMA + 0.5 * inv_n - inv2 / 12.0 + inv2 * inv2 / 120.0
        - inv2 * inv2 * inv2 / 252.0
}

/// Harmonic number H_n = 1 + 1/2 + ... + 1/n (H_0 = 0).
pub fn harmonic(n: u64) -> f64 {
    if n <= HARMONIC_TABLE_MAX {
        harmonic_table()[n as usize]
    } else {
        let nf = n as f64;
        harmonic_asymptotic(nf.ln(), 1.0 / nf)
    }
}

/// H_{2^e}, valid for astronomically large exponents.
pub fn harmonic_pow2(e: u32) -> f64 {
    if e <= 20 {
        harmonic(1u64 << e)
    } else {
        harmonic_asymptotic(e as f64 * std::f64::consts::LN_2, (-(e as f64)).exp2())
    }
}

/// Least-squares slope of `ys` against `xs`.
pub fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    debug_assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Relative/absolute closeness with a floor on the scale.
pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_add_exp_matches_direct() {
        let a: f64 = 1.3;
        let b: f64 = -0.4;
        let direct = (a.exp() + b.exp()).ln();
        assert!((log_add_exp(a, b) - direct).abs() < 1e-14);
        assert_eq!(log_add_exp(f64::NEG_INFINITY, 2.0), 2.0);
        assert!((log_sub_exp(a, b) - (a.exp() - b.exp()).ln()).abs() < 1e-14);
    }

    #[test]
    fn ln_gamma_small_integers() {
        let mut f = 1.0f64;
        for n in 1..30u32 {
            f *= n as f64;
            let got = ln_gamma(n as f64 + 1.0);
            assert!((got - f.ln()).abs() < 1e-13 * f.ln().max(1.0), "n = {n}");
        }
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-14);
    }

    #[test]
    fn harmonic_table_and_expansion_agree_at_switchover() {
        let n = HARMONIC_TABLE_MAX;
        let nf = n as f64;
        let asym = harmonic_asymptotic(nf.ln(), 1.0 / nf);
        assert!((harmonic(n) - asym).abs() < 1e-12);
        assert_eq!(harmonic(4), 25.0 / 12.0);
        assert!((harmonic_pow2(21) - harmonic(1 << 21)).abs() < 1e-12);
    }

    #[test]
    fn slope_of_line() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 1.0).collect();
        assert!((ls_slope(&xs, &ys) - 3.0).abs() < 1e-14);
    }
}
