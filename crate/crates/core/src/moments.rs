//! Moments μ_p(φ) = ∫_0^∞ x^p φ(x) dx, origin moments μ⁰_p(φ) = ∫_0^1 φ(x) x^{-p} dx,
//! Laplace samples and the fit of a sequence into Λ_M.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::logmath::ln_factorial;
use crate::quadrature::{integrate_panels, QuadPlan, QuadResult};
use crate::sequence::WeightSequence;
use crate::taylor::{bump01_jet, LogValue};

/// How fast a user-supplied function decays at infinity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "decay", rename_all = "snake_case")]
pub enum Decay {
    /// Supported in [0, end].
    Compact { end: f64 },
    /// |φ(x)| <= C x^{-order}.
    Polynomial { order: f64 },
    /// |φ(x)| <= C e^{-rate x}.
    Exponential { rate: f64 },
}

/// A sampled evaluator with its declared decay.
#[derive(Clone)]
pub struct UserFunction {
    pub eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub decay: Decay,
}

impl fmt::Debug for UserFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("UserFunction").field("decay", &self.decay).finish()
    }
}

#[derive(Debug, Clone)]
pub enum TestFunction {
    /// φ(x) = exp(-x^{1/s}) on [0, ∞).
    ExpPower { s: f64 },
    /// φ(x) = exp(-1/x - 1/(1-x)) on (0, 1), 0 elsewhere.
    Bump01,
    /// The `order`-th derivative of [`TestFunction::Bump01`].
    Bump01Derivative { order: usize },
    User(UserFunction),
}

impl TestFunction {
    pub fn exp_power(s: f64) -> Result<Self> {
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::validation("s", format!("must be > 0, got {s}")));
        }
        Ok(TestFunction::ExpPower { s })
    }

    pub fn user<F: Fn(f64) -> f64 + Send + Sync + 'static>(f: F, decay: Decay) -> Self {
        TestFunction::User(UserFunction {
            eval: Arc::new(f),
            decay,
        })
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        match self {
            TestFunction::ExpPower { s } => (-x.powf(1.0 / s)).exp(),
            TestFunction::Bump01 => self.log_eval(x).value(),
            TestFunction::Bump01Derivative { .. } => self.log_eval(x).value(),
            TestFunction::User(u) => match u.decay {
                Decay::Compact { end } if x > end => 0.0,
                _ => (u.eval)(x),
            },
        }
    }

    /// φ(x) in sign/log form; exact in the exponent for the built-in kinds.
    pub fn log_eval(&self, x: f64) -> LogValue {
        match self {
            TestFunction::ExpPower { s } if x >= 0.0 => LogValue {
                sign: 1.0,
                log_abs: -x.powf(1.0 / s),
            },
            TestFunction::Bump01 => bump01_jet(x, 0)[0],
            TestFunction::Bump01Derivative { order } => bump01_jet(x, *order)[*order],
            _ => {
                let v = self.eval(x);
                LogValue {
                    sign: v.signum() * (v != 0.0) as u8 as f64,
                    log_abs: v.abs().ln(),
                }
            }
        }
    }

    /// Right end of the support, if bounded.
    pub fn support_end(&self) -> Option<f64> {
        match self {
            TestFunction::ExpPower { .. } => None,
            TestFunction::Bump01 | TestFunction::Bump01Derivative { .. } => Some(1.0),
            TestFunction::User(u) => match u.decay {
                Decay::Compact { end } => Some(end),
                _ => None,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentValue {
    pub p: usize,
    pub value: f64,
    /// log|value|, finite even when `value` overflows.
    pub log_abs: f64,
    pub abs_error: f64,
}

/// Moments must meet at least this relative accuracy.
const MOMENT_REL_TOL: f64 = 1e-12;

fn moment_plan(plan: &QuadPlan) -> QuadPlan {
    QuadPlan {
        rel_tol: plan.rel_tol.min(MOMENT_REL_TOL),
        max_panels: plan.max_panels.max(4000),
        ..*plan
    }
}

/// Breakpoints of [0, 1] refined geometrically towards both endpoints.
fn unit_breaks(levels: u32) -> Vec<f64> {
    let mut b: Vec<f64> = (1..=levels).map(|k| 0.5f64.powi(k as i32)).collect();
    b.extend((2..=levels).map(|k| 1.0 - 0.5f64.powi(k as i32)));
    b.push(0.0);
    b.push(1.0);
    b.sort_by(f64::total_cmp);
    b.dedup();
    b
}

/// Panels [0, 1], [1, 2], [2, 4], ... up to `end`.
fn dyadic_breaks(end: f64) -> Vec<f64> {
    let mut b = vec![0.0];
    let mut x = 1.0;
    while x < end {
        b.push(x);
        x *= 2.0;
    }
    b.push(end);
    b
}

fn from_scaled(p: usize, r: QuadResult<f64>, log_scale: f64) -> MomentValue {
    MomentValue {
        p,
        value: r.value * log_scale.exp(),
        log_abs: r.value.abs().ln() + log_scale,
        abs_error: r.abs_error * log_scale.exp(),
    }
}

/// μ_p(φ) = ∫_0^∞ x^p φ(x) dx.
pub fn moment(phi: &TestFunction, p: usize, plan: &QuadPlan) -> Result<MomentValue> {
    let plan = moment_plan(plan);
    let pf = p as f64;
    match phi {
        TestFunction::ExpPower { s } => {
            // x = e^u: ∫ exp((p+1)u - e^{u/s}) du, peaked at u* = s log(s(p+1)).
            let s = *s;
            let g = |u: f64| (pf + 1.0) * u - (u / s).exp();
            let u_star = s * (s * (pf + 1.0)).ln();
            let g_star = g(u_star);
            let reach = |dir: f64| {
                let mut step = s.max(1.0 / (pf + 1.0));
                while g(u_star + dir * step) - g_star > -80.0 {
                    step *= 1.5;
                }
                u_star + dir * step
            };
            let breaks = [reach(-1.0), u_star, reach(1.0)];
            let r = integrate_panels(|u: f64| (g(u) - g_star).exp(), &breaks, &plan)?;
            Ok(from_scaled(p, r, g_star))
        }
        TestFunction::Bump01 | TestFunction::Bump01Derivative { .. } => {
            let f = |x: f64| {
                let v = phi.log_eval(x);
                v.sign * (v.log_abs + pf * x.ln()).exp()
            };
            let r = integrate_panels(f, &unit_breaks(12), &plan)?;
            Ok(from_scaled(p, r, 0.0))
        }
        TestFunction::User(u) => {
            let f = |x: f64| x.powi(p as i32) * (u.eval)(x);
            let end = match u.decay {
                Decay::Compact { end } => end,
                Decay::Polynomial { order } => {
                    if order <= pf + 1.0 {
                        return Err(Error::Precondition(format!(
                            "declared decay x^-{order} does not dominate x^{p}"
                        )));
                    }
                    // Tail beyond X is below tol relative to X^{p+1-order}.
                    let k = (order - pf - 1.0).max(1e-3);
                    (1.0 / plan.rel_tol).powf(1.0 / k).min(1e12)
                }
                Decay::Exponential { rate } => {
                    if !(rate > 0.0) {
                        return Err(Error::Precondition("exponential decay needs rate > 0".into()));
                    }
                    (60.0 + 2.0 * pf * (pf + 1.0).ln()) / rate
                }
            };
            let r = integrate_panels(f, &dyadic_breaks(end), &plan)?;
            Ok(from_scaled(p, r, 0.0))
        }
    }
}

/// μ⁰_p(φ) = ∫_0^1 φ(x) x^{-p} dx for φ supported in [0, 1] and flat at 0.
pub fn moment_origin(phi: &TestFunction, p: usize, plan: &QuadPlan) -> Result<MomentValue> {
    let plan = moment_plan(plan);
    match phi.support_end() {
        Some(end) if end <= 1.0 => {}
        _ => {
            return Err(Error::Precondition(
                "origin moments need a function supported in [0, 1]".into(),
            ))
        }
    }
    let pf = p as f64;
    let log_integrand = |x: f64| {
        let v = phi.log_eval(x);
        (v.sign, v.log_abs - pf * x.ln())
    };
    // Flatness at 0: |φ(x)| x^{-p-1} must stay bounded and decrease towards 0.
    let probe = |k: i32| {
        let x = 0.5f64.powi(k);
        let (_, l) = log_integrand(x);
        l - x.ln()
    };
    let (l20, l30) = (probe(20), probe(30));
    if !l20.is_nan() && !l30.is_nan() && (l30 > 0.0 || (l30 > l20 && l30.is_finite())) {
        return Err(Error::Precondition(format!(
            "integrand blow-up at 0: phi is not flat enough for p = {p}"
        )));
    }
    let f = |x: f64| {
        let (s, l) = log_integrand(x);
        if s == 0.0 {
            0.0
        } else {
            s * l.exp()
        }
    };
    let r = integrate_panels(f, &unit_breaks(40), &plan)?;
    Ok(from_scaled(p, r, 0.0))
}

/// L(φ)(ζ) = ∫_0^∞ φ(x) e^{ixζ} dx for Im ζ >= 0.
pub fn laplace_sample(phi: &TestFunction, zeta: Complex64, plan: &QuadPlan) -> Result<QuadResult<Complex64>> {
    const MAX_PANELS: usize = 20_000;
    if !(zeta.im >= 0.0) || !zeta.re.is_finite() {
        return Err(Error::validation("zeta", format!("need Im zeta >= 0, got {zeta}")));
    }
    let (end, tail) = match phi {
        TestFunction::ExpPower { s } => {
            let end = 60f64.powf(*s);
            (end, (-60.0f64).exp() * (1.0 + end))
        }
        _ => match phi.support_end() {
            Some(end) => (end, 0.0),
            None => return Err(Error::Precondition("Laplace samples need a built-in or compactly supported function".into())),
        },
    };
    let mut breaks = if phi.support_end() == Some(1.0) {
        unit_breaks(12)
    } else {
        dyadic_breaks(end)
    };
    if zeta.re != 0.0 {
        let half_period = PI / zeta.re.abs();
        let n = (end / half_period).ceil() as usize;
        if n > MAX_PANELS {
            return Err(Error::Quadrature(format!(
                "Re zeta = {} needs {n} half-period panels (limit {MAX_PANELS})",
                zeta.re
            )));
        }
        breaks.extend((1..n).map(|k| k as f64 * half_period));
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
    }
    let f = |x: f64| {
        let v = phi.log_eval(x);
        if v.sign == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            let w = Complex64::new(v.log_abs, 0.0) + Complex64::i() * zeta * x;
            w.exp() * v.sign
        }
    };
    let plan = QuadPlan {
        max_panels: plan.max_panels.max(breaks.len() * 4),
        ..*plan
    };
    let mut r = integrate_panels(f, &breaks, &plan)?;
    r.abs_error += tail;
    Ok(r)
}

/// Step of the finite differences in [`laplace_derivative`].
pub const LAPLACE_FD_STEP: f64 = 1e-2;

/// Derivative of ζ ↦ L(φ)(ζ) along the real axis at 0 by central
/// differences with one Richardson step. Orders above 4 are rejected.
pub fn laplace_derivative(phi: &TestFunction, order: usize, h: f64, plan: &QuadPlan) -> Result<Complex64> {
    if order > 4 {
        return Err(Error::validation(
            "order",
            format!("finite differences of order {order} > 4 are too unstable"),
        ));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::validation("h", "must be > 0"));
    }
    let plan = QuadPlan {
        rel_tol: plan.rel_tol.min(1e-13),
        ..*plan
    };
    let l = |t: f64| laplace_sample(phi, Complex64::new(t, 0.0), &plan).map(|r| r.value);
    let stencil = |h: f64| -> Result<Complex64> {
        Ok(match order {
            0 => l(0.0)?,
            1 => (l(h)? - l(-h)?) / (2.0 * h),
            2 => (l(h)? - l(0.0)? * 2.0 + l(-h)?) / (h * h),
            3 => (l(2.0 * h)? - l(h)? * 2.0 + l(-h)? * 2.0 - l(-2.0 * h)?) / (2.0 * h.powi(3)),
            _ => (l(2.0 * h)? - l(h)? * 4.0 + l(0.0)? * 6.0 - l(-h)? * 4.0 + l(-2.0 * h)?) / h.powi(4),
        })
    };
    let (coarse, fine) = (stencil(h)?, stencil(h / 2.0)?);
    Ok((fine * 4.0 - coarse) / 3.0)
}

/// Result of fitting |c_p| <= C h^p p! M_p.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaFit {
    #[serde(rename = "C")]
    pub c: f64,
    pub h: f64,
    pub log_c: f64,
    pub log_h: f64,
    /// log|c_p| - (log C + p log h + log p! + log M_p); all <= 0.
    pub residuals: Vec<f64>,
}

/// Smallest (C, h) with r_p <= log C + p log h, h read off the late
/// increments of r. Fails when the increments keep growing.
fn fit_exponential_bound(r: &[f64]) -> Result<(f64, f64, Vec<f64>)> {
    let n = r.len() - 1;
    if n < 8 {
        return Err(Error::validation("values", format!("need at least 9 values, got {}", n + 1)));
    }
    let inc: Vec<f64> = r.windows(2).map(|w| w[1] - w[0]).filter(|d| d.is_finite()).collect();
    if inc.len() < 8 {
        return Err(Error::NotInLambda("too few nonzero values to fit".into()));
    }
    let m = inc.len();
    let mid_max = inc[m / 2..3 * m / 4].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let late = &inc[3 * m / 4..];
    let late_mean = late.iter().sum::<f64>() / late.len() as f64;
    if late_mean > mid_max + 1e-6 {
        return Err(Error::NotInLambda(format!(
            "log-increments keep growing (last-quartile mean {late_mean:.4} > earlier max {mid_max:.4})"
        )));
    }
    let log_h = inc[m / 2..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_c = r
        .iter()
        .enumerate()
        .map(|(p, v)| v - p as f64 * log_h)
        .fold(f64::NEG_INFINITY, f64::max);
    let residuals = r
        .iter()
        .enumerate()
        .map(|(p, v)| v - log_c - p as f64 * log_h)
        .collect();
    Ok((log_c, log_h, residuals))
}

/// Fit c_0..c_P into Λ_M = {sup |c_p| / (h^p p! M_p) < ∞}.
pub fn lambda_fit(values: &[f64], seq: &WeightSequence) -> Result<LambdaFit> {
    let logs: Vec<f64> = values.iter().map(|v| v.abs().ln()).collect();
    lambda_fit_log(&logs, seq)
}

/// [`lambda_fit`] on log|c_p|, for values beyond the range of `f64`.
pub fn lambda_fit_log(log_abs: &[f64], seq: &WeightSequence) -> Result<LambdaFit> {
    if log_abs.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
        return Err(Error::validation("values", "must be finite"));
    }
    let r: Vec<f64> = log_abs
        .iter()
        .enumerate()
        .map(|(p, l)| l - ln_factorial(p) - seq.log_big_m(p))
        .collect();
    let (log_c, log_h, residuals) = fit_exponential_bound(&r)?;
    Ok(LambdaFit {
        c: log_c.exp(),
        h: log_h.exp(),
        log_c,
        log_h,
        residuals,
    })
}

/// Fit N_p <= C h^p M_p for p <= horizon, i.e. the inclusion N ⊂ M.
pub fn inclusion_fit(small: &WeightSequence, big: &WeightSequence, horizon: usize) -> Result<LambdaFit> {
    let a = small.log_big_m_range(horizon)?;
    let b = big.log_big_m_range(horizon)?;
    let r: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
    let (log_c, log_h, residuals) = fit_exponential_bound(&r)?;
    Ok(LambdaFit {
        c: log_c.exp(),
        h: log_h.exp(),
        log_c,
        log_h,
        residuals,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundWitness {
    pub p: usize,
    pub x: f64,
    /// log|φ(x)| - log(‖φ‖ h^p M_p x^p).
    pub excess: f64,
}

/// Pointwise check of |φ(x)| <= ‖φ‖_{M,h} h^p M_p x^p for the bump.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaylorBoundReport {
    pub passed: bool,
    pub order_cap: usize,
    /// Tightest h for which the norm is attained at order 0.
    pub h: f64,
    pub norm: f64,
    /// log sup_x |φ^(k)(x)| on the estimation grid, k = 0..=order_cap.
    pub log_derivative_sups: Vec<f64>,
    pub max_excess: f64,
    pub grid_points: usize,
    pub witness: Option<BoundWitness>,
}

/// Estimate ‖φ‖_{M,h} = sup_{k,x} |φ^(k)(x)| / (h^k k! M_k) for the bump on a
/// 10000-point grid, then check the pointwise bound for p <= `order_cap` on a
/// 1000-point subgrid.
pub fn taylor_bound_check(order_cap: usize, seq: &WeightSequence) -> Result<TaylorBoundReport> {
    const SUP_GRID: usize = 10_000;
    const CHECK_GRID: usize = 1_000;
    let mut sups = vec![f64::NEG_INFINITY; order_cap + 1];
    for i in 1..SUP_GRID {
        let jet = bump01_jet(i as f64 / SUP_GRID as f64, order_cap);
        for (s, d) in sups.iter_mut().zip(&jet) {
            *s = s.max(d.log_abs);
        }
    }
    let log_d0 = sups[0];
    let log_h = (1..=order_cap)
        .map(|k| (sups[k] - ln_factorial(k) - seq.log_big_m(k) - log_d0) / k as f64)
        .fold(0.0f64, f64::max);

    let mut worst: Option<BoundWitness> = None;
    for j in 0..CHECK_GRID {
        let x = j as f64 / CHECK_GRID as f64;
        let lphi = bump01_jet(x, 0)[0].log_abs;
        for p in 0..=order_cap {
            let rhs = log_d0 + p as f64 * (log_h + x.ln()) + seq.log_big_m(p);
            let excess = if lphi == f64::NEG_INFINITY { f64::NEG_INFINITY } else { lphi - rhs };
            if worst.is_none_or(|w| excess > w.excess) {
                worst = Some(BoundWitness { p, x, excess });
            }
        }
    }
    let worst = worst.expect("grid is nonempty");
    let passed = worst.excess <= 1e-12;
    Ok(TaylorBoundReport {
        passed,
        order_cap,
        h: log_h.exp(),
        norm: log_d0.exp(),
        log_derivative_sups: sups,
        max_excess: worst.excess,
        grid_points: CHECK_GRID,
        witness: (!passed).then_some(worst),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logmath::ln_gamma;

    #[test]
    fn exp_power_moments() {
        let plan = QuadPlan::default();
        let m = moment(&TestFunction::exp_power(1.0).unwrap(), 3, &plan).unwrap();
        assert!((m.value - 6.0).abs() < 1e-12);
        let m = moment(&TestFunction::exp_power(2.0).unwrap(), 0, &plan).unwrap();
        assert!((m.value - 2.0).abs() < 1e-12);
        let m = moment(&TestFunction::exp_power(3.0).unwrap(), 15, &plan).unwrap();
        let exact = 3f64.ln() + ln_gamma(48.0);
        assert!((m.log_abs - exact).abs() < 1e-10);
    }

    #[test]
    fn laplace_closed_forms() {
        let phi = TestFunction::exp_power(1.0).unwrap();
        let plan = QuadPlan::with_rel_tol(1e-12);
        let l0 = laplace_sample(&phi, Complex64::new(0.0, 0.0), &plan).unwrap();
        assert!((l0.value - 1.0).norm() < 1e-12);
        let li = laplace_sample(&phi, Complex64::new(0.0, 1.0), &plan).unwrap();
        assert!((li.value - 0.5).norm() < 1e-12);
    }

    #[test]
    fn lambda_fit_definitional() {
        let g = WeightSequence::gevrey(1.0).unwrap();
        let logs: Vec<f64> = (0..20).map(|p| 2.0 * ln_factorial(p)).collect();
        let fit = lambda_fit_log(&logs, &g).unwrap();
        assert!((fit.c - 1.0).abs() < 1e-12 && (fit.h - 1.0).abs() < 1e-12);
        assert!(lambda_fit(&[1.0; 5], &g).is_err());
    }

    #[test]
    fn origin_moment_rejects_non_flat() {
        let phi = TestFunction::user(|x| x, Decay::Compact { end: 1.0 });
        assert!(matches!(
            moment_origin(&phi, 3, &QuadPlan::default()),
            Err(Error::Precondition(_))
        ));
        assert!(moment_origin(&TestFunction::exp_power(1.0).unwrap(), 0, &QuadPlan::default()).is_err());
    }
}
