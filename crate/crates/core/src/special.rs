//! Associated function ω_M, Poisson transform on the upper half-plane and
//! the modulus of the auxiliary function G built from them.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::quadrature::{integrate_panels, QuadPlan};
use crate::sequence::{derive, DeriveOp, Property, WeightSequence};

/// Largest search bound tried by [`AssociatedFunction`].
const P_CAP_LIMIT: usize = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AssocValue {
    pub value: f64,
    pub argmax: usize,
}

/// ω_M(t) = max_{0 <= p <= p_cap} (p log t - log M_p), with ω_M(0) = 0.
pub fn associated_function(seq: &WeightSequence, t: f64, p_cap: usize) -> Result<AssocValue> {
    if !(t >= 0.0) || t.is_infinite() {
        return Err(Error::validation("t", format!("must be finite and >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(AssocValue { value: 0.0, argmax: 0 });
    }
    let lt = t.ln();
    let f = |p: usize| p as f64 * lt - seq.log_big_m(p);
    let best_in = |lo: usize, hi: usize| {
        (lo..=hi).fold((lo, f(lo)), |best, p| {
            let v = f(p);
            if v > best.1 {
                (p, v)
            } else {
                best
            }
        })
    };
    let (argmax, value) = if seq.declared(Property::Lc) == Some(true) {
        // First p with log m_p >= log t: the increments change sign there.
        let (mut lo, mut hi) = (0usize, p_cap);
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if seq.log_m(mid) >= lt {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        best_in(lo.saturating_sub(2), (lo + 2).min(p_cap))
    } else {
        best_in(0, p_cap)
    };
    if argmax == p_cap {
        return Err(Error::PCapTooSmall { p_cap });
    }
    Ok(AssocValue { value, argmax })
}

/// ω_M as a plain evaluator that enlarges its search bound as needed.
#[derive(Debug, Clone)]
pub struct AssociatedFunction {
    seq: WeightSequence,
}

impl AssociatedFunction {
    pub fn new(seq: WeightSequence) -> Self {
        AssociatedFunction { seq }
    }

    pub fn sequence(&self) -> &WeightSequence {
        &self.seq
    }

    pub fn try_eval(&self, t: f64) -> Result<f64> {
        let mut cap = 64;
        loop {
            match associated_function(&self.seq, t, cap) {
                Err(Error::PCapTooSmall { .. }) if cap < P_CAP_LIMIT => cap *= 4,
                other => return other.map(|v| v.value),
            }
        }
    }

    /// NaN when the value cannot be determined.
    pub fn eval(&self, t: f64) -> f64 {
        self.try_eval(t).unwrap_or(f64::NAN)
    }
}

/// A point z = x + iy of the upper half-plane H or of H₋₁ = {Im z > -1}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfPlanePoint {
    pub x: f64,
    pub y: f64,
}

impl HalfPlanePoint {
    /// A point of H (y > 0).
    pub fn upper(x: f64, y: f64) -> Result<Self> {
        if !(x.is_finite() && y.is_finite() && y > 0.0) {
            return Err(Error::validation("y", format!("need y > 0, got {x} + {y}i")));
        }
        Ok(HalfPlanePoint { x, y })
    }

    /// A point of H₋₁ (y > -1).
    pub fn shifted(x: f64, y: f64) -> Result<Self> {
        if !(x.is_finite() && y.is_finite() && y > -1.0) {
            return Err(Error::validation("y", format!("need y > -1, got {x} + {y}i")));
        }
        Ok(HalfPlanePoint { x, y })
    }

    pub fn abs(&self) -> f64 {
        self.x.hypot(self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PoissonValue {
    pub value: f64,
    pub abs_error: f64,
    /// Truncation point T of the integral over [-T, T].
    pub truncation: f64,
    pub tail_estimate: f64,
}

const T_MAX: f64 = 1e15;

/// P_ω(z) = (y/π) ∫ ω(t) / ((t-x)² + y²) dt for an even weight ω given on
/// [0, ∞). With t = x + y tan θ the integral becomes (1/π) ∫ ω(x + y tan θ) dθ;
/// the parts |t| > T are replaced by a power-law tail estimate whose model
/// error enters the reported error.
pub fn poisson_transform<W>(omega: W, z: HalfPlanePoint, plan: &QuadPlan) -> Result<PoissonValue>
where
    W: Fn(f64) -> f64,
{
    if !(z.y > 0.0) {
        return Err(Error::validation("y", "Poisson transform needs Im z > 0"));
    }
    let w = |t: f64| omega(t.abs());
    let (x, y) = (z.x, z.y);
    let scale = w(z.abs()).abs().max(w(1.0).abs()).max(f64::MIN_POSITIVE);

    // Grow T until the error of the power-law tail model is below tolerance.
    let mut t_cut = 8.0 * (x.abs() + y + 1.0);
    let (tail, tail_err) = loop {
        let (a, b, c) = (w(t_cut), w(2.0 * t_cut), w(4.0 * t_cut));
        if !(a.is_finite() && b.is_finite() && c.is_finite()) {
            return Err(Error::Quadrature(format!("weight not finite near t = {t_cut:e}")));
        }
        let growth = |lo: f64, hi: f64| if lo > 0.0 { (hi / lo).log2().max(0.0) } else { 0.0 };
        let (kappa, kappa_next) = (growth(a, b), growth(b, c));
        if kappa.max(kappa_next) < 1.0 {
            let tail = 2.0 * (y / PI) * a / (t_cut * (1.0 - kappa));
            let rel = (kappa_next - kappa).abs() / (1.0 - kappa_next) + 2.0 * (x.abs() + y) / t_cut;
            if tail * rel <= plan.rel_tol * scale {
                break (tail, tail * rel);
            }
        }
        t_cut *= 2.0;
        if t_cut > T_MAX {
            return Err(Error::Quadrature(
                "Poisson tail does not converge: the weight grows too fast".into(),
            ));
        }
    };

    let theta = |t: f64| ((t - x) / y).atan();
    let mut breaks = vec![theta(-t_cut), 0.0, theta(t_cut)];
    let kink = theta(0.0);
    if kink.abs() > 1e-12 {
        breaks.push(kink);
    }
    breaks.sort_by(f64::total_cmp);
    let f = |th: f64| w(x + y * th.tan()) / PI;
    let r = integrate_panels(f, &breaks, plan)?;
    Ok(PoissonValue {
        value: r.value + tail,
        abs_error: r.abs_error + tail_err,
        truncation: t_cut,
        tail_estimate: tail,
    })
}

/// The weight ω(t) = ω_Â(2|t|) behind G, with Â = (p! A_p).
pub fn g_weight(aux: &WeightSequence) -> Result<AssociatedFunction> {
    Ok(AssociatedFunction::new(derive(aux, DeriveOp::Hat)?))
}

/// log|G(z)| = -4 P_ω(z + i) for z in H₋₁.
pub fn g_log_modulus(aux: &WeightSequence, z: HalfPlanePoint, plan: &QuadPlan) -> Result<PoissonValue> {
    let hat = g_weight(aux)?;
    g_log_modulus_with(&hat, z, plan)
}

fn g_log_modulus_with(hat: &AssociatedFunction, z: HalfPlanePoint, plan: &QuadPlan) -> Result<PoissonValue> {
    let shifted = HalfPlanePoint::shifted(z.x, z.y)?;
    let p = poisson_transform(|t| hat.eval(2.0 * t), HalfPlanePoint::upper(shifted.x, shifted.y + 1.0)?, plan)?;
    Ok(PoissonValue {
        value: -4.0 * p.value,
        abs_error: 4.0 * p.abs_error,
        ..p
    })
}

/// One checked inequality lhs <= rhs at a grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridCheck {
    pub z: HalfPlanePoint,
    pub lhs: f64,
    pub rhs: f64,
    pub abs_error: f64,
    pub ok: bool,
}

/// Outcome of a grid verification: passes when every point satisfies its
/// bound up to `tolerance` plus the quadrature error.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridReport {
    pub check: String,
    pub passed: bool,
    pub sup_excess: f64,
    pub tolerance: f64,
    pub points: Vec<GridCheck>,
}

impl GridReport {
    fn new(check: &str, tolerance: f64, points: Vec<GridCheck>) -> Self {
        let sup_excess = points
            .iter()
            .map(|p| p.lhs - p.rhs)
            .fold(f64::NEG_INFINITY, f64::max);
        GridReport {
            check: check.into(),
            passed: points.iter().all(|p| p.ok),
            sup_excess,
            tolerance,
            points,
        }
    }

    /// First point violating its bound.
    pub fn witness(&self) -> Option<&GridCheck> {
        self.points.iter().find(|p| !p.ok)
    }
}

/// 50 points of H₋₁ with |z| <= 10.
pub fn default_g_grid() -> Vec<HalfPlanePoint> {
    const YS: [f64; 5] = [-0.5, 0.0, 0.7, 2.0, 4.0];
    (0..50)
        .map(|k| HalfPlanePoint {
            x: -9.0 + 18.0 * k as f64 / 49.0,
            y: YS[k % 5],
        })
        .collect()
}

/// 50 points of H with |z| <= 10.
pub fn default_upper_grid() -> Vec<HalfPlanePoint> {
    const YS: [f64; 5] = [0.1, 0.7, 2.0, 4.0, 8.0];
    (0..50)
        .map(|k| HalfPlanePoint {
            x: -6.0 + 12.0 * k as f64 / 49.0,
            y: YS[k % 5],
        })
        .collect()
}

/// Checks sup_z (log|G(z)| + ω_Â(|z|)) <= ω_Â(2) over `grid`.
pub fn verify_g_decay(
    aux: &WeightSequence,
    grid: &[HalfPlanePoint],
    plan: &QuadPlan,
    exec: Exec,
) -> Result<GridReport> {
    const TOL: f64 = 1e-4;
    let hat = g_weight(aux)?;
    let bound = hat.try_eval(2.0)?;
    let points: Result<Vec<GridCheck>> = exec
        .map(grid, |z| {
            let g = g_log_modulus_with(&hat, *z, plan)?;
            let lhs = g.value + hat.try_eval(z.abs())?;
            Ok(GridCheck {
                z: *z,
                lhs,
                rhs: bound,
                abs_error: g.abs_error,
                ok: lhs <= bound + TOL + g.abs_error,
            })
        })
        .into_iter()
        .collect();
    Ok(GridReport::new("g_decay", TOL, points?))
}

/// Checks P_ω(z) >= ω(|z|)/4 over `grid`.
pub fn verify_poisson_lower_bound<W>(
    omega: W,
    grid: &[HalfPlanePoint],
    plan: &QuadPlan,
    exec: Exec,
) -> Result<GridReport>
where
    W: Fn(f64) -> f64 + Sync + Send,
{
    const TOL: f64 = 1e-6;
    let points: Result<Vec<GridCheck>> = exec
        .map(grid, |z| {
            let p = poisson_transform(&omega, *z, plan)?;
            let lhs = omega(z.abs()) / 4.0;
            Ok(GridCheck {
                z: *z,
                lhs,
                rhs: p.value,
                abs_error: p.abs_error,
                ok: lhs <= p.value + TOL + p.abs_error,
            })
        })
        .into_iter()
        .collect();
    Ok(GridReport::new("poisson_lower_bound", TOL, points?))
}

/// Cauchy-estimate surrogate for derivative bounds of G: for |x| >= 1 the
/// maximum of log|G| over the circle |w - x| = 1/2 plus ω_Â(|x|/2) stays
/// below ω_Â(2).
pub fn verify_g_cauchy(
    aux: &WeightSequence,
    xs: &[f64],
    plan: &QuadPlan,
    exec: Exec,
) -> Result<GridReport> {
    const TOL: f64 = 1e-4;
    const SAMPLES: usize = 16;
    let hat = g_weight(aux)?;
    let bound = hat.try_eval(2.0)?;
    let points: Result<Vec<GridCheck>> = exec
        .map(xs, |&x| {
            if x.abs() < 1.0 {
                return Err(Error::validation("x", "Cauchy surrogate needs |x| >= 1"));
            }
            let mut sup = f64::NEG_INFINITY;
            let mut err = 0.0f64;
            for k in 0..SAMPLES {
                let phi = 2.0 * PI * k as f64 / SAMPLES as f64;
                let w = HalfPlanePoint::shifted(x + 0.5 * phi.cos(), 0.5 * phi.sin())?;
                let g = g_log_modulus_with(&hat, w, plan)?;
                sup = sup.max(g.value);
                err = err.max(g.abs_error);
            }
            let lhs = sup + hat.try_eval(x.abs() / 2.0)?;
            Ok(GridCheck {
                z: HalfPlanePoint { x, y: 0.0 },
                lhs,
                rhs: bound,
                abs_error: err,
                ok: lhs <= bound + TOL + err,
            })
        })
        .into_iter()
        .collect();
    Ok(GridReport::new("g_cauchy_surrogate", TOL, points?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn associated_function_examples() {
        let g = WeightSequence::gevrey(1.0).unwrap();
        assert_eq!(associated_function(&g, 0.0, 10).unwrap().value, 0.0);
        let one = associated_function(&g, 1.0, 100).unwrap();
        assert_eq!((one.value, one.argmax), (0.0, 0));
        let e = associated_function(&g, std::f64::consts::E, 100).unwrap();
        assert_eq!(e.argmax, 2);
        assert!((e.value - (2.0 - 2f64.ln())).abs() < 1e-14);
    }

    #[test]
    fn p_cap_too_small() {
        let g = WeightSequence::gevrey(1.0).unwrap();
        assert!(matches!(
            associated_function(&g, 1e6, 10),
            Err(Error::PCapTooSmall { p_cap: 10 })
        ));
    }

    #[test]
    fn poisson_constant_weight() {
        let z = HalfPlanePoint::upper(1.5, 0.3).unwrap();
        let p = poisson_transform(|_| 2.5, z, &QuadPlan::default()).unwrap();
        assert!((p.value - 2.5).abs() < 1e-7, "{p:?}");
    }

    #[test]
    fn omega_hat_at_two() {
        let hat = g_weight(&WeightSequence::gevrey(2.0).unwrap()).unwrap();
        assert!((hat.eval(2.0) - 2f64.ln()).abs() < 1e-15);
    }
}
