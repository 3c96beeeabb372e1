//! Bracketing estimators for the growth indices γ(M) and ω(M).

use serde::{Serialize, Serializer};

use crate::conditions::{gamma_core, CheckOptions, Status};
use crate::error::{Error, Result};
use crate::sequence::{BigIndex, WeightSequence};

/// Upper end of an index bracket.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    Finite(f64),
    /// The index exceeds every probed value.
    Infinite,
}

impl Bound {
    pub fn is_infinite(self) -> bool {
        matches!(self, Bound::Infinite)
    }

    pub fn value(self) -> f64 {
        match self {
            Bound::Finite(v) => v,
            Bound::Infinite => f64::INFINITY,
        }
    }
}

impl Serialize for Bound {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Bound::Finite(v) => serializer.serialize_f64(*v),
            Bound::Infinite => serializer.serialize_str("+inf"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexKind {
    Gamma,
    Omega,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    GammaBisection,
    GammaAlmostIncreasing,
    OmegaLiminf,
    OmegaSeries,
}

/// One probe of an estimator: a trial exponent with its verdict, or a
/// sequence index with the observed ratio.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndexSample {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<BigIndex>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub status: Option<Status>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossCheck {
    pub method: Method,
    pub value: Bound,
    pub agrees: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndexEstimate {
    pub index: IndexKind,
    pub lower: Option<f64>,
    pub upper: Bound,
    /// Point estimate: bracket midpoint for γ, the liminf probe for ω.
    pub estimate: Bound,
    pub method: Method,
    pub cross_check: CrossCheck,
    pub converged: bool,
    pub samples: Vec<IndexSample>,
}

impl IndexEstimate {
    /// True when `x` lies inside [lower - tol, upper + tol].
    pub fn contains(&self, x: f64, tol: f64) -> bool {
        self.lower.unwrap_or(0.0) - tol <= x && x <= self.upper.value() + tol
    }

    pub fn width(&self) -> f64 {
        self.upper.value() - self.lower.unwrap_or(0.0)
    }
}

/// Options of [`gamma_index`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaOptions {
    pub beta_max: f64,
    pub tol: f64,
    /// Maximum number of (γ_β) evaluations.
    pub budget: usize,
    pub checks: CheckOptions,
}

impl Default for GammaOptions {
    fn default() -> Self {
        GammaOptions {
            beta_max: 64.0,
            tol: 0.05,
            budget: 60,
            checks: CheckOptions::default(),
        }
    }
}

fn validate_gamma(opts: &GammaOptions) -> Result<()> {
    if !(opts.tol.is_finite() && opts.tol > 0.0) {
        return Err(Error::validation("tol", format!("must be > 0, got {}", opts.tol)));
    }
    if !(opts.beta_max.is_finite() && opts.beta_max >= 1.0) {
        return Err(Error::validation(
            "beta_max",
            format!("must be >= 1, got {}", opts.beta_max),
        ));
    }
    Ok(())
}

/// γ(M) = sup{β > 0 : M satisfies (γ_β)} by bisection on β.
pub fn gamma_index(
    seq: &WeightSequence,
    horizon: usize,
    beta_max: f64,
    tol: f64,
) -> Result<IndexEstimate> {
    gamma_index_with(
        seq,
        horizon,
        &GammaOptions {
            beta_max,
            tol,
            ..GammaOptions::default()
        },
    )
}

pub fn gamma_index_with(
    seq: &WeightSequence,
    horizon: usize,
    opts: &GammaOptions,
) -> Result<IndexEstimate> {
    validate_gamma(opts)?;
    if horizon < 64 {
        return Err(Error::HorizonTooSmall {
            horizon,
            minimum: 64,
        });
    }
    let mut probes: Vec<(f64, Status)> = Vec::new();
    let probe = |beta: f64, probes: &mut Vec<(f64, Status)>| -> Result<Status> {
        let s = gamma_core(seq, beta, horizon, &opts.checks)?.status;
        probes.push((beta, s));
        Ok(s)
    };

    let top = probe(opts.beta_max, &mut probes)?;
    let cross = almost_increasing_index(seq, horizon, opts.beta_max)?;
    if top.holds() {
        let agrees = cross.is_infinite() || cross.value() >= opts.beta_max - opts.tol;
        return Ok(IndexEstimate {
            index: IndexKind::Gamma,
            lower: Some(opts.beta_max),
            upper: Bound::Infinite,
            estimate: Bound::Infinite,
            method: Method::GammaBisection,
            cross_check: CrossCheck {
                method: Method::GammaAlmostIncreasing,
                value: cross,
                agrees,
            },
            converged: agrees,
            samples: samples_of(&probes),
        });
    }

    // Find some β at which (γ_β) holds by halving.
    let mut beta = opts.beta_max;
    while probes.len() < opts.budget && beta > 1e-3 {
        beta /= 2.0;
        if probe(beta, &mut probes)?.holds() {
            break;
        }
    }

    loop {
        let lower = probes
            .iter()
            .filter(|(_, s)| s.holds())
            .map(|(b, _)| *b)
            .fold(None, |acc: Option<f64>, b| Some(acc.map_or(b, |a| a.max(b))));
        let upper = probes
            .iter()
            .filter(|(_, s)| *s == Status::Fails)
            .map(|(b, _)| *b)
            .fold(opts.beta_max, f64::min);
        let lo = lower.unwrap_or(0.0);
        if upper - lo <= opts.tol || probes.len() >= opts.budget || lower.is_none() {
            break;
        }
        // Next probe: midpoint of the widest gap between probed points
        // inside the bracket.
        let mut pts: Vec<f64> = probes
            .iter()
            .map(|(b, _)| *b)
            .filter(|b| *b > lo && *b < upper)
            .collect();
        pts.push(lo);
        pts.push(upper);
        pts.sort_by(f64::total_cmp);
        let (a, b) = pts
            .windows(2)
            .map(|w| (w[0], w[1]))
            .fold((lo, upper), |best, w| if w.1 - w.0 > best.1 - best.0 { w } else { best });
        if b - a <= opts.tol / 4.0 {
            break;
        }
        probe(0.5 * (a + b), &mut probes)?;
    }

    let lower = probes
        .iter()
        .filter(|(_, s)| s.holds())
        .map(|(b, _)| *b)
        .fold(None, |acc: Option<f64>, b| Some(acc.map_or(b, |a| a.max(b))));
    let upper = probes
        .iter()
        .filter(|(_, s)| *s == Status::Fails)
        .map(|(b, _)| *b)
        .fold(opts.beta_max, f64::min);
    let lo = lower.unwrap_or(0.0);
    let any_inconclusive = probes.iter().any(|(_, s)| *s == Status::Inconclusive);
    let agrees = lo - opts.tol <= cross.value() && cross.value() <= upper + opts.tol;
    Ok(IndexEstimate {
        index: IndexKind::Gamma,
        lower,
        upper: Bound::Finite(upper),
        estimate: Bound::Finite(0.5 * (lo + upper)),
        method: Method::GammaBisection,
        cross_check: CrossCheck {
            method: Method::GammaAlmostIncreasing,
            value: cross,
            agrees,
        },
        converged: upper - lo <= opts.tol && !any_inconclusive && agrees,
        samples: samples_of(&probes),
    })
}

fn samples_of(probes: &[(f64, Status)]) -> Vec<IndexSample> {
    probes
        .iter()
        .map(|(b, s)| IndexSample {
            beta: Some(*b),
            p: None,
            status: Some(*s),
            value: None,
        })
        .collect()
}

/// sup{μ : m_p / (p+1)^μ is almost increasing}, judged by comparing the
/// largest drop of log m_p - μ log(p+1) over the whole probed range with
/// the drop over its first (log-scale) half.
pub fn almost_increasing_index(seq: &WeightSequence, horizon: usize, mu_max: f64) -> Result<Bound> {
    let lm = seq.log_m_range(horizon)?;
    let mut pts: Vec<(f64, f64)> = lm
        .iter()
        .enumerate()
        .map(|(p, l)| ((p as f64).ln_1p(), *l))
        .collect();
    for p in seq.extended_probes(horizon) {
        if let Some(l) = seq.log_m_big(p) {
            pts.push((p.ln_succ(), l));
        }
    }
    let x_half = 0.5 * pts.last().map(|p| p.0).unwrap_or(0.0);
    const THETA: f64 = 0.05;

    let unbounded = |mu: f64| {
        let mut run_max = f64::NEG_INFINITY;
        let (mut drop_half, mut drop_all) = (0.0f64, 0.0f64);
        for &(x, l) in &pts {
            let f = l - mu * x;
            run_max = run_max.max(f);
            let d = f - run_max;
            drop_all = drop_all.min(d);
            if x <= x_half {
                drop_half = drop_half.min(d);
            }
        }
        drop_all < drop_half - THETA
    };

    if !unbounded(mu_max) {
        return Ok(Bound::Infinite);
    }
    let (mut lo, mut hi) = (0.0, mu_max);
    if unbounded(lo) {
        return Ok(Bound::Finite(0.0));
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if unbounded(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Bound::Finite(0.5 * (lo + hi)))
}

/// Options of [`omega_index`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmegaOptions {
    pub tol: f64,
    /// Largest μ probed by the series method.
    pub mu_max: f64,
}

impl Default for OmegaOptions {
    fn default() -> Self {
        OmegaOptions {
            tol: 0.05,
            mu_max: 64.0,
        }
    }
}

/// ω(M) = liminf log m_p / log p.
pub fn omega_index(seq: &WeightSequence, horizon: usize) -> Result<IndexEstimate> {
    omega_index_with(seq, horizon, &OmegaOptions::default())
}

pub fn omega_index_with(
    seq: &WeightSequence,
    horizon: usize,
    opts: &OmegaOptions,
) -> Result<IndexEstimate> {
    if horizon < 64 {
        return Err(Error::HorizonTooSmall {
            horizon,
            minimum: 64,
        });
    }
    let lm = seq.log_m_range(horizon)?;
    let start = (horizon as f64).sqrt().ceil() as usize;

    // Tail probes: dyadic indices from sqrt(horizon), the horizon itself and
    // any family-specific probes beyond it.
    let mut probes: Vec<(BigIndex, f64)> = (0..usize::BITS)
        .map(|k| 1usize << k)
        .filter(|&p| p >= start && p < horizon)
        .chain(std::iter::once(horizon))
        .map(|p| (BigIndex::Small(p as u64), lm[p]))
        .collect();
    for p in seq.extended_probes(horizon) {
        if let Some(l) = seq.log_m_big(p) {
            probes.push((p, l));
        }
    }
    let ratios: Vec<f64> = probes.iter().map(|(p, l)| l / p.ln()).collect();
    let samples: Vec<IndexSample> = probes
        .iter()
        .zip(&ratios)
        .map(|((p, _), r)| IndexSample {
            beta: None,
            p: Some(*p),
            status: None,
            value: Some(*r),
        })
        .collect();

    let increasing = ratios.windows(2).all(|w| w[1] >= w[0]);
    let first = ratios[0];
    let last = *ratios.last().unwrap();
    let primary = if increasing && last > 2.0 * first.max(0.0) && last > 0.0 {
        Bound::Infinite
    } else {
        Bound::Finite(ratios.iter().copied().fold(f64::INFINITY, f64::min))
    };

    let secondary = omega_series(seq, horizon, opts.mu_max)?;
    let agrees = match (primary, secondary) {
        (Bound::Infinite, Bound::Infinite) => true,
        (Bound::Finite(a), Bound::Finite(b)) => (a - b).abs() <= opts.tol,
        _ => false,
    };
    let (lower, upper) = match (primary, secondary) {
        (Bound::Finite(a), Bound::Finite(b)) => (Some(a.min(b)), Bound::Finite(a.max(b))),
        (Bound::Finite(a), Bound::Infinite) | (Bound::Infinite, Bound::Finite(a)) => {
            (Some(a), Bound::Infinite)
        }
        (Bound::Infinite, Bound::Infinite) => (Some(opts.mu_max), Bound::Infinite),
    };
    Ok(IndexEstimate {
        index: IndexKind::Omega,
        lower,
        upper,
        estimate: primary,
        method: Method::OmegaLiminf,
        cross_check: CrossCheck {
            method: Method::OmegaSeries,
            value: secondary,
            agrees,
        },
        converged: agrees,
        samples,
    })
}

/// sup{μ : sum_p m_p^{-1/μ} < ∞} through Cauchy condensation: the condensed
/// terms 2^k m_{2^k}^{-1/μ} have log k log 2 - log m_{2^k} / μ, and the series
/// diverges once that exponent stops falling linearly in k on the late tail.
fn omega_series(seq: &WeightSequence, horizon: usize, mu_max: f64) -> Result<Bound> {
    let lm = seq.log_m_range(horizon)?;
    let mut pts: Vec<(f64, f64)> = (0..usize::BITS)
        .map(|k| 1usize << k)
        .take_while(|&p| p <= horizon)
        .map(|p| ((p as f64).log2(), lm[p]))
        .collect();
    for p in seq.extended_probes(horizon) {
        if let Some(l) = seq.log_m_big(p) {
            let k = p.log2();
            if k.fract() == 0.0 {
                pts.push((k, l));
            }
        }
    }
    let k_max = pts.last().map(|p| p.0).unwrap_or(0.0);
    let split = k_max / 2.0 + (k_max / 2.0) * 2.0 / 3.0;
    let late: Vec<(f64, f64)> = pts.into_iter().filter(|p| p.0 >= split && p.0 > 0.0).collect();

    let divergent = |mu: f64| {
        late.iter()
            .map(|(k, l)| (k * std::f64::consts::LN_2 - l / mu) / k)
            .fold(f64::NEG_INFINITY, f64::max)
            >= -1e-9
    };

    if !divergent(mu_max) {
        return Ok(Bound::Infinite);
    }
    let (mut lo, mut hi) = (0.0f64, mu_max);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if divergent(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Bound::Finite(0.5 * (lo + hi)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn omega_gevrey() {
        for s in [1.0, 2.0, 3.0] {
            let e = omega_index(&WeightSequence::gevrey(s).unwrap(), 10_000).unwrap();
            assert!((e.estimate.value() - s).abs() < 0.02, "s = {s}: {e:?}");
            assert!(e.converged);
        }
    }

    #[test]
    fn omega_q_gevrey_infinite() {
        let e = omega_index(&WeightSequence::q_gevrey(2.0).unwrap(), 10_000).unwrap();
        assert!(e.estimate.is_infinite());
        assert!(e.converged);
    }

    #[test]
    fn gamma_gevrey_two() {
        let e = gamma_index(&WeightSequence::gevrey(2.0).unwrap(), 10_000, 64.0, 0.05).unwrap();
        assert!(e.contains(2.0, 0.0), "{e:?}");
        assert!(e.width() <= 0.05);
        assert!(e.converged, "{e:?}");
    }

    #[test]
    fn bound_serialization() {
        assert_eq!(serde_json::to_string(&Bound::Infinite).unwrap(), "\"+inf\"");
        assert_eq!(serde_json::to_string(&Bound::Finite(1.5)).unwrap(), "1.5");
    }
}
