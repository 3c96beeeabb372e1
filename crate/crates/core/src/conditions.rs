//! Horizon-bounded checks of the growth conditions (lc), (wlc), (dc), (mg),
//! (nq), (snq) and of the (γ_β) summability condition.
//!
//! Every check returns a three-valued [`Verdict`]; exact answers are only
//! claimed when the sequence carries analytic metadata for the property.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logmath::{log_add_exp, log_sub_exp, ls_slope};
use crate::sequence::{derive, BigIndex, DeriveOp, Property, WeightSequence};

/// Slack in the slope comparison that decides series divergence.
pub const SLOPE_EPS: f64 = 1e-9;
/// Two half-quartile slope fits further apart than this, straddling the
/// divergence threshold, make a series classification inconclusive.
const SLOPE_SPREAD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Lc,
    Wlc,
    Dc,
    Mg,
    Nq,
    Snq,
}

impl Condition {
    pub const ALL: [Condition; 6] = [
        Condition::Lc,
        Condition::Wlc,
        Condition::Dc,
        Condition::Mg,
        Condition::Nq,
        Condition::Snq,
    ];

    pub fn property(self) -> Property {
        match self {
            Condition::Lc => Property::Lc,
            Condition::Wlc => Property::Wlc,
            Condition::Dc => Property::Dc,
            Condition::Mg => Property::Mg,
            Condition::Nq => Property::Nq,
            Condition::Snq => Property::Snq,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Condition::Lc => "lc",
            Condition::Wlc => "wlc",
            Condition::Dc => "dc",
            Condition::Mg => "mg",
            Condition::Nq => "nq",
            Condition::Snq => "snq",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    /// Declared analytically by the sequence constructor.
    ExactHolds,
    HoldsAtHorizon,
    Fails,
    Inconclusive,
    /// The criterion was evaluated but a hypothesis of the theorem did not
    /// verify.
    Conditional,
    /// The statement holds trivially because the underlying space is {0}.
    Vacuous,
}

impl Status {
    pub fn holds(self) -> bool {
        matches!(self, Status::ExactHolds | Status::HoldsAtHorizon)
    }

    pub fn name(self) -> &'static str {
        match self {
            Status::ExactHolds => "exact_holds",
            Status::HoldsAtHorizon => "holds_at_horizon",
            Status::Fails => "fails",
            Status::Inconclusive => "inconclusive",
            Status::Conditional => "conditional",
            Status::Vacuous => "vacuous",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Index (or index pair) at which a defining inequality is violated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Witness {
    Index(BigIndex),
    Pair([u64; 2]),
}

/// Whether a surjectivity verdict is an equivalence or only a necessary
/// condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Equivalence,
    NecessityOnly,
    /// Surjectivity of the asymptotic Borel map is known for this family,
    /// which settles the question without (mg).
    BorelSurjectiveKnown,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TracePoint {
    pub p: BigIndex,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub condition: Option<String>,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    pub constants: BTreeMap<String, f64>,
    pub horizon: usize,
    /// Outcome of the numeric criterion before hypotheses or metadata were
    /// taken into account.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub criterion: Option<Status>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub direction: Option<Direction>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub citations: Vec<String>,
    pub diagnostics: Vec<TracePoint>,
}

impl Verdict {
    pub fn new(condition: impl Into<Option<String>>, status: Status, horizon: usize) -> Self {
        Verdict {
            condition: condition.into(),
            status,
            witness: None,
            constants: BTreeMap::new(),
            horizon,
            criterion: None,
            direction: None,
            notes: Vec::new(),
            citations: Vec::new(),
            diagnostics: Vec::new(),
        }
    }

    pub fn constant(&self, name: &str) -> Option<f64> {
        self.constants.get(name).copied()
    }
}

/// Decision thresholds shared by the checkers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckOptions {
    /// A sup "stabilizes" when the late part of the range raises it by at
    /// most this relative amount.
    pub stabilization: f64,
    /// A quantity shows sustained growth when it rises by more than this
    /// factor over the last quartile.
    pub growth: f64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            stabilization: 0.01,
            growth: 2.0,
        }
    }
}

fn require_horizon(horizon: usize, minimum: usize) -> Result<()> {
    if horizon < minimum {
        Err(Error::HorizonTooSmall { horizon, minimum })
    } else {
        Ok(())
    }
}

/// Check one growth condition up to `horizon` with default thresholds.
pub fn check_condition(seq: &WeightSequence, cond: Condition, horizon: usize) -> Result<Verdict> {
    check_condition_with(seq, cond, horizon, &CheckOptions::default())
}

pub fn check_condition_with(
    seq: &WeightSequence,
    cond: Condition,
    horizon: usize,
    opts: &CheckOptions,
) -> Result<Verdict> {
    require_horizon(horizon, 8)?;
    let mut v = match cond {
        Condition::Lc => check_quotients(seq, horizon, false)?,
        Condition::Wlc => check_quotients(seq, horizon, true)?,
        Condition::Dc => check_dc(seq, horizon, opts)?,
        Condition::Mg => check_mg(seq, horizon, opts)?,
        Condition::Nq => check_nq(seq, horizon)?,
        Condition::Snq => {
            let hat = derive(seq, DeriveOp::Hat)?;
            gamma_core(&hat, 1.0, horizon, opts)?
        }
    };
    v.condition = Some(cond.name().to_string());
    v.criterion = Some(v.status);
    match seq.declared(cond.property()) {
        Some(true) => {
            if !v.status.holds() {
                v.notes.push(format!("numeric check reported {}", v.status));
            }
            v.status = Status::ExactHolds;
            v.witness = None;
        }
        Some(false) => {
            if v.status != Status::Fails {
                v.notes.push(format!(
                    "property fails analytically; numeric check reported {}",
                    v.status
                ));
            }
            v.status = Status::Fails;
        }
        None => {}
    }
    Ok(v)
}

/// (lc): m_{p-1} <= m_p; (wlc): p m_{p-1} <= (p+1) m_p.
fn check_quotients(seq: &WeightSequence, horizon: usize, weak: bool) -> Result<Verdict> {
    let lm = seq.log_m_range(horizon)?;
    for p in 1..horizon {
        let (a, b) = if weak {
            (lm[p - 1] + (p as f64).ln(), lm[p] + (p as f64).ln_1p())
        } else {
            (lm[p - 1], lm[p])
        };
        if a > b + 1e-12 * b.abs().max(1.0) {
            let mut v = Verdict::new(None, Status::Fails, horizon);
            v.witness = Some(Witness::Index(BigIndex::Small(p as u64)));
            v.constants.insert("log_excess".into(), a - b);
            return Ok(v);
        }
    }
    Ok(Verdict::new(None, Status::HoldsAtHorizon, horizon))
}

fn stabilized(sup_all: f64, sup_early: f64, opts: &CheckOptions) -> bool {
    sup_all - sup_early <= (1.0 + opts.stabilization).ln()
}

/// (dc) with C_0 = 1 and the smallest H = exp(sup log m_p / (p+1)).
fn check_dc(seq: &WeightSequence, horizon: usize, opts: &CheckOptions) -> Result<Verdict> {
    let lm = seq.log_m_range(horizon)?;
    let ratio = |p: usize| lm[p] / (p as f64 + 1.0);
    let early_end = 3 * horizon / 4;
    let sup_early = (0..=early_end).map(ratio).fold(0.0f64, f64::max);
    let sup_all = (0..=horizon).map(ratio).fold(0.0f64, f64::max);
    let status = if stabilized(sup_all, sup_early, opts) {
        Status::HoldsAtHorizon
    } else {
        Status::Inconclusive
    };
    let mut v = Verdict::new(None, status, horizon);
    v.constants.insert("C0".into(), 1.0);
    v.constants.insert("H".into(), sup_all.exp());
    v.diagnostics = dyadic(horizon)
        .map(|p| TracePoint {
            p: BigIndex::Small(p as u64),
            value: ratio(p),
        })
        .collect();
    Ok(v)
}

fn dyadic(n: usize) -> impl Iterator<Item = usize> {
    (0..usize::BITS)
        .map(|k| 1usize << k)
        .take_while(move |&p| p < n)
        .chain(std::iter::once(n))
}

/// (mg): the excess D(n) = max_{p+q=n} log M_n - log M_p - log M_q must stay
/// below log C_0 + n log H.
fn check_mg(seq: &WeightSequence, horizon: usize, opts: &CheckOptions) -> Result<Verdict> {
    let big = seq.log_big_m_range(horizon)?;
    let lc_known = seq.declared(Property::Lc) == Some(true)
        || check_quotients(seq, horizon, false)?.status.holds();

    // (n, D(n), split p) for sampled totals n.
    let totals: Vec<usize> = if lc_known {
        (2..=horizon).collect()
    } else {
        let mut t: Vec<usize> = (2..=horizon.min(512)).collect();
        if horizon > 512 {
            let step = ((horizon - 512) / 512).max(1);
            t.extend((512 + step..=horizon).step_by(step));
            if *t.last().unwrap() != horizon {
                t.push(horizon);
            }
        }
        t
    };
    let excess = |n: usize, p: usize| big[n] - big[p] - big[n - p];
    let rows: Vec<(usize, f64, usize)> = totals
        .iter()
        .map(|&n| {
            if lc_known {
                let p = n / 2;
                (n, excess(n, p), p)
            } else {
                let (p, d) = (0..=n / 2)
                    .map(|p| (p, excess(n, p)))
                    .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
                (n, d, p)
            }
        })
        .collect();
    let g = |row: &(usize, f64, usize)| row.1 / row.0 as f64;
    let at = |n: usize| {
        let i = rows.partition_point(|r| r.0 < n).min(rows.len() - 1);
        g(&rows[i])
    };
    let g_last = g(rows.last().unwrap());
    let g_quarter = at(horizon / 4);

    let mut v = Verdict::new(None, Status::Inconclusive, horizon);
    v.diagnostics = rows
        .iter()
        .filter(|r| r.0.is_power_of_two() || r.0 == horizon)
        .map(|r| TracePoint {
            p: BigIndex::Small(r.0 as u64),
            value: r.1,
        })
        .collect();

    if g_last > opts.growth * g_quarter.max(0.0) + 1e-9 {
        // Fit constants on the first half and report the first violation.
        let log_h = rows
            .iter()
            .filter(|r| r.0 <= horizon / 2)
            .map(g)
            .fold(0.0f64, f64::max);
        let witness = rows
            .iter()
            .find(|r| r.1 > r.0 as f64 * log_h + 1e-9 * r.1.abs().max(1.0));
        if let Some(&(n, _, p)) = witness {
            v.status = Status::Fails;
            v.witness = Some(Witness::Pair([p as u64, (n - p) as u64]));
            v.constants.insert("C0".into(), 1.0);
            v.constants.insert("H".into(), log_h.exp());
        }
        return Ok(v);
    }
    let sup_all = rows.iter().map(g).fold(0.0f64, f64::max);
    let sup_early = rows
        .iter()
        .filter(|r| r.0 <= 3 * horizon / 4)
        .map(g)
        .fold(0.0f64, f64::max);
    if stabilized(sup_all, sup_early, opts) {
        v.status = Status::HoldsAtHorizon;
        v.constants.insert("C0".into(), 1.0);
        v.constants.insert("H".into(), sup_all.exp());
    }
    Ok(v)
}

fn check_nq(seq: &WeightSequence, horizon: usize) -> Result<Verdict> {
    let fit = classify_series(seq, 1.0, 1.0, horizon)?;
    let status = match fit.behavior {
        SeriesBehavior::Convergent => Status::HoldsAtHorizon,
        SeriesBehavior::Divergent => Status::Fails,
        SeriesBehavior::Unknown => Status::Inconclusive,
    };
    Ok(fit.into_verdict(status, horizon))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesBehavior {
    Convergent,
    Divergent,
    Unknown,
}

/// Classification of sum_p ((p+1)^a m_p)^(-1/β) by partial sums and a tail
/// exponent fitted over the last quartile.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesFit {
    pub behavior: SeriesBehavior,
    /// Fitted slope c of log m_p against log(p+1).
    pub slope: f64,
    pub half_slopes: [f64; 2],
    /// Divergence threshold for `slope`: β - a.
    pub threshold: f64,
    pub log_partial_sum: f64,
    pub log_tail: Option<f64>,
    pub degenerate: bool,
    pub trace: Vec<TracePoint>,
}

impl SeriesFit {
    pub(crate) fn into_verdict(self, status: Status, horizon: usize) -> Verdict {
        let mut v = Verdict::new(None, status, horizon);
        v.constants.insert("tail_slope".into(), self.slope);
        v.constants.insert("threshold".into(), self.threshold);
        v.constants.insert("log_partial_sum".into(), self.log_partial_sum);
        if let Some(t) = self.log_tail {
            v.constants.insert("log_tail_estimate".into(), t);
        }
        if self.degenerate {
            v.notes.push(
                "m_p does not appear to tend to infinity; the input may not be a weight sequence"
                    .into(),
            );
        }
        v.diagnostics = self.trace;
        v
    }
}

pub fn classify_series(
    seq: &WeightSequence,
    a: f64,
    beta: f64,
    horizon: usize,
) -> Result<SeriesFit> {
    let lm = seq.log_m_range(horizon)?;
    let start = 3 * horizon / 4;
    let xs: Vec<f64> = (start..=horizon).map(|p| (p as f64).ln_1p()).collect();
    let ys = &lm[start..=horizon];
    let slope = ls_slope(&xs, ys);
    let mid = xs.len() / 2;
    let half_slopes = [
        ls_slope(&xs[..=mid], &ys[..=mid]),
        ls_slope(&xs[mid..], &ys[mid..]),
    ];
    let threshold = beta - a;
    let divergent = |c: f64| c <= threshold + SLOPE_EPS;
    let unstable = divergent(half_slopes[0]) != divergent(half_slopes[1])
        && (half_slopes[0] - half_slopes[1]).abs() > SLOPE_SPREAD;

    let log_term = |p: usize| -(a * (p as f64).ln_1p() + lm[p]) / beta;
    let mut acc = f64::NEG_INFINITY;
    let mut trace = Vec::new();
    let mut next = 1usize;
    for p in 0..=horizon {
        acc = log_add_exp(acc, log_term(p));
        if p + 1 == next || p == horizon {
            trace.push(TracePoint {
                p: BigIndex::Small(p as u64),
                value: acc,
            });
            next *= 2;
        }
    }
    let behavior = if unstable {
        SeriesBehavior::Unknown
    } else if divergent(slope) {
        SeriesBehavior::Divergent
    } else {
        SeriesBehavior::Convergent
    };
    let log_tail = (behavior == SeriesBehavior::Convergent).then(|| {
        let e = (a + slope) / beta;
        log_term(horizon) + (horizon as f64).ln() - (e - 1.0).ln()
    });
    let degenerate = slope.abs() < 1e-6 && (lm[horizon] - lm[horizon / 2]).abs() < 1e-6;
    Ok(SeriesFit {
        behavior,
        slope,
        half_slopes,
        threshold,
        log_partial_sum: acc,
        log_tail,
        degenerate,
        trace,
    })
}

/// Check (γ_β): sum_{q>=p} m_q^{-1/β} <= C (p+1) m_p^{-1/β}.
pub fn check_gamma_beta(seq: &WeightSequence, beta: f64, horizon: usize) -> Result<Verdict> {
    check_gamma_beta_with(seq, beta, horizon, &CheckOptions::default())
}

pub fn check_gamma_beta_with(
    seq: &WeightSequence,
    beta: f64,
    horizon: usize,
    opts: &CheckOptions,
) -> Result<Verdict> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::validation("beta", format!("must be > 0, got {beta}")));
    }
    require_horizon(horizon, 64)?;
    let mut v = gamma_core(seq, beta, horizon, opts)?;
    v.condition = Some(format!("gamma_{beta}"));
    Ok(v)
}

/// log of sum_{q in (a, b]} t_q when log t_q is linear in log q between the
/// endpoints (trapezoid-corrected integral).
fn log_segment_sum(a: BigIndex, ta: f64, b: BigIndex, tb: f64) -> (f64, f64) {
    let (la, lb) = (a.ln(), b.ln());
    let delta = lb - la;
    let e = -(tb - ta) / delta;
    let k = 1.0 - e;
    let log_factor = if (k * delta).abs() < 1e-10 {
        delta.ln()
    } else if k > 0.0 {
        k * delta + (-(-k * delta).exp_m1()).ln() - k.ln()
    } else {
        (-(k * delta).exp_m1()).ln() - (-k).ln()
    };
    let integral = ta + la + log_factor;
    let corrected = log_sub_exp(log_add_exp(integral, tb - std::f64::consts::LN_2), ta - std::f64::consts::LN_2);
    let sum = if corrected.is_finite() { corrected } else { integral };
    (sum, e)
}

struct RPoint {
    p: BigIndex,
    x: f64,
    log_r: f64,
}

/// Ratio R(p) = m_p^{1/β} sum_{q>=p} m_q^{-1/β} / (p+1) in log form, with
/// the decision rule on log-scale quartiles.
pub(crate) fn gamma_core(
    seq: &WeightSequence,
    beta: f64,
    horizon: usize,
    opts: &CheckOptions,
) -> Result<Verdict> {
    let n = horizon;
    let fit = classify_series(seq, 0.0, beta, n)?;
    let lm = seq.log_m_range(n)?;
    let t = |q: usize| -lm[q] / beta;

    // Sum of the terms beyond the horizon and R at the extended probes.
    let probes = seq.extended_probes(n);
    let mut ext_points: Vec<RPoint> = Vec::new();
    let tail_after_n = if probes.is_empty() {
        let e = fit.slope / beta;
        if e > 1.0 {
            t(n) + (n as f64).ln() - (e - 1.0).ln()
        } else {
            f64::INFINITY
        }
    } else {
        let mut pts: Vec<(BigIndex, f64)> = vec![(BigIndex::Small(n as u64), lm[n])];
        for p in probes {
            match seq.log_m_big(p) {
                Some(l) => pts.push((p, l)),
                None => break,
            }
        }
        let mut seg = Vec::with_capacity(pts.len());
        let mut last_e = fit.slope / beta;
        for w in pts.windows(2) {
            let (s, e) = log_segment_sum(w[0].0, -w[0].1 / beta, w[1].0, -w[1].1 / beta);
            seg.push(s);
            last_e = e;
        }
        let (pl, ll) = *pts.last().unwrap();
        let mut suffix = if last_e > 1.0 {
            -ll / beta + pl.ln() - (last_e - 1.0).ln()
        } else {
            f64::INFINITY
        };
        // suffix after point i = sum over q > P_i.
        let mut after = vec![0.0; pts.len()];
        for i in (0..pts.len()).rev() {
            after[i] = suffix;
            if i > 0 {
                suffix = log_add_exp(seg[i - 1], suffix);
            }
        }
        for i in 1..pts.len() - 1 {
            let (p, l) = pts[i];
            let s = log_add_exp(-l / beta, after[i]);
            ext_points.push(RPoint {
                p,
                x: p.ln_succ(),
                log_r: l / beta + s - p.ln_succ(),
            });
        }
        after[0]
    };

    let mut points: Vec<RPoint> = Vec::with_capacity(n / 2 + 1 + ext_points.len());
    let mut suffix = tail_after_n;
    let mut direct = vec![0.0; n + 1];
    for q in (0..=n).rev() {
        suffix = log_add_exp(t(q), suffix);
        direct[q] = suffix;
    }
    for (p, s) in direct.iter().enumerate().take(n / 2 + 1) {
        let x = (p as f64).ln_1p();
        points.push(RPoint {
            p: BigIndex::Small(p as u64),
            x,
            log_r: lm[p] / beta + s - x,
        });
    }
    points.extend(ext_points);

    let x_max = points.last().map(|r| r.x).unwrap_or(0.0);
    let cut = 0.75 * x_max;
    let sup = |f: &dyn Fn(&RPoint) -> bool| {
        points
            .iter()
            .filter(|r| f(r))
            .map(|r| r.log_r)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let sup_early = sup(&|r| r.x <= cut);
    let sup_late = sup(&|r| r.x > cut);
    let sup_all = sup_early.max(sup_late);
    let late_argmax = points
        .iter()
        .filter(|r| r.x > cut)
        .fold(None::<&RPoint>, |best, r| match best {
            Some(b) if b.log_r >= r.log_r => Some(b),
            _ => Some(r),
        })
        .map(|r| r.p);

    let growth = sup_late - sup_early > opts.growth.ln() || !sup_all.is_finite();
    let status = if fit.behavior == SeriesBehavior::Divergent || growth {
        Status::Fails
    } else if fit.behavior == SeriesBehavior::Unknown {
        Status::Inconclusive
    } else if stabilized(sup_all, sup_early, opts) {
        Status::HoldsAtHorizon
    } else {
        Status::Inconclusive
    };

    let mut v = Verdict::new(None, status, horizon);
    v.constants.insert("tail_slope".into(), fit.slope);
    if status == Status::Fails {
        v.witness = late_argmax.map(Witness::Index);
        if fit.behavior == SeriesBehavior::Divergent {
            v.notes
                .push(format!("sum of m_q^(-1/{beta}) diverges (tail slope {:.4})", fit.slope));
        }
    }
    if sup_all.is_finite() {
        v.constants.insert("log_C".into(), sup_all);
        v.constants.insert("C".into(), sup_all.exp());
    }
    v.diagnostics = points
        .iter()
        .filter(|r| match r.p.as_u64() {
            Some(p) => p.is_power_of_two() || p == 0 || r.p > BigIndex::Small(n as u64),
            None => true,
        })
        .map(|r| TracePoint {
            p: r.p,
            value: r.log_r,
        })
        .collect();
    Ok(v)
}
