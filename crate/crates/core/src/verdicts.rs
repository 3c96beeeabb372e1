//! Injectivity and surjectivity verdicts for the Stieltjes moment mapping
//! M: C_M[0,∞) → Λ_M and the origin moment mapping M⁰: D^M(0,1) → Λ_M̌.
//!
//! Injectivity is decided by the divergence of sum_p ((p+1) m_p)^{-1/2},
//! surjectivity by the (γ_1) condition. The hypotheses of each criterion are
//! checked separately and a verdict whose hypotheses do not verify is
//! reported as [`Status::Conditional`].

use std::collections::BTreeMap;

use serde::Serialize;

use crate::conditions::{
    check_condition_with, classify_series, gamma_core, CheckOptions, Condition, Direction,
    SeriesBehavior, Status, Verdict,
};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::indices::{gamma_index_with, omega_index_with, GammaOptions, IndexEstimate, OmegaOptions};
use crate::sequence::{Property, SequenceSpec, WeightSequence};

pub const SCHEMA_VERSION: u32 = 1;

pub const CITE_INJECTIVITY: &str = "injectivity-series-criterion";
pub const CITE_SURJECTIVITY: &str = "surjectivity-gamma-criterion";
pub const CITE_NEVER_BIJECTIVE: &str = "never-bijective";
pub const CITE_ORIGIN_INJECTIVITY: &str = "origin-injectivity-series-criterion";
pub const CITE_ORIGIN_SURJECTIVITY: &str = "origin-surjectivity-gamma-criterion";
pub const CITE_ORIGIN_NEVER_BIJECTIVE: &str = "origin-never-bijective";
pub const CITE_TRIVIAL_SPACE: &str = "trivial-space-degenerate-case";
pub const CITE_BOREL_KNOWN: &str = "known-borel-surjectivity";
pub const CITE_MG_EQUIVALENCE: &str = "mg-equivalence-clause";

/// Auxiliary sequence used for hypothesis bookkeeping when none is given.
pub fn default_aux() -> SequenceSpec {
    SequenceSpec::gevrey(2.0)
}

/// Settings shared by the verdict functions and [`classify`].
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisOptions {
    pub horizon: usize,
    pub checks: CheckOptions,
    pub beta_max: f64,
    pub tol: f64,
    /// Auxiliary sequence A; [`default_aux`] when `None`.
    pub aux: Option<SequenceSpec>,
    pub exec: Exec,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            horizon: 10_000,
            checks: CheckOptions::default(),
            beta_max: 64.0,
            tol: 0.05,
            aux: None,
            exec: Exec::default(),
        }
    }
}

impl AnalysisOptions {
    fn with_horizon(horizon: usize) -> Self {
        AnalysisOptions {
            horizon,
            ..AnalysisOptions::default()
        }
    }

    fn gamma(&self) -> GammaOptions {
        GammaOptions {
            beta_max: self.beta_max,
            tol: self.tol,
            checks: self.checks,
            ..GammaOptions::default()
        }
    }

    fn omega(&self) -> OmegaOptions {
        OmegaOptions {
            tol: self.tol,
            ..OmegaOptions::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.horizon < 64 {
            return Err(Error::HorizonTooSmall {
                horizon: self.horizon,
                minimum: 64,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Indices {
    pub gamma: IndexEstimate,
    pub omega: IndexEstimate,
}

/// Verdicts for one weight sequence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentMapReport {
    pub schema: u32,
    pub sequence: SequenceSpec,
    pub label: String,
    pub horizon: usize,
    pub aux: SequenceSpec,
    /// Keys: `lc`, `dc`, `mg`, `nq` for M and `aux.wlc`, `aux.nq` for A.
    pub hypotheses: BTreeMap<String, Verdict>,
    pub injective: Verdict,
    pub surjective: Verdict,
    pub origin_injective: Verdict,
    pub origin_surjective: Verdict,
    pub indices: Indices,
    pub citations: Vec<String>,
}

type Hypotheses = BTreeMap<String, Verdict>;

#[derive(Clone, Copy)]
enum Task {
    Main(Condition),
    Aux(Condition),
}

impl Task {
    fn key(self) -> String {
        match self {
            Task::Main(c) => c.name().to_string(),
            Task::Aux(c) => format!("aux.{}", c.name()),
        }
    }
}

fn hypotheses(
    seq: &WeightSequence,
    aux: &WeightSequence,
    tasks: &[Task],
    opts: &AnalysisOptions,
) -> Result<Hypotheses> {
    opts.exec
        .map(tasks, |t| {
            let v = match *t {
                Task::Main(c) => check_condition_with(seq, c, opts.horizon, &opts.checks),
                Task::Aux(c) => check_condition_with(aux, c, opts.horizon, &opts.checks),
            };
            v.map(|v| (t.key(), v))
        })
        .into_iter()
        .collect()
}

fn aux_sequence(opts: &AnalysisOptions) -> Result<WeightSequence> {
    WeightSequence::new(&opts.aux.clone().unwrap_or_else(default_aux))
}

/// Fold the hypothesis verdicts named in `keys` into a criterion outcome:
/// any hypothesis that does not hold turns the verdict conditional.
fn apply_hypotheses(v: &mut Verdict, hyps: &Hypotheses, keys: &[&str]) {
    let unmet: Vec<String> = keys
        .iter()
        .filter_map(|k| {
            let h = hyps.get(*k)?;
            (!h.status.holds()).then(|| format!("hypothesis {k} is {}", h.status))
        })
        .collect();
    if !unmet.is_empty() && matches!(v.status, Status::HoldsAtHorizon | Status::ExactHolds | Status::Fails) {
        v.status = Status::Conditional;
    }
    v.notes.extend(unmet);
}

fn injective_from(fit_verdict: Verdict, behavior: SeriesBehavior, hyps: &Hypotheses, cite: &str) -> Verdict {
    let mut v = fit_verdict;
    let criterion = match behavior {
        SeriesBehavior::Divergent => Status::HoldsAtHorizon,
        SeriesBehavior::Convergent => Status::Fails,
        SeriesBehavior::Unknown => Status::Inconclusive,
    };
    v.condition = Some("sum ((p+1) m_p)^(-1/2) = inf".into());
    v.status = criterion;
    v.criterion = Some(criterion);
    v.citations.push(cite.into());
    apply_hypotheses(&mut v, hyps, &["lc", "dc", "aux.wlc", "aux.nq"]);
    v
}

fn surjective_from(
    seq: &WeightSequence,
    gamma1: Verdict,
    gamma: Option<&IndexEstimate>,
    hyps: &Hypotheses,
    cite: &str,
) -> Verdict {
    let mut v = gamma1;
    let criterion = v.status;
    v.condition = Some("gamma_1".into());
    v.criterion = Some(criterion);
    v.citations.push(cite.into());
    if let Some(g) = gamma {
        if let Some(lo) = g.lower {
            v.constants.insert("gamma_lower".into(), lo);
        }
        v.constants.insert("gamma_upper".into(), g.upper.value());
        let by_index = if g.lower.is_some_and(|lo| lo > 1.0) {
            Some(true)
        } else if g.upper.value() <= 1.0 {
            Some(false)
        } else {
            None
        };
        if let Some(b) = by_index {
            if criterion != Status::Inconclusive && b != criterion.holds() {
                v.notes.push(format!(
                    "gamma bracket [{:?}, {}] disagrees with the direct criterion",
                    g.lower,
                    g.upper.value()
                ));
            }
        }
    }

    let mg = hyps.get("mg").is_some_and(|h| h.status.holds());
    let direction = if mg {
        v.citations.push(CITE_MG_EQUIVALENCE.into());
        Direction::Equivalence
    } else if seq.declared(Property::BorelSurjective) == Some(true) {
        v.citations.push(CITE_BOREL_KNOWN.into());
        Direction::BorelSurjectiveKnown
    } else {
        Direction::NecessityOnly
    };
    v.direction = Some(direction);
    if direction == Direction::NecessityOnly && criterion.holds() {
        v.status = Status::Inconclusive;
        v.notes.push(
            "without (mg) the criterion is only known to be necessary; it holds, but surjectivity is not decided"
                .into(),
        );
    }
    apply_hypotheses(&mut v, hyps, &["lc", "dc", "aux.wlc", "aux.nq"]);
    v
}

fn injectivity_with(seq: &WeightSequence, hyps: &Hypotheses, opts: &AnalysisOptions, cite: &str) -> Result<Verdict> {
    let fit = classify_series(seq, 1.0, 2.0, opts.horizon)?;
    let behavior = fit.behavior;
    Ok(injective_from(fit.into_verdict(Status::Inconclusive, opts.horizon), behavior, hyps, cite))
}

/// Injectivity of M: C_M[0,∞) → Λ_M.
pub fn injectivity_verdict(seq: &WeightSequence, horizon: usize) -> Result<Verdict> {
    injectivity_verdict_with(seq, &AnalysisOptions::with_horizon(horizon))
}

pub fn injectivity_verdict_with(seq: &WeightSequence, opts: &AnalysisOptions) -> Result<Verdict> {
    opts.validate()?;
    let aux = aux_sequence(opts)?;
    let tasks = [
        Task::Main(Condition::Lc),
        Task::Main(Condition::Dc),
        Task::Aux(Condition::Wlc),
        Task::Aux(Condition::Nq),
    ];
    let hyps = hypotheses(seq, &aux, &tasks, opts)?;
    injectivity_with(seq, &hyps, opts, CITE_INJECTIVITY)
}

/// Surjectivity of M: C_M[0,∞) → Λ_M.
pub fn surjectivity_verdict(seq: &WeightSequence, horizon: usize) -> Result<Verdict> {
    surjectivity_verdict_with(seq, &AnalysisOptions::with_horizon(horizon))
}

pub fn surjectivity_verdict_with(seq: &WeightSequence, opts: &AnalysisOptions) -> Result<Verdict> {
    opts.validate()?;
    let aux = aux_sequence(opts)?;
    let tasks = [
        Task::Main(Condition::Lc),
        Task::Main(Condition::Dc),
        Task::Main(Condition::Mg),
        Task::Aux(Condition::Wlc),
        Task::Aux(Condition::Nq),
    ];
    let (hyps, (g1, gamma)) = opts.exec.join(
        || hypotheses(seq, &aux, &tasks, opts),
        || {
            opts.exec.join(
                || gamma_core(seq, 1.0, opts.horizon, &opts.checks),
                || gamma_index_with(seq, opts.horizon, &opts.gamma()),
            )
        },
    );
    Ok(surjective_from(seq, g1?, Some(&gamma?), &hyps?, CITE_SURJECTIVITY))
}

fn origin_from(
    hyps: &Hypotheses,
    injective: Verdict,
    surjective: Verdict,
) -> (Verdict, Verdict) {
    let nq_fails = hyps.get("nq").is_some_and(|h| h.status == Status::Fails);
    let relabel = |mut v: Verdict, from: &str, to: &str| {
        for c in v.citations.iter_mut() {
            if c == from {
                *c = to.to_string();
            }
        }
        v
    };
    let mut inj = relabel(injective, CITE_INJECTIVITY, CITE_ORIGIN_INJECTIVITY);
    let mut surj = relabel(surjective, CITE_SURJECTIVITY, CITE_ORIGIN_SURJECTIVITY);
    if nq_fails {
        for v in [&mut inj, &mut surj] {
            v.status = Status::Vacuous;
            v.citations.push(CITE_TRIVIAL_SPACE.into());
            v.notes
                .push("(nq) fails, so D^M(0,1) = {0} and the statement holds vacuously".into());
        }
    } else {
        let nq_ok = hyps.get("nq").is_some_and(|h| h.status.holds());
        if !nq_ok && inj.status != Status::Inconclusive {
            inj.status = Status::Conditional;
            inj.notes.push("hypothesis nq is inconclusive".into());
        }
    }
    (inj, surj)
}

/// Injectivity and surjectivity of M⁰: D^M(0,1) → Λ_M̌.
pub fn origin_verdicts(seq: &WeightSequence, horizon: usize) -> Result<(Verdict, Verdict)> {
    origin_verdicts_with(seq, &AnalysisOptions::with_horizon(horizon))
}

pub fn origin_verdicts_with(seq: &WeightSequence, opts: &AnalysisOptions) -> Result<(Verdict, Verdict)> {
    opts.validate()?;
    let aux = aux_sequence(opts)?;
    let tasks = [
        Task::Main(Condition::Lc),
        Task::Main(Condition::Dc),
        Task::Main(Condition::Mg),
        Task::Main(Condition::Nq),
        Task::Aux(Condition::Wlc),
        Task::Aux(Condition::Nq),
    ];
    let hyps = hypotheses(seq, &aux, &tasks, opts)?;
    let (inj, g1) = opts.exec.join(
        || injectivity_with(seq, &hyps, opts, CITE_INJECTIVITY),
        || gamma_core(seq, 1.0, opts.horizon, &opts.checks),
    );
    let surj = surjective_from(seq, g1?, None, &hyps, CITE_SURJECTIVITY);
    let pair = origin_from(&hyps, inj?, surj);
    never_bijective(&pair.0, &pair.1, "origin moment mapping")?;
    Ok(pair)
}

fn never_bijective(inj: &Verdict, surj: &Verdict, what: &str) -> Result<()> {
    if inj.status.holds() && surj.status.holds() {
        let trace = serde_json::json!({ "injective": inj, "surjective": surj });
        return Err(Error::Inconsistent(format!(
            "{what} reported both injective and surjective: {trace}"
        )));
    }
    Ok(())
}

/// Run every condition check, both index estimators and all four verdicts.
pub fn classify(spec: &SequenceSpec, horizon: usize) -> Result<MomentMapReport> {
    classify_with(spec, &AnalysisOptions::with_horizon(horizon))
}

pub fn classify_with(spec: &SequenceSpec, opts: &AnalysisOptions) -> Result<MomentMapReport> {
    opts.validate()?;
    let seq = WeightSequence::new(spec)?;
    let aux_spec = opts.aux.clone().unwrap_or_else(default_aux);
    let aux = WeightSequence::new(&aux_spec)?;
    let tasks = [
        Task::Main(Condition::Lc),
        Task::Main(Condition::Dc),
        Task::Main(Condition::Mg),
        Task::Main(Condition::Nq),
        Task::Aux(Condition::Wlc),
        Task::Aux(Condition::Nq),
    ];
    let exec = opts.exec;
    let ((hyps, (fit, g1)), (gamma, omega)) = exec.join(
        || {
            exec.join(
                || hypotheses(&seq, &aux, &tasks, opts),
                || {
                    exec.join(
                        || classify_series(&seq, 1.0, 2.0, opts.horizon),
                        || gamma_core(&seq, 1.0, opts.horizon, &opts.checks),
                    )
                },
            )
        },
        || {
            exec.join(
                || gamma_index_with(&seq, opts.horizon, &opts.gamma()),
                || omega_index_with(&seq, opts.horizon, &opts.omega()),
            )
        },
    );
    let hyps = hyps?;
    let (gamma, omega) = (gamma?, omega?);
    let fit = fit?;
    let g1 = g1?;

    let behavior = fit.behavior;
    let injective = injective_from(
        fit.into_verdict(Status::Inconclusive, opts.horizon),
        behavior,
        &hyps,
        CITE_INJECTIVITY,
    );
    let surjective = surjective_from(&seq, g1, Some(&gamma), &hyps, CITE_SURJECTIVITY);
    let (origin_injective, origin_surjective) =
        origin_from(&hyps, injective.clone(), surjective.clone());
    never_bijective(&injective, &surjective, "moment mapping")?;
    never_bijective(&origin_injective, &origin_surjective, "origin moment mapping")?;

    let mut citations: Vec<String> = [
        &injective,
        &surjective,
        &origin_injective,
        &origin_surjective,
    ]
    .iter()
    .flat_map(|v| v.citations.iter().cloned())
    .chain([CITE_NEVER_BIJECTIVE.to_string(), CITE_ORIGIN_NEVER_BIJECTIVE.to_string()])
    .collect();
    citations.sort();
    citations.dedup();

    Ok(MomentMapReport {
        schema: SCHEMA_VERSION,
        sequence: spec.clone(),
        label: spec.label(),
        horizon: opts.horizon,
        aux: aux_spec,
        hypotheses: hyps,
        injective,
        surjective,
        origin_injective,
        origin_surjective,
        indices: Indices { gamma, omega },
        citations,
    })
}
