//! Weight sequences as memoized log-domain evaluators.
//!
//! M_p itself is never materialized: every value is the natural logarithm
//! log M_p or log m_p with m_p = M_{p+1} / M_p.

pub mod blocks;
mod spec;

use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

pub use blocks::BigIndex;
pub use spec::{DeriveOp, SequenceSpec, TailRule};

use crate::error::{Error, Result};
use crate::logmath::{ln_factorial, NeumaierSum};

/// Properties a constructor can declare analytically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Property {
    Lc,
    Wlc,
    Dc,
    Mg,
    Nq,
    Snq,
    /// Surjectivity of the asymptotic Borel map is known for this family.
    BorelSurjective,
}

/// Exactly-known properties; `true` = holds, `false` = known to fail.
pub type Metadata = BTreeMap<Property, bool>;

#[derive(Debug)]
enum Kind {
    Gevrey { s: f64 },
    QGevrey { ln_q: f64 },
    Blocks,
    Explicit { values: Vec<f64>, tail: TailRule },
    Hat(WeightSequence),
    Check(WeightSequence),
    Power { s: f64, base: WeightSequence },
    DcMinorant(WeightSequence),
}

#[derive(Debug, Default)]
struct Memo {
    log_m: Vec<f64>,
    /// log_big_m[p] = log M_p; always one longer than `log_m`.
    log_big_m: Vec<f64>,
    acc: NeumaierSum,
}

#[derive(Debug)]
struct Inner {
    spec: SequenceSpec,
    kind: Kind,
    metadata: Metadata,
    memo: RwLock<Memo>,
}

/// A weight sequence M = (M_p) with M_0 = 1. Cheap to clone and safe to
/// share across threads; memoized values are computed once.
#[derive(Debug, Clone)]
pub struct WeightSequence(Arc<Inner>);

const MEMO_CHUNK: usize = 1024;

impl WeightSequence {
    pub fn new(spec: &SequenceSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self::build(spec))
    }

    fn build(spec: &SequenceSpec) -> Self {
        use Property::*;
        let (kind, metadata): (Kind, Metadata) = match spec {
            SequenceSpec::Gevrey { s } => (
                Kind::Gevrey { s: *s },
                [Lc, Wlc, Dc, Mg, Nq, Snq].into_iter().map(|p| (p, true)).collect(),
            ),
            SequenceSpec::QGevrey { q } => {
                let mut md: Metadata =
                    [Lc, Wlc, Dc, Nq, Snq, BorelSurjective].into_iter().map(|p| (p, true)).collect();
                md.insert(Mg, false);
                (Kind::QGevrey { ln_q: q.ln() }, md)
            }
            SequenceSpec::Blocks => (
                Kind::Blocks,
                [Lc, Wlc, Dc, Mg, Nq, Snq].into_iter().map(|p| (p, true)).collect(),
            ),
            SequenceSpec::Explicit { log_m, tail } => (
                Kind::Explicit {
                    values: log_m.clone(),
                    tail: *tail,
                },
                Metadata::new(),
            ),
            SequenceSpec::Derived { op, base } => {
                let base = Self::build(base);
                let bm = base.metadata();
                let has = |p: Property| bm.get(&p) == Some(&true);
                let mut md = Metadata::new();
                let kind = match op {
                    DeriveOp::Hat => {
                        for p in [Lc, Wlc, Dc, Mg, Nq, Snq] {
                            if has(p) {
                                md.insert(p, true);
                            }
                        }
                        if has(Wlc) {
                            md.insert(Lc, true);
                        }
                        Kind::Hat(base)
                    }
                    DeriveOp::Check => {
                        for p in [Dc, Mg] {
                            if has(p) {
                                md.insert(p, true);
                            }
                        }
                        if has(Lc) {
                            md.insert(Wlc, true);
                        }
                        Kind::Check(base)
                    }
                    DeriveOp::Power { s } => {
                        for p in [Lc, Dc, Mg, Snq] {
                            if has(p) {
                                md.insert(p, true);
                            }
                        }
                        if has(Lc) {
                            md.insert(Wlc, true);
                        }
                        Kind::Power { s: *s, base }
                    }
                    DeriveOp::DcMinorant => {
                        md.insert(Dc, true);
                        Kind::DcMinorant(base)
                    }
                };
                (kind, md)
            }
        };
        WeightSequence(Arc::new(Inner {
            spec: spec.clone(),
            kind,
            metadata,
            memo: RwLock::new(Memo {
                log_m: Vec::new(),
                log_big_m: vec![0.0],
                acc: NeumaierSum::default(),
            }),
        }))
    }

    pub fn gevrey(s: f64) -> Result<Self> {
        Self::new(&SequenceSpec::gevrey(s))
    }

    pub fn q_gevrey(q: f64) -> Result<Self> {
        Self::new(&SequenceSpec::q_gevrey(q))
    }

    pub fn blocks() -> Self {
        Self::build(&SequenceSpec::Blocks)
    }

    pub fn spec(&self) -> &SequenceSpec {
        &self.0.spec
    }

    pub fn metadata(&self) -> &Metadata {
        &self.0.metadata
    }

    /// Exactly-known status of `p`, if declared.
    pub fn declared(&self, p: Property) -> Option<bool> {
        self.0.metadata.get(&p).copied()
    }

    /// Direct (unmemoized) evaluation of log m_p.
    fn raw_log_m(&self, p: usize) -> f64 {
        let lp1 = (p as f64).ln_1p();
        match &self.0.kind {
            Kind::Gevrey { s } => s * lp1,
            Kind::QGevrey { ln_q } => (2.0 * p as f64 + 1.0) * ln_q,
            Kind::Blocks => blocks::log_m(BigIndex::Small(p as u64)),
            Kind::Explicit { values, tail } => explicit_log_m(values, *tail, p),
            Kind::Hat(b) => b.log_m(p) + lp1,
            Kind::Check(b) => b.log_m(p) - lp1,
            Kind::Power { s, base } => s * base.log_m(p),
            Kind::DcMinorant(b) => minorant_log_a(b.log_m(p), p) - lp1,
        }
    }

    /// log m_p.
    pub fn log_m(&self, p: usize) -> f64 {
        {
            let memo = self.0.memo.read().expect("memo lock poisoned");
            if let Some(v) = memo.log_m.get(p) {
                return *v;
            }
        }
        self.raw_log_m(p)
    }

    fn closed_log_big_m(&self, p: usize) -> Option<f64> {
        match &self.0.kind {
            Kind::Gevrey { s } => Some(s * ln_factorial(p)),
            Kind::QGevrey { ln_q } => Some((p as f64) * (p as f64) * ln_q),
            Kind::Hat(b) => b.closed_log_big_m(p).map(|v| v + ln_factorial(p)),
            Kind::Check(b) => b.closed_log_big_m(p).map(|v| v - ln_factorial(p)),
            Kind::Power { s, base } => base.closed_log_big_m(p).map(|v| s * v),
            _ => None,
        }
    }

    /// Extend the memo table so that log M_p is available for p <= n.
    fn ensure(&self, n: usize) {
        {
            let memo = self.0.memo.read().expect("memo lock poisoned");
            if memo.log_big_m.len() > n {
                return;
            }
        }
        let mut memo = self.0.memo.write().expect("memo lock poisoned");
        let target = (n + 1).div_ceil(MEMO_CHUNK) * MEMO_CHUNK;
        while memo.log_big_m.len() <= target {
            let p = memo.log_m.len();
            let v = self.raw_log_m(p);
            memo.log_m.push(v);
            memo.acc.add(v);
            let total = memo.acc.value();
            memo.log_big_m.push(total);
        }
    }

    /// log M_p (log M_0 = 0).
    pub fn log_big_m(&self, p: usize) -> f64 {
        if p == 0 {
            return 0.0;
        }
        if let Some(v) = self.closed_log_big_m(p) {
            return v;
        }
        self.ensure(p);
        self.0.memo.read().expect("memo lock poisoned").log_big_m[p]
    }

    /// log m_p for p <= n, memoized as a block. Fails with the offending
    /// index if any value is not finite.
    pub fn log_m_range(&self, n: usize) -> Result<Vec<f64>> {
        self.ensure(n + 1);
        let out = self.0.memo.read().expect("memo lock poisoned").log_m[..=n].to_vec();
        all_finite(out)
    }

    /// log M_p for p <= n.
    pub fn log_big_m_range(&self, n: usize) -> Result<Vec<f64>> {
        let out = if self.closed_log_big_m(1).is_some() {
            (0..=n).map(|p| self.log_big_m(p)).collect()
        } else {
            self.ensure(n);
            self.0.memo.read().expect("memo lock poisoned").log_big_m[..=n].to_vec()
        };
        all_finite(out)
    }

    /// log m_p at an index that may exceed `u64`. `None` when the family has
    /// no closed form there (or the value overflows).
    pub fn log_m_big(&self, p: BigIndex) -> Option<f64> {
        if let Some(n) = p.as_u64() {
            if n <= usize::MAX as u64 && n < (1u64 << 53) {
                let v = self.log_m(n as usize);
                return v.is_finite().then_some(v);
            }
        }
        let v = match &self.0.kind {
            Kind::Gevrey { s } => s * p.ln_succ(),
            Kind::QGevrey { .. } => return None,
            Kind::Blocks => blocks::log_m(p),
            Kind::Explicit { tail, .. } => match tail {
                TailRule::Power { c } => c * p.ln(),
                TailRule::Linear { .. } => return None,
            },
            Kind::Hat(b) => b.log_m_big(p)? + p.ln_succ(),
            Kind::Check(b) => b.log_m_big(p)? - p.ln_succ(),
            Kind::Power { s, base } => s * base.log_m_big(p)?,
            Kind::DcMinorant(b) => {
                let lp1 = p.ln_succ();
                let pow2 = lp1.exp() * std::f64::consts::LN_2;
                pow2.min(lp1 + b.log_m_big(p)?) - lp1
            }
        };
        v.is_finite().then_some(v)
    }

    fn has_block_structure(&self) -> bool {
        match &self.0.kind {
            Kind::Blocks => true,
            Kind::Hat(b) | Kind::Check(b) | Kind::DcMinorant(b) => b.has_block_structure(),
            Kind::Power { base, .. } => base.has_block_structure(),
            _ => false,
        }
    }

    /// Probe indices beyond `horizon` at which asymptotic checks may look,
    /// sorted ascending. Only families with closed-form block structure
    /// provide any: powers of two up to 2^64, geometrically spaced powers of
    /// two beyond, and every block boundary up to level `blocks::MAX_LEVEL`
    /// (closed by the start of the next block).
    pub fn extended_probes(&self, horizon: usize) -> Vec<BigIndex> {
        if !self.has_block_structure() {
            return Vec::new();
        }
        let bounds = blocks::boundaries(blocks::MAX_LEVEL);
        let last_exp = blocks::block_start_exp(blocks::MAX_LEVEL + 1);
        let mut exps: Vec<u32> = (1..=64).collect();
        let mut e = 64.0f64;
        while e < last_exp as f64 {
            e *= 1.2;
            exps.push((e.round() as u32).min(last_exp));
        }
        let h = BigIndex::Small(horizon as u64);
        let mut out: Vec<BigIndex> = exps
            .into_iter()
            .map(BigIndex::pow2)
            .chain(bounds)
            .filter(|p| *p > h)
            .collect();
        out.sort();
        out.dedup();
        out
    }
}

fn all_finite(values: Vec<f64>) -> Result<Vec<f64>> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(p) => Err(Error::Evaluator {
            p,
            reason: format!("value {} is not finite", values[p]),
        }),
        None => Ok(values),
    }
}

fn explicit_log_m(values: &[f64], tail: TailRule, p: usize) -> f64 {
    if let Some(v) = values.get(p) {
        return *v;
    }
    let n = values.len();
    match tail {
        TailRule::Linear { step } => values[n - 1] + step * (p + 1 - n) as f64,
        TailRule::Power { c } => c * (p as f64).ln(),
    }
}

/// log a_p with a_p = min(2^(p+1), (p+1) m_p).
fn minorant_log_a(base_log_m: f64, p: usize) -> f64 {
    let pow2 = (p as f64 + 1.0) * std::f64::consts::LN_2;
    pow2.min((p as f64).ln_1p() + base_log_m)
}

/// Build a derived sequence (hat, check, power) from an existing one.
pub fn derive(seq: &WeightSequence, op: DeriveOp) -> Result<WeightSequence> {
    WeightSequence::new(&SequenceSpec::derived(op, seq.spec().clone()))
}

/// The minorant N with N_0 = 1 and N_p = (1/p!) prod_{j<p} a_j,
/// a_j = min(2^(j+1), (j+1) m_j). It satisfies (dc) with C_0 = 1, H = 2 and
/// inherits (wlc) and (nq) from its input.
pub fn dc_minorant(seq: &WeightSequence) -> Result<WeightSequence> {
    derive(seq, DeriveOp::DcMinorant)
}

/// log m_p of the block sequence at a possibly astronomical index.
pub fn example38_log_m(p: BigIndex) -> f64 {
    blocks::log_m(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ulp_tol(x: f64) -> f64 {
        (8.0 * f64::EPSILON * x.abs()).max(1e-12)
    }

    #[test]
    fn make_sequence_examples() {
        let g = WeightSequence::gevrey(1.0).unwrap();
        assert!((g.log_big_m(3) - 6f64.ln()).abs() < 1e-14);
        let q = WeightSequence::q_gevrey(2.0).unwrap();
        assert!((q.log_big_m(3) - 9.0 * 2f64.ln()).abs() < 1e-14);
        let e = WeightSequence::new(&SequenceSpec::Explicit {
            log_m: vec![0.5, 0.5],
            tail: TailRule::Linear { step: 0.0 },
        })
        .unwrap();
        assert!((e.log_big_m(4) - 2.0).abs() < 1e-14);
        assert_eq!(e.log_big_m(0), 0.0);
    }

    #[test]
    fn log_m_examples() {
        let g = WeightSequence::gevrey(2.0).unwrap();
        assert!((g.log_m(4) - 2.0 * 5f64.ln()).abs() < 1e-14);
        let q = WeightSequence::q_gevrey(2.0).unwrap();
        assert!((q.log_m(3) - 7.0 * 2f64.ln()).abs() < 1e-14);
        let b = WeightSequence::blocks();
        assert!((b.log_m(2) - 3.0).abs() < 1e-14);
        assert_eq!(b.log_m(0), 0.0);
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(WeightSequence::gevrey(0.0).is_err());
        assert!(WeightSequence::q_gevrey(0.5).is_err());
    }

    #[test]
    fn metadata_for_builtins() {
        let g = WeightSequence::gevrey(1.0).unwrap();
        for p in [Property::Lc, Property::Mg, Property::Snq] {
            assert_eq!(g.declared(p), Some(true));
        }
        let q = WeightSequence::q_gevrey(2.0).unwrap();
        assert_eq!(q.declared(Property::Lc), Some(true));
        assert_eq!(q.declared(Property::Dc), Some(true));
        assert_eq!(q.declared(Property::Mg), Some(false));
        let c = derive(&q, DeriveOp::Check).unwrap();
        assert_eq!(c.declared(Property::Lc), None);
        assert_eq!(c.declared(Property::Dc), Some(true));
    }

    #[test]
    fn quotients_match_differences() {
        let specs = [
            SequenceSpec::gevrey(1.0),
            SequenceSpec::gevrey(2.5),
            SequenceSpec::q_gevrey(2.0),
            SequenceSpec::Blocks,
            SequenceSpec::derived(DeriveOp::Power { s: 0.5 }, SequenceSpec::Blocks),
            SequenceSpec::derived(DeriveOp::Hat, SequenceSpec::gevrey(1.0)),
            SequenceSpec::derived(DeriveOp::DcMinorant, SequenceSpec::gevrey(3.0)),
        ];
        for spec in &specs {
            let seq = WeightSequence::new(spec).unwrap();
            let big = seq.log_big_m_range(10_001).unwrap();
            for p in 0..=10_000 {
                let diff = big[p + 1] - big[p];
                let lm = seq.log_m(p);
                assert!(
                    (diff - lm).abs() <= ulp_tol(big[p + 1]),
                    "{}: p = {p}, {diff} vs {lm}",
                    spec.label()
                );
                assert!(lm.is_finite() && big[p].is_finite());
            }
        }
    }

    #[test]
    fn derive_examples() {
        let g1 = WeightSequence::gevrey(1.0).unwrap();
        let hat = derive(&g1, DeriveOp::Hat).unwrap();
        assert!((hat.log_big_m(3) - 2.0 * 6f64.ln()).abs() < 1e-13);
        let g2 = WeightSequence::gevrey(2.0).unwrap();
        for p in 0..200 {
            assert!((hat.log_m(p) - g2.log_m(p)).abs() < 1e-12);
        }
        let b = WeightSequence::blocks();
        let half = derive(&b, DeriveOp::Power { s: 0.5 }).unwrap();
        for p in 0..500 {
            assert!((half.log_m(p) - 0.5 * b.log_m(p)).abs() < 1e-14);
        }
    }

    #[test]
    fn derive_round_trips() {
        for spec in [SequenceSpec::gevrey(1.5), SequenceSpec::Blocks, SequenceSpec::q_gevrey(3.0)] {
            let seq = WeightSequence::new(&spec).unwrap();
            let back = derive(&derive(&seq, DeriveOp::Hat).unwrap(), DeriveOp::Check).unwrap();
            let pw = derive(
                &derive(&seq, DeriveOp::Power { s: 3.0 }).unwrap(),
                DeriveOp::Power { s: 1.0 / 3.0 },
            )
            .unwrap();
            for p in 0..=1000 {
                assert!((back.log_m(p) - seq.log_m(p)).abs() <= 1e-12 * (1.0 + seq.log_m(p).abs()));
                let a = seq.log_big_m(p);
                assert!((back.log_big_m(p) - a).abs() <= 1e-12 * (1.0 + a.abs()));
                assert!((pw.log_big_m(p) - a).abs() <= 1e-10 * (1.0 + a.abs()));
            }
        }
    }

    #[test]
    fn dc_minorant_examples() {
        let g1 = WeightSequence::gevrey(1.0).unwrap();
        let n = dc_minorant(&g1).unwrap();
        assert_eq!(n.log_big_m(0), 0.0);
        assert!((n.log_big_m(2) - 2f64.ln()).abs() < 1e-14);
        let g3 = WeightSequence::gevrey(3.0).unwrap();
        let n3 = dc_minorant(&g3).unwrap();
        // a_0 = min(2, 1) = 1, so log n_0 = log a_0 - log 1 = 0.
        assert_eq!(n3.log_m(0), 0.0);
    }

    #[test]
    fn dc_minorant_bounds() {
        for spec in [SequenceSpec::gevrey(0.5), SequenceSpec::gevrey(3.0), SequenceSpec::Blocks] {
            let base = WeightSequence::new(&spec).unwrap();
            let n = dc_minorant(&base).unwrap();
            let mut prev = f64::NEG_INFINITY;
            for p in 0..=10_000usize {
                let log_a = n.log_m(p) + (p as f64).ln_1p();
                assert!(log_a <= (p as f64 + 1.0) * std::f64::consts::LN_2 + 1e-12);
                assert!(log_a >= prev - 1e-12, "{}: a_p decreased at {p}", spec.label());
                prev = log_a;
            }
        }
    }

    #[test]
    fn extended_probes_only_for_block_family() {
        assert!(WeightSequence::gevrey(1.0).unwrap().extended_probes(100).is_empty());
        let b = WeightSequence::blocks();
        let probes = b.extended_probes(100_000);
        assert!(probes.iter().all(|p| *p > BigIndex::Small(100_000)));
        assert!(probes.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(*probes.last().unwrap(), BigIndex::Pow2(blocks::block_start_exp(9)));
        assert!(probes.contains(&BigIndex::Pow2(blocks::block_end_exp(8))));
        let v = b.log_m_big(BigIndex::Pow2(blocks::block_start_exp(8))).unwrap();
        assert!(v.is_finite());
    }

    #[test]
    fn shared_across_threads() {
        let seq = WeightSequence::blocks();
        let handles: Vec<_> = (0..4)
            .map(|i| {
                let s = seq.clone();
                std::thread::spawn(move || s.log_big_m(5000 + i * 100))
            })
            .collect();
        let vals: Vec<f64> = handles.into_iter().map(|h| h.join().unwrap()).collect();
        for (i, v) in vals.iter().enumerate() {
            assert_eq!(*v, seq.log_big_m(5000 + i * 100));
        }
    }
}
