use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Declarative description of a weight sequence.
///
/// JSON form: `{"kind": "...", ...params}`; derived sequences nest their base:
/// `{"kind":"derived","op":"power","s":0.5,"base":{"kind":"example38"}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SequenceSpec {
    /// M_p = p!^s.
    Gevrey { s: f64 },
    /// M_p = q^(p^2).
    QGevrey { q: f64 },
    /// Strongly regular sequence whose quotient exponents alternate between
    /// 2 and 3 on the blocks (2^(3^j), 2^(2*3^j)].
    #[serde(rename = "example38")]
    Blocks,
    /// Finitely many log-quotients followed by a total tail rule.
    Explicit { log_m: Vec<f64>, tail: TailRule },
    Derived {
        #[serde(flatten)]
        op: DeriveOp,
        base: Box<SequenceSpec>,
    },
}

/// Continuation of an explicit sequence beyond its listed quotients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum TailRule {
    /// log m_p grows by `step` per index past the last listed value.
    Linear { step: f64 },
    /// log m_p = c * log p past the listed values.
    Power { c: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum DeriveOp {
    /// (p! M_p)
    Hat,
    /// (M_p / p!)
    Check,
    /// (M_p^s)
    Power { s: f64 },
    /// The (dc) minorant built from min(2^(p+1), (p+1) m_p).
    DcMinorant,
}

const MAX_DEPTH: usize = 64;

impl SequenceSpec {
    pub fn gevrey(s: f64) -> Self {
        SequenceSpec::Gevrey { s }
    }

    pub fn q_gevrey(q: f64) -> Self {
        SequenceSpec::QGevrey { q }
    }

    pub fn derived(op: DeriveOp, base: SequenceSpec) -> Self {
        SequenceSpec::Derived {
            op,
            base: Box::new(base),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: SequenceSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("sequence specs always serialize")
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_at(0)
    }

    fn validate_at(&self, depth: usize) -> Result<()> {
        if depth > MAX_DEPTH {
            return Err(Error::validation("base", "derivation tree too deep"));
        }
        match self {
            SequenceSpec::Gevrey { s } => positive("s", *s),
            SequenceSpec::QGevrey { q } => {
                if q.is_finite() && *q > 1.0 {
                    Ok(())
                } else {
                    Err(Error::validation("q", format!("must be > 1, got {q}")))
                }
            }
            SequenceSpec::Blocks => Ok(()),
            SequenceSpec::Explicit { log_m, tail } => {
                if log_m.is_empty() {
                    return Err(Error::validation("log_m", "must list at least one value"));
                }
                if let Some(i) = log_m.iter().position(|v| !v.is_finite()) {
                    return Err(Error::validation("log_m", format!("entry {i} is not finite")));
                }
                match tail {
                    TailRule::Linear { step } if !step.is_finite() => {
                        Err(Error::validation("step", "must be finite"))
                    }
                    TailRule::Power { c } if !c.is_finite() => {
                        Err(Error::validation("c", "must be finite"))
                    }
                    _ => Ok(()),
                }
            }
            SequenceSpec::Derived { op, base } => {
                if let DeriveOp::Power { s } = op {
                    positive("s", *s)?;
                }
                base.validate_at(depth + 1)
            }
        }
    }

    /// Short human label, used in CSV rows and pretty output.
    pub fn label(&self) -> String {
        match self {
            SequenceSpec::Gevrey { s } => format!("gevrey({s})"),
            SequenceSpec::QGevrey { q } => format!("q_gevrey({q})"),
            SequenceSpec::Blocks => "example38".to_string(),
            SequenceSpec::Explicit { log_m, .. } => format!("explicit[{}]", log_m.len()),
            SequenceSpec::Derived { op, base } => match op {
                DeriveOp::Hat => format!("hat({})", base.label()),
                DeriveOp::Check => format!("check({})", base.label()),
                DeriveOp::Power { s } => format!("power({}, {s})", base.label()),
                DeriveOp::DcMinorant => format!("dc_minorant({})", base.label()),
            },
        }
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::validation(field, format!("must be > 0, got {v}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_json_shape() {
        let spec = SequenceSpec::derived(DeriveOp::Power { s: 0.5 }, SequenceSpec::Blocks);
        let json = spec.to_json();
        assert_eq!(
            json,
            r#"{"kind":"derived","op":"power","s":0.5,"base":{"kind":"example38"}}"#
        );
        assert_eq!(SequenceSpec::from_json(&json).unwrap(), spec);
    }

    #[test]
    fn explicit_json_shape() {
        let text = r#"{"kind":"explicit","log_m":[0.5,0.5],"tail":{"rule":"linear","step":0.0}}"#;
        let spec = SequenceSpec::from_json(text).unwrap();
        assert_eq!(spec.to_json(), text);
    }

    #[test]
    fn validation_names_field() {
        let err = SequenceSpec::from_json(r#"{"kind":"gevrey","s":-1}"#).unwrap_err();
        assert!(err.to_string().contains("`s`"), "{err}");
        let err = SequenceSpec::from_json(r#"{"kind":"q_gevrey","q":1}"#).unwrap_err();
        assert!(err.to_string().contains("`q`"), "{err}");
        let err = SequenceSpec::from_json(r#"{"kind":"gevrey"}"#).unwrap_err();
        assert!(err.to_string().contains("`s`"), "{err}");
        let err = SequenceSpec::from_json(
            r#"{"kind":"derived","op":"power","s":0,"base":{"kind":"example38"}}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("`s`"), "{err}");
    }
}
