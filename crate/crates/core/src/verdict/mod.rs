//! Deployment verdict: maps shift diagnostics to a robust / vulnerable
//! status, the rules that fired, and a retraining recommendation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnostics::{ProtectiveFeature, ShiftDiagnostics};

pub const ENTROPY_MAX_BITS: f64 = 2.5;
pub const TOP_CLASS_MIN_SHARE: f64 = 0.5;
pub const CATASTROPHIC_MAX_JACCARD: f64 = 0.1;
pub const ROBUST_MIN_JACCARD: f64 = 0.4;
pub const CONCENTRATION_MAX: f64 = 0.40;

#[derive(Debug, Error, PartialEq)]
pub enum VerdictError {
    #[error("diagnostic field {0} is missing or not finite")]
    MissingField(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Status {
    RobustLowComplexity,
    RobustDistributed,
    RobustProtected,
    Vulnerable,
    CatastrophicExpected,
}

impl Status {
    pub fn is_robust(self) -> bool {
        matches!(
            self,
            Status::RobustLowComplexity | Status::RobustDistributed | Status::RobustProtected
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Recommendation {
    NoRetrain,
    QuarterlyRetrain,
    MonitorOnly,
}

/// One rule that fired, with the observed value and the threshold it was
/// compared against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriggeredRule {
    pub rule: String,
    pub observed: f64,
    pub comparison: String,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub status: Status,
    pub triggered_rules: Vec<TriggeredRule>,
    pub recommendation: Recommendation,
    pub notes: Vec<String>,
}

/// The subset of diagnostics the decision rules read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionInputs {
    pub label_entropy_bits: f64,
    pub top_class_share: f64,
    pub mean_top5_jaccard: f64,
    pub concentration: f64,
    pub protective_features: Vec<ProtectiveFeature>,
    pub knife_edge: bool,
}

impl From<&ShiftDiagnostics> for DecisionInputs {
    fn from(d: &ShiftDiagnostics) -> Self {
        Self {
            label_entropy_bits: d.label_entropy_bits,
            top_class_share: d.top_class_share,
            mean_top5_jaccard: d.mean_top5_jaccard,
            concentration: d.concentration,
            protective_features: d.protective_features.clone(),
            knife_edge: d.seed_cov.as_ref().is_some_and(|k| k.flagged),
        }
    }
}

fn rule(rule: &str, observed: f64, comparison: &str, threshold: f64) -> TriggeredRule {
    TriggeredRule {
        rule: rule.to_string(),
        observed,
        comparison: comparison.to_string(),
        threshold,
    }
}

pub fn decide(diag: &ShiftDiagnostics) -> Result<Verdict, VerdictError> {
    decide_inputs(&DecisionInputs::from(diag))
}

/// Applies the rules in order:
/// 1. entropy < 2.5 bits or top-class share > 0.5 → ROBUST_LOW_COMPLEXITY;
/// 2. mean top-5 Jaccard < 0.1 / > 0.4 sets the catastrophic / robust
///    context flag (neither in between);
/// 3. concentration <= 0.40 → ROBUST_DISTRIBUTED; otherwise protective
///    features → ROBUST_PROTECTED; otherwise VULNERABLE, or
///    CATASTROPHIC_EXPECTED under the catastrophic flag.
///
/// A knife-edge flag adds a note and lifts robust recommendations to
/// MONITOR_ONLY.
pub fn decide_inputs(d: &DecisionInputs) -> Result<Verdict, VerdictError> {
    for (name, v) in [
        ("label_entropy_bits", d.label_entropy_bits),
        ("top_class_share", d.top_class_share),
        ("mean_top5_jaccard", d.mean_top5_jaccard),
        ("concentration", d.concentration),
    ] {
        if !v.is_finite() {
            return Err(VerdictError::MissingField(name));
        }
    }
    let mut rules = Vec::new();
    let mut notes = Vec::new();

    let low_entropy = d.label_entropy_bits < ENTROPY_MAX_BITS;
    let dominant_class = d.top_class_share > TOP_CLASS_MIN_SHARE;
    let status = if low_entropy || dominant_class {
        if low_entropy {
            rules.push(rule("LOW_ENTROPY", d.label_entropy_bits, "<", ENTROPY_MAX_BITS));
        }
        if dominant_class {
            rules.push(rule("DOMINANT_CLASS", d.top_class_share, ">", TOP_CLASS_MIN_SHARE));
        }
        Status::RobustLowComplexity
    } else {
        let catastrophic_context = d.mean_top5_jaccard < CATASTROPHIC_MAX_JACCARD;
        let robust_context = d.mean_top5_jaccard > ROBUST_MIN_JACCARD;
        if catastrophic_context {
            rules.push(rule("CATASTROPHIC_CONTEXT", d.mean_top5_jaccard, "<", CATASTROPHIC_MAX_JACCARD));
        } else if robust_context {
            rules.push(rule("STABLE_CONTEXT", d.mean_top5_jaccard, ">", ROBUST_MIN_JACCARD));
        } else {
            notes.push(format!(
                "stability-indeterminate: mean top-5 Jaccard {:.3} lies between {CATASTROPHIC_MAX_JACCARD} and {ROBUST_MIN_JACCARD}; concentration alone decides",
                d.mean_top5_jaccard
            ));
        }

        if d.concentration <= CONCENTRATION_MAX {
            rules.push(rule("LOW_CONCENTRATION", d.concentration, "<=", CONCENTRATION_MAX));
            Status::RobustDistributed
        } else {
            rules.push(rule("HIGH_CONCENTRATION", d.concentration, ">", CONCENTRATION_MAX));
            if let Some(p) = d.protective_features.first() {
                for p in &d.protective_features {
                    rules.push(rule(&format!("PROTECTIVE_FEATURE:{}", p.feature), p.share, ">", 0.15));
                }
                notes.push(format!(
                    "{} is stable (Jaccard {:.2}) and carries {:.0}% of importance",
                    p.feature,
                    p.jaccard,
                    100.0 * p.share
                ));
                Status::RobustProtected
            } else if catastrophic_context {
                Status::CatastrophicExpected
            } else {
                if !robust_context {
                    notes.push(format!(
                        "moderate feature stability (mean top-5 Jaccard {:.2}) weakens the concentration signal; catastrophic failure is not expected",
                        d.mean_top5_jaccard
                    ));
                } else {
                    notes.push("stable top features weaken the concentration signal".to_string());
                }
                Status::Vulnerable
            }
        }
    };

    let mut recommendation = if status.is_robust() {
        Recommendation::NoRetrain
    } else {
        Recommendation::QuarterlyRetrain
    };
    if d.knife_edge {
        rules.push(rule("KNIFE_EDGE", 1.0, "==", 1.0));
        notes.push("MONITOR: coverage varies sharply across seeds (knife-edge regime)".to_string());
        if status.is_robust() {
            recommendation = Recommendation::MonitorOnly;
        }
    }
    Ok(Verdict {
        status,
        triggered_rules: rules,
        recommendation,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inputs(entropy: f64, top: f64, jaccard: f64, conc: f64) -> DecisionInputs {
        DecisionInputs {
            label_entropy_bits: entropy,
            top_class_share: top,
            mean_top5_jaccard: jaccard,
            concentration: conc,
            protective_features: Vec::new(),
            knife_edge: false,
        }
    }

    #[test]
    fn boundary_concentration_is_robust() {
        let v = decide_inputs(&inputs(3.0, 0.2, 0.2, 0.40)).unwrap();
        assert_eq!(v.status, Status::RobustDistributed);
        assert!(v.notes[0].starts_with("stability-indeterminate"));
    }

    #[test]
    fn knife_edge_monitors_robust_tasks() {
        let mut i = inputs(1.0, 0.9, 0.0, 0.9);
        i.knife_edge = true;
        let v = decide_inputs(&i).unwrap();
        assert_eq!(v.status, Status::RobustLowComplexity);
        assert_eq!(v.recommendation, Recommendation::MonitorOnly);
        i.label_entropy_bits = 3.0;
        i.top_class_share = 0.2;
        let v = decide_inputs(&i).unwrap();
        assert_eq!(v.recommendation, Recommendation::QuarterlyRetrain);
    }

    #[test]
    fn missing_fields_error() {
        assert_eq!(
            decide_inputs(&inputs(f64::NAN, 0.2, 0.2, 0.5)),
            Err(VerdictError::MissingField("label_entropy_bits"))
        );
    }
}
