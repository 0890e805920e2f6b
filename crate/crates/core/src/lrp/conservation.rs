//! Per-step relevance conservation accounting.

use serde::{Deserialize, Serialize};

use super::engine::{RuleKind, StepLog};

/// Where the relevance that a step fails to pass on goes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeakSource {
    None,
    EpsilonAbsorption,
    BiasAbsorption,
    SoftmaxRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConservationReport {
    pub layer: Option<usize>,
    pub site: String,
    pub rule: RuleKind,
    pub inflow: f64,
    pub outflow: f64,
    /// `|inflow − outflow|`.
    pub leak: f64,
    /// `leak` divided by the absolute relevance mass entering the step
    /// (0 when that mass is 0).
    pub relative_leak: f64,
    pub epsilon_absorbed: f64,
    pub bias_absorbed: f64,
    /// Leak left after subtracting the ε and bias absorption, relative to the mass.
    pub unexplained: f64,
    pub source: LeakSource,
}

/// One report per logged step, in reverse-pass order.
pub fn conservation_report(log: &[StepLog]) -> Vec<ConservationReport> {
    log.iter().map(report_step).collect()
}

fn report_step(step: &StepLog) -> ConservationReport {
    let leak = (step.inflow - step.outflow).abs();
    let rel = |v: f64| {
        if step.inflow_mass > 0.0 {
            v / step.inflow_mass
        } else {
            v
        }
    };
    let unexplained =
        (step.inflow - step.outflow - step.epsilon_absorbed - step.bias_absorbed).abs();
    let source = match step.rule {
        RuleKind::Softmax => LeakSource::SoftmaxRule,
        RuleKind::Identity | RuleKind::Bilinear => LeakSource::None,
        RuleKind::Linear if step.bias_absorbed != 0.0 => LeakSource::BiasAbsorption,
        RuleKind::Linear | RuleKind::Product | RuleKind::Residual => {
            if step.epsilon_absorbed != 0.0 {
                LeakSource::EpsilonAbsorption
            } else {
                LeakSource::None
            }
        }
    };
    ConservationReport {
        layer: step.layer,
        site: step.site.clone(),
        rule: step.rule,
        inflow: step.inflow,
        outflow: step.outflow,
        leak,
        relative_leak: rel(leak),
        epsilon_absorbed: step.epsilon_absorbed,
        bias_absorbed: step.bias_absorbed,
        unexplained: rel(unexplained),
        source,
    }
}
