//! Probability of a scenario formula from per-input failure-mode probabilities.
//!
//! Inputs fail independently; the modes of one input are mutually exclusive,
//! and `m` carries whatever probability the listed fault modes leave over.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{Scenario, ScenarioFormula};
use crate::mode::FailureMode;

pub const MAX_EXACT_SCENARIOS: usize = 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuantError {
    #[error("no probability for {var}={mode}")]
    Missing { var: String, mode: FailureMode },
    #[error("probability for {var}={mode} must be in [0, 1], got {p}")]
    OutOfRange { var: String, mode: FailureMode, p: f64 },
    #[error("fault probabilities of '{var}' sum to {sum}, more than 1")]
    OverOne { var: String, sum: f64 },
    #[error("'{0}': the match probability is implied and must not be listed")]
    MatchListed(String),
    #[error("inclusion-exclusion is limited to {MAX_EXACT_SCENARIOS} scenarios, got {0}")]
    TooManyScenarios(usize),
    #[error("invalid failure data: {0}")]
    Parse(String),
}

/// `{"var": {"l": p, "h": p}}`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FailureData {
    pub entries: BTreeMap<String, BTreeMap<FailureMode, f64>>,
}

impl FailureData {
    pub fn new(entries: BTreeMap<String, BTreeMap<FailureMode, f64>>) -> Result<Self, QuantError> {
        let d = FailureData { entries };
        d.validate()?;
        Ok(d)
    }

    pub fn from_json(text: &str) -> Result<Self, QuantError> {
        let d: FailureData = serde_json::from_str(text).map_err(|e| QuantError::Parse(e.to_string()))?;
        d.validate()?;
        Ok(d)
    }

    fn validate(&self) -> Result<(), QuantError> {
        for (var, modes) in &self.entries {
            let mut sum = 0.0;
            for (&mode, &p) in modes {
                if mode.is_match() {
                    return Err(QuantError::MatchListed(var.clone()));
                }
                if !(0.0..=1.0).contains(&p) {
                    return Err(QuantError::OutOfRange {
                        var: var.clone(),
                        mode,
                        p,
                    });
                }
                sum += p;
            }
            if sum > 1.0 + 1e-12 {
                return Err(QuantError::OverOne {
                    var: var.clone(),
                    sum,
                });
            }
        }
        Ok(())
    }

    /// Probability that `var` is in `mode`.
    pub fn probability(&self, var: &str, mode: FailureMode) -> Result<f64, QuantError> {
        let modes = self.entries.get(var);
        if mode.is_match() {
            let faults: f64 = modes.map_or(0.0, |m| m.values().sum());
            return Ok((1.0 - faults).max(0.0));
        }
        modes
            .and_then(|m| m.get(&mode))
            .copied()
            .ok_or_else(|| QuantError::Missing {
                var: var.to_string(),
                mode,
            })
    }
}

/// Product of the literal probabilities.
pub fn scenario_probability(s: &Scenario, d: &FailureData) -> Result<f64, QuantError> {
    s.assignment
        .iter()
        .try_fold(1.0, |acc, (v, m)| Ok(acc * d.probability(v, *m)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    RareEvent,
    InclusionExclusion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantResult {
    pub scenario_probabilities: Vec<f64>,
    /// Sum of scenario probabilities, clamped to 1.
    pub rare_event: f64,
    pub rare_event_clamped: bool,
    /// Exact probability of the disjunction, when computed.
    pub exact: Option<f64>,
    pub notes: Vec<String>,
}

pub fn aggregate(f: &ScenarioFormula, d: &FailureData, method: Method) -> Result<QuantResult, QuantError> {
    let probs = f
        .scenarios
        .iter()
        .map(|s| scenario_probability(s, d))
        .collect::<Result<Vec<_>, _>>()?;
    let sum: f64 = probs.iter().sum();
    let clamped = sum > 1.0;
    let mut notes = vec!["input failures are assumed independent".to_string()];
    if clamped {
        notes.push(format!("rare-event sum {sum} exceeds 1 and was clamped"));
    }
    let exact = match method {
        Method::RareEvent => None,
        Method::InclusionExclusion => Some(inclusion_exclusion(f, d)?),
    };
    Ok(QuantResult {
        scenario_probabilities: probs,
        rare_event: sum.min(1.0),
        rare_event_clamped: clamped,
        exact,
        notes,
    })
}

/// Exact probability of the disjunction. Intersections that assign two modes
/// to one variable are impossible and, with all their supersets, skipped.
pub fn inclusion_exclusion(f: &ScenarioFormula, d: &FailureData) -> Result<f64, QuantError> {
    let n = f.scenarios.len();
    if n > MAX_EXACT_SCENARIOS {
        return Err(QuantError::TooManyScenarios(n));
    }
    fn walk(
        scenarios: &[Scenario],
        next: usize,
        merged: &BTreeMap<String, FailureMode>,
        size: usize,
        d: &FailureData,
    ) -> Result<f64, QuantError> {
        let mut total = 0.0;
        for i in next..scenarios.len() {
            let mut m = merged.clone();
            let consistent = scenarios[i]
                .assignment
                .iter()
                .all(|(v, mode)| *m.entry(v.clone()).or_insert(*mode) == *mode);
            if !consistent {
                continue;
            }
            let p = scenario_probability(
                &Scenario {
                    assignment: m.clone(),
                },
                d,
            )?;
            let sign = if size.is_multiple_of(2) { 1.0 } else { -1.0 };
            total += sign * p + walk(scenarios, i + 1, &m, size + 1, d)?;
        }
        Ok(total)
    }
    let p = walk(&f.scenarios, 0, &BTreeMap::new(), 0, d)?;
    Ok(p.clamp(0.0, 1.0))
}
