//! Analysis reports: the JSON document and its text renderings.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::engine::{Analysis, AnalysisOptions, Derivation, ModeLiteral};
use crate::quantify::{Method, QuantResult};

pub const REPORT_FORMAT: &str = "fmr-report/1";

/// JSON Schema for [`Report`].
pub const REPORT_SCHEMA: &str = include_str!("../../../docs/report.schema.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantification {
    pub method: Method,
    #[serde(flatten)]
    pub result: QuantResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub format: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub program: Option<String>,
    pub target: ModeLiteral,
    pub label: Option<String>,
    pub options: AnalysisOptions,
    pub reachable: bool,
    /// Each scenario as literals sorted by variable name.
    pub scenarios: Vec<Vec<ModeLiteral>>,
    /// Aligned with `scenarios`.
    pub provenance: Vec<Derivation>,
    pub notes: Vec<String>,
    pub quantification: Option<Quantification>,
}

impl Report {
    pub fn new(analysis: &Analysis) -> Self {
        Report {
            format: REPORT_FORMAT.to_string(),
            program: None,
            target: analysis.formula.target.clone(),
            label: None,
            options: analysis.options,
            reachable: analysis.reachable(),
            scenarios: analysis.formula.scenarios.iter().map(|s| s.literals()).collect(),
            provenance: analysis.derivations.clone(),
            notes: analysis.notes.clone(),
            quantification: None,
        }
    }

    pub fn with_program(mut self, program: impl Into<String>) -> Self {
        self.program = Some(program.into());
        self
    }

    pub fn with_label(mut self, label: Option<String>) -> Self {
        self.label = label;
        self
    }

    pub fn with_quantification(mut self, method: Method, result: QuantResult) -> Self {
        self.quantification = Some(Quantification { method, result });
        self
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    fn header(&self, out: &mut String) {
        if let Some(p) = &self.program {
            let _ = writeln!(out, "program: {p}");
        }
        let _ = write!(out, "target: {}", self.target);
        if let Some(l) = &self.label {
            let _ = write!(out, " ({l})");
        }
        out.push('\n');
        let on = |b: bool| if b { "on" } else { "off" };
        let _ = writeln!(
            out,
            "options: variant={} prune-match={} include-uncertain={}",
            self.options.fmb_variant,
            on(self.options.prune_match),
            on(self.options.include_uncertain)
        );
    }

    fn scenario_line(lits: &[ModeLiteral]) -> String {
        if lits.is_empty() {
            return "true".to_string();
        }
        lits.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(" ∧ ")
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        self.header(&mut out);
        if self.scenarios.is_empty() {
            out.push_str("no scenarios: target unreachable\n");
        } else {
            let _ = writeln!(out, "{} scenario(s):", self.scenarios.len());
        }
        let probs = self
            .quantification
            .as_ref()
            .map(|q| &q.result.scenario_probabilities);
        for (i, s) in self.scenarios.iter().enumerate() {
            let _ = write!(out, "  {:>3}. {}", i + 1, Self::scenario_line(s));
            if self.provenance.get(i).is_some_and(|d| d.uncertain) {
                out.push_str("  [uncertain]");
            }
            if let Some(p) = probs.and_then(|p| p.get(i)) {
                let _ = write!(out, "  p={p:.3e}");
            }
            out.push('\n');
        }
        if let Some(q) = &self.quantification {
            let _ = write!(out, "probability: rare-event {:.3e}", q.result.rare_event);
            if q.result.rare_event_clamped {
                out.push_str(" (clamped)");
            }
            if let Some(e) = q.result.exact {
                let _ = write!(out, ", exact {e:.3e}");
            }
            out.push('\n');
            for n in &q.result.notes {
                let _ = writeln!(out, "note: {n}");
            }
        }
        for n in &self.notes {
            let _ = writeln!(out, "note: {n}");
        }
        out
    }

    /// One block per scenario listing its chain of substitutions, from the
    /// target down to the inputs.
    pub fn render_explain(&self) -> String {
        let mut out = String::new();
        self.header(&mut out);
        if self.scenarios.is_empty() {
            out.push_str("no scenarios: target unreachable\n");
        }
        for (i, s) in self.scenarios.iter().enumerate() {
            let _ = writeln!(out, "scenario {}: {}", i + 1, Self::scenario_line(s));
            if let Some(d) = self.provenance.get(i) {
                for step in &d.steps {
                    let _ = writeln!(out, "    {step}");
                }
            }
        }
        for n in &self.notes {
            let _ = writeln!(out, "note: {n}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::backward_analyze;
    use crate::mode::FailureMode;
    use crate::program::parse_program;
    use crate::quantify::{aggregate, FailureData};

    const T_AVG: &str = "fmrprog v1\ninput i1 : real\ninput i2 : real\ninternal w : real\n\
        output o : bool\nblock avg = Avg(i1, i2) -> w\nblock cmp = GcomK[10](w) -> o\n";

    fn report() -> Report {
        let g = parse_program(T_AVG).unwrap();
        let a = backward_analyze(&g, "o", FailureMode::FalseFault, AnalysisOptions::default()).unwrap();
        let d = FailureData::from_json(r#"{"i1": {"l": 1e-3}, "i2": {"l": 1e-3}}"#).unwrap();
        let q = aggregate(&a.formula, &d, Method::InclusionExclusion).unwrap();
        Report::new(&a)
            .with_program("t_avg.fmrprog")
            .with_label(Some("DU".into()))
            .with_quantification(Method::InclusionExclusion, q)
    }

    #[test]
    fn json_shape() {
        let r = report();
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["format"], REPORT_FORMAT);
        assert_eq!(v["target"], serde_json::json!({"var": "o", "mode": "f"}));
        assert_eq!(
            v["scenarios"],
            serde_json::json!([[{"var": "i1", "mode": "l"}], [{"var": "i2", "mode": "l"}]])
        );
        assert_eq!(v["options"]["fmb_variant"], "practical");
        assert_eq!(v["quantification"]["method"], "inclusion_exclusion");
        assert_eq!(v["provenance"][0]["steps"][1]["block"], "avg");
    }

    #[test]
    fn json_round_trips() {
        let r = report();
        let text = r.to_json();
        let back = Report::from_json(&text).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.to_json(), text);
    }

    #[test]
    fn text_renderings() {
        let r = report();
        let t = r.render_text();
        assert!(t.contains("target: o=f (DU)"), "{t}");
        assert!(t.contains("1. i1=l"), "{t}");
        assert!(t.contains("exact 1.999e-3"), "{t}");
        let e = r.render_explain();
        assert!(e.contains("{ w=l } GcomK[10] [cmp] { o=f }"), "{e}");
        assert!(e.contains("{ i1=l ∧ i2=m } Avg [avg] { w=l }"), "{e}");
    }
}
