//! Backward failure-mode reasoning: substitution of block inverse maps from a
//! target output literal down to the program inputs, and DNF simplification.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{cartesian, CatalogError, FmbVariant};
use crate::mode::{FailureMode, SignalType};
use crate::program::{ProgramGraph, Role, VarId};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ModeLiteral {
    pub var: String,
    pub mode: FailureMode,
}

impl ModeLiteral {
    pub fn new(var: impl Into<String>, mode: FailureMode) -> Self {
        ModeLiteral {
            var: var.into(),
            mode,
        }
    }
}

impl fmt::Display for ModeLiteral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}", self.var, self.mode)
    }
}

/// A conjunction of literals, at most one per variable.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Scenario {
    pub assignment: BTreeMap<String, FailureMode>,
}

impl Scenario {
    /// Builds a scenario; `None` if two literals disagree on a variable.
    pub fn from_literals(literals: impl IntoIterator<Item = ModeLiteral>) -> Option<Scenario> {
        let mut assignment = BTreeMap::new();
        for lit in literals {
            if let Some(prev) = assignment.insert(lit.var, lit.mode) {
                if prev != lit.mode {
                    return None;
                }
            }
        }
        Some(Scenario { assignment })
    }

    pub fn literals(&self) -> Vec<ModeLiteral> {
        self.assignment
            .iter()
            .map(|(v, m)| ModeLiteral::new(v.clone(), *m))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    /// True if every literal of `self` also appears in `other`.
    pub fn subsumes(&self, other: &Scenario) -> bool {
        self.assignment.len() <= other.assignment.len()
            && self
                .assignment
                .iter()
                .all(|(v, m)| other.assignment.get(v) == Some(m))
    }

    /// Whether a full assignment satisfies this conjunction.
    pub fn satisfied_by(&self, assignment: &BTreeMap<String, FailureMode>) -> bool {
        self.assignment.iter().all(|(v, m)| assignment.get(v) == Some(m))
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.assignment.is_empty() {
            return f.write_str("true");
        }
        let parts: Vec<String> = self.literals().iter().map(|l| l.to_string()).collect();
        f.write_str(&parts.join(" ∧ "))
    }
}

/// A disjunction of scenarios that cause `target`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioFormula {
    pub target: ModeLiteral,
    pub scenarios: Vec<Scenario>,
}

impl ScenarioFormula {
    pub fn satisfied_by(&self, assignment: &BTreeMap<String, FailureMode>) -> bool {
        self.scenarios.iter().any(|s| s.satisfied_by(assignment))
    }
}

impl fmt::Display for ScenarioFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.scenarios.is_empty() {
            return f.write_str("false");
        }
        let parts: Vec<String> = self.scenarios.iter().map(|s| format!("({s})")).collect();
        f.write_str(&parts.join(" ∨ "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub fmb_variant: FmbVariant,
    pub prune_match: bool,
    pub include_uncertain: bool,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            fmb_variant: FmbVariant::Practical,
            prune_match: true,
            include_uncertain: false,
        }
    }
}

impl AnalysisOptions {
    /// Theoretical tables, no pruning, uncertain rows used.
    pub fn exhaustive() -> Self {
        AnalysisOptions {
            fmb_variant: FmbVariant::Theoretical,
            prune_match: false,
            include_uncertain: true,
        }
    }
}

/// One substitution: the literal on a block's output replaced by one of the
/// input conjunctions of its inverse map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub block: String,
    pub kind: String,
    pub output: ModeLiteral,
    pub inputs: Vec<ModeLiteral>,
    pub uncertain: bool,
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pre: Vec<String> = self.inputs.iter().map(|l| l.to_string()).collect();
        write!(
            f,
            "{{ {} }} {} [{}] {{ {} }}{}",
            pre.join(" ∧ "),
            self.kind,
            self.block,
            self.output,
            if self.uncertain { "  (uncertain)" } else { "" }
        )
    }
}

/// How a scenario was derived from the target.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Derivation {
    pub steps: Vec<Step>,
    pub uncertain: bool,
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub formula: ScenarioFormula,
    /// Aligned with `formula.scenarios`.
    pub derivations: Vec<Derivation>,
    pub options: AnalysisOptions,
    pub notes: Vec<String>,
}

impl Analysis {
    pub fn reachable(&self) -> bool {
        !self.formula.scenarios.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("unknown variable '{0}'")]
    UnknownVariable(String),
    #[error("'{0}' is not an output variable")]
    NotOutput(String),
    #[error("mode '{mode}' is not legal for {ty} variable '{var}'")]
    IllegalMode {
        var: String,
        mode: FailureMode,
        ty: SignalType,
    },
    #[error(transparent)]
    Catalog(#[from] CatalogError),
}

type Lits = Vec<(VarId, FailureMode)>;

struct Partial {
    lits: Lits,
    deriv: Derivation,
}

/// Inserts a literal keeping `lits` sorted; `false` on a mode conflict.
fn insert_lit(lits: &mut Lits, var: VarId, mode: FailureMode) -> bool {
    match lits.binary_search_by_key(&var, |(v, _)| *v) {
        Ok(i) => lits[i].1 == mode,
        Err(i) => {
            lits.insert(i, (var, mode));
            true
        }
    }
}

fn lits_subset(small: &Lits, big: &Lits) -> bool {
    if small.len() > big.len() {
        return false;
    }
    let mut it = big.iter();
    small.iter().all(|s| it.any(|b| b == s))
}

/// Drops duplicates and scenarios that are supersets of another, keeping the
/// first derivation seen for each survivor.
fn absorb(parts: Vec<Partial>) -> Vec<Partial> {
    let mut parts = parts;
    parts.sort_by(|a, b| a.lits.len().cmp(&b.lits.len()).then_with(|| a.lits.cmp(&b.lits)));
    let mut kept: Vec<Partial> = Vec::with_capacity(parts.len());
    let mut seen: BTreeSet<Lits> = BTreeSet::new();
    for p in parts {
        if seen.contains(&p.lits) {
            continue;
        }
        if kept.iter().any(|k| lits_subset(&k.lits, &p.lits)) {
            continue;
        }
        seen.insert(p.lits.clone());
        kept.push(p);
    }
    kept
}

/// Propagates `target_var = target_mode` backwards to the program inputs.
pub fn backward_analyze(
    g: &ProgramGraph,
    target_var: &str,
    target_mode: FailureMode,
    opts: AnalysisOptions,
) -> Result<Analysis, EngineError> {
    let target = g
        .var_id(target_var)
        .ok_or_else(|| EngineError::UnknownVariable(target_var.to_string()))?;
    let tv = g.var(target);
    if tv.role != Role::Output {
        return Err(EngineError::NotOutput(target_var.to_string()));
    }
    if !target_mode.is_legal_for(tv.ty) {
        return Err(EngineError::IllegalMode {
            var: target_var.to_string(),
            mode: target_mode,
            ty: tv.ty,
        });
    }

    let lit = |v: VarId, m: FailureMode| ModeLiteral::new(g.var(v).name.clone(), m);
    let mut parts = vec![Partial {
        lits: vec![(target, target_mode)],
        deriv: Derivation::default(),
    }];

    let mut cone = g.cone_blocks(target);
    cone.reverse();
    for bid in cone {
        let block = &g.blocks()[bid];
        let fmb = g.catalog().fmb(&block.op, opts.fmb_variant)?;
        let out = block.output;
        let mut next = Vec::with_capacity(parts.len());
        let mut touched = false;
        for part in parts {
            let Ok(pos) = part.lits.binary_search_by_key(&out, |(v, _)| *v) else {
                next.push(part);
                continue;
            };
            touched = true;
            let mode = part.lits[pos].1;
            let mut base = part.lits.clone();
            base.remove(pos);
            for row in fmb.rows() {
                if row.output != mode || (row.uncertain && !opts.include_uncertain) {
                    continue;
                }
                let mut lits = base.clone();
                let ok = block
                    .inputs
                    .iter()
                    .zip(&row.inputs)
                    .all(|(&v, &m)| (opts.prune_match && m.is_match()) || insert_lit(&mut lits, v, m));
                if !ok {
                    continue;
                }
                let mut deriv = part.deriv.clone();
                deriv.uncertain |= row.uncertain;
                deriv.steps.push(Step {
                    block: block.id.clone(),
                    kind: block.op.to_string(),
                    output: lit(out, mode),
                    inputs: block
                        .inputs
                        .iter()
                        .zip(&row.inputs)
                        .map(|(&v, &m)| lit(v, m))
                        .collect(),
                    uncertain: row.uncertain,
                });
                next.push(Partial { lits, deriv });
            }
        }
        parts = if touched { absorb(next) } else { next };
    }

    let named: Vec<(Scenario, Derivation)> = parts
        .into_iter()
        .map(|p| {
            let assignment = p.lits.iter().map(|&(v, m)| (g.var(v).name.clone(), m)).collect();
            (Scenario { assignment }, p.deriv)
        })
        .collect();
    let (scenarios, derivations) = simplify_with(named);

    let mut notes = Vec::new();
    if scenarios.is_empty() {
        notes.push(format!(
            "target {target_var}={target_mode} is unreachable under the selected options"
        ));
    }
    if derivations.iter().any(|d| d.uncertain) {
        notes.push("some scenarios rely on uncertain table rows".to_string());
    }
    if opts.prune_match {
        notes.push("inputs not mentioned in a scenario may be in any mode".to_string());
    }
    Ok(Analysis {
        formula: ScenarioFormula {
            target: ModeLiteral::new(target_var, target_mode),
            scenarios,
        },
        derivations,
        options: opts,
        notes,
    })
}

fn simplify_with<T>(items: Vec<(Scenario, T)>) -> (Vec<Scenario>, Vec<T>) {
    let mut items = items;
    items.sort_by(|a, b| a.0.len().cmp(&b.0.len()).then_with(|| a.0.cmp(&b.0)));
    let mut kept: Vec<(Scenario, T)> = Vec::with_capacity(items.len());
    for (s, t) in items {
        if kept.iter().any(|(k, _)| k.subsumes(&s)) {
            continue;
        }
        kept.push((s, t));
    }
    kept.sort_by(|a, b| a.0.cmp(&b.0));
    kept.into_iter().unzip()
}

/// Dedups, applies absorption and sorts by (variable, mode) sequences.
pub fn simplify(formula: &ScenarioFormula) -> ScenarioFormula {
    let items = formula.scenarios.iter().cloned().map(|s| (s, ())).collect();
    ScenarioFormula {
        target: formula.target.clone(),
        scenarios: simplify_with(items).0,
    }
}

/// Builds a simplified formula from raw conjunctions, dropping contradictory
/// ones.
pub fn simplify_dnf(target: ModeLiteral, conjunctions: Vec<Vec<ModeLiteral>>) -> ScenarioFormula {
    let scenarios = conjunctions
        .into_iter()
        .filter_map(Scenario::from_literals)
        .collect();
    simplify(&ScenarioFormula { target, scenarios })
}

/// Every full assignment over `vars` satisfying the formula, with unmentioned
/// variables free. Tuples follow the order of `vars`.
pub fn expand_any(formula: &ScenarioFormula, vars: &[(String, SignalType)]) -> BTreeSet<Vec<FailureMode>> {
    let mut out = BTreeSet::new();
    for s in &formula.scenarios {
        let choices: Vec<Vec<FailureMode>> = vars
            .iter()
            .map(|(name, ty)| match s.assignment.get(name) {
                Some(m) => vec![*m],
                None => ty.alphabet().to_vec(),
            })
            .collect();
        out.extend(cartesian(&choices));
    }
    out
}

/// The one tuple per scenario with every unmentioned variable at `m`.
pub fn expand_match_elsewhere(formula: &ScenarioFormula, vars: &[String]) -> BTreeSet<Vec<FailureMode>> {
    formula
        .scenarios
        .iter()
        .map(|s| {
            vars.iter()
                .map(|v| s.assignment.get(v).copied().unwrap_or(FailureMode::Match))
                .collect()
        })
        .collect()
}

/// Names and types of the inputs in the target's cone, in declaration order.
pub fn cone_input_signature(g: &ProgramGraph, target: VarId) -> Vec<(String, SignalType)> {
    g.cone_inputs(target)
        .into_iter()
        .map(|v| (g.var(v).name.clone(), g.var(v).ty))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::parse_program;
    use proptest::prelude::*;
    use FailureMode::*;

    const T_AVG: &str = "fmrprog v1\ninput i1 : real\ninput i2 : real\ninternal w : real\n\
        output o : bool\nblock avg = Avg(i1, i2) -> w\nblock cmp = GcomK[10](w) -> o\n";
    const T_OR: &str = "fmrprog v1\ninput i1 : real\ninput i2 : real\ninternal v : bool\n\
        internal z : bool\noutput o : bool\nblock g1 = GcomK[10](i1) -> v\n\
        block g2 = GcomK[10](i2) -> z\nblock or = Or(v, z) -> o\n";

    fn sc(lits: &[(&str, FailureMode)]) -> Scenario {
        Scenario::from_literals(lits.iter().map(|(v, m)| ModeLiteral::new(*v, *m))).unwrap()
    }

    #[test]
    fn t_avg_false_output() {
        let g = parse_program(T_AVG).unwrap();
        let a = backward_analyze(&g, "o", FalseFault, AnalysisOptions::default()).unwrap();
        assert_eq!(a.formula.scenarios, vec![sc(&[("i1", Low)]), sc(&[("i2", Low)])]);
        assert_eq!(a.formula.to_string(), "(i1=l) ∨ (i2=l)");
        assert_eq!(a.derivations.len(), 2);
        let steps = &a.derivations[0].steps;
        assert_eq!(steps[0].block, "cmp");
        assert_eq!(steps[0].inputs, vec![ModeLiteral::new("w", Low)]);
        assert_eq!(steps[1].block, "avg");
        assert_eq!(steps[1].output, ModeLiteral::new("w", Low));
    }

    #[test]
    fn t_or_practical_needs_both_low() {
        let g = parse_program(T_OR).unwrap();
        let a = backward_analyze(&g, "o", FalseFault, AnalysisOptions::default()).unwrap();
        assert_eq!(a.formula.scenarios, vec![sc(&[("i1", Low), ("i2", Low)])]);
    }

    #[test]
    fn t_or_with_uncertain_rows() {
        let g = parse_program(T_OR).unwrap();
        let opts = AnalysisOptions {
            include_uncertain: true,
            fmb_variant: FmbVariant::Theoretical,
            ..Default::default()
        };
        let a = backward_analyze(&g, "o", FalseFault, opts).unwrap();
        assert_eq!(a.formula.scenarios, vec![sc(&[("i1", Low)]), sc(&[("i2", Low)])]);
        assert!(a.derivations.iter().all(|d| d.uncertain));
    }

    #[test]
    fn single_comparator() {
        let g = parse_program("fmrprog v1\ninput i : real\noutput o : bool\nblock c = GcomK[3](i) -> o\n")
            .unwrap();
        let a = backward_analyze(&g, "o", FalseFault, AnalysisOptions::default()).unwrap();
        assert_eq!(a.formula.scenarios, vec![sc(&[("i", Low)])]);
        let t = backward_analyze(&g, "o", TrueFault, AnalysisOptions::default()).unwrap();
        assert_eq!(t.formula.scenarios, vec![sc(&[("i", High)])]);
    }

    #[test]
    fn match_target_with_pruning_is_unconstrained() {
        let g = parse_program(T_AVG).unwrap();
        let a = backward_analyze(&g, "o", Match, AnalysisOptions::default()).unwrap();
        assert_eq!(a.formula.scenarios, vec![Scenario::default()]);
    }

    #[test]
    fn fan_out_conflicts_are_dropped() {
        // o = And(GcomK(x), LcomK(x)): f needs x low for one and x high for the other
        let text = "fmrprog v1\ninput x : real\ninternal a : bool\ninternal b : bool\noutput o : bool\n\
            block ga = GcomK[0](x) -> a\nblock lb = LcomK[0](x) -> b\nblock and = And(a, b) -> o\n";
        let g = parse_program(text).unwrap();
        let a = backward_analyze(&g, "o", FalseFault, AnalysisOptions::default()).unwrap();
        assert_eq!(a.formula.scenarios, vec![sc(&[("x", Low)]), sc(&[("x", High)])]);
        let both = backward_analyze(&g, "o", TrueFault, AnalysisOptions::exhaustive()).unwrap();
        for s in &both.formula.scenarios {
            assert_eq!(s.len(), 1);
        }
    }

    #[test]
    fn fan_out_unifies_shared_inputs() {
        let text = "fmrprog v1\ninput x : real\ninternal a : bool\ninternal b : bool\noutput o : bool\n\
            block ga = GcomK[0](x) -> a\nblock gb = GcomK[0](x) -> b\nblock and = And(a, b) -> o\n";
        let g = parse_program(text).unwrap();
        let a = backward_analyze(&g, "o", TrueFault, AnalysisOptions::exhaustive()).unwrap();
        assert_eq!(a.formula.scenarios, vec![sc(&[("x", High)])]);
    }

    #[test]
    fn empty_result_has_note() {
        let fmbs =
            crate::catalog::parse_fmb_tables("fmb v1 Stuck (bool) -> bool\nm -> m\nf -> m\nt -> m\nend\n")
                .unwrap();
        let cat = crate::catalog::Catalog::builtin().with_custom(fmbs).unwrap();
        let g = crate::program::parse_program_with(
            "fmrprog v1\ninput x : bool\noutput o : bool\nblock s = Stuck(x) -> o\n",
            &cat,
        )
        .unwrap();
        let a = backward_analyze(&g, "o", TrueFault, AnalysisOptions::default()).unwrap();
        assert!(!a.reachable());
        assert!(a.notes[0].contains("unreachable"));
    }

    #[test]
    fn errors() {
        let g = parse_program(T_AVG).unwrap();
        let o = AnalysisOptions::default();
        assert_eq!(
            backward_analyze(&g, "nope", Low, o).unwrap_err(),
            EngineError::UnknownVariable("nope".into())
        );
        assert_eq!(
            backward_analyze(&g, "w", Low, o).unwrap_err(),
            EngineError::NotOutput("w".into())
        );
        assert!(matches!(
            backward_analyze(&g, "o", Low, o).unwrap_err(),
            EngineError::IllegalMode { .. }
        ));
    }

    #[test]
    fn simplify_examples() {
        let t = ModeLiteral::new("o", FalseFault);
        let a = ModeLiteral::new("i1", Low);
        let b = ModeLiteral::new("i2", High);
        let f = simplify_dnf(t.clone(), vec![vec![a.clone()], vec![a.clone(), b.clone()]]);
        assert_eq!(f.scenarios, vec![sc(&[("i1", Low)])]);
        let f = simplify_dnf(t.clone(), vec![vec![a.clone(), ModeLiteral::new("i1", High)]]);
        assert!(f.scenarios.is_empty());
        let f = simplify_dnf(t.clone(), vec![vec![a.clone()], vec![a.clone()]]);
        assert_eq!(f.scenarios.len(), 1);
        let f = simplify_dnf(
            t,
            vec![
                vec![b.clone()],
                vec![a.clone()],
                vec![ModeLiteral::new("i1", Match)],
            ],
        );
        assert_eq!(f.to_string(), "(i1=l) ∨ (i1=m) ∨ (i2=h)");
    }

    #[test]
    fn expansions() {
        let f = ScenarioFormula {
            target: ModeLiteral::new("o", FalseFault),
            scenarios: vec![sc(&[("a", Low)])],
        };
        let vars = vec![
            ("a".to_string(), SignalType::Real),
            ("b".to_string(), SignalType::Bool),
        ];
        assert_eq!(expand_any(&f, &vars).len(), 3);
        let names = vec!["a".to_string(), "b".to_string()];
        assert_eq!(
            expand_match_elsewhere(&f, &names),
            BTreeSet::from([vec![Low, Match]])
        );
    }

    fn arb_dnf() -> impl Strategy<Value = Vec<Vec<ModeLiteral>>> {
        let lit = (0usize..4, 0usize..3)
            .prop_map(|(v, m)| ModeLiteral::new(format!("x{v}"), SignalType::Real.alphabet()[m]));
        prop::collection::vec(prop::collection::vec(lit, 0..4), 0..8)
    }

    proptest! {
        #[test]
        fn simplify_preserves_models(dnf in arb_dnf()) {
            let vars: Vec<(String, SignalType)> = (0..4).map(|i| (format!("x{i}"), SignalType::Real)).collect();
            let t = ModeLiteral::new("o", FalseFault);
            let raw = ScenarioFormula {
                target: t.clone(),
                scenarios: dnf.iter().cloned().filter_map(Scenario::from_literals).collect(),
            };
            let s = simplify_dnf(t, dnf);
            prop_assert_eq!(expand_any(&raw, &vars), expand_any(&s, &vars));
            for (i, a) in s.scenarios.iter().enumerate() {
                for (j, b) in s.scenarios.iter().enumerate() {
                    prop_assert!(i == j || !a.subsumes(b));
                }
            }
            let mut sorted = s.scenarios.clone();
            sorted.sort();
            prop_assert_eq!(&sorted, &s.scenarios);
            prop_assert_eq!(simplify(&s), s);
        }
    }
}
