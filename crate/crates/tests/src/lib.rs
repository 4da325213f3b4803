//! Independent reference data and checkers used by the acceptance run.

use std::collections::{BTreeMap, BTreeSet};

use fmr::catalog::{BlockKind, Catalog, FmbVariant};
use fmr::engine::{cone_input_signature, ScenarioFormula};
use fmr::mode::{FailureMode, SignalType};
use fmr::program::ProgramGraph;
use fmr::quantify::FailureData;

/// Output modes per input tuple, with the subset flagged uncertain.
pub type TruthTable = BTreeMap<Vec<FailureMode>, (BTreeSet<FailureMode>, BTreeSet<FailureMode>)>;

const AVG_ADD: &str = "l l>l  l m>l  l h>a  m l>l  m m>m  m h>h  h l>a  h m>h  h h>h";
const SUB: &str = "l l>a  l m>l  l h>l  m l>h  m m>m  m h>l  h l>h  h m>h  h h>a";
const ABS: &str = "l>l  m>m  h>h  l>h  m>h  h>l  l>a  h>a";
const GCOM: &str = "l>m  m>m  h>m  l>f  h>t  l>m  m>m  h>m";
const LCOM: &str = "h>m  m>m  l>m  h>f  l>t  h>m  m>m  l>m";
const NOT: &str = "m>m  f>t  t>f  m>m";
const AND: &str = "m m>m  m f>m  m t>m  m m>m  f m>m  f f>f  f t>m  f m>f \
                   t m>m  t f>m  t t>t  t m>t_u  m m>m  m f>f  m t>t_u  m m>m";
const OR: &str = "m m>m  m f>f_u  m t>t  m m>m  f m>f_u  f f>f  f t>m  f m>m \
                  t m>t  t f>m  t t>t  t m>m  m m>m  m f>m  m t>m  m m>m";

/// Reference truth tables, one row per case of reported/actual ordering.
/// `a` stands for every real mode; `_u` marks an uncertain outcome.
pub fn reference_table(kind: BlockKind) -> TruthTable {
    let text = match kind {
        BlockKind::Avg | BlockKind::Add => AVG_ADD,
        BlockKind::Sub => SUB,
        BlockKind::Abs => ABS,
        BlockKind::Gcom { .. } => GCOM,
        BlockKind::Lcom { .. } => LCOM,
        BlockKind::Not => NOT,
        BlockKind::And => AND,
        BlockKind::Or => OR,
    };
    let mut table = TruthTable::new();
    for row in split_rows(text) {
        let (ins, out) = row.split_once('>').expect("row has an arrow");
        let inputs: Vec<FailureMode> = ins.split_whitespace().map(|m| m.parse().expect("mode")).collect();
        let (out, uncertain) = match out.strip_suffix("_u") {
            Some(o) => (o, true),
            None => (out, false),
        };
        let outs: Vec<FailureMode> = if out == "a" {
            SignalType::Real.alphabet().to_vec()
        } else {
            vec![out.parse().expect("mode")]
        };
        let entry = table.entry(inputs).or_default();
        for o in outs {
            entry.0.insert(o);
            if uncertain {
                entry.1.insert(o);
            }
        }
    }
    table
}

fn split_rows(text: &str) -> Vec<String> {
    let mut rows = Vec::new();
    let mut cur = String::new();
    for tok in text.split_whitespace() {
        if !cur.is_empty() {
            cur.push(' ');
        }
        cur.push_str(tok);
        if tok.contains('>') {
            rows.push(std::mem::take(&mut cur));
        }
    }
    rows
}

/// Probability that the formula holds, by summing over every joint mode
/// assignment of the mentioned variables.
pub fn enumerated_probability(
    f: &ScenarioFormula,
    d: &FailureData,
    types: &BTreeMap<String, SignalType>,
) -> f64 {
    let vars: Vec<&String> = {
        let mut v: BTreeSet<&String> = BTreeSet::new();
        for s in &f.scenarios {
            v.extend(s.assignment.keys());
        }
        v.into_iter().collect()
    };
    let mut total = 0.0;
    let mut assignment = BTreeMap::new();
    enumerate(
        &vars,
        0,
        1.0,
        &mut assignment,
        &mut |a, p| {
            if f.scenarios.iter().any(|s| s.satisfied_by(a)) {
                total += p;
            }
        },
        d,
        types,
    );
    total
}

fn enumerate(
    vars: &[&String],
    i: usize,
    p: f64,
    a: &mut BTreeMap<String, FailureMode>,
    visit: &mut dyn FnMut(&BTreeMap<String, FailureMode>, f64),
    d: &FailureData,
    types: &BTreeMap<String, SignalType>,
) {
    if i == vars.len() {
        visit(a, p);
        return;
    }
    let v = vars[i];
    for m in types[v.as_str()].alphabet() {
        let pm = d.probability(v, *m).unwrap_or(0.0);
        a.insert(v.clone(), *m);
        enumerate(vars, i + 1, p * pm, a, visit, d, types);
    }
    a.remove(v.as_str());
}

/// Output modes of a two-block chain `f ; g` for every input tuple, by
/// feeding each mode `f` may produce into `g`.
pub fn kleisli_chain(chain: &ProgramGraph) -> BTreeMap<Vec<FailureMode>, BTreeSet<FailureMode>> {
    let catalog = Catalog::builtin();
    let topo = chain.topo_order();
    let (f, g) = (topo[0], topo[1]);
    let fmb_f = catalog
        .fmb(&f.op, FmbVariant::Theoretical)
        .expect("catalog block");
    let fmb_g = catalog
        .fmb(&g.op, FmbVariant::Theoretical)
        .expect("catalog block");
    let target = g.output;
    let sig = cone_input_signature(chain, target);
    let mut tuples: Vec<Vec<FailureMode>> = vec![vec![]];
    for (_, ty) in &sig {
        tuples = tuples
            .iter()
            .flat_map(|t| ty.alphabet().iter().map(move |m| [t.clone(), vec![*m]].concat()))
            .collect();
    }
    let mut out = BTreeMap::new();
    for tuple in tuples {
        let mode_of = |v: usize| {
            let name = &chain.var(v).name;
            tuple[sig.iter().position(|(n, _)| n == name).expect("cone input")]
        };
        let f_in: Vec<FailureMode> = f.inputs.iter().map(|v| mode_of(*v)).collect();
        let mut modes = BTreeSet::new();
        for w in fmb_f.forward_modes(&f_in, true).expect("legal").modes.iter() {
            let g_in: Vec<FailureMode> = g
                .inputs
                .iter()
                .map(|v| if *v == f.output { w } else { mode_of(*v) })
                .collect();
            modes.extend(fmb_g.forward_modes(&g_in, true).expect("legal").modes.iter());
        }
        out.insert(tuple, modes);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_tables_cover_every_tuple() {
        for kind in [
            BlockKind::Avg,
            BlockKind::Sub,
            BlockKind::Abs,
            BlockKind::Gcom { k: 0.0 },
            BlockKind::Not,
            BlockKind::And,
            BlockKind::Or,
        ] {
            let t = reference_table(kind);
            let n: usize = kind.input_types().iter().map(|ty| ty.alphabet().len()).product();
            assert_eq!(t.len(), n, "{}", kind.name());
        }
    }

    #[test]
    fn uncertain_rows_are_flagged() {
        let and = reference_table(BlockKind::And);
        let t = FailureMode::TrueFault;
        let m = FailureMode::Match;
        assert_eq!(and[&vec![t, m]].1, BTreeSet::from([t]));
        assert_eq!(and[&vec![t, m]].0, BTreeSet::from([m, t]));
        let or = reference_table(BlockKind::Or);
        assert_eq!(or.values().map(|r| r.1.len()).sum::<usize>(), 2);
    }
}
