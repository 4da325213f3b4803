//! Brute-force checking against concrete semantics.
//!
//! Reported and actual value vectors are drawn from a finite witness grid,
//! simulated forward through the program, and every classified
//! (input modes, output mode) observation is recorded. Block tables are
//! checked for soundness (every row has a witness) and completeness (every
//! observation is a row); whole programs yield their causing-mode sets.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::catalog::{BlockKind, BlockOp, Catalog, Fmb, FmbVariant};
use crate::mode::{classify_bool, classify_real, FailureMode, FailureState, SignalType, Value};
use crate::program::{ProgramBuilder, ProgramGraph, Role, VarId};

pub const DEFAULT_DELTA: f64 = 0.5;
pub const GRID_DELTA_ENV: &str = "FMR_GRID_DELTA";
pub const MAX_INPUTS: usize = 8;
const MAX_PAIRS: u128 = 4_000_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("grid does not cover threshold {threshold}: needs two samples strictly on each side")]
    Coverage { threshold: f64 },
    #[error("grid delta must be a positive finite number, got '{0}'")]
    BadDelta(String),
    #[error("{0} inputs exceed the enumeration bound of {MAX_INPUTS}")]
    TooManyInputs(usize),
    #[error("enumeration would visit {0} value pairs")]
    TooLarge(u128),
    #[error("block '{0}' has no concrete semantics")]
    NoSemantics(String),
    #[error("unknown variable '{0}'")]
    UnknownVariable(String),
    #[error("mode '{mode}' is not legal for {ty}")]
    IllegalMode { mode: FailureMode, ty: SignalType },
}

/// Sample values for real signals; bool signals always use both values.
#[derive(Debug, Clone, PartialEq)]
pub struct WitnessGrid {
    pub thresholds: Vec<f64>,
    pub real_values: Vec<f64>,
}

impl WitnessGrid {
    /// `{K-2δ, K-δ, K, K+δ, K+2δ}` for each threshold, plus `{-1, 0, 1}`.
    pub fn for_thresholds(thresholds: &[f64], delta: f64) -> Self {
        let mut values = vec![-1.0, 0.0, 1.0];
        for &k in thresholds {
            values.extend((-2..=2).map(|i| k + f64::from(i) * delta));
        }
        let mut ks = thresholds.to_vec();
        ks.sort_by(f64::total_cmp);
        ks.dedup();
        WitnessGrid {
            thresholds: ks,
            real_values: sorted_dedup(values),
        }
    }

    /// Samples around every threshold `K` of the program and around `-K`,
    /// which `Abs` folds onto `K`.
    pub fn for_program(g: &ProgramGraph, delta: f64) -> Self {
        let ks = g.thresholds();
        let mirrored: Vec<f64> = ks.iter().flat_map(|k| [*k, -k]).collect();
        let mut grid = Self::for_thresholds(&mirrored, delta);
        grid.thresholds = ks;
        grid
    }

    pub fn for_kind(kind: BlockKind, delta: f64) -> Self {
        Self::for_thresholds(kind.threshold().as_slice(), delta)
    }

    /// Doubles density: adds midpoints and one extra step past each end.
    pub fn densified(&self) -> Self {
        let v = &self.real_values;
        let mut out = v.clone();
        out.extend(v.windows(2).map(|w| (w[0] + w[1]) / 2.0));
        if let (Some(first), Some(last)) = (v.first(), v.last()) {
            let step = v.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
            let step = if step.is_finite() { step } else { 1.0 };
            out.push(first - step);
            out.push(last + step);
        }
        WitnessGrid {
            thresholds: self.thresholds.clone(),
            real_values: sorted_dedup(out),
        }
    }

    /// Number of (reported, actual) vector pairs for the cone of `target`.
    pub fn pair_count(&self, g: &ProgramGraph, target: VarId) -> u128 {
        let vectors: u128 = g
            .cone_inputs(target)
            .iter()
            .map(|v| self.values(g.var(*v).ty).len() as u128)
            .product();
        vectors * vectors
    }

    /// Densifies `rounds` times, stopping early once the pair count for
    /// `target` would exceed `budget`.
    pub fn refined_for(&self, g: &ProgramGraph, target: VarId, rounds: usize, budget: u128) -> Self {
        let mut grid = self.clone();
        for _ in 0..rounds {
            let next = grid.densified();
            if next.pair_count(g, target) > budget {
                break;
            }
            grid = next;
        }
        grid
    }

    /// Checks two samples strictly below and above every threshold.
    pub fn check_coverage(&self, thresholds: &[f64]) -> Result<(), OracleError> {
        for &k in thresholds {
            let below = self.real_values.iter().filter(|v| **v < k).count();
            let above = self.real_values.iter().filter(|v| **v > k).count();
            if below < 2 || above < 2 {
                return Err(OracleError::Coverage { threshold: k });
            }
        }
        if self.real_values.len() < 2 {
            return Err(OracleError::Coverage { threshold: f64::NAN });
        }
        Ok(())
    }

    fn values(&self, ty: SignalType) -> Vec<Value> {
        match ty {
            SignalType::Real => self.real_values.iter().map(|x| Value::Real(*x)).collect(),
            SignalType::Bool => vec![Value::Bool(false), Value::Bool(true)],
        }
    }
}

fn sorted_dedup(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Grid delta from `FMR_GRID_DELTA`, or the default.
pub fn delta_from_env() -> Result<f64, OracleError> {
    match std::env::var(GRID_DELTA_ENV) {
        Ok(s) => parse_delta(&s),
        Err(_) => Ok(DEFAULT_DELTA),
    }
}

pub fn parse_delta(s: &str) -> Result<f64, OracleError> {
    match s.trim().parse::<f64>() {
        Ok(d) if d.is_finite() && d > 0.0 => Ok(d),
        _ => Err(OracleError::BadDelta(s.to_string())),
    }
}

/// Concrete input and output failure states realizing one observation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub reported: Vec<Value>,
    pub actual: Vec<Value>,
    pub output_reported: Value,
    pub output_actual: Value,
}

impl Witness {
    pub fn output(&self) -> FailureState {
        FailureState::new(self.output_reported, self.output_actual)
    }
}

fn classify_values(r: Value, a: Value) -> FailureMode {
    match (r, a) {
        (Value::Real(r), Value::Real(a)) => classify_real(r, a),
        (Value::Bool(r), Value::Bool(a)) => classify_bool(r, a),
        _ => unreachable!("reported and actual share a type"),
    }
}

fn alphabet_index(ty: SignalType, m: FailureMode) -> usize {
    ty.alphabet().iter().position(|x| *x == m).expect("legal mode")
}

/// Every (input-mode tuple, output mode) pair seen on the grid, with one
/// witness each.
#[derive(Debug, Clone)]
pub struct Observations {
    pub inputs: Vec<(String, SignalType)>,
    pub output_type: SignalType,
    /// Per tuple index and output mode index, the first witness found.
    witnesses: Vec<[Option<Witness>; 3]>,
}

impl Observations {
    fn tuple_count(&self) -> usize {
        3usize.pow(self.inputs.len() as u32)
    }

    fn decode(&self, mut idx: usize) -> Vec<FailureMode> {
        let mut out = Vec::with_capacity(self.inputs.len());
        for (_, ty) in &self.inputs {
            out.push(ty.alphabet()[idx % 3]);
            idx /= 3;
        }
        out
    }

    fn encode(&self, modes: &[FailureMode]) -> usize {
        modes
            .iter()
            .zip(&self.inputs)
            .rev()
            .fold(0, |acc, (m, (_, ty))| acc * 3 + alphabet_index(*ty, *m))
    }

    /// Output modes observed for an input-mode tuple, in alphabet order.
    pub fn outputs(&self, modes: &[FailureMode]) -> Vec<FailureMode> {
        let slot = &self.witnesses[self.encode(modes)];
        self.output_type
            .alphabet()
            .iter()
            .zip(slot)
            .filter(|(_, w)| w.is_some())
            .map(|(m, _)| *m)
            .collect()
    }

    pub fn witness(&self, modes: &[FailureMode], output: FailureMode) -> Option<&Witness> {
        self.witnesses[self.encode(modes)][alphabet_index(self.output_type, output)].as_ref()
    }

    /// Input-mode tuples, in odometer order of the input alphabets.
    pub fn tuples(&self) -> Vec<Vec<FailureMode>> {
        let mut all: Vec<Vec<FailureMode>> = (0..self.tuple_count()).map(|i| self.decode(i)).collect();
        all.sort_by_key(|t| {
            t.iter()
                .zip(&self.inputs)
                .map(|(m, (_, ty))| alphabet_index(*ty, *m))
                .collect::<Vec<_>>()
        });
        all
    }

    /// Input-mode tuples for which `output` was observed.
    pub fn causing(&self, output: FailureMode) -> BTreeSet<Vec<FailureMode>> {
        let o = alphabet_index(self.output_type, output);
        (0..self.tuple_count())
            .filter(|i| self.witnesses[*i][o].is_some())
            .map(|i| self.decode(i))
            .collect()
    }
}

/// Enumerates every (reported, actual) input vector pair on the grid and
/// records what `target` classifies to.
pub fn observe_program(
    g: &ProgramGraph,
    target: VarId,
    grid: &WitnessGrid,
) -> Result<Observations, OracleError> {
    let inputs = g.cone_inputs(target);
    if inputs.len() > MAX_INPUTS {
        return Err(OracleError::TooManyInputs(inputs.len()));
    }
    let blocks = g.cone_blocks(target);
    let mut kinds = Vec::with_capacity(blocks.len());
    for &b in &blocks {
        match &g.blocks()[b].op {
            BlockOp::Builtin(k) => kinds.push(*k),
            BlockOp::Custom(name) => return Err(OracleError::NoSemantics(name.clone())),
        }
    }

    let domains: Vec<Vec<Value>> = inputs.iter().map(|v| grid.values(g.var(*v).ty)).collect();
    let vectors: usize = domains.iter().map(|d| d.len()).product();
    let pairs = grid.pair_count(g, target);
    if pairs > MAX_PAIRS {
        return Err(OracleError::TooLarge(pairs));
    }

    // output value of every input vector, indexed in mixed radix
    let mut env: Vec<Value> = vec![Value::Bool(false); g.variables().len()];
    let mut outputs = Vec::with_capacity(vectors);
    let mut args = Vec::with_capacity(2);
    for idx in 0..vectors {
        let mut rest = idx;
        for (v, dom) in inputs.iter().zip(&domains) {
            env[*v] = dom[rest % dom.len()];
            rest /= dom.len();
        }
        for (&b, kind) in blocks.iter().zip(&kinds) {
            let block = &g.blocks()[b];
            args.clear();
            args.extend(block.inputs.iter().map(|v| env[*v]));
            env[block.output] = kind.eval_unchecked(&args);
        }
        outputs.push(env[target]);
    }

    // mode index of every input's (reported, actual) value pair
    let pair_modes: Vec<Vec<usize>> = inputs
        .iter()
        .zip(&domains)
        .map(|(v, dom)| {
            let ty = g.var(*v).ty;
            let mut t = Vec::with_capacity(dom.len() * dom.len());
            for r in dom {
                for a in dom {
                    t.push(alphabet_index(ty, classify_values(*r, *a)));
                }
            }
            t
        })
        .collect();
    let digit_of = |idx: usize| -> Vec<usize> {
        let mut rest = idx;
        domains
            .iter()
            .map(|d| {
                let x = rest % d.len();
                rest /= d.len();
                x
            })
            .collect()
    };
    let digits: Vec<Vec<usize>> = (0..vectors).map(digit_of).collect();

    let out_ty = g.var(target).ty;
    let n = inputs.len();
    let mut seen: Vec<u8> = vec![0; 3usize.pow(n as u32)];
    let mut first: Vec<[Option<(u32, u32)>; 3]> = vec![[None; 3]; seen.len()];
    for r in 0..vectors {
        let rd = &digits[r];
        for a in 0..vectors {
            let ad = &digits[a];
            let mut tuple = 0usize;
            for i in (0..n).rev() {
                let d = domains[i].len();
                tuple = tuple * 3 + pair_modes[i][rd[i] * d + ad[i]];
            }
            let o = alphabet_index(out_ty, classify_values(outputs[r], outputs[a]));
            if seen[tuple] & (1 << o) == 0 {
                seen[tuple] |= 1 << o;
                first[tuple][o] = Some((r as u32, a as u32));
            }
        }
    }

    let vector = |idx: u32| -> Vec<Value> {
        digits[idx as usize]
            .iter()
            .zip(&domains)
            .map(|(d, dom)| dom[*d])
            .collect()
    };
    let witnesses = first
        .iter()
        .map(|slot| {
            slot.map(|p| {
                p.map(|(r, a)| Witness {
                    reported: vector(r),
                    actual: vector(a),
                    output_reported: outputs[r as usize],
                    output_actual: outputs[a as usize],
                })
            })
        })
        .collect();
    Ok(Observations {
        inputs: inputs
            .iter()
            .map(|v| (g.var(*v).name.clone(), g.var(*v).ty))
            .collect(),
        output_type: out_ty,
        witnesses,
    })
}

/// The set of input-mode tuples (over the target's cone inputs, in
/// declaration order) for which some grid witness drives `target_var` into
/// `target_mode`.
pub fn brute_force_program(
    g: &ProgramGraph,
    target_var: &str,
    target_mode: FailureMode,
    grid: &WitnessGrid,
) -> Result<BTreeSet<Vec<FailureMode>>, OracleError> {
    let target = g
        .var_id(target_var)
        .ok_or_else(|| OracleError::UnknownVariable(target_var.to_string()))?;
    let ty = g.var(target).ty;
    if !target_mode.is_legal_for(ty) {
        return Err(OracleError::IllegalMode {
            mode: target_mode,
            ty,
        });
    }
    grid.check_coverage(&g.thresholds())?;
    Ok(observe_program(g, target, grid)?.causing(target_mode))
}

fn single_block(kind: BlockKind) -> (ProgramGraph, VarId) {
    let mut b = ProgramBuilder::new();
    let names: Vec<String> = (1..=kind.input_types().len()).map(|i| format!("x{i}")).collect();
    for (name, ty) in names.iter().zip(kind.input_types()) {
        b.var(name, *ty, Role::Input);
    }
    b.var("y", kind.output_type(), Role::Output);
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    b.block("b", BlockOp::Builtin(kind), &refs, "y");
    let g = b
        .build(&Catalog::builtin())
        .expect("single-block program is valid");
    let y = g.var_id("y").expect("declared");
    (g, y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    /// A table row with no concrete witness.
    NoWitness,
    /// A concrete behavior no table row accounts for.
    Uncovered,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub inputs: Vec<FailureMode>,
    pub output: FailureMode,
    pub claimed: Vec<FailureMode>,
    pub observed: Vec<FailureMode>,
    pub witness: Option<Witness>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservedRow {
    pub inputs: Vec<FailureMode>,
    pub claimed: Vec<FailureMode>,
    pub uncertain: Vec<FailureMode>,
    pub observed: Vec<FailureMode>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConformanceReport {
    pub kind: String,
    pub sound: bool,
    pub complete: bool,
    pub violations: Vec<Violation>,
    pub rows: Vec<ObservedRow>,
}

impl ConformanceReport {
    pub fn ok(&self) -> bool {
        self.sound && self.complete
    }

    /// The observed truth table as (inputs, output) pairs.
    pub fn observed_pairs(&self) -> BTreeSet<(Vec<FailureMode>, FailureMode)> {
        self.rows
            .iter()
            .flat_map(|r| r.observed.iter().map(move |o| (r.inputs.clone(), *o)))
            .collect()
    }

    /// Plain-text table: one line per input-mode combination.
    pub fn render_table(&self) -> String {
        let modes = |v: &[FailureMode]| -> String {
            if v.is_empty() {
                "-".to_string()
            } else {
                v.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(",")
            }
        };
        let mut out = String::new();
        let verdict = match (self.sound, self.complete) {
            (true, true) => "sound, complete",
            (true, false) => "sound, INCOMPLETE",
            (false, true) => "UNSOUND, complete",
            (false, false) => "UNSOUND, INCOMPLETE",
        };
        let _ = writeln!(out, "{}: {}", self.kind, verdict);
        let _ = writeln!(
            out,
            "{:>4}  {:<8} {:<10} {:<10} uncertain",
            "no.", "inputs", "observed", "table"
        );
        for (i, r) in self.rows.iter().enumerate() {
            let _ = writeln!(
                out,
                "{:>4}  {:<8} {:<10} {:<10} {}",
                i + 1,
                r.inputs
                    .iter()
                    .map(|m| m.to_string())
                    .collect::<Vec<_>>()
                    .join(" "),
                modes(&r.observed),
                modes(&r.claimed),
                if r.uncertain.is_empty() {
                    String::new()
                } else {
                    modes(&r.uncertain)
                }
            );
        }
        for v in &self.violations {
            let what = match v.kind {
                ViolationKind::NoWitness => "no witness for row",
                ViolationKind::Uncovered => "uncovered behavior",
            };
            let _ = write!(
                out,
                "  {what}: ({}) -> {}",
                v.inputs
                    .iter()
                    .map(|m| m.to_string())
                    .collect::<Vec<_>>()
                    .join(", "),
                v.output
            );
            if let Some(w) = &v.witness {
                let vals = |xs: &[Value]| xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
                let _ = write!(
                    out,
                    " e.g. reported ({}) / actual ({}) gives {} / {}",
                    vals(&w.reported),
                    vals(&w.actual),
                    w.output_reported,
                    w.output_actual
                );
            }
            out.push('\n');
        }
        out
    }
}

/// Checks the catalog table for `kind` against its concrete semantics.
pub fn verify_fmb(kind: BlockKind, grid: &WitnessGrid) -> Result<ConformanceReport, OracleError> {
    let fmb = crate::catalog::fmb_lookup(kind, FmbVariant::Theoretical);
    verify_fmb_against(kind, &fmb, grid)
}

/// Checks an arbitrary table against the concrete semantics of `kind`.
pub fn verify_fmb_against(
    kind: BlockKind,
    fmb: &Fmb,
    grid: &WitnessGrid,
) -> Result<ConformanceReport, OracleError> {
    grid.check_coverage(kind.threshold().as_slice())?;
    let (g, y) = single_block(kind);
    let obs = observe_program(&g, y, grid)?;
    let mut violations = Vec::new();
    let mut rows = Vec::new();
    for inputs in obs.tuples() {
        let observed = obs.outputs(&inputs);
        let fwd = |unc: bool| -> Vec<FailureMode> {
            fmb.rows()
                .iter()
                .filter(|r| r.inputs == inputs && r.uncertain == unc)
                .map(|r| r.output)
                .collect()
        };
        let mut claimed: Vec<FailureMode> = fwd(false);
        let uncertain = fwd(true);
        claimed.extend(&uncertain);
        claimed.sort_by_key(|m| alphabet_index(fmb.output_type(), *m));
        claimed.dedup();
        for &o in &claimed {
            if !observed.contains(&o) {
                violations.push(Violation {
                    kind: ViolationKind::NoWitness,
                    inputs: inputs.clone(),
                    output: o,
                    claimed: claimed.clone(),
                    observed: observed.clone(),
                    witness: None,
                });
            }
        }
        for &o in &observed {
            if !claimed.contains(&o) {
                violations.push(Violation {
                    kind: ViolationKind::Uncovered,
                    inputs: inputs.clone(),
                    output: o,
                    claimed: claimed.clone(),
                    observed: observed.clone(),
                    witness: obs.witness(&inputs, o).cloned(),
                });
            }
        }
        rows.push(ObservedRow {
            inputs,
            claimed,
            uncertain,
            observed,
        });
    }
    Ok(ConformanceReport {
        kind: kind.name().to_string(),
        sound: !violations.iter().any(|v| v.kind == ViolationKind::NoWitness),
        complete: !violations.iter().any(|v| v.kind == ViolationKind::Uncovered),
        violations,
        rows,
    })
}

/// Verifies every built-in block kind (comparators at the given threshold).
pub fn verify_catalog(threshold: f64, delta: f64) -> Result<Vec<ConformanceReport>, OracleError> {
    catalog_kinds(threshold)
        .into_iter()
        .map(|k| verify_fmb(k, &WitnessGrid::for_kind(k, delta)))
        .collect()
}

pub fn catalog_kinds(threshold: f64) -> Vec<BlockKind> {
    BlockKind::ALL
        .iter()
        .map(|k| match k {
            BlockKind::Gcom { .. } => BlockKind::Gcom { k: threshold },
            BlockKind::Lcom { .. } => BlockKind::Lcom { k: threshold },
            other => *other,
        })
        .collect()
}
