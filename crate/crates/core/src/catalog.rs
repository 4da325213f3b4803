//! Built-in function blocks: concrete semantics plus their Failure Mode Blocks.
//!
//! An FMB is stored as its truth table at the level of failure modes: one
//! row per (input modes, output mode) combination that the block can exhibit.
//! Rows that no dominant input fault explains carry an `uncertain` flag; the
//! practical variant drops them.
//!
//! # Table format
//!
//! FMBs are written in a small line-oriented format, which is also how the
//! built-in catalog is defined:
//!
//! ```text
//! fmb v1 Avg (real, real) -> real
//! l l -> l
//! l h -> a        # "a": every output mode is possible
//! t m -> t_u      # "_u": uncertain outcome
//! end
//! ```
//!
//! Each row lists one mode per input port, `->`, then the output mode (or
//! `a` for all real modes), optionally suffixed with `_u`. Duplicate rows are
//! merged. Every combination of input modes must have at least one row.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mode::{FailureMode, ModeError, ModeSet, SignalType, Value};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CatalogError {
    #[error("unknown block kind '{0}'")]
    UnknownKind(String),
    #[error("{block}: expected {expected} inputs, got {got}")]
    Arity {
        block: String,
        expected: usize,
        got: usize,
    },
    #[error("{block}: input {slot} has type {got}, expected {expected}")]
    PortType {
        block: String,
        slot: usize,
        expected: SignalType,
        got: SignalType,
    },
    #[error("{block}: mode '{mode}' is illegal for a {ty} port")]
    IllegalMode {
        block: String,
        mode: FailureMode,
        ty: SignalType,
    },
    #[error("{block}: input modes ({modes}) have no reachable output")]
    NoOutcome { block: String, modes: String },
    #[error("{0} has no concrete semantics")]
    NoSemantics(String),
    #[error("line {line}: {msg}")]
    Table { line: usize, msg: String },
    #[error(transparent)]
    Mode(#[from] ModeError),
}

/// Which FMB rows are used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FmbVariant {
    /// The full truth table, uncertain rows included.
    Theoretical,
    /// Uncertain rows removed.
    #[default]
    Practical,
}

impl fmt::Display for FmbVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FmbVariant::Theoretical => "theoretical",
            FmbVariant::Practical => "practical",
        })
    }
}

impl std::str::FromStr for FmbVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "theoretical" => Ok(FmbVariant::Theoretical),
            "practical" => Ok(FmbVariant::Practical),
            other => Err(format!("unknown variant '{other}'")),
        }
    }
}

/// The nine built-in block kinds. Threshold comparators carry their `K`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BlockKind {
    Avg,
    Add,
    Sub,
    Abs,
    Gcom { k: f64 },
    Lcom { k: f64 },
    Not,
    And,
    Or,
}

impl BlockKind {
    /// One instance of every kind; comparators get `K = 0`.
    pub const ALL: [BlockKind; 9] = [
        BlockKind::Avg,
        BlockKind::Add,
        BlockKind::Sub,
        BlockKind::Abs,
        BlockKind::Gcom { k: 0.0 },
        BlockKind::Lcom { k: 0.0 },
        BlockKind::Not,
        BlockKind::And,
        BlockKind::Or,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            BlockKind::Avg => "Avg",
            BlockKind::Add => "Add",
            BlockKind::Sub => "Sub",
            BlockKind::Abs => "Abs",
            BlockKind::Gcom { .. } => "GcomK",
            BlockKind::Lcom { .. } => "LcomK",
            BlockKind::Not => "Not",
            BlockKind::And => "And",
            BlockKind::Or => "Or",
        }
    }

    /// Resolves a kind name. Comparators need `threshold`; other kinds reject it.
    pub fn from_name(name: &str, threshold: Option<f64>) -> Result<Self, CatalogError> {
        let kind = match (name, threshold) {
            ("Avg", None) => BlockKind::Avg,
            ("Add", None) => BlockKind::Add,
            ("Sub", None) => BlockKind::Sub,
            ("Abs", None) => BlockKind::Abs,
            ("GcomK" | "Gcom", Some(k)) => BlockKind::Gcom { k },
            ("LcomK" | "Lcom", Some(k)) => BlockKind::Lcom { k },
            ("Not", None) => BlockKind::Not,
            ("And", None) => BlockKind::And,
            ("Or", None) => BlockKind::Or,
            _ => return Err(CatalogError::UnknownKind(name.to_string())),
        };
        Ok(kind)
    }

    pub fn threshold(&self) -> Option<f64> {
        match self {
            BlockKind::Gcom { k } | BlockKind::Lcom { k } => Some(*k),
            _ => None,
        }
    }

    pub fn input_types(&self) -> &'static [SignalType] {
        use SignalType::*;
        match self {
            BlockKind::Avg | BlockKind::Add | BlockKind::Sub => &[Real, Real],
            BlockKind::Abs | BlockKind::Gcom { .. } | BlockKind::Lcom { .. } => &[Real],
            BlockKind::Not => &[Bool],
            BlockKind::And | BlockKind::Or => &[Bool, Bool],
        }
    }

    pub fn arity(&self) -> usize {
        self.input_types().len()
    }

    pub fn output_type(&self) -> SignalType {
        match self {
            BlockKind::Avg | BlockKind::Add | BlockKind::Sub | BlockKind::Abs => SignalType::Real,
            _ => SignalType::Bool,
        }
    }

    /// Applies the block's defining function.
    pub fn eval(&self, inputs: &[Value]) -> Result<Value, CatalogError> {
        let types = self.input_types();
        if inputs.len() != types.len() {
            return Err(CatalogError::Arity {
                block: self.name().to_string(),
                expected: types.len(),
                got: inputs.len(),
            });
        }
        for (slot, (v, ty)) in inputs.iter().zip(types).enumerate() {
            if v.signal_type() != *ty {
                return Err(CatalogError::PortType {
                    block: self.name().to_string(),
                    slot,
                    expected: *ty,
                    got: v.signal_type(),
                });
            }
        }
        Ok(self.eval_unchecked(inputs))
    }

    /// `eval` without port checks; the caller guarantees arity and types.
    pub fn eval_unchecked(&self, inputs: &[Value]) -> Value {
        let real = |i: usize| match inputs[i] {
            Value::Real(x) => x,
            Value::Bool(_) => unreachable!("port type checked by caller"),
        };
        let boolean = |i: usize| match inputs[i] {
            Value::Bool(b) => b,
            Value::Real(_) => unreachable!("port type checked by caller"),
        };
        match *self {
            BlockKind::Avg => Value::Real((real(0) + real(1)) / 2.0),
            BlockKind::Add => Value::Real(real(0) + real(1)),
            BlockKind::Sub => Value::Real(real(0) - real(1)),
            BlockKind::Abs => Value::Real(real(0).abs()),
            BlockKind::Gcom { k } => Value::Bool(real(0) > k),
            BlockKind::Lcom { k } => Value::Bool(real(0) < k),
            BlockKind::Not => Value::Bool(!boolean(0)),
            BlockKind::And => Value::Bool(boolean(0) && boolean(1)),
            BlockKind::Or => Value::Bool(boolean(0) || boolean(1)),
        }
    }
}

impl fmt::Display for BlockKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.threshold() {
            Some(k) => write!(f, "{}[{}]", self.name(), k),
            None => f.write_str(self.name()),
        }
    }
}

/// A block as referenced from a program: a built-in kind or a user FMB by name.
#[derive(Debug, Clone, PartialEq)]
pub enum BlockOp {
    Builtin(BlockKind),
    Custom(String),
}

impl BlockOp {
    pub fn name(&self) -> &str {
        match self {
            BlockOp::Builtin(k) => k.name(),
            BlockOp::Custom(name) => name,
        }
    }
}

impl fmt::Display for BlockOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BlockOp::Builtin(k) => write!(f, "{k}"),
            BlockOp::Custom(name) => f.write_str(name),
        }
    }
}

/// One truth-table line of an FMB.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct FmbRow {
    pub inputs: Vec<FailureMode>,
    pub output: FailureMode,
    pub uncertain: bool,
}

/// Output modes reachable from one input-mode combination.
#[derive(Debug, Clone, PartialEq)]
pub struct Forward {
    /// Reachable output modes. Uncertain outcomes are included only when
    /// requested.
    pub modes: ModeSet,
    /// The uncertain outcomes for this combination, whether or not they were
    /// included in `modes`.
    pub uncertain: Vec<FailureMode>,
}

/// One input-slot conjunction of an inverse map: a full assignment of modes
/// to the block's input ports.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SlotConjunction {
    pub modes: Vec<FailureMode>,
    pub uncertain: bool,
}

/// Disjunction of input-slot conjunctions that produce one output mode.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotFormula {
    pub output: FailureMode,
    pub input_types: Vec<SignalType>,
    pub conjunctions: Vec<SlotConjunction>,
}

/// A cube over input slots: `None` leaves the slot unconstrained.
pub type SlotCube = Vec<Option<FailureMode>>;

impl SlotFormula {
    pub fn contains(&self, modes: &[FailureMode]) -> bool {
        self.conjunctions.iter().any(|c| c.modes == modes)
    }

    /// The prime cubes of the formula: the maximal partial assignments whose
    /// every completion appears in the formula. Logically equivalent to the
    /// full-row listing, and the natural way to print it (`x1=l ∨ x2=l`
    /// rather than five full rows).
    pub fn prime_cubes(&self) -> Vec<SlotCube> {
        let rows: BTreeSet<&[FailureMode]> = self.conjunctions.iter().map(|c| c.modes.as_slice()).collect();
        let choices: Vec<Vec<Option<FailureMode>>> = self
            .input_types
            .iter()
            .map(|ty| {
                std::iter::once(None)
                    .chain(ty.alphabet().iter().copied().map(Some))
                    .collect()
            })
            .collect();

        let mut implicants = Vec::new();
        for cube in cartesian(&choices) {
            let covered = cartesian(
                &cube
                    .iter()
                    .zip(&self.input_types)
                    .map(|(c, ty)| match c {
                        Some(m) => vec![*m],
                        None => ty.alphabet().to_vec(),
                    })
                    .collect::<Vec<_>>(),
            )
            .all(|row| rows.contains(row.as_slice()));
            if covered {
                implicants.push(cube);
            }
        }
        let subsumes = |big: &SlotCube, small: &SlotCube| {
            big != small && big.iter().zip(small).all(|(b, s)| b.is_none() || b == s)
        };
        let mut primes: Vec<SlotCube> = implicants
            .iter()
            .filter(|c| !implicants.iter().any(|o| subsumes(o, c)))
            .cloned()
            .collect();
        primes.sort_by_key(|c| {
            c.iter()
                .map(|m| m.map_or(u8::MAX, |m| m as u8))
                .collect::<Vec<_>>()
        });
        primes
    }
}

impl fmt::Display for SlotFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cubes = self.prime_cubes();
        if cubes.is_empty() {
            return f.write_str("false");
        }
        let parts: Vec<String> = cubes
            .iter()
            .map(|cube| {
                let lits: Vec<String> = cube
                    .iter()
                    .enumerate()
                    .filter_map(|(i, m)| m.map(|m| format!("x{}={}", i + 1, m)))
                    .collect();
                if lits.is_empty() {
                    "true".to_string()
                } else {
                    lits.join(" ∧ ")
                }
            })
            .collect();
        f.write_str(&parts.join(" ∨ "))
    }
}

/// Cartesian product of per-slot choices, in odometer order (last slot fastest).
pub(crate) fn cartesian<T: Clone>(choices: &[Vec<T>]) -> impl Iterator<Item = Vec<T>> + '_ {
    let total: usize = choices.iter().map(Vec::len).product();
    (0..total).map(move |mut n| {
        let mut out = Vec::with_capacity(choices.len());
        for c in choices.iter().rev() {
            out.push(c[n % c.len()].clone());
            n /= c.len();
        }
        out.reverse();
        out
    })
}

/// A Failure Mode Block: the mode-level truth table of a function block.
#[derive(Debug, Clone, PartialEq)]
pub struct Fmb {
    name: String,
    input_types: Vec<SignalType>,
    output_type: SignalType,
    rows: Vec<FmbRow>,
}

impl Fmb {
    /// Builds an FMB, validating port types and that every input-mode
    /// combination has at least one row.
    pub fn new(
        name: impl Into<String>,
        input_types: Vec<SignalType>,
        output_type: SignalType,
        rows: impl IntoIterator<Item = FmbRow>,
    ) -> Result<Self, CatalogError> {
        let fmb = Self::new_partial(name, input_types, output_type, rows)?;
        for combo in cartesian(&fmb.alphabets()) {
            if !fmb.rows.iter().any(|r| r.inputs == combo) {
                return Err(CatalogError::NoOutcome {
                    block: fmb.name.clone(),
                    modes: modes_str(&combo),
                });
            }
        }
        Ok(fmb)
    }

    /// Like `new` but allows input combinations with no row.
    pub fn new_partial(
        name: impl Into<String>,
        input_types: Vec<SignalType>,
        output_type: SignalType,
        rows: impl IntoIterator<Item = FmbRow>,
    ) -> Result<Self, CatalogError> {
        let name = name.into();
        let mut set: BTreeMap<(Vec<FailureMode>, FailureMode), bool> = BTreeMap::new();
        for row in rows {
            if row.inputs.len() != input_types.len() {
                return Err(CatalogError::Arity {
                    block: name,
                    expected: input_types.len(),
                    got: row.inputs.len(),
                });
            }
            for (mode, ty) in row
                .inputs
                .iter()
                .zip(&input_types)
                .chain([(&row.output, &output_type)])
            {
                if !mode.is_legal_for(*ty) {
                    return Err(CatalogError::IllegalMode {
                        block: name,
                        mode: *mode,
                        ty: *ty,
                    });
                }
            }
            // a row listed both ways is certain
            let entry = set.entry((row.inputs, row.output)).or_insert(row.uncertain);
            *entry &= row.uncertain;
        }
        let rows = set
            .into_iter()
            .map(|((inputs, output), uncertain)| FmbRow {
                inputs,
                output,
                uncertain,
            })
            .collect();
        Ok(Fmb {
            name,
            input_types,
            output_type,
            rows,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn input_types(&self) -> &[SignalType] {
        &self.input_types
    }

    pub fn output_type(&self) -> SignalType {
        self.output_type
    }

    pub fn arity(&self) -> usize {
        self.input_types.len()
    }

    pub fn rows(&self) -> &[FmbRow] {
        &self.rows
    }

    pub fn uncertain_rows(&self) -> impl Iterator<Item = &FmbRow> {
        self.rows.iter().filter(|r| r.uncertain)
    }

    pub(crate) fn alphabets(&self) -> Vec<Vec<FailureMode>> {
        self.input_types.iter().map(|t| t.alphabet().to_vec()).collect()
    }

    /// Returns this FMB restricted to the given variant.
    pub fn variant(&self, variant: FmbVariant) -> Fmb {
        match variant {
            FmbVariant::Theoretical => self.clone(),
            FmbVariant::Practical => Fmb {
                rows: self.rows.iter().filter(|r| !r.uncertain).cloned().collect(),
                ..self.clone()
            },
        }
    }

    /// Copy with one extra row (used to build deliberately wrong FMBs).
    pub fn with_row(&self, row: FmbRow) -> Result<Fmb, CatalogError> {
        let mut rows = self.rows.clone();
        rows.push(row);
        Fmb::new_partial(
            self.name.clone(),
            self.input_types.clone(),
            self.output_type,
            rows,
        )
    }

    /// Copy with every row matching `inputs -> output` removed.
    pub fn without_row(&self, inputs: &[FailureMode], output: FailureMode) -> Fmb {
        Fmb {
            rows: self
                .rows
                .iter()
                .filter(|r| !(r.inputs == inputs && r.output == output))
                .cloned()
                .collect(),
            ..self.clone()
        }
    }

    fn check_inputs(&self, modes: &[FailureMode]) -> Result<(), CatalogError> {
        if modes.len() != self.arity() {
            return Err(CatalogError::Arity {
                block: self.name.clone(),
                expected: self.arity(),
                got: modes.len(),
            });
        }
        for (mode, ty) in modes.iter().zip(&self.input_types) {
            if !mode.is_legal_for(*ty) {
                return Err(CatalogError::IllegalMode {
                    block: self.name.clone(),
                    mode: *mode,
                    ty: *ty,
                });
            }
        }
        Ok(())
    }

    /// The failure-mode abstraction: output modes reachable from `inputs`.
    pub fn forward_modes(
        &self,
        inputs: &[FailureMode],
        include_uncertain: bool,
    ) -> Result<Forward, CatalogError> {
        self.check_inputs(inputs)?;
        let mut modes = Vec::new();
        let mut uncertain = Vec::new();
        for row in self.rows.iter().filter(|r| r.inputs == inputs) {
            if row.uncertain {
                uncertain.push(row.output);
                if !include_uncertain {
                    continue;
                }
            }
            modes.push(row.output);
        }
        let modes = ModeSet::new(self.output_type, modes).map_err(|_| CatalogError::NoOutcome {
            block: self.name.clone(),
            modes: modes_str(inputs),
        })?;
        Ok(Forward { modes, uncertain })
    }

    /// The inverse map for one output mode: every input conjunction whose row
    /// yields `output`. Uncertain rows are included and flagged.
    pub fn inverse_modes(&self, output: FailureMode) -> Result<SlotFormula, CatalogError> {
        if !output.is_legal_for(self.output_type) {
            return Err(CatalogError::IllegalMode {
                block: self.name.clone(),
                mode: output,
                ty: self.output_type,
            });
        }
        let conjunctions = self
            .rows
            .iter()
            .filter(|r| r.output == output)
            .map(|r| SlotConjunction {
                modes: r.inputs.clone(),
                uncertain: r.uncertain,
            })
            .collect();
        Ok(SlotFormula {
            output,
            input_types: self.input_types.clone(),
            conjunctions,
        })
    }

    /// Renders the FMB in the table format accepted by [`parse_fmb_tables`].
    pub fn render(&self) -> String {
        let types: Vec<String> = self.input_types.iter().map(|t| t.to_string()).collect();
        let mut out = format!(
            "fmb v1 {} ({}) -> {}\n",
            self.name,
            types.join(", "),
            self.output_type
        );
        for row in &self.rows {
            out.push_str(&modes_str(&row.inputs));
            out.push_str(" -> ");
            out.push(row.output.symbol());
            if row.uncertain {
                out.push_str("_u");
            }
            out.push('\n');
        }
        out.push_str("end\n");
        out
    }
}

pub(crate) fn modes_str(modes: &[FailureMode]) -> String {
    modes.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(" ")
}

/// Parses one or more FMB tables. See the module documentation for the format.
pub fn parse_fmb_tables(text: &str) -> Result<Vec<Fmb>, CatalogError> {
    struct Open {
        name: String,
        inputs: Vec<SignalType>,
        output: SignalType,
        rows: Vec<FmbRow>,
    }
    let err = |line: usize, msg: String| CatalogError::Table { line, msg };

    let mut done = Vec::new();
    let mut open: Option<Open> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("fmb ") {
            if open.is_some() {
                return Err(err(line_no, "nested 'fmb' header; missing 'end'".into()));
            }
            let rest = rest
                .trim()
                .strip_prefix("v1 ")
                .ok_or_else(|| err(line_no, "expected 'fmb v1 <Name> (<types>) -> <type>'".into()))?;
            let (lhs, out_ty) = rest
                .split_once("->")
                .ok_or_else(|| err(line_no, "missing '->' in header".into()))?;
            let (name, ports) = lhs
                .split_once('(')
                .ok_or_else(|| err(line_no, "missing '(' in header".into()))?;
            let ports = ports
                .trim()
                .strip_suffix(')')
                .ok_or_else(|| err(line_no, "missing ')' in header".into()))?;
            let name = name.trim();
            if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(err(line_no, format!("invalid block name '{name}'")));
            }
            let inputs = ports
                .split(',')
                .map(|p| p.trim().parse::<SignalType>().map_err(|e| err(line_no, e)))
                .collect::<Result<Vec<_>, _>>()?;
            let output = out_ty.trim().parse::<SignalType>().map_err(|e| err(line_no, e))?;
            open = Some(Open {
                name: name.to_string(),
                inputs,
                output,
                rows: Vec::new(),
            });
        } else if line == "end" {
            let o = open
                .take()
                .ok_or_else(|| err(line_no, "'end' without 'fmb' header".into()))?;
            done.push(Fmb::new(o.name, o.inputs, o.output, o.rows).map_err(|e| err(line_no, e.to_string()))?);
        } else {
            let o = open
                .as_mut()
                .ok_or_else(|| err(line_no, "row outside an 'fmb' block".into()))?;
            let (lhs, rhs) = line
                .split_once("->")
                .ok_or_else(|| err(line_no, "row must be '<modes> -> <mode>'".into()))?;
            let inputs = lhs
                .split_whitespace()
                .map(|s| s.parse::<FailureMode>().map_err(|e| err(line_no, e.to_string())))
                .collect::<Result<Vec<_>, _>>()?;
            let rhs = rhs.trim();
            let (out, uncertain) = match rhs.strip_suffix("_u") {
                Some(o) => (o, true),
                None => (rhs, false),
            };
            let outputs = ModeSet::parse(o.output, out).map_err(|e| err(line_no, e.to_string()))?;
            for output in outputs.iter() {
                o.rows.push(FmbRow {
                    inputs: inputs.clone(),
                    output,
                    uncertain,
                });
            }
        }
    }
    if open.is_some() {
        return Err(err(text.lines().count(), "unterminated 'fmb' block".into()));
    }
    Ok(done)
}

/// Mode-level truth tables of the nine built-in blocks, one row per case of
/// the concrete case analysis. `K` does not appear: comparator FMBs are the
/// same for every threshold.
const BUILTIN_TABLES: &str = "\
fmb v1 Avg (real, real) -> real
l l -> l
l m -> l
l h -> a
m l -> l
m m -> m
m h -> h
h l -> a
h m -> h
h h -> h
end

fmb v1 Add (real, real) -> real
l l -> l
l m -> l
l h -> a
m l -> l
m m -> m
m h -> h
h l -> a
h m -> h
h h -> h
end

fmb v1 Sub (real, real) -> real
l l -> a
l m -> l
l h -> l
m l -> h
m m -> m
m h -> l
h l -> h
h m -> h
h h -> a
end

fmb v1 Abs (real) -> real
l -> l    # 0 <= m < a
m -> m    # 0 <= m = a
h -> h    # 0 <= a < m
l -> h    # m < a < 0
m -> m    # m = a < 0: equal inputs give equal magnitudes
h -> l    # a < m < 0
l -> a    # m < 0 <= a
h -> a    # a < 0 <= m
end

fmb v1 GcomK (real) -> bool
l -> m    # K < m < a
m -> m    # K < m = a
h -> m    # K < a < m
l -> f    # m <= K < a
h -> t    # a <= K < m
l -> m    # m < a <= K
m -> m    # m = a <= K
h -> m    # a < m <= K
end

fmb v1 LcomK (real) -> bool
h -> m    # K > m > a
m -> m    # K > m = a
l -> m    # K > a > m
h -> f    # m >= K > a
l -> t    # a >= K > m
h -> m    # m > a >= K
m -> m    # m = a >= K
l -> m    # a > m >= K
end

fmb v1 Not (bool) -> bool
m -> m
f -> t
t -> f
m -> m
end

fmb v1 And (bool, bool) -> bool
m m -> m
m f -> m
m t -> m
m m -> m
f m -> m
f f -> f
f t -> m
f m -> f
t m -> m
t f -> m
t t -> t
t m -> t_u
m m -> m
m f -> f
m t -> t_u
m m -> m
end

fmb v1 Or (bool, bool) -> bool
m m -> m
m f -> f_u
m t -> t
m m -> m
f m -> f_u
f f -> f
f t -> m
f m -> m
t m -> t
t f -> m
t t -> t
t m -> m
m m -> m
m f -> m
m t -> m
m m -> m
end
";

fn builtin_tables() -> &'static BTreeMap<&'static str, Fmb> {
    static TABLES: OnceLock<BTreeMap<&'static str, Fmb>> = OnceLock::new();
    TABLES.get_or_init(|| {
        let fmbs = parse_fmb_tables(BUILTIN_TABLES).expect("built-in FMB tables are well formed");
        BlockKind::ALL
            .iter()
            .map(|k| {
                let fmb = fmbs
                    .iter()
                    .find(|f| f.name() == k.name())
                    .expect("every built-in kind has a table")
                    .clone();
                (k.name(), fmb)
            })
            .collect()
    })
}

/// The catalog FMB for a built-in kind.
pub fn fmb_lookup(kind: BlockKind, variant: FmbVariant) -> Fmb {
    builtin_tables()[kind.name()].variant(variant)
}

/// Built-in FMBs plus any user-supplied tables.
#[derive(Debug, Clone, Default)]
pub struct Catalog {
    custom: BTreeMap<String, Fmb>,
}

impl Catalog {
    pub fn builtin() -> Self {
        Catalog::default()
    }

    /// Adds user FMBs. Names must not shadow a built-in kind.
    pub fn with_custom(mut self, fmbs: impl IntoIterator<Item = Fmb>) -> Result<Self, CatalogError> {
        for fmb in fmbs {
            if Self::is_builtin_name(fmb.name()) {
                return Err(CatalogError::Table {
                    line: 0,
                    msg: format!("'{}' shadows a built-in block kind", fmb.name()),
                });
            }
            self.custom.insert(fmb.name().to_string(), fmb);
        }
        Ok(self)
    }

    fn is_builtin_name(name: &str) -> bool {
        matches!(
            name,
            "Avg" | "Add" | "Sub" | "Abs" | "Gcom" | "GcomK" | "Lcom" | "LcomK" | "Not" | "And" | "Or"
        )
    }

    /// Resolves a kind name as written in a program.
    pub fn resolve(&self, name: &str, threshold: Option<f64>) -> Result<BlockOp, CatalogError> {
        if Self::is_builtin_name(name) {
            return BlockKind::from_name(name, threshold)
                .map(BlockOp::Builtin)
                .map_err(|_| {
                    CatalogError::UnknownKind(match threshold {
                        Some(_) => format!("{name} (does not take a threshold)"),
                        None => format!("{name} (requires a threshold, e.g. {name}[0.5])"),
                    })
                });
        }
        match (self.custom.get(name), threshold) {
            (Some(_), None) => Ok(BlockOp::Custom(name.to_string())),
            (Some(_), Some(_)) => Err(CatalogError::UnknownKind(format!(
                "{name} (does not take a threshold)"
            ))),
            (None, _) => Err(CatalogError::UnknownKind(name.to_string())),
        }
    }

    pub fn signature(&self, op: &BlockOp) -> (Vec<SignalType>, SignalType) {
        match op {
            BlockOp::Builtin(k) => (k.input_types().to_vec(), k.output_type()),
            BlockOp::Custom(name) => {
                let fmb = &self.custom[name];
                (fmb.input_types().to_vec(), fmb.output_type())
            }
        }
    }

    pub fn fmb(&self, op: &BlockOp, variant: FmbVariant) -> Result<Fmb, CatalogError> {
        match op {
            BlockOp::Builtin(k) => Ok(fmb_lookup(*k, variant)),
            BlockOp::Custom(name) => self
                .custom
                .get(name)
                .map(|f| f.variant(variant))
                .ok_or_else(|| CatalogError::UnknownKind(name.clone())),
        }
    }
}
