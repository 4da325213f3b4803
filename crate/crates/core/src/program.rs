//! Function-block programs: the `fmrprog v1` text format, validation, and the
//! acyclic dataflow graph the analyses run on.
//!
//! ```text
//! fmrprog v1
//! input    i1 : real
//! input    i2 : real
//! internal w  : real
//! output   o  : bool
//! block avg = Avg(i1, i2) -> w
//! block cmp = GcomK[10](w) -> o
//! ```
//!
//! Comments start with `#`. Declarations and blocks may appear in any order
//! after the header; a variable must be declared before the end of the file.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

use crate::catalog::{BlockOp, Catalog, CatalogError};
use crate::mode::SignalType;

pub type VarId = usize;
pub type BlockId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    Input,
    Internal,
    Output,
}

impl Role {
    fn keyword(self) -> &'static str {
        match self {
            Role::Input => "input",
            Role::Internal => "internal",
            Role::Output => "output",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub ty: SignalType,
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockInstance {
    pub id: String,
    pub op: BlockOp,
    pub inputs: Vec<VarId>,
    pub output: VarId,
}

/// 1-based source position used in diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProgramErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("unknown block kind: {0}")]
    UnknownKind(String),
    #[error("duplicate variable '{0}'")]
    DuplicateVariable(String),
    #[error("duplicate block id '{0}'")]
    DuplicateBlock(String),
    #[error("undeclared variable '{0}'")]
    Undeclared(String),
    #[error("block '{block}' ({kind}) takes {expected} inputs, got {got}")]
    Arity {
        block: String,
        kind: String,
        expected: usize,
        got: usize,
    },
    #[error("block '{block}': {port} expects {expected}, but '{var}' is {got}")]
    PortType {
        block: String,
        port: String,
        var: String,
        expected: SignalType,
        got: SignalType,
    },
    #[error("variable '{var}' is written by both '{first}' and '{second}'")]
    DuplicateWriter {
        var: String,
        first: String,
        second: String,
    },
    #[error("block '{block}' writes input variable '{var}'")]
    WritesInput { block: String, var: String },
    #[error("{role} variable '{var}' is never written")]
    Unwritten { var: String, role: String },
    #[error("cycle detected through block(s) {0}")]
    Cycle(String),
    #[error("output '{0}' does not depend on any input")]
    Unreachable(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{pos}: {kind}")]
pub struct ProgramError {
    pub pos: Pos,
    pub kind: ProgramErrorKind,
}

/// A validated, acyclic, typed dataflow graph.
#[derive(Debug, Clone)]
pub struct ProgramGraph {
    vars: Vec<Variable>,
    blocks: Vec<BlockInstance>,
    index: HashMap<String, VarId>,
    writer: Vec<Option<BlockId>>,
    topo: Vec<BlockId>,
    catalog: Catalog,
}

impl PartialEq for ProgramGraph {
    fn eq(&self, other: &Self) -> bool {
        self.vars == other.vars && self.blocks == other.blocks
    }
}

/// Unvalidated program parts, with source positions for diagnostics.
#[derive(Debug, Clone, Default)]
pub struct ProgramBuilder {
    vars: Vec<(Variable, Pos)>,
    blocks: Vec<(RawBlock, Pos)>,
}

#[derive(Debug, Clone)]
struct RawBlock {
    id: String,
    op: BlockOp,
    inputs: Vec<(String, Pos)>,
    output: (String, Pos),
}

impl ProgramBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn var(&mut self, name: &str, ty: SignalType, role: Role) -> &mut Self {
        self.var_at(name, ty, role, Pos::default())
    }

    fn var_at(&mut self, name: &str, ty: SignalType, role: Role, pos: Pos) -> &mut Self {
        self.vars.push((
            Variable {
                name: name.to_string(),
                ty,
                role,
            },
            pos,
        ));
        self
    }

    pub fn block(&mut self, id: &str, op: BlockOp, inputs: &[&str], output: &str) -> &mut Self {
        let p = Pos::default();
        self.blocks.push((
            RawBlock {
                id: id.to_string(),
                op,
                inputs: inputs.iter().map(|s| (s.to_string(), p)).collect(),
                output: (output.to_string(), p),
            },
            p,
        ));
        self
    }

    pub fn build(&self, catalog: &Catalog) -> Result<ProgramGraph, ProgramError> {
        let err = |pos: Pos, kind| ProgramError { pos, kind };

        let mut index = HashMap::new();
        let mut vars = Vec::new();
        for (v, pos) in &self.vars {
            if index.insert(v.name.clone(), vars.len()).is_some() {
                return Err(err(*pos, ProgramErrorKind::DuplicateVariable(v.name.clone())));
            }
            vars.push(v.clone());
        }

        let mut ids = BTreeSet::new();
        let mut blocks = Vec::new();
        let mut writer: Vec<Option<BlockId>> = vec![None; vars.len()];
        let mut block_pos = Vec::new();
        for (raw, pos) in &self.blocks {
            if !ids.insert(raw.id.clone()) {
                return Err(err(*pos, ProgramErrorKind::DuplicateBlock(raw.id.clone())));
            }
            let lookup = |(name, p): &(String, Pos)| {
                index
                    .get(name)
                    .copied()
                    .ok_or_else(|| err(*p, ProgramErrorKind::Undeclared(name.clone())))
            };
            let inputs = raw.inputs.iter().map(lookup).collect::<Result<Vec<_>, _>>()?;
            let output = lookup(&raw.output)?;

            let (in_types, out_type) = catalog.signature(&raw.op);
            if in_types.len() != inputs.len() {
                return Err(err(
                    *pos,
                    ProgramErrorKind::Arity {
                        block: raw.id.clone(),
                        kind: raw.op.to_string(),
                        expected: in_types.len(),
                        got: inputs.len(),
                    },
                ));
            }
            let ports = inputs
                .iter()
                .zip(&in_types)
                .zip(&raw.inputs)
                .enumerate()
                .map(|(i, ((v, t), (_, p)))| (format!("input {}", i + 1), *v, *t, *p));
            for (port, v, expected, p) in
                ports.chain([("output".to_string(), output, out_type, raw.output.1)])
            {
                if vars[v].ty != expected {
                    return Err(err(
                        p,
                        ProgramErrorKind::PortType {
                            block: raw.id.clone(),
                            port,
                            var: vars[v].name.clone(),
                            expected,
                            got: vars[v].ty,
                        },
                    ));
                }
            }
            if vars[output].role == Role::Input {
                return Err(err(
                    raw.output.1,
                    ProgramErrorKind::WritesInput {
                        block: raw.id.clone(),
                        var: vars[output].name.clone(),
                    },
                ));
            }
            if let Some(first) = writer[output] {
                let first: &BlockInstance = &blocks[first];
                return Err(err(
                    raw.output.1,
                    ProgramErrorKind::DuplicateWriter {
                        var: vars[output].name.clone(),
                        first: first.id.clone(),
                        second: raw.id.clone(),
                    },
                ));
            }
            writer[output] = Some(blocks.len());
            blocks.push(BlockInstance {
                id: raw.id.clone(),
                op: raw.op.clone(),
                inputs,
                output,
            });
            block_pos.push(*pos);
        }

        for (vid, v) in vars.iter().enumerate() {
            if v.role != Role::Input && writer[vid].is_none() {
                return Err(err(
                    self.vars[vid].1,
                    ProgramErrorKind::Unwritten {
                        var: v.name.clone(),
                        role: v.role.keyword().to_string(),
                    },
                ));
            }
        }

        let topo = topo_sort(&vars, &blocks, &writer).map_err(|stuck| {
            let first = *stuck
                .iter()
                .min_by_key(|b| block_pos[**b].line)
                .expect("nonempty");
            let names: Vec<&str> = stuck.iter().map(|b| blocks[*b].id.as_str()).collect();
            err(block_pos[first], ProgramErrorKind::Cycle(names.join(", ")))
        })?;

        let g = ProgramGraph {
            vars,
            blocks,
            index,
            writer,
            topo,
            catalog: catalog.clone(),
        };
        for (vid, v) in g.vars.iter().enumerate() {
            if v.role == Role::Output && g.cone_inputs(vid).is_empty() {
                return Err(err(
                    self.vars[vid].1,
                    ProgramErrorKind::Unreachable(v.name.clone()),
                ));
            }
        }
        Ok(g)
    }
}

/// Kahn's algorithm with ready blocks taken in ascending id order.
/// On a cycle, returns the blocks that could not be scheduled.
fn topo_sort(
    vars: &[Variable],
    blocks: &[BlockInstance],
    writer: &[Option<BlockId>],
) -> Result<Vec<BlockId>, Vec<BlockId>> {
    let mut pending: Vec<usize> = vec![0; blocks.len()];
    let mut readers: Vec<Vec<BlockId>> = vec![Vec::new(); vars.len()];
    for (bid, b) in blocks.iter().enumerate() {
        for &v in &b.inputs {
            if writer[v].is_some() {
                pending[bid] += 1;
            }
            readers[v].push(bid);
        }
    }
    let mut ready: BTreeSet<(&str, BlockId)> = blocks
        .iter()
        .enumerate()
        .filter(|(bid, _)| pending[*bid] == 0)
        .map(|(bid, b)| (b.id.as_str(), bid))
        .collect();
    let mut order = Vec::with_capacity(blocks.len());
    while let Some((_, bid)) = ready.pop_first() {
        order.push(bid);
        for &r in &readers[blocks[bid].output] {
            pending[r] -= 1;
            if pending[r] == 0 {
                ready.insert((blocks[r].id.as_str(), r));
            }
        }
    }
    if order.len() == blocks.len() {
        return Ok(order);
    }
    // strip blocks that are merely downstream of a cycle
    let mut stuck: BTreeSet<BlockId> = (0..blocks.len()).filter(|b| pending[*b] > 0).collect();
    loop {
        let tail: Vec<BlockId> = stuck
            .iter()
            .copied()
            .filter(|&b| !readers[blocks[b].output].iter().any(|r| stuck.contains(r)))
            .collect();
        if tail.is_empty() {
            return Err(stuck.into_iter().collect());
        }
        for b in tail {
            stuck.remove(&b);
        }
    }
}

impl ProgramGraph {
    pub fn variables(&self) -> &[Variable] {
        &self.vars
    }

    pub fn blocks(&self) -> &[BlockInstance] {
        &self.blocks
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn var(&self, id: VarId) -> &Variable {
        &self.vars[id]
    }

    pub fn var_id(&self, name: &str) -> Option<VarId> {
        self.index.get(name).copied()
    }

    pub fn writer(&self, var: VarId) -> Option<&BlockInstance> {
        self.writer[var].map(|b| &self.blocks[b])
    }

    pub fn writer_id(&self, var: VarId) -> Option<BlockId> {
        self.writer[var]
    }

    pub fn inputs(&self) -> impl Iterator<Item = VarId> + '_ {
        self.with_role(Role::Input)
    }

    pub fn outputs(&self) -> impl Iterator<Item = VarId> + '_ {
        self.with_role(Role::Output)
    }

    fn with_role(&self, role: Role) -> impl Iterator<Item = VarId> + '_ {
        self.vars
            .iter()
            .enumerate()
            .filter(move |(_, v)| v.role == role)
            .map(|(i, _)| i)
    }

    /// Block indices in topological order (ties broken by ascending block id).
    pub fn topo_ids(&self) -> &[BlockId] {
        &self.topo
    }

    /// Blocks in topological order.
    pub fn topo_order(&self) -> Vec<&BlockInstance> {
        self.topo.iter().map(|b| &self.blocks[*b]).collect()
    }

    /// Blocks the variable transitively depends on, in topological order.
    pub fn cone_blocks(&self, var: VarId) -> Vec<BlockId> {
        let mut seen = vec![false; self.blocks.len()];
        let mut stack: Vec<VarId> = vec![var];
        while let Some(v) = stack.pop() {
            if let Some(b) = self.writer[v] {
                if !seen[b] {
                    seen[b] = true;
                    stack.extend(&self.blocks[b].inputs);
                }
            }
        }
        self.topo.iter().copied().filter(|b| seen[*b]).collect()
    }

    /// Input variables the variable transitively depends on, in declaration order.
    pub fn cone_inputs(&self, var: VarId) -> Vec<VarId> {
        if self.vars[var].role == Role::Input {
            return vec![var];
        }
        let mut found = BTreeSet::new();
        for b in self.cone_blocks(var) {
            for &v in &self.blocks[b].inputs {
                if self.vars[v].role == Role::Input {
                    found.insert(v);
                }
            }
        }
        found.into_iter().collect()
    }

    /// Distinct comparator thresholds used anywhere in the program.
    pub fn thresholds(&self) -> Vec<f64> {
        let mut ks: Vec<f64> = self
            .blocks
            .iter()
            .filter_map(|b| match &b.op {
                BlockOp::Builtin(k) => k.threshold(),
                BlockOp::Custom(_) => None,
            })
            .collect();
        ks.sort_by(f64::total_cmp);
        ks.dedup();
        ks
    }

    /// Renders the program in the `fmrprog v1` format; `parse_program` on the
    /// result yields an equal graph.
    pub fn render(&self) -> String {
        let mut out = String::from("fmrprog v1\n");
        for v in &self.vars {
            out.push_str(&format!("{} {} : {}\n", v.role.keyword(), v.name, v.ty));
        }
        for b in &self.blocks {
            let args: Vec<&str> = b.inputs.iter().map(|v| self.vars[*v].name.as_str()).collect();
            out.push_str(&format!(
                "block {} = {}({}) -> {}\n",
                b.id,
                b.op,
                args.join(", "),
                self.vars[b.output].name
            ));
        }
        out
    }
}

/// Topological order of a validated program's blocks.
pub fn topo_order(g: &ProgramGraph) -> Vec<&BlockInstance> {
    g.topo_order()
}

struct Cursor<'a> {
    line: usize,
    text: &'a str,
    at: usize,
}

impl<'a> Cursor<'a> {
    fn pos(&self) -> Pos {
        Pos {
            line: self.line,
            col: self.text[..self.at].chars().count() + 1,
        }
    }

    fn skip_ws(&mut self) {
        let rest = &self.text[self.at..];
        self.at += rest.len() - rest.trim_start().len();
    }

    fn syntax(&self, msg: impl Into<String>) -> ProgramError {
        ProgramError {
            pos: self.pos(),
            kind: ProgramErrorKind::Syntax(msg.into()),
        }
    }

    fn ident(&mut self, what: &str) -> Result<(&'a str, Pos), ProgramError> {
        self.skip_ws();
        let pos = self.pos();
        let rest = &self.text[self.at..];
        let len = rest
            .char_indices()
            .find(|(i, c)| !(c.is_ascii_alphanumeric() || *c == '_' || (*i > 0 && *c == '.')))
            .map_or(rest.len(), |(i, _)| i);
        let word = &rest[..len];
        if word.is_empty() || word.starts_with(|c: char| c.is_ascii_digit()) {
            return Err(self.syntax(format!("expected {what}")));
        }
        self.at += len;
        Ok((word, pos))
    }

    fn expect(&mut self, token: &str) -> Result<(), ProgramError> {
        self.skip_ws();
        if self.text[self.at..].starts_with(token) {
            self.at += token.len();
            Ok(())
        } else {
            Err(self.syntax(format!("expected '{token}'")))
        }
    }

    fn eat(&mut self, token: &str) -> bool {
        self.skip_ws();
        if self.text[self.at..].starts_with(token) {
            self.at += token.len();
            true
        } else {
            false
        }
    }

    fn finish(&mut self) -> Result<(), ProgramError> {
        self.skip_ws();
        if self.at < self.text.len() {
            Err(self.syntax("unexpected trailing text"))
        } else {
            Ok(())
        }
    }
}

/// Parses and validates a program against the built-in catalog.
pub fn parse_program(text: &str) -> Result<ProgramGraph, ProgramError> {
    parse_program_with(text, &Catalog::builtin())
}

/// Parses and validates a program; block kinds resolve through `catalog`.
pub fn parse_program_with(text: &str, catalog: &Catalog) -> Result<ProgramGraph, ProgramError> {
    let mut builder = ProgramBuilder::new();
    let mut seen_header = false;
    for (idx, raw) in text.lines().enumerate() {
        let code = raw.split('#').next().unwrap_or("");
        if code.trim().is_empty() {
            continue;
        }
        let mut cur = Cursor {
            line: idx + 1,
            text: code.trim_end(),
            at: 0,
        };
        if !seen_header {
            let (word, _) = cur.ident("'fmrprog v1' header")?;
            if word != "fmrprog" {
                return Err(cur.syntax("expected 'fmrprog v1' header"));
            }
            let (ver, _) = cur.ident("format version")?;
            if ver != "v1" {
                return Err(cur.syntax(format!("unsupported format version '{ver}'")));
            }
            cur.finish()?;
            seen_header = true;
            continue;
        }
        let (keyword, kw_pos) = cur.ident("'input', 'internal', 'output' or 'block'")?;
        match keyword {
            "input" | "internal" | "output" => {
                let role = match keyword {
                    "input" => Role::Input,
                    "internal" => Role::Internal,
                    _ => Role::Output,
                };
                let (name, pos) = cur.ident("variable name")?;
                cur.expect(":")?;
                let (ty, ty_pos) = cur.ident("signal type")?;
                let ty = ty.parse::<SignalType>().map_err(|e| ProgramError {
                    pos: ty_pos,
                    kind: ProgramErrorKind::Syntax(e),
                })?;
                cur.finish()?;
                builder.var_at(name, ty, role, pos);
            }
            "block" => {
                let (id, _) = cur.ident("block id")?;
                cur.expect("=")?;
                let (kind, kind_pos) = cur.ident("block kind")?;
                let threshold = if cur.eat("[") {
                    cur.skip_ws();
                    let start = cur.at;
                    let rest = &cur.text[start..];
                    let end = rest.find(']').ok_or_else(|| cur.syntax("missing ']'"))?;
                    let lit = rest[..end].trim();
                    let lit = lit.strip_prefix("K=").unwrap_or(lit).trim();
                    let k: f64 = lit
                        .parse()
                        .map_err(|_| cur.syntax(format!("invalid threshold '{lit}'")))?;
                    if !k.is_finite() {
                        return Err(cur.syntax("threshold must be finite"));
                    }
                    cur.at = start + end + 1;
                    Some(k)
                } else {
                    None
                };
                let op = catalog.resolve(kind, threshold).map_err(|e| ProgramError {
                    pos: kind_pos,
                    kind: ProgramErrorKind::UnknownKind(match e {
                        CatalogError::UnknownKind(s) => s,
                        other => other.to_string(),
                    }),
                })?;
                cur.expect("(")?;
                let mut inputs = Vec::new();
                if !cur.eat(")") {
                    loop {
                        let (arg, p) = cur.ident("variable name")?;
                        inputs.push((arg.to_string(), p));
                        if cur.eat(")") {
                            break;
                        }
                        cur.expect(",")?;
                    }
                }
                cur.expect("->")?;
                let (out, out_pos) = cur.ident("output variable")?;
                cur.finish()?;
                builder.blocks.push((
                    RawBlock {
                        id: id.to_string(),
                        op,
                        inputs,
                        output: (out.to_string(), out_pos),
                    },
                    kw_pos,
                ));
            }
            other => {
                return Err(ProgramError {
                    pos: kw_pos,
                    kind: ProgramErrorKind::Syntax(format!("unknown statement '{other}'")),
                })
            }
        }
    }
    if !seen_header {
        return Err(ProgramError {
            pos: Pos { line: 1, col: 1 },
            kind: ProgramErrorKind::Syntax("missing 'fmrprog v1' header".into()),
        });
    }
    builder.build(catalog)
}

/// Block counts per kind name, for summaries.
pub fn kind_histogram(g: &ProgramGraph) -> BTreeMap<String, usize> {
    let mut h = BTreeMap::new();
    for b in g.blocks() {
        *h.entry(b.op.name().to_string()).or_insert(0) += 1;
    }
    h
}
