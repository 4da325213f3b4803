//! Random program generators for property tests and scale runs.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::catalog::{BlockKind, BlockOp, Catalog};
use crate::mode::SignalType;
use crate::program::{ProgramBuilder, ProgramGraph, Role};

/// Size and threshold choices for [`random_program`].
#[derive(Debug, Clone)]
pub struct RandomShape {
    pub max_inputs: usize,
    pub max_blocks: usize,
    pub thresholds: Vec<f64>,
    /// Chance that an input is boolean rather than real.
    pub bool_input_ratio: f64,
}

impl Default for RandomShape {
    fn default() -> Self {
        RandomShape {
            max_inputs: 4,
            max_blocks: 6,
            thresholds: vec![0.0, 1.0],
            bool_input_ratio: 0.2,
        }
    }
}

fn kind_for<R: Rng>(rng: &mut R, thresholds: &[f64], has_bool: bool) -> BlockKind {
    let k = *thresholds.choose(rng).expect("at least one threshold");
    let mut kinds = vec![
        BlockKind::Avg,
        BlockKind::Add,
        BlockKind::Sub,
        BlockKind::Abs,
        BlockKind::Gcom { k },
        BlockKind::Lcom { k },
    ];
    if has_bool {
        kinds.extend([BlockKind::Not, BlockKind::And, BlockKind::Or]);
    }
    *kinds.choose(rng).expect("nonempty")
}

struct Pools {
    real: Vec<String>,
    boolean: Vec<String>,
}

impl Pools {
    fn pick<R: Rng>(&self, rng: &mut R, ty: SignalType) -> String {
        let pool = match ty {
            SignalType::Real => &self.real,
            SignalType::Bool => &self.boolean,
        };
        pool.choose(rng).expect("pool has a value").clone()
    }

    fn push(&mut self, ty: SignalType, name: String) {
        match ty {
            SignalType::Real => self.real.push(name),
            SignalType::Bool => self.boolean.push(name),
        }
    }
}

/// A random acyclic program built from catalog blocks. Operands are drawn
/// from everything defined so far, so fan-out and reconvergence occur.
/// Block outputs that nothing reads become program outputs.
pub fn random_program<R: Rng>(rng: &mut R, shape: &RandomShape) -> ProgramGraph {
    let n_inputs = rng.gen_range(1..=shape.max_inputs);
    let n_blocks = rng.gen_range(1..=shape.max_blocks);
    let mut vars: Vec<(String, SignalType)> = Vec::new();
    let mut pools = Pools {
        real: Vec::new(),
        boolean: Vec::new(),
    };
    for i in 1..=n_inputs {
        let ty = if rng.gen_bool(shape.bool_input_ratio) {
            SignalType::Bool
        } else {
            SignalType::Real
        };
        pools.push(ty, format!("i{i}"));
        vars.push((format!("i{i}"), ty));
    }
    if pools.real.is_empty() {
        // keep at least one real input so comparators are possible
        let (name, ty) = &mut vars[0];
        *ty = SignalType::Real;
        pools.boolean.retain(|b| b != name);
        pools.real.push(name.clone());
    }

    let mut blocks = Vec::new();
    let mut read = std::collections::BTreeSet::new();
    for b in 1..=n_blocks {
        let kind = kind_for(rng, &shape.thresholds, !pools.boolean.is_empty());
        let args: Vec<String> = kind.input_types().iter().map(|t| pools.pick(rng, *t)).collect();
        read.extend(args.iter().cloned());
        let out = format!("w{b}");
        pools.push(kind.output_type(), out.clone());
        vars.push((out.clone(), kind.output_type()));
        blocks.push((format!("b{b}"), kind, args, out));
    }

    let mut builder = ProgramBuilder::new();
    for (name, ty) in &vars {
        let role = if name.starts_with('i') {
            Role::Input
        } else if read.contains(name) {
            Role::Internal
        } else {
            Role::Output
        };
        builder.var(name, *ty, role);
    }
    for (id, kind, args, out) in &blocks {
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        builder.block(id, BlockOp::Builtin(*kind), &refs, out);
    }
    builder
        .build(&Catalog::builtin())
        .expect("generated program is valid")
}

/// Two chained blocks `f ; g` over fresh inputs: `f` feeds one port of `g`,
/// and `g`'s other port (if any) reads another fresh input.
pub fn random_chain<R: Rng>(rng: &mut R, thresholds: &[f64]) -> ProgramGraph {
    let f = kind_for(rng, thresholds, true);
    let mid = f.output_type();
    let g = loop {
        let g = kind_for(rng, thresholds, true);
        if g.input_types().contains(&mid) {
            break g;
        }
    };
    let mut builder = ProgramBuilder::new();
    let mut n = 0;
    let mut fresh = |builder: &mut ProgramBuilder, ty: SignalType| {
        n += 1;
        let name = format!("i{n}");
        builder.var(&name, ty, Role::Input);
        name
    };
    let f_args: Vec<String> = f.input_types().iter().map(|t| fresh(&mut builder, *t)).collect();
    let slots: Vec<usize> = (0..g.arity()).filter(|i| g.input_types()[*i] == mid).collect();
    let slot = *slots.choose(rng).expect("compatible slot");
    let g_args: Vec<String> = g
        .input_types()
        .iter()
        .enumerate()
        .map(|(i, t)| {
            if i == slot {
                "w".to_string()
            } else {
                fresh(&mut builder, *t)
            }
        })
        .collect();
    builder.var("w", mid, Role::Internal);
    builder.var("o", g.output_type(), Role::Output);
    let f_refs: Vec<&str> = f_args.iter().map(String::as_str).collect();
    let g_refs: Vec<&str> = g_args.iter().map(String::as_str).collect();
    builder.block("f", BlockOp::Builtin(f), &f_refs, "w");
    builder.block("g", BlockOp::Builtin(g), &g_refs, "o");
    builder
        .build(&Catalog::builtin())
        .expect("generated chain is valid")
}

/// Parameters for [`scale_program`].
#[derive(Debug, Clone)]
pub struct ScaleShape {
    pub inputs: usize,
    pub outputs: usize,
    /// Shared signal-conditioning blocks (each a real block plus a comparator).
    pub shared_pairs: usize,
    /// Logic gates per output chain.
    pub gates_per_output: usize,
}

impl Default for ScaleShape {
    fn default() -> Self {
        ScaleShape {
            inputs: 100,
            outputs: 25,
            shared_pairs: 150,
            gates_per_output: 40,
        }
    }
}

/// A large safety-logic-like program: shared sensor conditioning, trip
/// comparators, and one gate cascade per output. Most comparator leaves read
/// a raw input; a few read a conditioned signal.
pub fn scale_program<R: Rng>(rng: &mut R, shape: &ScaleShape) -> ProgramGraph {
    let mut b = ProgramBuilder::new();
    let mut inputs = Vec::new();
    for i in 0..shape.inputs {
        let name = format!("s{i:03}");
        b.var(&name, SignalType::Real, Role::Input);
        inputs.push(name);
    }
    let mut block_no = 0usize;
    let mut next_id = || {
        block_no += 1;
        format!("fb{block_no:05}")
    };
    let threshold = |rng: &mut R| f64::from(rng.gen_range(0..200)) / 2.0;
    let comparator = |rng: &mut R| {
        let k = threshold(rng);
        if rng.gen_bool(0.5) {
            BlockKind::Gcom { k }
        } else {
            BlockKind::Lcom { k }
        }
    };

    let mut conditioned = Vec::new();
    let mut trips = Vec::new();
    for p in 0..shape.shared_pairs {
        let kind = *[BlockKind::Avg, BlockKind::Add, BlockKind::Sub, BlockKind::Abs]
            .choose(rng)
            .expect("nonempty");
        let args: Vec<&str> = (0..kind.arity())
            .map(|_| inputs.choose(rng).expect("inputs").as_str())
            .collect();
        let r = format!("c{p:03}");
        b.var(&r, SignalType::Real, Role::Internal);
        b.block(&next_id(), BlockOp::Builtin(kind), &args, &r);
        let t = format!("t{p:03}");
        b.var(&t, SignalType::Bool, Role::Internal);
        b.block(&next_id(), BlockOp::Builtin(comparator(rng)), &[&r], &t);
        conditioned.push(r);
        trips.push(t);
    }

    for o in 0..shape.outputs {
        let mut local = 0;
        let mut fresh = |b: &mut ProgramBuilder, ty| {
            local += 1;
            let name = format!("x{o:02}_{local:03}");
            b.var(&name, ty, Role::Internal);
            name
        };
        let mut acc = trips.choose(rng).expect("trips").clone();
        for g in 0..shape.gates_per_output {
            let leaf = if rng.gen_bool(0.12) {
                trips.choose(rng).expect("trips").clone()
            } else {
                let src = if rng.gen_bool(0.1) {
                    conditioned.choose(rng).expect("conditioned").clone()
                } else {
                    inputs.choose(rng).expect("inputs").clone()
                };
                let leaf = fresh(&mut b, SignalType::Bool);
                b.block(&next_id(), BlockOp::Builtin(comparator(rng)), &[&src], &leaf);
                leaf
            };
            if rng.gen_bool(0.08) {
                let inv = fresh(&mut b, SignalType::Bool);
                b.block(&next_id(), BlockOp::Builtin(BlockKind::Not), &[&acc], &inv);
                acc = inv;
            }
            let gate = if rng.gen_bool(0.5) {
                BlockKind::And
            } else {
                BlockKind::Or
            };
            let out = if g + 1 == shape.gates_per_output {
                let name = format!("y{o:02}");
                b.var(&name, SignalType::Bool, Role::Output);
                name
            } else {
                fresh(&mut b, SignalType::Bool)
            };
            b.block(&next_id(), BlockOp::Builtin(gate), &[&acc, &leaf], &out);
            acc = out;
        }
    }
    b.build(&Catalog::builtin()).expect("generated program is valid")
}
