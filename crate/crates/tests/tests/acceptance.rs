use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use fmr::engine::{
    backward_analyze, cone_input_signature, expand_any, expand_match_elsewhere, simplify_dnf,
    AnalysisOptions, ModeLiteral, ScenarioFormula,
};
use fmr::mode::{FailureMode, SignalType};
use fmr::oracle::{observe_program, verify_catalog, WitnessGrid, DEFAULT_DELTA};
use fmr::program::{parse_program, ProgramGraph};
use fmr::quantify::{aggregate, FailureData, Method};
use fmr::report::Report;
use fmr::synth::{random_chain, random_program, scale_program, RandomShape, ScaleShape};
use fmr_cli::{run, Command, Job, OutputFormat, RunConfig};
use fmr_tests::{enumerated_probability, kleisli_chain, reference_table};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

use FailureMode::*;

type Check = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn samples() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../samples")
}

fn analyze_via_cli(program: &str, var: &str, mode: FailureMode) -> (Report, Duration) {
    let cfg = RunConfig {
        command: Command::Analyze,
        jobs: vec![Job {
            program: samples().join(program),
            target: (var.to_string(), mode),
            label: None,
        }],
        format: OutputFormat::Json,
        ..RunConfig::default()
    };
    let start = Instant::now();
    let out = run(&cfg);
    let took = start.elapsed();
    assert_eq!(out.code, 0, "{}", out.stderr);
    (Report::from_json(&out.stdout).expect("report json"), took)
}

fn report_scenarios(r: &Report) -> Vec<Vec<(String, FailureMode)>> {
    r.scenarios
        .iter()
        .map(|s| s.iter().map(|l| (l.var.clone(), l.mode)).collect())
        .collect()
}

fn worked_example() -> Outcome {
    let (r, took) = analyze_via_cli("t_avg.fmrprog", "o", FalseFault);
    let got = report_scenarios(&r);
    let want = vec![vec![("i1".to_string(), Low)], vec![("i2".to_string(), Low)]];
    Outcome {
        pass: got == want && took < Duration::from_secs(1),
        detail: format!("{} in {:.1} ms", display(&got), took.as_secs_f64() * 1e3),
    }
}

fn alternate_program() -> Outcome {
    let (r, _) = analyze_via_cli("t_or.fmrprog", "o", FalseFault);
    let got = report_scenarios(&r);
    let want = vec![vec![("i1".to_string(), Low), ("i2".to_string(), Low)]];
    Outcome {
        pass: got == want,
        detail: display(&got),
    }
}

fn display(scenarios: &[Vec<(String, FailureMode)>]) -> String {
    let parts: Vec<String> = scenarios
        .iter()
        .map(|s| {
            let l: Vec<String> = s.iter().map(|(v, m)| format!("{v}={m}")).collect();
            format!("{{{}}}", l.join(" ∧ "))
        })
        .collect();
    parts.join(" ∨ ")
}

fn modes(set: &BTreeSet<FailureMode>) -> String {
    set.iter().map(|m| m.symbol()).collect()
}

fn fmb_conformance() -> Outcome {
    let start = Instant::now();
    let reports = verify_catalog(10.0, DEFAULT_DELTA).expect("grid covers the catalog");
    let took = start.elapsed();
    let ok = reports.iter().filter(|r| r.ok()).count();
    let mut mismatches = Vec::new();
    for (report, kind) in reports.iter().zip(fmr::oracle::catalog_kinds(10.0)) {
        let reference = reference_table(kind);
        for row in &report.rows {
            let observed: BTreeSet<FailureMode> = row.observed.iter().copied().collect();
            let uncertain: BTreeSet<FailureMode> = row.uncertain.iter().copied().collect();
            let (want, want_u) = &reference[&row.inputs];
            if &observed != want || &uncertain != want_u {
                let ins: String = row.inputs.iter().map(|m| m.symbol()).collect();
                mismatches.push(format!(
                    "{} ({ins}) observed {}{} reference {}{}",
                    kind.name(),
                    modes(&observed),
                    if uncertain.is_empty() {
                        String::new()
                    } else {
                        format!(" u:{}", modes(&uncertain))
                    },
                    modes(want),
                    if want_u.is_empty() {
                        String::new()
                    } else {
                        format!(" u:{}", modes(want_u))
                    },
                ));
            }
        }
    }
    let rows_ok = mismatches.is_empty();
    Outcome {
        pass: ok == reports.len() && rows_ok && took < Duration::from_secs(5),
        detail: format!(
            "{ok}/{} sound and complete in {:.2} s; truth tables {}",
            reports.len(),
            took.as_secs_f64(),
            if rows_ok {
                "match".to_string()
            } else {
                format!("differ: {}", mismatches.join("; "))
            }
        ),
    }
}

fn outputs(g: &ProgramGraph) -> Vec<(String, Vec<FailureMode>)> {
    g.outputs()
        .map(|o| (g.var(o).name.clone(), g.var(o).ty.alphabet().to_vec()))
        .collect()
}

fn oracle_equivalence() -> Outcome {
    let mut rng = StdRng::seed_from_u64(2024);
    let (mut equal, mut covered, mut practical_subset) = (0, 0, 0);
    let n = 200;
    for _ in 0..n {
        let g = random_program(&mut rng, &RandomShape::default());
        let (mut eq, mut cov, mut sub) = (true, true, true);
        for (name, alphabet) in outputs(&g) {
            let target = g.var_id(&name).expect("output");
            let sig = cone_input_signature(&g, target);
            let names: Vec<String> = sig.iter().map(|s| s.0.clone()).collect();
            let grid = WitnessGrid::for_program(&g, DEFAULT_DELTA).refined_for(&g, target, 1, 50_000_000);
            let obs = observe_program(&g, target, &grid).expect("small program");
            for m in alphabet {
                let brute = obs.causing(m);
                let full = backward_analyze(&g, &name, m, AnalysisOptions::exhaustive()).expect("analysis");
                let engine = expand_any(&full.formula, &sig);
                eq &= engine == brute;
                cov &= brute.is_subset(&engine);
                let practical = backward_analyze(&g, &name, m, AnalysisOptions::default()).expect("analysis");
                sub &= expand_match_elsewhere(&practical.formula, &names).is_subset(&brute);
            }
        }
        equal += eq as usize;
        covered += cov as usize;
        practical_subset += sub as usize;
    }
    Outcome {
        pass: equal == n && practical_subset == n,
        detail: format!(
            "equal {equal}/{n}, practical subset {practical_subset}/{n}, engine covers oracle {covered}/{n}"
        ),
    }
}

fn compositionality() -> Outcome {
    let mut rng = StdRng::seed_from_u64(500);
    let n = 500;
    let mut agree = 0;
    for _ in 0..n {
        let chain = random_chain(&mut rng, &[0.0, 1.0]);
        let composed = kleisli_chain(&chain);
        let o = chain.var_id("o").expect("chain output");
        let sig = cone_input_signature(&chain, o);
        let all = chain.var(o).ty.alphabet().iter().all(|mode| {
            let a = backward_analyze(&chain, "o", *mode, AnalysisOptions::exhaustive()).expect("analysis");
            let expected: BTreeSet<Vec<FailureMode>> = composed
                .iter()
                .filter(|(_, ms)| ms.contains(mode))
                .map(|(t, _)| t.clone())
                .collect();
            expand_any(&a.formula, &sig) == expected
        });
        agree += all as usize;
    }
    Outcome {
        pass: agree == n,
        detail: format!("{agree}/{n} chains agree"),
    }
}

fn simplification() -> Outcome {
    let mut rng = StdRng::seed_from_u64(1000);
    let n = 1000;
    let (mut preserved, mut minimal) = (0, 0);
    for _ in 0..n {
        let nv = rng.gen_range(1..=6);
        let vars: Vec<(String, SignalType)> = (0..nv)
            .map(|i| {
                let ty = if rng.gen_bool(0.5) {
                    SignalType::Real
                } else {
                    SignalType::Bool
                };
                (format!("v{i}"), ty)
            })
            .collect();
        let conj: Vec<Vec<ModeLiteral>> = (0..rng.gen_range(0..=8))
            .map(|_| {
                (0..rng.gen_range(1..=4))
                    .map(|_| {
                        let (v, ty) = vars.choose(&mut rng).expect("vars");
                        ModeLiteral::new(v.clone(), *ty.alphabet().choose(&mut rng).expect("modes"))
                    })
                    .collect()
            })
            .collect();
        let target = ModeLiteral::new("o", FalseFault);
        let f = simplify_dnf(target, conj.clone());

        let mut models = BTreeSet::new();
        let mut tuples: Vec<Vec<FailureMode>> = vec![vec![]];
        for (_, ty) in &vars {
            tuples = tuples
                .iter()
                .flat_map(|t| ty.alphabet().iter().map(move |m| [t.clone(), vec![*m]].concat()))
                .collect();
        }
        for t in tuples {
            let value: BTreeMap<&str, FailureMode> =
                vars.iter().map(|v| v.0.as_str()).zip(t.iter().copied()).collect();
            if conj
                .iter()
                .any(|c| c.iter().all(|l| value[l.var.as_str()] == l.mode))
            {
                models.insert(t);
            }
        }
        preserved += (expand_any(&f, &vars) == models) as usize;
        let no_subsumption = f.scenarios.iter().enumerate().all(|(i, a)| {
            f.scenarios
                .iter()
                .enumerate()
                .all(|(j, b)| i == j || !a.subsumes(b))
        });
        minimal += no_subsumption as usize;
    }
    Outcome {
        pass: preserved == n && minimal == n,
        detail: format!("models preserved {preserved}/{n}, subsumption-free {minimal}/{n}"),
    }
}

fn scale() -> Outcome {
    let g = scale_program(&mut StdRng::seed_from_u64(2170), &ScaleShape::default());
    let outs: Vec<String> = g.outputs().map(|o| g.var(o).name.clone()).collect();
    let start = Instant::now();
    let mut largest = 0;
    for o in &outs {
        for m in [FalseFault, TrueFault] {
            let a = backward_analyze(&g, o, m, AnalysisOptions::default()).expect("analysis");
            largest = largest.max(a.formula.scenarios.len());
        }
    }
    let took = start.elapsed();
    Outcome {
        pass: g.blocks().len() >= 2000 && took < Duration::from_secs(60),
        detail: format!(
            "{} blocks, {} inputs, {} outputs x {{f,t}} in {:.2} s, largest shortlist {largest}",
            g.blocks().len(),
            g.inputs().count(),
            outs.len(),
            took.as_secs_f64()
        ),
    }
}

fn quantification() -> Outcome {
    let text = std::fs::read_to_string(samples().join("t_avg.fmrprog")).expect("sample");
    let g = parse_program(&text).expect("sample parses");
    let a = backward_analyze(&g, "o", FalseFault, AnalysisOptions::default()).expect("analysis");
    let data = FailureData::from_json(r#"{"i1": {"l": 1e-3}, "i2": {"l": 1e-3}}"#).expect("data");
    let q = aggregate(&a.formula, &data, Method::InclusionExclusion).expect("quantify");
    let exact = q.exact.expect("exact value");
    let types: BTreeMap<String, SignalType> = [
        ("i1".to_string(), SignalType::Real),
        ("i2".to_string(), SignalType::Real),
    ]
    .into();
    let oracle_exact = enumerated_probability(&a.formula, &data, &types);
    let oracle_sum: f64 = a
        .formula
        .scenarios
        .iter()
        .map(|s| {
            let single = ScenarioFormula {
                target: a.formula.target.clone(),
                scenarios: vec![s.clone()],
            };
            enumerated_probability(&single, &data, &types)
        })
        .sum();
    let tol = 1e-9;
    let pass = (exact - oracle_exact).abs() <= tol
        && (exact - 1.999e-3).abs() <= tol
        && (q.rare_event - oracle_sum).abs() <= tol
        && (q.rare_event - 2.000e-3).abs() <= tol;
    Outcome {
        pass,
        detail: format!(
            "exact {exact:.6e} (oracle {oracle_exact:.6e}), rare-event {:.6e} (oracle {oracle_sum:.6e})",
            q.rare_event
        ),
    }
}

fn main() -> ExitCode {
    let checks: [Check; 8] = [
        ("worked example T_Avg o=f", worked_example),
        ("alternate program T_Or o=f, practical", alternate_program),
        ("FMB conformance and truth tables", fmb_conformance),
        ("oracle equivalence on 200 random programs", oracle_equivalence),
        ("compositionality on 500 random chains", compositionality),
        ("simplification on 1000 random DNFs", simplification),
        ("scale: all outputs of a 2000+ block program", scale),
        ("quantification of the T_Avg shortlist", quantification),
    ];
    let mut passed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let o = check();
        passed += o.pass as usize;
        println!(
            "{} [{}] {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail
        );
    }
    println!("{passed}/{} criteria pass", checks.len());
    if passed == checks.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
