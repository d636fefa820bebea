//! `rha`: command-line front end.
//!
//! Exit codes: 0 yes/valid, 1 no/unreachable/invalid, 2 usage, parse or
//! internal error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use rha_core::cm::{cm_run, parse_cm};
use rha_core::contraction::contract_run;
use rha_core::feasibility::{solve, Affine, Cmp, LinearSystem};
use rha_core::gadgets::{compile_cm, run_bundle, Encoding};
use rha_core::model::validate_model;
use rha_core::parser::{parse_model, serialize_model};
use rha_core::region::{build_region_rsm, enumerate_regions, successor_chain};
use rha_core::semantics::{
    initial_configuration, simulate_from, validate_run, Configuration, DelayOracle, EarliestOracle, Run,
    StopReason,
};
use rha_core::tbreach::{decide_tb_reach, TbQuery};
use rha_core::testgen::{random_model, random_run, GenParams};
use rha_core::trace::{read_trace, run_json, write_trace};
use rha_core::{EdgeId, Location, Rational, RhaModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutFormat {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OracleKind {
    Earliest,
    Random,
}

#[derive(Debug, Parser)]
#[command(name = "rha", version, about = "Recursive hybrid automata toolkit")]
struct Cli {
    /// Report format.
    #[arg(long, value_enum, default_value = "text", global = true)]
    out_format: OutFormat,
    /// Run randomized consistency checks; RHA_SEED fixes the seed.
    #[arg(long)]
    self_test: bool,
    #[command(subcommand)]
    cmd: Option<Cmd>,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Parse and validate a model.
    Validate { model: PathBuf },
    /// Simulate from the declared initial configuration.
    Simulate {
        model: PathBuf,
        #[arg(long, default_value_t = 1000)]
        max_steps: usize,
        /// Stop when this location is reached (any context).
        #[arg(long)]
        target: Option<String>,
        #[arg(long, value_enum, default_value = "earliest")]
        oracle: OracleKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the run as a trace file.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Replay a trace against a model.
    CheckRun { model: PathBuf, trace: PathBuf },
    /// List two-variable regions and their successor chains.
    Regions {
        #[arg(long)]
        cmax: i64,
        /// Rate vector `rx,ry`; all four 0/1 vectors when omitted.
        #[arg(long)]
        rates: Option<String>,
    },
    /// Reachability through the region-augmented RSM (glitch-free 2-stopwatch models).
    Reach {
        model: PathBuf,
        #[arg(long)]
        target: String,
        /// Only count the target as an exit of the initial component with empty context.
        #[arg(long)]
        termination: bool,
    },
    /// Time-bounded reachability for bounded-context pass-by-reference models.
    TbReach {
        model: PathBuf,
        #[arg(long)]
        target: String,
        #[arg(long)]
        bound: Rational,
        #[arg(long)]
        context: usize,
        #[arg(long)]
        max_len: usize,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        emit_witness: Option<PathBuf>,
    },
    /// Split and contract a run; certify the result by linear feasibility.
    Contract {
        model: PathBuf,
        trace: PathBuf,
        /// Time bound used for the splitting; defaults to the run's duration.
        #[arg(long)]
        bound: Option<Rational>,
        /// Context bound used in the length bound; defaults to the run's deepest context.
        #[arg(long)]
        context: Option<usize>,
        /// Write the certified contracted run here.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Compile a two-counter machine to an RHA.
    CompileCm {
        program: PathBuf,
        #[arg(long)]
        encoding: Encoding,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Compile a two-counter machine and simulate it under the gadget oracle.
    RunCm {
        program: PathBuf,
        #[arg(long)]
        encoding: Encoding,
        #[arg(long, default_value_t = 200)]
        max_steps: usize,
        #[arg(long)]
        trace: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Verdict {
    Yes,
    No,
    Invalid,
}

impl Verdict {
    fn name(self) -> &'static str {
        match self {
            Verdict::Yes => "yes",
            Verdict::No => "no",
            Verdict::Invalid => "invalid",
        }
    }

    fn code(self) -> u8 {
        match self {
            Verdict::Yes => 0,
            Verdict::No | Verdict::Invalid => 1,
        }
    }
}

struct Report {
    verdict: Verdict,
    text: String,
    json: Value,
    artifacts: Vec<PathBuf>,
}

#[derive(Debug)]
struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

type CliResult = Result<Report, Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure(format!("{}: {e}", path.display())))
}

fn load_model(path: &Path) -> Result<RhaModel, Failure> {
    parse_model(&read(path)?).map_err(|d| Failure(format!("{}:{d}", path.display())))
}

fn resolve(model: &RhaModel, text: &str) -> Result<Location, Failure> {
    model
        .resolve_location(text)
        .ok_or_else(|| Failure(format!("unknown location `{text}`")))
}

fn r(q: &Rational) -> Value {
    Value::String(q.to_fraction_string())
}

fn cmd_validate(path: &Path) -> CliResult {
    let model = load_model(path)?;
    let v = validate_model(&model);
    let verdict = if v.is_ok() { Verdict::Yes } else { Verdict::Invalid };
    let mut text = String::new();
    if v.is_ok() {
        let c = &v.class;
        text.push_str(&format!(
            "valid: {} components, {} variables, cmax {}, rmax {}\nclass: clocks_only={} stopwatches_only={} glitch_free={} by_reference_only={} recursive={}\n",
            model.components.len(),
            model.nvars(),
            v.cmax,
            v.rmax,
            c.clocks_only,
            c.stopwatches_only,
            c.glitch_free,
            c.by_reference_only,
            c.hierarchical_unknown
        ));
    } else {
        for d in &v.diagnostics {
            text.push_str(&format!("error: {d}\n"));
        }
    }
    Ok(Report {
        verdict,
        text,
        json: json!({
            "diagnostics": v.diagnostics,
            "cmax": v.cmax,
            "rmax": v.rmax,
            "class": {
                "clocks_only": v.class.clocks_only,
                "stopwatches_only": v.class.stopwatches_only,
                "glitch_free": v.class.glitch_free,
                "by_reference_only": v.class.by_reference_only,
                "recursive": v.class.hierarchical_unknown,
            },
        }),
        artifacts: vec![],
    })
}

struct RandomOracle {
    rng: std::cell::RefCell<ChaCha8Rng>,
}

impl DelayOracle for RandomOracle {
    fn choose(&self, model: &RhaModel, config: &Configuration) -> Option<(Rational, EdgeId)> {
        let mut rng = self.rng.borrow_mut();
        let mut pick = |n: usize| rng.gen_range(0..n.max(1));
        let run = random_run(model, config.clone(), &mut pick, 1, usize::MAX, None);
        run.steps.first().and_then(|s| match s.kind {
            rha_core::semantics::StepKind::Edge(e) => Some((s.delay.clone(), e)),
            _ => None,
        })
    }
}

fn outcome_json(model: &RhaModel, run: &Run, reason: StopReason) -> Value {
    json!({
        "reason": reason.to_string(),
        "steps": run.len(),
        "duration": r(&run.duration()),
        "final": rha_core::trace::config_json(model, run.last()),
    })
}

fn cmd_simulate(
    path: &Path,
    max_steps: usize,
    target: Option<&str>,
    oracle: OracleKind,
    seed: u64,
    trace: Option<&Path>,
) -> CliResult {
    let model = load_model(path)?;
    let v = validate_model(&model);
    if !v.is_ok() {
        return Err(Failure(format!("invalid model: {}", v.diagnostics.join("; "))));
    }
    let target = target.map(|t| resolve(&model, t)).transpose()?;
    let random = RandomOracle {
        rng: ChaCha8Rng::seed_from_u64(seed).into(),
    };
    let oracle: &dyn DelayOracle = match oracle {
        OracleKind::Earliest => &EarliestOracle,
        OracleKind::Random => &random,
    };
    let out = simulate_from(
        &model,
        initial_configuration(&model),
        oracle,
        max_steps,
        &|c: &Configuration| Some(c.loc) == target,
    )?;
    let mut artifacts = vec![];
    if let Some(p) = trace {
        write(p, &write_trace(&model, &out.run))?;
        artifacts.push(p.to_path_buf());
    }
    let verdict = match (target, out.reason) {
        (Some(_), StopReason::Target) | (None, _) => Verdict::Yes,
        _ => Verdict::No,
    };
    let last = out.run.last();
    Ok(Report {
        verdict,
        text: format!(
            "{}: {} steps, duration {}\nfinal: {} {}\n",
            out.reason,
            out.run.len(),
            out.run.duration(),
            model.qualified_loc_name(last.loc),
            model.format_valuation(&last.val)
        ),
        json: outcome_json(&model, &out.run, out.reason),
        artifacts,
    })
}

fn cmd_check_run(model: &Path, trace: &Path) -> CliResult {
    let m = load_model(model)?;
    let run = read_trace(&m, &read(trace)?)?;
    match validate_run(&m, &run) {
        Ok(()) => Ok(Report {
            verdict: Verdict::Yes,
            text: format!("valid run: {} steps, duration {}\n", run.len(), run.duration()),
            json: json!({ "steps": run.len(), "duration": r(&run.duration()) }),
            artifacts: vec![],
        }),
        Err(v) => Ok(Report {
            verdict: Verdict::No,
            text: format!("invalid run: {v}\n"),
            json: json!({ "index": v.index, "reason": v.reason }),
            artifacts: vec![],
        }),
    }
}

fn cmd_regions(cmax: i64, rates: Option<&str>) -> CliResult {
    if cmax < 0 {
        return Err(Failure("cmax must be non-negative".into()));
    }
    let vectors: Vec<(u32, u32)> = match rates {
        None => vec![(0, 0), (0, 1), (1, 0), (1, 1)],
        Some(s) => {
            let parts: Vec<&str> = s.split(',').collect();
            let parse = |t: &str| match t.trim() {
                "0" => Ok(0),
                "1" => Ok(1),
                other => Err(Failure(format!("rate `{other}` is not 0 or 1"))),
            };
            match parts.as_slice() {
                [a, b] => vec![(parse(a)?, parse(b)?)],
                _ => return Err(Failure(format!("rates must be `rx,ry`, got `{s}`"))),
            }
        }
    };
    let regions = enumerate_regions(cmax);
    let mut text = format!("{} regions for cmax {cmax}\n", regions.len());
    let mut chains = Vec::new();
    for rv in &vectors {
        text.push_str(&format!("rates ({},{}):\n", rv.0, rv.1));
        for reg in &regions {
            let chain: Vec<String> = successor_chain(reg, *rv, cmax).iter().map(|x| x.display(cmax)).collect();
            text.push_str(&format!("  {}\n", chain.join(" -> ")));
            chains.push(json!({ "rates": [rv.0, rv.1], "chain": chain }));
        }
    }
    Ok(Report {
        verdict: Verdict::Yes,
        text,
        json: json!({
            "cmax": cmax,
            "regions": regions.iter().map(|x| x.display(cmax)).collect::<Vec<_>>(),
            "chains": chains,
        }),
        artifacts: vec![],
    })
}

fn cmd_reach(path: &Path, target: &str, termination: bool) -> CliResult {
    let model = load_model(path)?;
    let target = resolve(&model, target)?;
    let rrsm = build_region_rsm(&model)?;
    let res = rrsm.reach(&model, target, termination);
    let witness: Vec<String> = res
        .witness
        .iter()
        .flatten()
        .map(|c| {
            let stack: Vec<String> = c
                .stack
                .iter()
                .map(|(comp, b)| rrsm.rsm.components[*comp].boxes[*b].name.clone())
                .collect();
            format!("[{}] {}", stack.join(","), rrsm.rsm.loc_name(c.at))
        })
        .collect();
    let mut text = format!(
        "{}: {}\n",
        model.qualified_loc_name(target),
        if res.reachable { "reachable" } else { "unreachable" }
    );
    for w in &witness {
        text.push_str(&format!("  {w}\n"));
    }
    Ok(Report {
        verdict: if res.reachable { Verdict::Yes } else { Verdict::No },
        text,
        json: json!({
            "reachable": res.reachable,
            "summaries": res.summaries.total(),
            "witness": witness,
        }),
        artifacts: vec![],
    })
}

#[allow(clippy::too_many_arguments)]
fn cmd_tb_reach(
    path: &Path,
    target: &str,
    bound: &Rational,
    context: usize,
    max_len: usize,
    jobs: usize,
    emit: Option<&Path>,
) -> CliResult {
    let model = load_model(path)?;
    let target = resolve(&model, target)?;
    let q = TbQuery {
        target,
        bound: bound.clone(),
        context,
        max_len,
        jobs,
    };
    let res = decide_tb_reach(&model, &initial_configuration(&model), &q)?;
    let mut artifacts = vec![];
    if let (Some(p), Some(w)) = (emit, &res.witness) {
        write(p, &write_trace(&model, w))?;
        artifacts.push(p.to_path_buf());
    }
    let verdict = if res.reachable { Verdict::Yes } else { Verdict::No };
    let mut text = if res.reachable {
        let w = res.witness.as_ref().expect("witness");
        format!("reachable: witness of {} steps, duration {}\n", w.len(), w.duration())
    } else if res.complete {
        "unreachable within the time bound\n".to_string()
    } else {
        format!("not reachable with runs of length <= {}\n", res.effective_len)
    };
    text.push_str(&format!(
        "length bound C = {}; searched up to {} steps; {} skeletons checked\n",
        res.bound_c, res.effective_len, res.skeletons_checked
    ));
    Ok(Report {
        verdict,
        text,
        json: json!({
            "reachable": res.reachable,
            "complete": res.complete,
            "bound_c": res.bound_c.to_string(),
            "effective_len": res.effective_len,
            "skeletons_checked": res.skeletons_checked,
            "witness": res.witness.as_ref().map(|w| run_json(&model, w)),
            "witness_duration": res.witness.as_ref().map(|w| r(&w.duration())),
        }),
        artifacts,
    })
}

fn cmd_contract(model: &Path, trace: &Path, bound: Option<&Rational>, k: Option<usize>, out: Option<&Path>) -> CliResult {
    let m = load_model(model)?;
    let run = read_trace(&m, &read(trace)?)?;
    validate_run(&m, &run)?;
    let bound = bound.cloned().unwrap_or_else(|| run.duration());
    let deepest = (0..=run.len()).map(|i| run.config(i).context.len()).max().unwrap_or(0);
    let k = k.unwrap_or(deepest).max(1);
    let res = contract_run(&m, &run, &bound, k)?;
    let mut artifacts = vec![];
    if let (Some(p), Some(c)) = (out, &res.certified) {
        write(p, &write_trace(&m, c))?;
        artifacts.push(p.to_path_buf());
    }
    let text = format!(
        "original length {}, contracted length {}, {} type-3 fragments\nbound C = {}, type-3 bound = {}\ncertified: {}\n",
        run.len(),
        res.skeleton.len(),
        res.split.fragments().len(),
        res.bound_c,
        res.type3_bound,
        if res.certified.is_some() { "yes" } else { "no" }
    );
    Ok(Report {
        verdict: if res.certified.is_some() { Verdict::Yes } else { Verdict::No },
        text,
        json: json!({
            "original_length": run.len(),
            "contracted_length": res.skeleton.len(),
            "fragments": res.split.fragments().len(),
            "duration": r(&run.duration()),
            "bound_c": res.bound_c.to_string(),
            "type3_bound": res.type3_bound.to_string(),
            "certified": res.certified.as_ref().map(|c| run_json(&m, c)),
        }),
        artifacts,
    })
}

fn load_cm(path: &Path) -> Result<rha_core::cm::CounterMachine, Failure> {
    parse_cm(&read(path)?).map_err(|d| Failure(format!("{}:{d}", path.display())))
}

fn cmd_compile_cm(program: &Path, encoding: Encoding, out: Option<&Path>) -> CliResult {
    let cm = load_cm(program)?;
    let b = compile_cm(&cm, encoding);
    let text = serialize_model(&b.model);
    let mut artifacts = vec![];
    let summary = format!(
        "{}: {} components, {} nodes, {} boxes, {} edges\nencoding: {}\n",
        encoding,
        b.model.components.len(),
        b.model.nodes.len(),
        b.model.boxes.len(),
        b.model.edges.len(),
        b.descriptor.describe()
    );
    let report_text = match out {
        Some(p) => {
            write(p, &text)?;
            artifacts.push(p.to_path_buf());
            summary
        }
        None => text,
    };
    Ok(Report {
        verdict: Verdict::Yes,
        text: report_text,
        json: json!({
            "encoding": encoding.name(),
            "components": b.model.components.len(),
            "nodes": b.model.nodes.len(),
            "boxes": b.model.boxes.len(),
            "edges": b.model.edges.len(),
            "descriptor": b.descriptor.describe(),
        }),
        artifacts,
    })
}

fn cmd_run_cm(program: &Path, encoding: Encoding, max_steps: usize, trace: Option<&Path>) -> CliResult {
    let cm = load_cm(program)?;
    let reference = cm_run(&cm, max_steps)?;
    let b = compile_cm(&cm, encoding);
    let g = run_bundle(&b, max_steps)?;
    let agrees = g.agrees_with(&reference);
    if !agrees {
        return Err(Failure(format!(
            "compiled model disagrees with the interpreter (gadget halted: {}, interpreter halted: {})",
            g.halted, reference.halted
        )));
    }
    let mut artifacts = vec![];
    if let Some(p) = trace {
        write(p, &write_trace(&b.model, &g.run))?;
        artifacts.push(p.to_path_buf());
    }
    let mut text = format!(
        "{}: {} after {} instructions; duration {}; {} RHA steps\n",
        encoding,
        if g.halted { "halt reached" } else { "bound exhausted" },
        g.decoded.len().saturating_sub(1),
        g.duration,
        g.run.len()
    );
    for (i, d) in g.decoded.iter().enumerate() {
        let dur = g.instr_durations.get(i).map(|t| t.to_string()).unwrap_or_else(|| "-".into());
        text.push_str(&format!("  k={} pc={} c={} d={} t={} dt={}\n", i, d.pc, d.c, d.d, d.time, dur));
    }
    Ok(Report {
        verdict: if g.halted { Verdict::Yes } else { Verdict::No },
        text,
        json: json!({
            "encoding": encoding.name(),
            "halted": g.halted,
            "reason": g.reason.to_string(),
            "duration": r(&g.duration),
            "agrees_with_interpreter": agrees,
            "decoded": g.decoded.iter().map(|d| json!({
                "pc": d.pc, "c": d.c, "d": d.d, "k": d.k, "time": r(&d.time)
            })).collect::<Vec<_>>(),
            "instr_durations": g.instr_durations.iter().map(r).collect::<Vec<_>>(),
        }),
        artifacts,
    })
}

/// Traces name edges by endpoints, so parallel edges may resolve differently;
/// the configurations and delays must still coincide.
fn same_configs(a: &Run, b: &Run) -> bool {
    a.steps.len() == b.steps.len()
        && a.init == b.init
        && a.steps.iter().zip(&b.steps).all(|(x, y)| x.delay == y.delay && x.to == y.to)
}

/// Randomized checks of the solver, the semantics and the contraction pipeline.
fn self_test() -> CliResult {
    let seed: u64 = match std::env::var("RHA_SEED") {
        Ok(s) => s.parse().map_err(|_| Failure(format!("RHA_SEED `{s}` is not an integer")))?,
        Err(_) => 0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lines = Vec::new();
    let mut all_ok = true;

    let mut lp_ok = 0;
    let total = 200;
    for _ in 0..total {
        let mut sys = LinearSystem::new();
        let n = rng.gen_range(1..=3);
        for i in 0..n {
            sys.add_var(&format!("v{i}"));
        }
        for _ in 0..rng.gen_range(1..=5) {
            let mut lhs = Affine::constant(Rational::zero());
            for i in 0..n {
                lhs.add_term(i, Rational::from_int(rng.gen_range(-2..=2)));
            }
            let cmp = [Cmp::Le, Cmp::Lt, Cmp::Eq][rng.gen_range(0..3)];
            sys.add(&lhs, cmp, &Affine::constant(Rational::from_int(rng.gen_range(-3..=3))));
        }
        // A returned point must satisfy the system; an infeasible verdict must
        // survive a grid probe.
        let ok = match solve(&sys) {
            Some(x) => sys.satisfied_by(&x),
            None => grid(n).all(|p| !sys.satisfied_by(&p)),
        };
        lp_ok += ok as usize;
    }
    all_ok &= lp_ok == total;
    lines.push(format!("{} lp: {lp_ok}/{total} systems", pass(lp_ok == total)));

    let mut run_ok = 0;
    let mut cnt_ok = 0;
    let models = 50;
    for _ in 0..models {
        let mut pick = |n: usize| rng.gen_range(0..n.max(1));
        let m = random_model(&mut pick, &GenParams::default());
        let run = random_run(&m, initial_configuration(&m), &mut pick, 25, 3, None);
        let replay = validate_run(&m, &run).is_ok()
            && read_trace(&m, &write_trace(&m, &run)).map(|r| same_configs(&r, &run)).unwrap_or(false);
        run_ok += replay as usize;
        let c = contract_run(&m, &run, &run.duration(), 3)
            .map(|o| o.certified.map(|c| c.duration() == run.duration()).unwrap_or(false))
            .unwrap_or(false);
        cnt_ok += c as usize;
    }
    all_ok &= run_ok == models && cnt_ok == models;
    lines.push(format!("{} runs: {run_ok}/{models} replay and round-trip", pass(run_ok == models)));
    lines.push(format!("{} contraction: {cnt_ok}/{models} certified", pass(cnt_ok == models)));
    Ok(Report {
        verdict: if all_ok { Verdict::Yes } else { Verdict::No },
        text: format!("seed {seed}\n{}\n", lines.join("\n")),
        json: json!({ "seed": seed, "checks": lines }),
        artifacts: vec![],
    })
}

fn pass(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

/// Points with coordinates in {-4, -7/2, ..., 4}.
fn grid(n: usize) -> impl Iterator<Item = Vec<Rational>> {
    let axis: Vec<Rational> = (-8..=8).map(|i| Rational::new(i, 2)).collect();
    let total = axis.len().pow(n as u32);
    (0..total).map(move |mut idx| {
        (0..n)
            .map(|_| {
                let v = axis[idx % axis.len()].clone();
                idx /= axis.len();
                v
            })
            .collect()
    })
}

fn dispatch(cli: &Cli) -> CliResult {
    if cli.self_test {
        return self_test();
    }
    let Some(cmd) = &cli.cmd else {
        return Err(Failure("no subcommand given (try --help)".into()));
    };
    match cmd {
        Cmd::Validate { model } => cmd_validate(model),
        Cmd::Simulate {
            model,
            max_steps,
            target,
            oracle,
            seed,
            trace,
        } => cmd_simulate(model, *max_steps, target.as_deref(), *oracle, *seed, trace.as_deref()),
        Cmd::CheckRun { model, trace } => cmd_check_run(model, trace),
        Cmd::Regions { cmax, rates } => cmd_regions(*cmax, rates.as_deref()),
        Cmd::Reach {
            model,
            target,
            termination,
        } => cmd_reach(model, target, *termination),
        Cmd::TbReach {
            model,
            target,
            bound,
            context,
            max_len,
            jobs,
            emit_witness,
        } => cmd_tb_reach(model, target, bound, *context, *max_len, *jobs, emit_witness.as_deref()),
        Cmd::Contract {
            model,
            trace,
            bound,
            context,
            out,
        } => cmd_contract(model, trace, bound.as_ref(), *context, out.as_deref()),
        Cmd::CompileCm {
            program,
            encoding,
            out,
        } => cmd_compile_cm(program, *encoding, out.as_deref()),
        Cmd::RunCm {
            program,
            encoding,
            max_steps,
            trace,
        } => cmd_run_cm(program, *encoding, *max_steps, trace.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(rep) => {
            match cli.out_format {
                OutFormat::Text => print!("{}", rep.text),
                OutFormat::Json => {
                    let mut v = rep.json;
                    if let Value::Object(m) = &mut v {
                        m.insert("verdict".into(), Value::String(rep.verdict.name().into()));
                        m.insert(
                            "artifacts".into(),
                            rep.artifacts.iter().map(|p| p.display().to_string()).collect(),
                        );
                    }
                    println!("{}", serde_json::to_string_pretty(&v).expect("serializable"));
                }
            }
            ExitCode::from(rep.verdict.code())
        }
        Err(Failure(msg)) => {
            match cli.out_format {
                OutFormat::Text => eprintln!("error: {msg}"),
                OutFormat::Json => println!("{}", json!({ "verdict": "error", "error": msg })),
            }
            ExitCode::from(2)
        }
    }
}
