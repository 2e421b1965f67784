use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use ratcomplex::coded_sets::NegInfoSet;
use ratcomplex::complex_tree::{anytime_component, build_tree, component_containing_point, unique_path_set};
use ratcomplex::constructions::{
    decode_binary_product, encode_binary_product, function_from_connected, twisted_cube, Constraint,
    DEFAULT_FUEL,
};
use ratcomplex::fixed_point::{brouwer_solve, Budget, FunctionOracle, FunctionSpec};
use ratcomplex::points::ExactPoint;
use ratcomplex::rat::{fmt_rat, parse_rat};
use ratcomplex::weihrauch::run_pipeline;
use ratcomplex::{Error, Rat};

#[derive(Parser)]
#[command(name = "ratcomplex", version, about = "Rational complexes, connected choice and fixed points")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// Tree depth.
    #[arg(long, default_value_t = 8)]
    depth: usize,
    /// Target precision as an exact rational "p/q".
    #[arg(long, default_value = "1/1024")]
    eps: String,
    /// Ball-stream fuel for path selection.
    #[arg(long, default_value_t = DEFAULT_FUEL)]
    fuel: usize,
    /// Work budget (grid cells and boundary pieces).
    #[arg(long)]
    budget: Option<usize>,
    /// Parallel jobs across independent inputs.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Artifact path (a directory when several inputs are given).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Summary report path.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Trees of complexes.
    Tree {
        #[command(subcommand)]
        cmd: TreeCmd,
    },
    /// Fixed-point solving.
    Solve {
        #[command(subcommand)]
        cmd: SolveCmd,
    },
    /// Set-to-function and set-to-set constructions.
    Construct {
        #[command(subcommand)]
        cmd: ConstructCmd,
    },
    /// Bit-encoding gadgets.
    Gadget {
        #[command(subcommand)]
        cmd: GadgetCmd,
    },
    /// Reduction pipelines.
    Reduce {
        #[command(subcommand)]
        cmd: ReduceCmd,
    },
}

#[derive(Subcommand)]
enum TreeCmd {
    Build {
        #[arg(long = "set", required = true)]
        sets: Vec<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    Path {
        #[arg(long)]
        set: PathBuf,
        #[arg(long, value_enum, default_value_t = PathMode::Unique)]
        mode: PathMode,
        /// Guiding point (JSON list of "p/q"), for `--mode point`.
        #[arg(long)]
        point: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PathMode {
    Unique,
    Anytime,
    Point,
}

#[derive(Subcommand)]
enum SolveCmd {
    Brouwer {
        #[arg(long = "fn", alias = "function")]
        function: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Subcommand)]
enum ConstructCmd {
    Ariadne {
        #[arg(long)]
        set: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    Twisted {
        #[arg(long)]
        set: PathBuf,
        /// Grid stages to emit.
        #[arg(long, default_value_t = 4)]
        stages: usize,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Subcommand)]
enum GadgetCmd {
    EncodeBits {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        constraints: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    DecodeBits {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        point: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Subcommand)]
enum ReduceCmd {
    Run {
        #[arg(long)]
        pipeline: String,
        #[arg(long)]
        instance: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parse { .. } | Error::Io { .. } | Error::Malformed { .. } => 2,
        Error::PromiseViolated { .. } | Error::BoundaryFixedPoint { .. } => 3,
        Error::FuelExhausted { .. } | Error::BudgetExceeded { .. } | Error::ResourceLimit { .. } => 4,
        _ => 1,
    }
}

fn read_json<T: serde::de::DeserializeOwned>(p: &Path) -> Result<T, Error> {
    let text = std::fs::read_to_string(p).map_err(|e| Error::Parse {
        op: "read_input",
        detail: format!("{}: {e}", p.display()),
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        op: "read_input",
        detail: format!("{}: {e}", p.display()),
    })
}

fn write_json(p: &Path, v: &impl Serialize) -> Result<(), Error> {
    let mut text = serde_json::to_string_pretty(v).map_err(|e| Error::Io {
        op: "write_output",
        detail: e.to_string(),
    })?;
    text.push('\n');
    std::fs::write(p, text).map_err(|e| Error::Io {
        op: "write_output",
        detail: format!("{}: {e}", p.display()),
    })
}

/// Write the artifact (or print it when no path is given) and the report.
fn emit(common: &Common, artifact: &impl Serialize, report: &Value) -> Result<(), Error> {
    match &common.out {
        Some(p) => write_json(p, artifact)?,
        None => println!(
            "{}",
            serde_json::to_string_pretty(artifact).map_err(|e| Error::Io {
                op: "write_output",
                detail: e.to_string()
            })?
        ),
    }
    if let Some(r) = &common.report {
        write_json(r, report)?;
    }
    eprintln!("{}", serde_json::to_string(report).unwrap_or_default());
    Ok(())
}

fn read_point(p: &Path) -> Result<ExactPoint, Error> {
    let raw: Vec<String> = read_json(p)?;
    Ok(ExactPoint(raw.iter().map(|s| parse_rat(s)).collect::<Result<_, _>>()?))
}

fn parse_eps(s: &str) -> Result<Rat, Error> {
    parse_rat(s)
}

fn budget(common: &Common) -> Budget {
    let mut b = Budget::default();
    if let Some(n) = common.budget {
        b.cells = n;
        b.pieces = n;
    }
    b
}

fn tree_summary(set: &NegInfoSet, depth: usize) -> Result<(Value, Value), Error> {
    let t = build_tree(set, depth)?;
    t.check_invariants()?;
    let per_level: Vec<usize> = (0..=depth).map(|i| t.level_nodes(i).count()).collect();
    let report = json!({
        "depth": depth,
        "nodes_per_level": per_level,
        "surviving_subtrees": t.level_nodes(depth).count(),
        "bound": t.bound(),
        "diameters": (0..=depth)
            .map(|i| t.level_union(i).map(|u| fmt_rat(&u.diameter())))
            .collect::<Result<Vec<_>, _>>()?,
    });
    let artifact = serde_json::to_value(&t).map_err(|e| Error::Io {
        op: "tree build",
        detail: e.to_string(),
    })?;
    Ok((artifact, report))
}

fn tree_build(sets: &[PathBuf], common: &Common) -> Result<(), Error> {
    if sets.len() == 1 {
        let s: NegInfoSet = read_json(&sets[0])?;
        let (a, r) = tree_summary(&s, common.depth)?;
        return emit(common, &a, &r);
    }
    // read everything first so a bad input leaves no partial artifacts
    let inputs: Vec<NegInfoSet> = sets.iter().map(|p| read_json(p)).collect::<Result<_, _>>()?;
    let jobs = common.jobs.max(1);
    let mut results: Vec<Option<Result<(Value, Value), Error>>> = (0..inputs.len()).map(|_| None).collect();
    std::thread::scope(|sc| {
        for (chunk_in, chunk_out) in inputs
            .chunks(inputs.len().div_ceil(jobs))
            .zip(results.chunks_mut(inputs.len().div_ceil(jobs)))
        {
            sc.spawn(move || {
                for (s, slot) in chunk_in.iter().zip(chunk_out.iter_mut()) {
                    *slot = Some(tree_summary(s, common.depth));
                }
            });
        }
    });
    let results: Vec<(Value, Value)> = results
        .into_iter()
        .map(|r| r.expect("every input processed"))
        .collect::<Result<_, _>>()?;
    let report = json!({
        "fixtures": sets.iter().zip(&results).map(|(p, (_, r))| json!({"input": p.display().to_string(), "summary": r})).collect::<Vec<_>>()
    });
    if let Some(dir) = &common.out {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io {
            op: "tree build",
            detail: e.to_string(),
        })?;
        for (p, (a, _)) in sets.iter().zip(&results) {
            let name = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            write_json(&dir.join(format!("{name}.tree.json")), a)?;
        }
    }
    if let Some(r) = &common.report {
        write_json(r, &report)?;
    }
    eprintln!("{}", serde_json::to_string(&report).unwrap_or_default());
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.cmd {
        Cmd::Tree { cmd: TreeCmd::Build { sets, common } } => tree_build(&sets, &common),
        Cmd::Tree { cmd: TreeCmd::Path { set, mode, point, common } } => {
            let s: NegInfoSet = read_json(&set)?;
            let (p, mind_changes) = match mode {
                PathMode::Unique => (unique_path_set(&s, common.depth, common.fuel)?, None),
                PathMode::Anytime => {
                    let (p, c) = anytime_component(&s, common.depth, common.fuel)?;
                    (p, Some(c))
                }
                PathMode::Point => {
                    let path = point.ok_or_else(|| Error::Parse {
                        op: "tree path",
                        detail: "--mode point needs --point".into(),
                    })?;
                    let x = read_point(&path)?;
                    (component_containing_point(&s, &x, common.depth, common.fuel)?, None)
                }
            };
            let report = json!({
                "word": p.word,
                "last_diameter": fmt_rat(&p.last().set().diameter()),
                "mind_changes": mind_changes,
            });
            emit(&common, &p, &report)
        }
        Cmd::Solve { cmd: SolveCmd::Brouwer { function, common } } => {
            let spec: FunctionSpec = read_json(&function)?;
            let f: Arc<dyn FunctionOracle> = spec.build()?;
            let eps = parse_eps(&common.eps)?;
            let mut b = budget(&common);
            b.max_depth = b.max_depth.max(common.depth);
            let r = brouwer_solve(f, &eps, &b)?;
            let report = json!({
                "point": r.point.iter().map(fmt_rat).collect::<Vec<_>>(),
                "residual": fmt_rat(&r.residual),
                "diameter": fmt_rat(&r.diameter),
                "converged": r.converged,
                "depth": r.depth,
                "indices": r.indices,
            });
            emit(&common, &r, &report)
        }
        Cmd::Construct { cmd: ConstructCmd::Ariadne { set, common } } => {
            let s: NegInfoSet = read_json(&set)?;
            let f = function_from_connected(&s, common.fuel)?;
            f.ensure(common.depth)?;
            let data = f.snapshot();
            let spec = FunctionSpec::Constructed {
                source: s,
                fuel: Some(common.fuel),
            };
            let report = json!({
                "levels": data.levels.len(),
                "anchors": data.anchors.iter().map(|a| a.iter().map(fmt_rat).collect::<Vec<_>>()).collect::<Vec<_>>(),
                "path_vertices": data.paths.iter().map(|p| p.vertices.len()).collect::<Vec<_>>(),
            });
            emit(&common, &spec, &report)
        }
        Cmd::Construct { cmd: ConstructCmd::Twisted { set, stages, common } } => {
            let s: NegInfoSet = read_json(&set)?;
            let t = twisted_cube(&s, stages)?;
            let report = json!({"stages": stages, "balls": t.len()});
            emit(&common, &t, &report)
        }
        Cmd::Gadget { cmd: GadgetCmd::EncodeBits { n, constraints, common } } => {
            let cs: Vec<Constraint> = read_json(&constraints)?;
            let e = encode_binary_product(n, &cs)?;
            let (a, b) = e.interval();
            let artifact = json!({
                "set": e.set(),
                "interval": [fmt_rat(a), fmt_rat(b)],
                "transcript": e.transcript(),
            });
            let report = json!({"descents": e.transcript().entries.len(), "length": fmt_rat(&(b - a))});
            emit(&common, &artifact, &report)
        }
        Cmd::Gadget { cmd: GadgetCmd::DecodeBits { n, point, common } } => {
            let bits = decode_binary_product(n, &read_point(&point)?)?;
            emit(&common, &json!(bits), &json!({"bits": bits}))
        }
        Cmd::Reduce { cmd: ReduceCmd::Run { pipeline, instance, common } } => {
            let inst: Value = read_json(&instance)?;
            let r = run_pipeline(&pipeline, &inst)?;
            let report = json!({"pipeline": r.pipeline, "verdict": r.verdict, "answer": r.answer});
            emit(&common, &r, &report)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
