mod report;
mod settings;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use tablesynth::domains::{builtin_domain, load_benchmark, load_benchmark_dir, BenchmarkCase};
use tablesynth::dsl::{
    exec_program, exec_transform, input_schemas, parse_program, projection_type, validate_program,
    ActionSignature, ExecState, Program,
};
use tablesynth::synth::{synthesize, SynthOutcome};
use tablesynth::table::{Table, Value};

use report::run_bench;
use settings::{ModeArg, SettingsArgs};

const EXIT_SOLVED: u8 = 0;
const EXIT_ERROR: u8 = 1;
const EXIT_TIMEOUT: u8 = 2;
const EXIT_EXHAUSTED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "tablesynth",
    version,
    about = "Synthesize table-to-action programs from examples"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a program for a benchmark case. Prints the program on
    /// stdout and the search statistics as JSON on stderr.
    ///
    /// Exit status: 0 solved, 2 timeout, 3 search exhausted, 1 error.
    Synth {
        benchmark: PathBuf,
        #[command(flatten)]
        settings: SettingsArgs,
    },
    /// Run a program on tables and print the resulting action table as JSON.
    Exec {
        program: PathBuf,
        /// A JSON list of tables, or a benchmark file.
        tables: PathBuf,
        /// With a benchmark file, run on its pending tables instead of its
        /// example inputs.
        #[arg(long)]
        pending: bool,
        /// Take the action signature from this built-in domain.
        #[arg(long, conflicts_with = "signature")]
        domain: Option<String>,
        /// JSON file holding the action signature.
        #[arg(long)]
        signature: Option<PathBuf>,
    },
    /// Parse a program and print it in canonical form; with tables, also
    /// check it against them.
    Validate {
        program: PathBuf,
        /// A JSON list of tables, or a benchmark file.
        tables: Option<PathBuf>,
        #[arg(long, conflicts_with = "signature")]
        domain: Option<String>,
        #[arg(long)]
        signature: Option<PathBuf>,
    },
    /// Run every benchmark under a directory and report.
    ///
    /// Exit status is nonzero iff a regression-marked case fails in
    /// bidirectional mode.
    Bench {
        dir: PathBuf,
        #[command(flatten)]
        settings: SettingsArgs,
        #[arg(long, value_enum, default_value = "both")]
        output: OutputFormat,
        /// Also write the JSON report here.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Worker threads; defaults to the number of CPUs.
        #[arg(long)]
        jobs: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Json,
    Table,
    /// JSON document first, then the table.
    Both,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() {
                EXIT_ERROR
            } else {
                EXIT_SOLVED
            });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Synth {
            benchmark,
            settings,
        } => cmd_synth(&benchmark, &settings),
        Command::Exec {
            program,
            tables,
            pending,
            domain,
            signature,
        } => cmd_exec(
            &program,
            &tables,
            pending,
            domain.as_deref(),
            signature.as_deref(),
        ),
        Command::Validate {
            program,
            tables,
            domain,
            signature,
        } => cmd_validate(
            &program,
            tables.as_deref(),
            domain.as_deref(),
            signature.as_deref(),
        ),
        Command::Bench {
            dir,
            settings,
            output,
            report,
            jobs,
        } => cmd_bench(&dir, &settings, output, report.as_deref(), jobs),
    }
}

fn cmd_synth(path: &Path, args: &SettingsArgs) -> Result<u8> {
    let mode = match args.mode {
        ModeArg::Bi => tablesynth::synth::Mode::Bidirectional,
        ModeArg::ForwardOnly => tablesynth::synth::Mode::ForwardOnly,
        ModeArg::Both => bail!("synth runs one mode at a time; `both` is for bench"),
    };
    let case = load_benchmark(path).with_context(|| format!("loading {}", path.display()))?;
    let task = case.task().with_settings(args.settings(mode));
    let out = synthesize(&task)?;
    eprintln!("{}", out.stats().to_json());
    Ok(match out {
        SynthOutcome::Solved(s) => {
            print!("{}", s.program);
            EXIT_SOLVED
        }
        SynthOutcome::Timeout(_) => {
            eprintln!("timed out");
            EXIT_TIMEOUT
        }
        SynthOutcome::Exhausted(_) => {
            eprintln!("no program found within the search bounds");
            EXIT_EXHAUSTED
        }
    })
}

fn read_program(path: &Path) -> Result<Program> {
    let src = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_program(&src).map_err(|e| anyhow!("{}: {e}", path.display()))
}

/// Tables from a JSON list, or from a benchmark file along with its case.
fn read_tables(path: &Path, pending: bool) -> Result<(Vec<Table>, Option<BenchmarkCase>)> {
    let src = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let json: serde_json::Value =
        serde_json::from_str(&src).with_context(|| format!("parsing {}", path.display()))?;
    if json.is_array() {
        if pending {
            bail!("--pending needs a benchmark file");
        }
        let tables =
            serde_json::from_value(json).with_context(|| format!("parsing {}", path.display()))?;
        return Ok((tables, None));
    }
    let case = load_benchmark(path).with_context(|| format!("loading {}", path.display()))?;
    let tables = if pending {
        case.pending.clone()
    } else {
        case.inputs.clone()
    };
    Ok((tables, Some(case)))
}

fn yielded_action(p: &Program) -> Result<String> {
    let m = p
        .mappings
        .first()
        .ok_or_else(|| anyhow!("program has no Yield statement"))?;
    match m.projections.first() {
        Some(tablesynth::dsl::Projection::Const(Value::Str(s))) => Ok(s.to_string()),
        _ => bail!("first Yield does not name its action"),
    }
}

/// The action signature from, in order: a signature file, a built-in
/// domain, the benchmark, or the program's first `Yield` (arguments named
/// arg1, arg2, ...).
fn signature(
    p: &Program,
    tables: &[Table],
    case: Option<&BenchmarkCase>,
    domain: Option<&str>,
    file: Option<&Path>,
) -> Result<ActionSignature> {
    if let Some(f) = file {
        let src = fs::read_to_string(f).with_context(|| format!("reading {}", f.display()))?;
        return serde_json::from_str(&src).with_context(|| format!("parsing {}", f.display()));
    }
    if let Some(d) = domain {
        let d = builtin_domain(d).ok_or_else(|| anyhow!("unknown domain `{d}`"))?;
        let name = yielded_action(p)?;
        return d
            .action(&name)
            .cloned()
            .ok_or_else(|| anyhow!("domain `{}` has no action `{name}`", d.name));
    }
    if let Some(c) = case {
        return Ok(c.action.clone());
    }
    let name = yielded_action(p)?;
    let mut state = ExecState::new(tables);
    for t in &p.transforms {
        state.insert(exec_transform(&state, t)?);
    }
    let m = &p.mappings[0];
    let schema = state.get(&m.src)?.schema();
    let args = m.projections[1..]
        .iter()
        .enumerate()
        .map(|(i, pr)| {
            projection_type(pr, schema)
                .map(|ty| (format!("arg{}", i + 1), ty))
                .map_err(|e| anyhow!(e))
        })
        .collect::<Result<Vec<_>>>()?;
    let args: Vec<(&str, _)> = args.iter().map(|(n, t)| (n.as_str(), *t)).collect();
    Ok(ActionSignature::new(name, &args))
}

fn check(p: &Program, tables: &[Table], action: &ActionSignature) -> Result<()> {
    if let Err(vs) = validate_program(p, &input_schemas(tables), action) {
        for v in &vs {
            eprintln!("{v}");
        }
        bail!("program is invalid ({} violation(s))", vs.len());
    }
    Ok(())
}

fn cmd_exec(
    program: &Path,
    tables: &Path,
    pending: bool,
    domain: Option<&str>,
    sig: Option<&Path>,
) -> Result<u8> {
    let p = read_program(program)?;
    let (tables, case) = read_tables(tables, pending)?;
    let action = signature(&p, &tables, case.as_ref(), domain, sig)?;
    check(&p, &tables, &action)?;
    let out = exec_program(&p, &tables, &action)?;
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(EXIT_SOLVED)
}

fn cmd_validate(
    program: &Path,
    tables: Option<&Path>,
    domain: Option<&str>,
    sig: Option<&Path>,
) -> Result<u8> {
    let p = read_program(program)?;
    if let Some(t) = tables {
        let (tables, case) = read_tables(t, false)?;
        let action = signature(&p, &tables, case.as_ref(), domain, sig)?;
        check(&p, &tables, &action)?;
    }
    print!("{p}");
    Ok(EXIT_SOLVED)
}

fn cmd_bench(
    dir: &Path,
    args: &SettingsArgs,
    output: OutputFormat,
    report: Option<&Path>,
    jobs: Option<usize>,
) -> Result<u8> {
    let cases = load_benchmark_dir(dir)?;
    let run = || run_bench(&cases, &args.mode.modes(), |m| args.settings(m));
    let out = match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()?
            .install(run),
        None => run(),
    };
    let json = serde_json::to_string_pretty(&out)?;
    if let Some(r) = report {
        fs::write(r, format!("{json}\n")).with_context(|| format!("writing {}", r.display()))?;
    }
    let mut stdout = std::io::stdout().lock();
    if output != OutputFormat::Table {
        writeln!(stdout, "{json}")?;
    }
    if output != OutputFormat::Json {
        for r in &out.reports {
            if output == OutputFormat::Both {
                writeln!(stdout)?;
            }
            write!(stdout, "{}", r.table())?;
        }
    }
    Ok(if out.regressed() {
        EXIT_ERROR
    } else {
        EXIT_SOLVED
    })
}
