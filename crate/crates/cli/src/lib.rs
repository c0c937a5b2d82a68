//! `sheetfd` command line: check, solve, emit and serve.
//!
//! Exit codes: 0 success, 1 compile error, 2 usage or I/O error, 3 no
//! solution, 130 interrupted.

use std::ffi::OsString;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, OnceLock};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use sheetfd::compiler::{compile, Compiled};
use sheetfd::fdsolver::{solve, SearchConfig, SolveError, SolveOutcome};
use sheetfd::grid::col_letters;
use sheetfd::{CellAddr, CompileError, Workbook};

pub const EXIT_OK: i32 = 0;
pub const EXIT_COMPILE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_UNSAT: i32 = 3;
pub const EXIT_INTERRUPTED: i32 = 130;

#[derive(Debug, Parser)]
#[command(name = "sheetfd", version, about = "Finite-domain constraint models written in spreadsheet cells")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compile only and report diagnostics.
    Check(Input),
    /// Solve and print solutions.
    Solve(SolveArgs),
    /// Write the CLP(FD) program text.
    Emit {
        #[command(flatten)]
        input: Input,
        /// Output path, or `-` for stdout (the default).
        #[arg(short, long, default_value = "-")]
        output: PathBuf,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long)]
        host: Option<std::net::IpAddr>,
        /// Workbook JSON to load at startup.
        #[arg(long, conflicts_with = "csv_dir")]
        workbook: Option<PathBuf>,
        /// Directory of per-sheet CSV files to load at startup.
        #[arg(long)]
        csv_dir: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct Input {
    /// Workbook JSON file (or a directory of CSV sheets).
    workbook: Option<PathBuf>,
    /// Directory of per-sheet CSV files.
    #[arg(long)]
    csv_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Json,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[command(flatten)]
    input: Input,
    /// Every solution, up to the solver cap.
    #[arg(long, group = "count")]
    all: bool,
    /// Only the first solution (default).
    #[arg(long, group = "count")]
    first: bool,
    /// At most N solutions.
    #[arg(long, value_name = "N", group = "count", value_parser = clap::value_parser!(u64).range(1..))]
    max: Option<u64>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
    /// Also write the CLP(FD) program to PATH.
    #[arg(long, value_name = "PATH")]
    emit_clp: Option<PathBuf>,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(err, "{text}") } else { write!(out, "{text}") };
            return e.exit_code();
        }
    };
    match execute(cli.command, out, err) {
        Ok(code) => code,
        Err(Failure(code, msg)) => {
            let _ = writeln!(err, "{msg}");
            code
        }
    }
}

struct Failure(i32, String);

fn usage(msg: impl Into<String>) -> Failure {
    Failure(EXIT_USAGE, msg.into())
}

fn compile_failure(e: &CompileError) -> Failure {
    let d = e.to_diagnostic();
    let at = d.cell.map(|c| format!(" at {c}")).unwrap_or_default();
    Failure(EXIT_COMPILE, format!("error[{}]{at}: {}", d.code, d.message))
}

fn load(input: &Input) -> Result<Workbook, Failure> {
    let r = match (&input.workbook, &input.csv_dir) {
        (Some(p), _) if p.is_dir() => Workbook::load_csv_dir(p),
        (Some(p), _) => Workbook::load(p),
        (None, Some(d)) => Workbook::load_csv_dir(d),
        (None, None) => return Err(usage("no workbook given")),
    };
    r.map_err(|e| usage(format!("cannot read workbook: {e}")))
}

fn write_text(path: &Path, text: &str, out: &mut dyn Write) -> Result<(), Failure> {
    if path == Path::new("-") {
        return out.write_all(text.as_bytes()).map_err(|e| usage(e.to_string()));
    }
    std::fs::write(path, text).map_err(|e| usage(format!("cannot write {}: {e}", path.display())))
}

fn execute(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    match cmd {
        Command::Check(input) => {
            let wb = load(&input)?;
            let c = compile(&wb).map_err(|e| compile_failure(&e))?;
            let _ = writeln!(
                out,
                "ok: {} variables, {} constraints{}",
                c.csp.vars.len(),
                c.csp.constraints.len(),
                if c.csp.objective.is_some() { ", 1 objective" } else { "" }
            );
            Ok(EXIT_OK)
        }
        Command::Emit { input, output } => {
            let wb = load(&input)?;
            let c = compile(&wb).map_err(|e| compile_failure(&e))?;
            write_text(&output, &c.to_clp(), out)?;
            Ok(EXIT_OK)
        }
        Command::Solve(args) => solve_cmd(args, out, err),
        Command::Serve { port, host, workbook, csv_dir } => {
            let wb = match (workbook, csv_dir) {
                (Some(p), _) => load(&Input { workbook: Some(p), csv_dir: None })?,
                (None, Some(d)) => load(&Input { workbook: None, csv_dir: Some(d) })?,
                (None, None) => Workbook::default(),
            };
            let addr = SocketAddr::new(host.unwrap_or([127, 0, 0, 1].into()), port);
            let rt = tokio::runtime::Runtime::new().map_err(|e| usage(e.to_string()))?;
            rt.block_on(sheetfd_service::serve(addr, sheetfd_service::AppState::new(wb)))
                .map_err(|e| usage(format!("cannot serve on {addr}: {e}")))?;
            Ok(EXIT_OK)
        }
    }
}

/// Shared with the Ctrl-C handler, which can only be installed once per process.
fn interrupt_flag() -> Arc<AtomicBool> {
    static FLAG: OnceLock<Arc<AtomicBool>> = OnceLock::new();
    FLAG.get_or_init(|| {
        let flag = Arc::new(AtomicBool::new(false));
        let f = flag.clone();
        let _ = ctrlc::set_handler(move || f.store(true, Ordering::Relaxed));
        flag
    })
    .clone()
}

fn solve_cmd(args: SolveArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    let wb = load(&args.input)?;
    let compiled = compile(&wb).map_err(|e| compile_failure(&e))?;
    if let Some(p) = &args.emit_clp {
        write_text(p, &compiled.to_clp(), out)?;
    }
    let mut cfg = SearchConfig::default().with_cancel(interrupt_flag());
    if let Some(n) = args.max {
        cfg = cfg.with_max_solutions(usize::try_from(n).unwrap_or(usize::MAX));
    } else if !args.all {
        cfg = cfg.with_max_solutions(1);
    }
    let outcome = match solve(&compiled.csp, &cfg) {
        Ok(o) => o,
        Err(SolveError::Cancelled) => return Err(Failure(EXIT_INTERRUPTED, "interrupted".into())),
        Err(SolveError::Unsatisfiable) => SolveOutcome { solutions: vec![], objective: None, nodes: 0 },
        Err(e) => return Err(Failure(EXIT_COMPILE, e.to_string())),
    };
    if outcome.solutions.is_empty() {
        if args.format == Format::Json {
            let _ = writeln!(out, "{}", render_json(&wb, &compiled, &outcome));
        }
        let _ = writeln!(err, "UNSAT: the model has no solution");
        return Ok(EXIT_UNSAT);
    }
    let text = match args.format {
        Format::Json => format!("{}\n", render_json(&wb, &compiled, &outcome)),
        Format::Table => render_table(&wb, &compiled, &outcome),
    };
    let _ = out.write_all(text.as_bytes());
    Ok(EXIT_OK)
}

fn cell_key(wb: &Workbook, compiled: &Compiled, i: usize) -> String {
    match compiled.csp.vars[i].cell {
        Some(a) => wb.format_addr(a, wb.active()),
        None => compiled.csp.vars[i].name.clone(),
    }
}

pub fn render_json_value(wb: &Workbook, compiled: &Compiled, outcome: &SolveOutcome) -> Value {
    let sols: Vec<Value> = outcome
        .solutions
        .iter()
        .map(|s| {
            let m: Map<String, Value> =
                s.values.iter().enumerate().map(|(i, v)| (cell_key(wb, compiled, i), json!(v))).collect();
            Value::Object(m)
        })
        .collect();
    let mut doc = json!({ "solutions": sols, "count": outcome.solutions.len() });
    if let Some(obj) = outcome.objective {
        doc["objective"] = json!(obj);
    }
    doc
}

fn render_json(wb: &Workbook, compiled: &Compiled, outcome: &SolveOutcome) -> String {
    render_json_value(wb, compiled, outcome).to_string()
}

/// One grid per solution over the active-sheet box around the variable cells.
fn render_table(wb: &Workbook, compiled: &Compiled, outcome: &SolveOutcome) -> String {
    let active = wb.active();
    let cells: Vec<(usize, CellAddr)> = compiled
        .csp
        .vars
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.cell.filter(|a| a.sheet == active).map(|a| (i, a)))
        .collect();
    let n = outcome.solutions.len();
    let mut s = String::new();
    let header = |k: usize| match outcome.objective {
        Some(o) => format!("solution {k}/{n} (objective {o})\n"),
        None => format!("solution {k}/{n}\n"),
    };
    if cells.is_empty() {
        for (k, sol) in outcome.solutions.iter().enumerate() {
            s.push_str(&header(k + 1));
            for (i, v) in sol.values.iter().enumerate() {
                s.push_str(&format!("  {} = {v}\n", cell_key(wb, compiled, i)));
            }
        }
        return s;
    }
    let c0 = cells.iter().map(|(_, a)| a.col).min().unwrap();
    let c1 = cells.iter().map(|(_, a)| a.col).max().unwrap();
    let r0 = cells.iter().map(|(_, a)| a.row).min().unwrap();
    let r1 = cells.iter().map(|(_, a)| a.row).max().unwrap();
    for (k, sol) in outcome.solutions.iter().enumerate() {
        let mut grid: Vec<Vec<String>> = (r0..=r1)
            .map(|r| {
                (c0..=c1)
                    .map(|c| {
                        // plain integers (clues, constants) stay; formulas are elided
                        let t = wb.get(CellAddr::new(active, c, r)).unwrap_or("");
                        if t.trim().parse::<i64>().is_ok() { t.trim().to_string() } else { ".".to_string() }
                    })
                    .collect()
            })
            .collect();
        for (i, a) in &cells {
            grid[(a.row - r0) as usize][(a.col - c0) as usize] = sol.values[*i].to_string();
        }
        let width = grid.iter().flatten().map(String::len).max().unwrap_or(1).max(2);
        let label_w = r1.to_string().len();
        s.push_str(&header(k + 1));
        s.push_str(&" ".repeat(label_w));
        for c in c0..=c1 {
            let letters = col_letters(c);
            s.push_str(&format!(" {letters:>width$}"));
        }
        s.push('\n');
        for (ri, row) in grid.iter().enumerate() {
            s.push_str(&format!("{:>label_w$}", r0 as usize + ri));
            for v in row {
                s.push_str(&format!(" {v:>width$}"));
            }
            s.push('\n');
        }
        if k + 1 < n {
            s.push('\n');
        }
    }
    s
}
