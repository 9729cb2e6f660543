//! `gridlines`: build, compose, verify, render, enumerate and profile grid
//! point sets.
//!
//! Exit codes: 0 ok, 1 usage or I/O error, 2 budget exhausted, 3 the
//! output or input failed verification.

mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use num_rational::Ratio;
use rayon::prelude::*;
use serde_json::json;

use gridlines::composer::{self, compose};
use gridlines::construct::{construct, ConstructOptions};
use gridlines::oracle::count_violations;
use gridlines::pipeline2d::{stage_diagnostics, PracticalConfig};
use gridlines::pipeline_hd::{fit_tail_constant, size_census, tails_profile, SectionIndex};
use gridlines::rng::rng_from_seed;
use gridlines::{geometry, io, Error, GridParams, PointSet};

use manifest::RunManifest;

#[derive(Parser)]
#[command(name = "gridlines", version, about = "Grid point sets with few points on every line")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a set with exactly k points on every row and column.
    Construct(ConstructArgs),
    /// Build a set block by block from sixteen quota blocks.
    Compose(ComposeArgs),
    /// Count points on every line of a point-set file.
    Verify(VerifyArgs),
    /// Draw a point-set file as SVG.
    Render(RenderArgs),
    /// List lines (d = 2) or affine sections (d = 3) of a grid.
    Enumerate(EnumerateArgs),
    /// Measure tail constants, or print the bound chain of one stage.
    Profile(ProfileArgs),
}

#[derive(Args)]
struct Output {
    /// Point-set JSON; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the set as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Run manifest; defaults to `<out>.manifest.json` when `--out` is given.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct ConstructArgs {
    #[arg(long)]
    n: u32,
    #[arg(long)]
    k: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Schedule exponent: the last stage targets (1 + eps) k per line.
    /// Defaults to min(1, n/k - 1).
    #[arg(long)]
    eps: Option<f64>,
    /// Heavy-line tolerance.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, default_value_t = 20)]
    retries: u32,
    #[arg(long, default_value_t = 200_000)]
    resample_budget: u64,
    /// Skip the swap repair that lowers long non-axis lines to k.
    #[arg(long)]
    no_trim: bool,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct ComposeArgs {
    #[arg(long)]
    n: u32,
    #[arg(long)]
    k: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    retries: u32,
    /// Run seeds 0..N and print a summary table instead of one set.
    #[arg(long)]
    sweep: Option<u64>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    k: u32,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Draw this many of the heaviest non-axis lines.
    #[arg(long, default_value_t = 0)]
    overlay_lines: usize,
}

#[derive(Args)]
struct EnumerateArgs {
    #[arg(long)]
    n: u32,
    #[arg(long, default_value_t = 2)]
    d: usize,
    /// Section dimension (d = 3 only).
    #[arg(long, default_value_t = 1)]
    t: usize,
    /// Smallest number of grid points on a listed line or section.
    #[arg(long, default_value_t = 3)]
    min_points: u32,
    /// Print only the counts per size.
    #[arg(long)]
    summary: bool,
}

#[derive(Args)]
struct ProfileArgs {
    #[arg(long)]
    n: Option<u32>,
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long, default_value_t = 1)]
    t: usize,
    /// Stage target; with `--m0`, prints the stage's bound chain instead.
    #[arg(long, requires = "m0")]
    m: Option<f64>,
    #[arg(long, requires = "m")]
    m0: Option<f64>,
}

enum Failure {
    Usage(String),
    Budget(String),
    Verification(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match &e {
            Error::BudgetExhausted { .. } => Failure::Budget(e.to_string()),
            Error::Block { source, .. } if source.is_budget() => Failure::Budget(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(1);
    }
    let result = match cli.command {
        Command::Construct(a) => cmd_construct(a),
        Command::Compose(a) => cmd_compose(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Render(a) => cmd_render(a),
        Command::Enumerate(a) => cmd_enumerate(a),
        Command::Profile(a) => cmd_profile(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Budget(m)) => {
            eprintln!("budget exhausted: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Verification(m)) => {
            eprintln!("verification failed: {m}");
            ExitCode::from(3)
        }
    }
}

/// `GRIDLINES_THREADS` sets the worker count for seed sweeps and
/// parallel enumeration.
fn configure_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("GRIDLINES_THREADS") else { return Ok(()) };
    let threads: usize = v.parse().map_err(|_| format!("GRIDLINES_THREADS must be a positive integer, got {v:?}"))?;
    if threads == 0 {
        return Err("GRIDLINES_THREADS must be at least 1".into());
    }
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().map_err(|e| e.to_string())
}

/// Prints to stdout, treating a closed pipe as success.
fn emit(text: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{text}");
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Usage(format!("{}: {e}", path.display()))
}

fn write_outputs(set: &PointSet, output: &Output, manifest: &RunManifest) -> CmdResult {
    match &output.out {
        Some(path) => io::write_json(set, path).map_err(|e| io_err(path, e))?,
        None => emit(&io::to_json(set)),
    }
    if let Some(path) = &output.csv {
        io::write_csv(set, path).map_err(|e| io_err(path, e))?;
    }
    let manifest_path = output.manifest.clone().or_else(|| {
        output.out.as_ref().map(|p| {
            let mut s = p.clone().into_os_string();
            s.push(".manifest.json");
            PathBuf::from(s)
        })
    });
    if let Some(path) = manifest_path {
        manifest.write(&path).map_err(|e| io_err(&path, e))?;
    }
    Ok(())
}

fn cmd_construct(a: ConstructArgs) -> CmdResult {
    let start = Instant::now();
    let g = GridParams::plane(a.n)?;
    let mut opts = ConstructOptions::new(a.k, a.seed);
    opts.eps = a.eps;
    opts.trim = !a.no_trim;
    opts.cfg.delta_override = a.delta;
    opts.cfg.retry_budget = a.retries;
    opts.cfg.resample_budget = a.resample_budget;
    let built = construct(&g, &opts)?;
    let report = count_violations(&built.set, a.k)?;
    let regular = (0..2).all(|axis| built.set.axis_counts(axis).iter().all(|&c| c == a.k));
    let mut m = RunManifest::new("construct", json!({
        "n": a.n, "k": a.k, "eps": a.eps, "delta": a.delta, "retries": a.retries,
        "resample_budget": a.resample_budget, "trim": opts.trim,
    }), a.seed);
    m.schedule = built.schedule.stages.clone();
    m.stage_resamples = built.stages.iter().map(|s| s.resamples).collect();
    m.retries = built.attempt;
    m.extra = json!({
        "attempt_seed": built.attempt_seed,
        "failures": built.failures,
        "pipeline_size": built.pipeline_size,
        "trim_swaps": built.trim_swaps,
        "trim_attempts": built.trim_attempts,
    });
    m.verdicts = json!({
        "size": built.set.len(),
        "regular": regular,
        "exact_ok": report.exact_ok,
        "max_line": report.max_line,
    });
    m.wall_time_ms = start.elapsed().as_millis() as u64;
    write_outputs(&built.set, &a.output, &m)?;
    if !regular {
        return Err(Failure::Verification(format!("some row or column does not hold exactly {}", a.k)));
    }
    if let Some(v) = report.violations.first() {
        return Err(Failure::Verification(format!("line {:?} carries {} > {} points", v.line, v.count, a.k)));
    }
    Ok(())
}

fn compose_cfg(seed: u64, retries: u32) -> PracticalConfig {
    PracticalConfig { retry_budget: retries, ..PracticalConfig::desk(seed) }
}

fn cmd_compose(a: ComposeArgs) -> CmdResult {
    if a.n == 0 || a.k < 2 * a.n - 1 {
        composer::block_plan(a.n, a.k)?;
    }
    if let Some(seeds) = a.sweep {
        return compose_sweep(&a, seeds);
    }
    let start = Instant::now();
    let cfg = compose_cfg(a.seed, a.retries);
    let c = compose(a.n, a.k, &cfg, &mut rng_from_seed(a.seed))?;
    let report = count_violations(&c.set, a.k)?;
    let mut m = RunManifest::new("compose", json!({ "n": a.n, "k": a.k, "retries": a.retries }), a.seed);
    m.retries = c.blocks.iter().map(|b| b.attempts.saturating_sub(1)).sum();
    m.extra = json!({ "plan": c.plan, "blocks": c.blocks, "full_grid": c.full_grid });
    m.verdicts = json!({
        "size": c.set.len(),
        "max_non_axis": c.max_non_axis,
        "non_axis_within_k": c.non_axis_within_k,
        "bound_084": c.bound_084,
        "within_084": c.within_084,
        "hypothesis_holds": c.hypothesis_holds,
        "lines_meeting_hypothesis": c.lines_meeting_hypothesis,
        "implication_holds": c.implication_holds,
        "oracle_exact_ok": report.exact_ok,
    });
    m.wall_time_ms = start.elapsed().as_millis() as u64;
    write_outputs(&c.set, &a.output, &m)?;
    if report.exact_ok != c.non_axis_within_k && !c.full_grid {
        return Err(Failure::Verification("composer and oracle disagree".into()));
    }
    Ok(())
}

fn compose_sweep(a: &ComposeArgs, seeds: u64) -> CmdResult {
    let rows: Vec<serde_json::Value> = (0..seeds)
        .into_par_iter()
        .map(|seed| match compose(a.n, a.k, &compose_cfg(seed, a.retries), &mut rng_from_seed(seed)) {
            Ok(c) => json!({
                "seed": seed,
                "ok": true,
                "size": c.set.len(),
                "max_non_axis": c.max_non_axis.map(|(_, n)| n),
                "within_k": c.non_axis_within_k,
                "within_084": c.within_084,
                "hypothesis": c.hypothesis_holds,
                "implication": c.implication_holds,
            }),
            Err(e) => json!({ "seed": seed, "ok": false, "error": e.to_string() }),
        })
        .collect();
    emit(&format!("{:>6} {:>6} {:>6} {:>9} {:>6} {:>8}", "seed", "ok", "size", "max_line", "<=k", "<=0.84k"));
    for r in &rows {
        emit(&format!(
            "{:>6} {:>6} {:>6} {:>9} {:>6} {:>8}",
            r["seed"],
            r["ok"],
            r.get("size").map_or("-".into(), |v| v.to_string()),
            r.get("max_non_axis").map_or("-".into(), |v| v.to_string()),
            r.get("within_k").map_or("-".into(), |v| v.to_string()),
            r.get("within_084").map_or("-".into(), |v| v.to_string()),
        ));
    }
    let ok = rows.iter().filter(|r| r["ok"] == true).count();
    let within = rows.iter().filter(|r| r["within_k"] == true).count();
    emit(&format!("succeeded {ok}/{seeds}; max non-axis line ≤ k on {within}/{seeds}"));
    if let Some(path) = &a.output.out {
        let body = serde_json::to_string_pretty(&json!({ "n": a.n, "k": a.k, "runs": rows })).unwrap();
        std::fs::write(path, body + "\n").map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

fn cmd_verify(a: VerifyArgs) -> CmdResult {
    let set = io::read_json(&a.input).map_err(|e| io_err(&a.input, e))?;
    if set.grid().d != 2 {
        return Err(Failure::Usage("verify needs a planar point set".into()));
    }
    let report = count_violations(&set, a.k)?;
    emit(&serde_json::to_string_pretty(&report).unwrap());
    if !report.exact_ok {
        let v = &report.violations[0];
        return Err(Failure::Verification(format!(
            "{} line(s) over {}; first {:?} with {} points",
            report.violations.len(),
            a.k,
            v.line,
            v.count
        )));
    }
    Ok(())
}

fn cmd_render(a: RenderArgs) -> CmdResult {
    let set = io::read_json(&a.input).map_err(|e| io_err(&a.input, e))?;
    let svg = io::render_svg(&set, a.overlay_lines)?;
    std::fs::write(&a.out, svg).map_err(|e| io_err(&a.out, e))
}

fn cmd_enumerate(a: EnumerateArgs) -> CmdResult {
    let g = GridParams::new(a.n, a.d)?;
    if a.d == 2 {
        let lines = geometry::enumerate_lines(&g, Ratio::new(a.min_points.max(2) as u64, a.n as u64))?;
        if a.summary {
            let mut census = std::collections::BTreeMap::new();
            for l in &lines {
                *census.entry(l.count).or_insert(0usize) += 1;
            }
            emit(&json!({ "lines": lines.len(), "by_size": census }).to_string());
        } else {
            for l in lines {
                emit(&json!({ "a": l.line.a, "b": l.line.b, "c": l.line.c, "count": l.count }).to_string());
            }
        }
        return Ok(());
    }
    let sections = gridlines::pipeline_hd::enumerate_sections(&g, a.t, a.min_points.max(3) as usize)?;
    if a.summary {
        let index = SectionIndex { grid: g, t: a.t, sections };
        emit(&json!({ "sections": index.sections.len(), "by_size": size_census(&index) }).to_string());
    } else {
        for s in sections {
            emit(&json!({ "key": s.key, "hull_dim": s.hull_dim, "axis": s.axis, "points": s.points }).to_string());
        }
    }
    Ok(())
}

fn cmd_profile(a: ProfileArgs) -> CmdResult {
    if let (Some(m), Some(m0)) = (a.m, a.m0) {
        let d = stage_diagnostics(m0, m)?;
        emit(&serde_json::to_string_pretty(&d).unwrap());
        return Ok(());
    }
    let n = a.n.ok_or_else(|| Failure::Usage("profile needs --n (or --m with --m0)".into()))?;
    let g = GridParams::new(n, a.d)?;
    let index = SectionIndex::build(&g, a.t)?;
    let big_n = index.big_n();
    let alphas: Vec<_> = (1..=big_n).map(|s| Ratio::new(s, big_n)).collect();
    let profile = tails_profile(&index, &alphas)?;
    let tails = fit_tail_constant(&index);
    emit(
        &serde_json::to_string_pretty(&json!({
            "n": n, "d": a.d, "t": a.t, "sections": index.sections.len(),
            "c_hat": profile.c_hat, "worst_point": profile.worst_point,
            "worst_alpha": profile.worst_alpha.to_string(), "worst_count": profile.worst_count,
            "tail_constant": tails.c, "light_cap": 6 * tails.c + 3,
        }))
        .unwrap()
    );
    Ok(())
}
