//! Command-line front end: `polygon` (straightening artifacts), `flow`
//! (run the pipeline with checkpoints), `diag` (reports from a checkpoint),
//! and `export` (PLY meshes).
//!
//! Exit codes: 0 success, 2 invalid input/configuration, 3 step budget
//! exhausted before convergence, 4 numerical failure.

use clap::{Args, Parser, Subcommand};
use hmflow::config::RunConfig;
use hmflow::error::{Error, Result};
use hmflow::flow::DiscreteMap;
use hmflow::io::{
    ply_to_string, prepare_out_dir, read_checkpoint, series_csv_hash, series_rows_csv,
    series_to_csv, write_checkpoint, CheckpointHeader,
};
use hmflow::pipeline::{prepare, run_diagnostics, run_pipeline, Prepared};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "hmflow", version, about = "Harmonic map heat flow into hyperbolic 3-space")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Validate the polygon and write straightening artifacts.
    Polygon(Common),
    /// Run the pipeline: planar stage, initial map, hyperbolic flow.
    Flow(FlowArgs),
    /// Compute diagnostics for a checkpoint (default: the latest).
    Diag(CheckpointArgs),
    /// Export a checkpoint as an ASCII PLY mesh.
    Export(CheckpointArgs),
}

#[derive(Args)]
struct Common {
    /// Path to the JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overwrite existing run artifacts.
    #[arg(long)]
    force: bool,
    /// Worker threads (default: HMFLOW_THREADS, else 1).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct FlowArgs {
    #[command(flatten)]
    common: Common,
    /// Continue from the latest checkpoint in the output directory.
    #[arg(long)]
    resume: bool,
}

#[derive(Args)]
struct CheckpointArgs {
    #[command(flatten)]
    common: Common,
    /// Checkpoint file (default: the latest in the output directory).
    checkpoint: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    let r = match &cli.cmd {
        Cmd::Polygon(c) => cmd_polygon(c),
        Cmd::Flow(a) => cmd_flow(a),
        Cmd::Diag(a) => cmd_diag(a),
        Cmd::Export(a) => cmd_export(a),
    };
    match r {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}

/// Load the config, resolve the output directory, and validate --threads.
fn load(c: &Common) -> Result<(RunConfig, PathBuf)> {
    let text = std::fs::read_to_string(&c.config)?;
    let cfg = RunConfig::from_json(&text)?;
    let threads = match c.threads {
        Some(t) => t,
        None => match std::env::var("HMFLOW_THREADS") {
            Ok(s) => s
                .parse::<usize>()
                .map_err(|_| Error::Invalid(format!("HMFLOW_THREADS must be an integer, got '{s}'")))?,
            Err(_) => 1,
        },
    };
    if threads == 0 {
        return Err(Error::Invalid("--threads must be at least 1".into()));
    }
    let out = c.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.out_dir));
    Ok((cfg, out))
}

fn ckpt_path(dir: &Path, step: usize) -> PathBuf {
    dir.join(format!("checkpoint_{step:08}.txt"))
}

/// Latest checkpoint file in `dir` (the zero-padded names sort by step).
fn latest_checkpoint(dir: &Path) -> Result<Option<PathBuf>> {
    let mut best: Option<PathBuf> = None;
    if !dir.is_dir() {
        return Ok(None);
    }
    for entry in std::fs::read_dir(dir)? {
        let p = entry?.path();
        let name = p.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        if name.starts_with("checkpoint_") && name.ends_with(".txt") {
            if best.as_ref().map(|b| p > *b).unwrap_or(true) {
                best = Some(p.clone());
            }
        }
    }
    Ok(best)
}

/// Read a checkpoint and insist it belongs to this config and grid.
fn read_verified(path: &Path, prep: &Prepared) -> Result<(CheckpointHeader, DiscreteMap)> {
    let (h, map) = read_checkpoint(path)?;
    if h.config_hash != prep.hash {
        return Err(Error::Invalid(format!(
            "checkpoint '{}' has config hash {} but this config hashes to {}",
            path.display(),
            h.config_hash,
            prep.hash
        )));
    }
    if !h.matches_grid(&prep.grid) {
        return Err(Error::Invalid(format!(
            "checkpoint '{}' grid does not match the configured grid",
            path.display()
        )));
    }
    Ok((h, map))
}

fn resolve_checkpoint(a: &CheckpointArgs, dir: &Path) -> Result<PathBuf> {
    match &a.checkpoint {
        Some(p) => Ok(p.clone()),
        None => latest_checkpoint(dir)?.ok_or_else(|| {
            Error::Invalid(format!("no checkpoint found in '{}'; run 'hmflow flow' first", dir.display()))
        }),
    }
}

// ---------------------------------------------------------------------------
// polygon

fn cmd_polygon(c: &Common) -> Result<()> {
    let (cfg, dir) = load(c)?;
    let hash = cfg.hash();
    let p = cfg.polygon()?;
    let (p0, bend) = p.straighten()?;
    let pair = |z: &num_complex::Complex64| [z.re, z.im];
    let doc = serde_json::json!({
        "config_hash": hash,
        "n": p.n(),
        "params": p.to_params()?.iter().map(pair).collect::<Vec<_>>(),
        "straightened_params": p0.to_params()?.iter().map(pair).collect::<Vec<_>>(),
        "bending_thetas": bend.thetas,
    });
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("polygon.json");
    if path.exists() && !c.force {
        return Err(Error::Invalid(format!(
            "'{}' already exists (pass --force to overwrite)",
            path.display()
        )));
    }
    let text = serde_json::to_string_pretty(&doc)
        .map_err(|e| Error::Invalid(format!("serialize polygon artifact: {e}")))?;
    std::fs::write(&path, text + "\n")?;
    println!("config {hash}");
    println!("wrote {}", path.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// flow

fn cmd_flow(a: &FlowArgs) -> Result<()> {
    let (cfg, dir) = load(&a.common)?;
    let prep = prepare(&cfg)?;

    let resume_state = if a.resume {
        let latest = latest_checkpoint(&dir)?.ok_or_else(|| {
            Error::Invalid(format!("--resume: no checkpoint found in '{}'", dir.display()))
        })?;
        let (h, map) = read_verified(&latest, &prep)?;
        println!("resuming from {} (step {}, t {})", latest.display(), h.step, h.t);
        Some((h.step, h.t, map))
    } else {
        prepare_out_dir(&dir, a.common.force)?;
        None
    };
    let fresh = resume_state.is_none();

    let mut cb = |step: usize, t: f64, m: &DiscreteMap| -> Result<()> {
        let h = CheckpointHeader::of(&prep.grid, &prep.hash, t, step);
        write_checkpoint(&ckpt_path(&dir, step), &h, m)
    };
    let out = run_pipeline(&prep, resume_state, Some(&mut cb))?;

    // The t = 0 state is always on disk, even for a zero-step budget.
    if fresh {
        let h0 = CheckpointHeader::of(&prep.grid, &prep.hash, 0.0, 0);
        write_checkpoint(&ckpt_path(&dir, 0), &h0, &out.initial.map)?;
    }
    let hf = CheckpointHeader::of(&prep.grid, &prep.hash, out.final_t(), out.final_step());
    write_checkpoint(&ckpt_path(&dir, out.final_step()), &hf, &out.result.map)?;

    // Planar stage output, in checkpoint format, for later diagnostics.
    let hp = CheckpointHeader::of(&prep.grid, &prep.hash, out.planar.t, out.planar.steps);
    write_checkpoint(&dir.join("planar.txt"), &hp, &out.planar.map)?;

    let series_path = dir.join("series.csv");
    if fresh || !series_path.exists() {
        std::fs::write(&series_path, series_to_csv(&prep.hash, &out.series))?;
    } else {
        let existing = std::fs::read_to_string(&series_path)?;
        if series_csv_hash(&existing).as_deref() != Some(prep.hash.as_str()) {
            return Err(Error::Invalid(format!(
                "'{}' belongs to a different config (hash mismatch)",
                series_path.display()
            )));
        }
        // The first resumed row restates the checkpoint row already on file.
        let rows = if out.series.len() > 1 { &out.series[1..] } else { &[] };
        let mut text = existing;
        text.push_str(&series_rows_csv(rows));
        std::fs::write(&series_path, text)?;
    }

    println!("config {}", prep.hash);
    println!(
        "steps {} t {:.6} sup_tau {:.6e} converged {}",
        out.final_step(),
        out.final_t(),
        out.result.sup_tau,
        out.result.converged
    );
    if out.result.converged {
        Ok(())
    } else {
        Err(Error::NotConverged(format!(
            "step budget exhausted at step {} with sup|tau| = {:.6e} (target {:.6e})",
            out.final_step(),
            out.result.sup_tau,
            cfg.flow.tol_tau
        )))
    }
}

// ---------------------------------------------------------------------------
// diag

fn cmd_diag(a: &CheckpointArgs) -> Result<()> {
    let (cfg, dir) = load(&a.common)?;
    let prep = prepare(&cfg)?;
    let ds = &cfg.diagnostics;

    let ckpt = resolve_checkpoint(a, &dir)?;
    let (head, map) = read_verified(&ckpt, &prep)?;

    // Ψ and G compare against the deterministic initial map, so they need the
    // planar stage output that `hmflow flow` leaves next to the checkpoints.
    let planar_map = if ds.pleated || ds.gauge {
        let (_, pm) = read_verified(&dir.join("planar.txt"), &prep)?;
        Some(pm)
    } else {
        None
    };

    let diag = run_diagnostics(&prep, &map, planar_map.as_ref(), head.step, head.t)?;
    let report = &diag.report;

    let text = serde_json::to_string_pretty(report)
        .map_err(|e| Error::Invalid(format!("serialize report: {e}")))?;
    std::fs::write(dir.join("report.json"), text + "\n")?;

    let mut decay = format!("# config {}\n", prep.hash);
    decay.push_str("r,sup_tau\n");
    for (r, v) in &diag.rings {
        decay.push_str(&format!("{r},{v}\n"));
    }
    std::fs::write(dir.join("decay.csv"), decay)?;
    if !diag.sides.is_empty() {
        let mut s = format!("# config {}\n", prep.hash);
        s.push_str("side,leaf_height,n_points,max_curvature,geodesic_fit_residual,side_residual\n");
        for r in &diag.sides {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.side, r.leaf_height, r.n_points, r.max_curvature, r.geodesic_fit_residual,
                r.side_residual
            ));
        }
        std::fs::write(dir.join("sides.csv"), s)?;
    }

    let comment = format!("config {} step {} t {}", prep.hash, head.step, head.t);
    std::fs::write(dir.join("surface.ply"), ply_to_string(&prep.grid, &map, &comment))?;

    println!("config {}", prep.hash);
    for e in &report.entries {
        println!(
            "[{}] {}: measured {:.6e} tolerance {:.6e}",
            if e.pass { "pass" } else { "FAIL" },
            e.id,
            e.measured,
            e.tolerance
        );
    }
    println!("report ok: {}", report.ok);
    Ok(())
}

// ---------------------------------------------------------------------------
// export

fn cmd_export(a: &CheckpointArgs) -> Result<()> {
    let (cfg, dir) = load(&a.common)?;
    let prep = prepare(&cfg)?;
    let ckpt = resolve_checkpoint(a, &dir)?;
    let (head, map) = read_verified(&ckpt, &prep)?;
    let comment = format!("config {} step {} t {}", prep.hash, head.step, head.t);
    let path = dir.join(format!("surface_{:08}.ply", head.step));
    std::fs::write(&path, ply_to_string(&prep.grid, &map, &comment))?;
    println!("config {}", prep.hash);
    println!("wrote {}", path.display());
    Ok(())
}
