//! `rodflow` batch driver.
//!
//! Exit status: 0 on success, 1 when the solver or the file system fails,
//! 2 on bad arguments (including parameters the solver rejects up front).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use rodflow::experiments::{jitter, sweep_family};
use rodflow::io::{read_checkpoint, read_frame, write_checkpoint, write_frame, Checkpoint, RecordWriter};
use rodflow::topology::{default_offset, topology_report};
use rodflow::{build_scenario_with, run_from, Control, DiagnosticsRecord, Flow, RodError, ScenarioId, Termination};

#[derive(Parser)]
#[command(name = "rodflow", version, about = "Gradient flow for elastic framed curves")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario, e.g. `uniframe`, `michell(4.2)`, `f8(0.6)`, `imper_a`.
    Run {
        #[arg(value_parser = parse_scenario)]
        scenario: ScenarioId,
        #[command(flatten)]
        opts: RunOpts,
        /// Continue from a checkpoint written by an earlier run.
        #[arg(long, value_name = "CKPT")]
        resume: Option<PathBuf>,
    },
    /// Run every member of a family (`michell` or `f8`) one after another.
    Sweep {
        family: String,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Print a topology report for a frame dump.
    Diag {
        frame: PathBuf,
        /// Bending-to-torsion ratio for the uniformity quotient (default: the
        /// value stored in the frame).
        #[arg(long)]
        kappa: Option<f64>,
    },
}

#[derive(Args, Clone)]
struct RunOpts {
    /// Step budget (absolute step index when resuming).
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    /// Penalty parameter.
    #[arg(long)]
    eps: Option<f64>,
    /// Weight of the tangent-point energy.
    #[arg(long)]
    rho: Option<f64>,
    /// Tangent-point exponent.
    #[arg(long)]
    q: Option<f64>,
    /// Number of elements (scenario default otherwise).
    #[arg(long)]
    elements: Option<usize>,
    /// Seed of the `--noise` perturbation.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Amplitude of a random nodal perturbation of the initial state.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Output directory (default `out/<scenario>`).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    log_every: u64,
    #[arg(long, default_value_t = 500, value_parser = clap::value_parser!(u64).range(1..))]
    dump_every: u64,
}

fn parse_scenario(s: &str) -> Result<ScenarioId, String> {
    s.parse().map_err(|e: RodError| e.to_string())
}

/// Error tagged with the exit status it maps to.
enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Usage(e.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Run { scenario, opts, resume } => run(scenario, &opts, resume.as_deref()).map(|_| ()),
        Command::Sweep { family, opts } => sweep(&family, &opts),
        Command::Diag { frame, kappa } => diag(&frame, kappa),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

struct RunSummary {
    step: usize,
    last: DiagnosticsRecord<f64>,
    termination: Termination,
}

fn run(id: ScenarioId, opts: &RunOpts, resume: Option<&Path>) -> Result<RunSummary, Failure> {
    let out_dir = opts
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("out").join(id.to_string()));
    let (label, state, mut cfg, bc, start) = match resume {
        Some(path) => {
            let cp: Checkpoint<f64> = read_checkpoint(path).map_err(usage)?;
            if cp.label != id.to_string() {
                return Err(usage(anyhow::anyhow!(
                    "checkpoint {} belongs to scenario `{}`, not `{id}`",
                    path.display(),
                    cp.label
                )));
            }
            if opts.elements.is_some() || opts.noise != 0.0 {
                return Err(usage(anyhow::anyhow!(
                    "--elements and --noise cannot be combined with --resume"
                )));
            }
            (cp.label, cp.state, cp.config, cp.bc, cp.step)
        }
        None => {
            let sc = build_scenario_with::<f64>(id, opts.elements).map_err(usage)?;
            if !(opts.noise >= 0.0 && opts.noise.is_finite()) {
                return Err(usage(anyhow::anyhow!("--noise must be a non-negative number")));
            }
            let state = jitter(&sc.state, opts.noise, opts.seed, &sc.bc);
            (id.to_string(), state, sc.config, sc.bc, 0)
        }
    };
    if let Some(v) = opts.steps {
        cfg.max_steps = v;
    }
    if let Some(v) = opts.tau {
        cfg.tau = v;
    }
    if let Some(v) = opts.eps {
        cfg.epsilon = v;
    }
    if let Some(v) = opts.rho {
        cfg.rho = v;
    }
    if let Some(v) = opts.q {
        cfg.q = v;
    }
    let flow = Flow::resume(state, cfg, bc.clone(), start).map_err(usage)?;

    let frames = out_dir.join("frames");
    fs::create_dir_all(&frames).with_context(|| format!("creating {}", frames.display()))?;
    let records_path = out_dir.join("records.csv");
    let ckpt_path = out_dir.join("checkpoint.bin");
    let mut writer = if resume.is_some() {
        RecordWriter::append(&records_path)
    } else {
        RecordWriter::create(&records_path)
    }
    .context("opening records")?;
    let first = flow.current_record();
    if resume.is_none() {
        writer.write(&first).context("writing records")?;
        write_frame(frames.join("0.tsv"), 0, cfg.kappa, flow.state()).context("writing frame")?;
    }

    let (log_every, dump_every) = (opts.log_every as usize, opts.dump_every as usize);
    let checkpoint = |step: usize, state: &rodflow::RodState<f64>| -> rodflow::Result<()> {
        write_checkpoint(
            &ckpt_path,
            &Checkpoint {
                step,
                label: label.clone(),
                state: state.clone(),
                config: cfg,
                bc: bc.clone(),
            },
        )
    };
    let mut last = first;
    let mut io_err: Option<anyhow::Error> = None;
    let t0 = Instant::now();
    let outcome = run_from(flow, |r, st| {
        last = *r;
        let res = (|| -> anyhow::Result<()> {
            if r.step % log_every == 0 {
                writer.write(r)?;
            }
            if r.step % dump_every == 0 {
                write_frame(frames.join(format!("{}.tsv", r.step)), r.step, cfg.kappa, st)?;
                checkpoint(r.step, st)?;
            }
            Ok(())
        })();
        match res {
            Ok(()) => Control::Continue,
            Err(e) => {
                io_err = Some(e);
                Control::Stop
            }
        }
    });
    if let Some(e) = io_err {
        return Err(e.context(format!("writing output to {}", out_dir.display())).into());
    }
    // the final state is always logged, dumped and checkpointed
    if outcome.step != start && outcome.step % log_every != 0 {
        writer.write(&last).context("writing records")?;
    }
    writer.flush().context("writing records")?;
    if outcome.step % dump_every != 0 || outcome.step == start {
        write_frame(
            frames.join(format!("{}.tsv", outcome.step)),
            outcome.step,
            cfg.kappa,
            &outcome.state,
        )
        .context("writing frame")?;
    }
    checkpoint(outcome.step, &outcome.state).context("writing checkpoint")?;

    println!(
        "{label}: {} steps ({:?}) in {:.1} s; total {:.9e}, twisting {:.6e}, Tw {:.6}",
        outcome.step,
        outcome.termination,
        t0.elapsed().as_secs_f64(),
        last.energy.total,
        last.energy.twisting,
        last.total_twist
    );
    if !outcome.flagged_steps.is_empty() {
        eprintln!(
            "warning: energy increased at {} step(s), first at {}",
            outcome.flagged_steps.len(),
            outcome.flagged_steps[0]
        );
    }
    if let Termination::Aborted(e) = &outcome.termination {
        return Err(Failure::Runtime(anyhow::anyhow!(
            "solver failed after step {}: {e}",
            outcome.step
        )));
    }
    Ok(RunSummary {
        step: outcome.step,
        last,
        termination: outcome.termination,
    })
}

fn sweep(family: &str, opts: &RunOpts) -> Result<(), Failure> {
    let ids = sweep_family(family).map_err(usage)?;
    let base = opts.out.clone().unwrap_or_else(|| PathBuf::from("out").join(family));
    let mut failed = 0;
    let mut rows = Vec::new();
    for id in ids {
        let mut o = opts.clone();
        o.out = Some(base.join(id.to_string()));
        match run(id, &o, None) {
            Ok(s) => rows.push(format!(
                "{id}\t{}\t{:?}\t{:.9e}\t{:.6}",
                s.step, s.termination, s.last.energy.twisting, s.last.total_twist
            )),
            Err(Failure::Usage(e)) => return Err(Failure::Usage(e)),
            Err(Failure::Runtime(e)) => {
                eprintln!("error: {id}: {e:#}");
                rows.push(format!("{id}\tfailed"));
                failed += 1;
            }
        }
    }
    println!("scenario\tsteps\ttermination\ttwisting\ttwist");
    for r in rows {
        println!("{r}");
    }
    if failed > 0 {
        return Err(Failure::Runtime(anyhow::anyhow!("{failed} run(s) failed")));
    }
    Ok(())
}

fn diag(path: &Path, kappa: Option<f64>) -> Result<(), Failure> {
    let frame = read_frame(path).map_err(usage)?;
    let kappa = kappa.unwrap_or(frame.kappa);
    if kappa.is_nan() || kappa <= 0.0 {
        return Err(usage(anyhow::anyhow!("kappa must be positive")));
    }
    let st = &frame.state;
    let rep = topology_report(st, kappa, default_offset(&st.mesh));
    let opt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.9}"));
    let tw = rep.total_twist;
    println!("frame\t{}", path.display());
    println!("step\t{}", frame.step);
    println!("elements\t{}", st.mesh.num_elements());
    println!("closed\t{}", st.mesh.periodic());
    println!("length\t{:.9}", st.mesh.length());
    println!("total_twist\t{tw:.9}");
    println!(
        "twist_nearest_integer\t{}\t(distance {:.3e})",
        tw.round(),
        (tw - tw.round()).abs()
    );
    println!("writhe\t{}", opt(rep.writhe));
    match rep.linking_number {
        Some(lk) => println!("linking_number\t{}\t(raw {:.9})", lk.rounded, lk.raw),
        None => println!("linking_number\tn/a"),
    }
    println!("calugareanu_residual\t{}", opt(rep.calugareanu_residual));
    println!("uniformity_quotient\t{}", opt(rep.uniformity_quotient));
    Ok(())
}
