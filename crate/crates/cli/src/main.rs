//! `nnnsim`: command-line front end.
//!
//! Every subcommand reads one JSON run config (the reference device when `--config` is
//! absent), writes its artifacts into the output directory and prints the
//! written paths. Exit codes: 0 ok, 1 config or I/O, 2 numerical or
//! calibration failure, 3 validation failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use nnn_core::analytic::effective_coefficients;
use nnn_core::calibration::{find_working_point, GateTarget, WorkingPoint};
use nnn_core::circuits::{standard_fixtures, Fixture, SolveOptions, EQUIVALENCE_TOL, FIXTURE_DIR};
use nnn_core::config::{parse_config, RunConfig};
use nnn_core::evolution::{population_trace, Integrator, VERIFY_TOL};
use nnn_core::exec::Execution;
use nnn_core::gate_metrics::gate_report;
use nnn_core::open_system::{gate_open_fidelity, NoiseParams};
use nnn_core::operators::FockLabel;
use nnn_core::output::{to_csv, ArtifactMeta, JsonArtifact, Table};
use nnn_core::scenarios::{run_scenario_with, Resolution};
use nnn_core::units::{to_ghz, to_mhz, to_us};
use nnn_core::{Error, Result};

#[derive(Parser, Debug)]
#[command(
    name = "nnnsim",
    version,
    about = "Switchable NNN coupling and C-iSWAP simulator"
)]
struct Cli {
    /// Run config JSON; reference device when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (default: config output_dir, else ./out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Closed-system time step in ns.
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// Skip step-halving verification.
    #[arg(long, global = true)]
    no_verify: bool,
    /// Worker threads for sweeps; 1 runs sequentially.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Scenario for `sweep` when not given positionally.
    #[arg(long, global = true)]
    scenario: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Effective-Hamiltonian coefficients at the plateau frequencies.
    Couplings,
    /// Population trace of one initial state.
    Evolve {
        #[arg(long, default_value = "100")]
        initial: String,
        #[arg(long, default_value_t = 401)]
        samples: usize,
    },
    /// Gate report: phase-optimized fidelity, leakage, phases.
    Fidelity,
    TruthTable,
    /// Open-system fidelity at the configured noise, plus the T1 curve.
    Lindblad {
        /// Uniform T1 overriding the config noise section.
        #[arg(long)]
        t1_us: Option<f64>,
        #[arg(long)]
        tphi_us: Option<f64>,
        /// T1 values for the curve CSV.
        #[arg(long, value_delimiter = ',', default_value = "15,50,105")]
        curve_us: Vec<f64>,
    },
    /// Run a named figure scenario.
    Sweep {
        name: Option<String>,
    },
    #[command(subcommand)]
    Circuit(CircuitCommand),
    /// Two-stage working-point search.
    Calibrate,
}

#[derive(Subcommand, Debug)]
enum CircuitCommand {
    /// Check a fixture (path or shipped name) against its target.
    Verify {
        fixture: String,
        #[arg(long, default_value_t = EQUIVALENCE_TOL)]
        threshold: f64,
    },
    /// Regenerate the shipped fixture set.
    Solve {
        #[arg(long, default_value_t = 64)]
        starts: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

struct Ctx {
    cfg: RunConfig,
    out: PathBuf,
    exec: Execution,
}

impl Ctx {
    fn write(&self, name: &str, body: &str) -> Result<()> {
        std::fs::create_dir_all(&self.out)?;
        let path = self.out.join(name);
        std::fs::write(&path, body)?;
        println!("{}", path.display());
        Ok(())
    }

    fn meta(&self, scenario: &str, dt: f64) -> ArtifactMeta {
        ArtifactMeta::new(scenario, &self.cfg.config_hash(), dt)
    }
}

fn load(cli: &Cli) -> Result<Ctx> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            parse_config(&text)?
        }
        None => RunConfig::table1(),
    };
    if let Some(dt) = cli.dt {
        cfg.integrator.dt_ns = dt;
    }
    if cli.no_verify {
        cfg.integrator.verify = false;
    }
    if let Some(s) = &cli.scenario {
        cfg.scenario = Some(s.clone());
    }
    for w in cfg.warnings() {
        log::warn!("{w}");
    }
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let exec = match cli.threads {
        Some(1) => Execution::Sequential,
        Some(0) => return Err(Error::Config("--threads must be at least 1".into())),
        Some(n) => {
            set_threads(n);
            Execution::Parallel
        }
        None => Execution::Parallel,
    };
    Ok(Ctx { cfg, out, exec })
}

#[cfg(feature = "parallel")]
fn set_threads(n: usize) {
    if let Err(e) = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
    {
        log::warn!("thread pool: {e}");
    }
}

#[cfg(not(feature = "parallel"))]
fn set_threads(_: usize) {
    log::warn!("built without the parallel feature; --threads ignored");
}

/// Working point in config units.
#[derive(Serialize)]
struct WorkingPointOut {
    delta1_mhz: f64,
    delta3_mhz: f64,
    overshoot_mhz: f64,
    t_hold_ns: f64,
    interaction_ghz: [f64; 3],
    sigma_ns: f64,
    blocked_error: f64,
    transfer: f64,
    seed_offset_mhz: f64,
    hold_estimate_ns: f64,
}

impl From<&WorkingPoint> for WorkingPointOut {
    fn from(w: &WorkingPoint) -> Self {
        Self {
            delta1_mhz: to_mhz(w.delta1),
            delta3_mhz: to_mhz(w.delta3),
            overshoot_mhz: to_mhz(w.overshoot),
            t_hold_ns: w.t_hold,
            interaction_ghz: w.interaction.map(to_ghz),
            sigma_ns: w.sigma,
            blocked_error: w.blocked_error,
            transfer: w.transfer,
            seed_offset_mhz: to_mhz(w.seed_offset),
            hold_estimate_ns: w.hold_estimate,
        }
    }
}

#[derive(Serialize)]
struct LindbladOut {
    t1_us: [f64; 3],
    tphi_us: [f64; 3],
    fidelity: f64,
    leakage: f64,
    closed_fidelity: f64,
    min_eigenvalue: f64,
    t_gate_ns: f64,
}

fn json<T: Serialize>(meta: ArtifactMeta, result: T) -> Result<String> {
    JsonArtifact { meta, result }.to_json()
}

fn find_fixture(name: &str) -> Result<Fixture> {
    let direct = Path::new(name);
    let path = if direct.exists() {
        direct.to_path_buf()
    } else {
        Path::new(FIXTURE_DIR).join(format!("{name}.json"))
    };
    let text = std::fs::read_to_string(&path).map_err(|e| {
        Error::Config(format!(
            "fixture {name}: cannot read {}: {e}",
            path.display()
        ))
    })?;
    Fixture::from_json(&text)
}

fn run(cli: &Cli) -> Result<()> {
    let ctx = load(cli)?;
    let cfg = &ctx.cfg;
    match &cli.command {
        Command::Couplings => {
            let p = cfg.device_params()?;
            let s = cfg.schedule()?;
            let c = effective_coefficients(&p, &s.targets())?;
            ctx.write("couplings.json", &json(ctx.meta("couplings", 0.0), c)?)
        }
        Command::Evolve { initial, samples } => {
            let label: FockLabel = initial.parse()?;
            let p = cfg.device_params()?;
            let s = cfg.schedule()?;
            let integ = Integrator::unverified(cfg.integrator.dt_ns);
            let every = (integ.steps(s.t_gate()) / (*samples).max(1)).max(1);
            let tr = population_trace(&p, &s, label, &integ, every)?;
            let header = tr.csv_header();
            let refs: Vec<&str> = header.iter().map(String::as_str).collect();
            let mut t = Table::new(&refs);
            for row in tr.csv_rows() {
                t.push_values(&row)?;
            }
            ctx.write(
                &format!("evolve_{label}.csv"),
                &to_csv(&ctx.meta("evolve", integ.dt), &t)?,
            )
        }
        Command::Fidelity => {
            let r = gate_report(&cfg.device_params()?, &cfg.schedule()?, &cfg.integrator()?)?;
            let meta = ctx
                .meta("fidelity", r.dt_ns)
                .with_verification(r.convergence, VERIFY_TOL);
            ctx.write("fidelity.json", &json(meta, r)?)
        }
        Command::TruthTable => {
            let o = run_scenario_with("fig4", cfg, ctx.exec, &Resolution::default())?;
            ctx.write("truth_table.csv", &o.to_csv()?)
        }
        Command::Lindblad {
            t1_us,
            tphi_us,
            curve_us,
        } => {
            let p = cfg.device_params()?;
            let s = cfg.schedule()?;
            let mut noise = cfg.noise_params()?;
            if t1_us.is_some() || tphi_us.is_some() {
                let base = NoiseParams::uniform_us(
                    t1_us.unwrap_or(f64::INFINITY),
                    tphi_us.unwrap_or(f64::INFINITY),
                )?;
                if t1_us.is_some() {
                    noise.t1 = base.t1;
                }
                if tphi_us.is_some() {
                    noise.tphi = base.tphi;
                }
                noise.validate()?;
            }
            let integ = cfg.open_integrator()?;
            let closed = gate_report(&p, &s, &Integrator::unverified(cfg.integrator.dt_ns))?;
            let (fo, ps) = gate_open_fidelity(&p, &s, &noise, &integ, &closed)?;
            let out = LindbladOut {
                t1_us: noise.t1.map(to_us),
                tphi_us: noise.tphi.map(to_us),
                fidelity: fo.fidelity,
                leakage: fo.leakage,
                closed_fidelity: closed.fidelity,
                min_eigenvalue: ps.min_eigenvalue,
                t_gate_ns: ps.t_gate,
            };
            let meta = ctx
                .meta("lindblad", integ.dt)
                .with_verification(ps.convergence, VERIFY_TOL);
            // serde_json writes infinite T values as null.
            ctx.write("lindblad.json", &json(meta, out)?)?;
            let res = Resolution {
                t1_us: curve_us.clone(),
                ..Resolution::default()
            };
            let curve = run_scenario_with("fig5", cfg, ctx.exec, &res)?;
            ctx.write("fig5.csv", &curve.to_csv()?)
        }
        Command::Sweep { name } => {
            let name = name
                .clone()
                .or_else(|| cfg.scenario.clone())
                .ok_or_else(|| Error::Config("sweep needs a scenario name".into()))?;
            let o = run_scenario_with(&name, cfg, ctx.exec, &Resolution::default())?;
            ctx.write(&format!("{name}.csv"), &o.to_csv()?)
        }
        Command::Circuit(CircuitCommand::Verify { fixture, threshold }) => {
            let f = find_fixture(fixture)?;
            let r = f.verify(*threshold)?;
            let equivalent = r.equivalent;
            ctx.write(
                &format!("{}_equivalence.json", f.name),
                &json(ctx.meta("circuit", 0.0), r)?,
            )?;
            if !equivalent {
                return Err(Error::Validation(format!(
                    "{} is not equivalent to its target",
                    f.name
                )));
            }
            Ok(())
        }
        Command::Circuit(CircuitCommand::Solve { starts, seed }) => {
            let opts = SolveOptions {
                starts: *starts,
                seed: *seed,
                execution: ctx.exec,
                ..SolveOptions::default()
            };
            for f in standard_fixtures(&opts)? {
                ctx.write(&format!("{}.json", f.name), &f.to_json()?)?;
            }
            Ok(())
        }
        Command::Calibrate => {
            let p = cfg.device_params()?;
            let spec = cfg.calibration_spec(GateTarget::ciswap(), ctx.exec)?;
            let wp = find_working_point(&p, &spec)?;
            ctx.write(
                "working_point.json",
                &json(ctx.meta("calibrate", spec.dt), WorkingPointOut::from(&wp))?,
            )
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
