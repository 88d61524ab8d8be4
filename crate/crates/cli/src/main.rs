//! `wtp`: run, compare and inspect treatment-plant simulations.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use wtp_core::config::{Config, ControllerKind};
use wtp_core::exogenous::{
    fit_emissions_coefficients, intensity_series, load_mix_csv, synthetic_mix, write_mix_csv, Source,
    SYNTHETIC_COEFFICIENTS,
};
use wtp_core::sim::{self, Metrics, Scenario, SimulationTrace, TraceRecord};
use wtp_core::Error;

#[derive(Parser, Debug)]
#[command(name = "wtp", version, about = "Water-treatment plant simulator with emissions-aware MPC")]
struct Cli {
    /// Only print warnings and errors.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate one controller and write its trace and metrics.
    Run {
        config: PathBuf,
        /// mpc or reactive; overrides `controller.kind`.
        #[arg(long)]
        controller: Option<String>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Overrides `simulation.seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Write the fully resolved configuration used for the run.
        #[arg(long, value_name = "PATH")]
        dump_effective_config: Option<PathBuf>,
    },
    /// Run both controllers on the same scenario and report the differences.
    Compare {
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fit per-source emission factors to an energy-mix CSV.
    Fit {
        mix: PathBuf,
        /// Write the hourly intensity series implied by the fit.
        #[arg(long, value_name = "PATH")]
        emit_phi: Option<PathBuf>,
        /// Hours of intensity to emit (default: all rows).
        #[arg(long)]
        hours: Option<usize>,
    },
    /// Export one series of a trace as plot-ready CSV.
    Plotdata {
        trace: PathBuf,
        /// yD, tanks, flows, emissions or chlorine.
        #[arg(long)]
        series: String,
        /// Output file (default: standard output).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic energy-mix CSV.
    SynthMix {
        #[arg(long, default_value_t = 120)]
        hours: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Relative noise on the GHG column.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug)]
enum CliError {
    Core(Error),
    Usage(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn code(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.code(),
            CliError::Usage(_) => "E_USAGE",
        }
    }

    fn message(&self) -> String {
        let text = match self {
            CliError::Core(e) => e.to_string(),
            CliError::Usage(m) => m.clone(),
        };
        text.split_whitespace().collect::<Vec<_>>().join(" ")
    }
}

type CliResult<T = ()> = std::result::Result<T, CliError>;

const SERIES: [&str; 5] = ["yD", "tanks", "flows", "emissions", "chlorine"];

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            eprintln!("error[E_USAGE]: {}", first.trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(if cli.quiet {
        "warn"
    } else {
        "info"
    }))
    .format_timestamp(None)
    .init();

    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {}", e.code(), e.message());
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cmd: Command) -> CliResult {
    match cmd {
        Command::Run {
            config,
            controller,
            out,
            seed,
            dump_effective_config,
        } => cmd_run(&config, controller.as_deref(), &out, seed, dump_effective_config.as_deref()),
        Command::Compare { config, out, seed } => cmd_compare(&config, &out, seed),
        Command::Fit { mix, emit_phi, hours } => cmd_fit(&mix, emit_phi.as_deref(), hours),
        Command::Plotdata { trace, series, out } => cmd_plotdata(&trace, &series, out.as_deref()),
        Command::SynthMix {
            hours,
            seed,
            noise,
            out,
        } => {
            let mix = synthetic_mix(hours, seed, &SYNTHETIC_COEFFICIENTS, noise);
            let f = create(&out)?;
            write_mix_csv(f, &mix)?;
            Ok(())
        }
    }
}

fn load_scenario(path: &Path, seed: Option<u64>, controller: Option<&str>) -> CliResult<Scenario> {
    let loaded = Config::load(path)?;
    let mut config = loaded.config;
    if let Some(seed) = seed {
        config.simulation.seed = seed;
    }
    if let Some(kind) = controller {
        config.controller.kind = kind.parse::<ControllerKind>()?;
    }
    Ok(Scenario::from_config(config, &loaded.base_dir)?)
}

fn create(path: &Path) -> CliResult<fs::File> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
    }
    fs::File::create(path).map_err(|e| {
        CliError::Core(Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    })
}

fn write_text(path: &Path, text: &str) -> CliResult {
    let mut f = create(path)?;
    f.write_all(text.as_bytes()).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(())
}

fn write_json(path: &Path, value: serde_json::Result<String>) -> CliResult {
    write_text(path, &(value.expect("report serialises") + "\n"))
}

fn write_trace_file(path: &Path, trace: &SimulationTrace) -> CliResult {
    let f = create(path)?;
    sim::write_trace(io::BufWriter::new(f), trace)?;
    Ok(())
}

fn run_one(scenario: &Scenario) -> CliResult<(SimulationTrace, Metrics)> {
    let trace = sim::run(scenario)?;
    let metrics = sim::metrics(&trace, scenario.warmup_steps)?;
    Ok((trace, metrics))
}

fn cmd_run(
    config: &Path,
    controller: Option<&str>,
    out: &Path,
    seed: Option<u64>,
    dump: Option<&Path>,
) -> CliResult {
    let scenario = load_scenario(config, seed, controller)?;
    if let Some(path) = dump {
        write_text(path, &scenario.config.to_toml_string())?;
    }
    let (trace, metrics) = run_one(&scenario)?;
    let sim_cfg = &scenario.config.simulation;
    write_trace_file(&out.join(&sim_cfg.trace_file), &trace)?;
    write_json(&out.join(&sim_cfg.metrics_file), serde_json::to_string_pretty(&metrics))?;
    println!(
        "{}: {} steps, emissions {:.1} kg, y_D rms {:.3} PSI, min chlorine {:.2} mg/gal, {} violation steps",
        metrics.controller,
        metrics.steps,
        metrics.total_emissions_kg,
        metrics.y_d_rms_error_psi,
        metrics.y_c_min_mg_per_gal,
        metrics.violation_steps
    );
    Ok(())
}

fn cmd_compare(config: &Path, out: &Path, seed: Option<u64>) -> CliResult {
    let scenario = load_scenario(config, seed, None)?;
    let reactive = scenario.with_controller(ControllerKind::Reactive);
    let mpc = scenario.with_controller(ControllerKind::Mpc);
    let (r, m) = std::thread::scope(|s| {
        let r = s.spawn(|| run_one(&reactive));
        let m = run_one(&mpc);
        (r.join().expect("reactive run panicked"), m)
    });
    let (r_trace, r_metrics) = r?;
    let (m_trace, m_metrics) = m?;
    write_trace_file(&out.join("trace_reactive.csv"), &r_trace)?;
    write_trace_file(&out.join("trace_mpc.csv"), &m_trace)?;
    write_json(&out.join("metrics_reactive.json"), serde_json::to_string_pretty(&r_metrics))?;
    write_json(&out.join("metrics_mpc.json"), serde_json::to_string_pretty(&m_metrics))?;
    let report = sim::compare(&r_metrics, &m_metrics)?;
    write_json(&out.join("comparison.json"), serde_json::to_string_pretty(&report))?;
    print!("{}", report.to_table());
    if let Some(p) = report.emissions_savings_percent() {
        println!("emissions savings (mpc vs reactive): {p:.2}%");
    }
    Ok(())
}

fn cmd_fit(mix_path: &Path, emit_phi: Option<&Path>, hours: Option<usize>) -> CliResult {
    let mix = load_mix_csv(mix_path)?;
    let fit = fit_emissions_coefficients(&mix)?;
    println!("source,kg_per_mwh");
    for (s, c) in Source::ALL.iter().zip(&fit.coefficients.per_source) {
        println!("{},{c:.6}", s.name());
    }
    println!("residual_rms_kg,{:.6}", fit.residual_rms);
    if let Some(path) = emit_phi {
        let hours = hours.unwrap_or(mix.len());
        let series = intensity_series(&fit.coefficients, &mix, hours)?;
        let mut text = String::from("hour,phi_kg_per_kwh\n");
        for (rec, phi) in mix.iter().zip(series.hourly()) {
            text.push_str(&format!("{},{phi}\n", rec.hour));
        }
        write_text(path, &text)?;
    }
    Ok(())
}

fn cmd_plotdata(trace_path: &Path, series: &str, out: Option<&Path>) -> CliResult {
    if !SERIES.contains(&series) {
        return Err(CliError::Usage(format!(
            "unknown series `{series}` (valid: {})",
            SERIES.join(", ")
        )));
    }
    let trace = sim::read_trace_file(trace_path, ControllerKind::Mpc)?;
    if trace.records.is_empty() {
        return Err(CliError::Core(Error::Range(format!(
            "trace {} has no rows",
            trace_path.display()
        ))));
    }
    let text = plot_csv(&trace.records, series);
    match out {
        Some(path) => write_text(path, &text),
        None => {
            let mut stdout = io::stdout().lock();
            // a closed pipe (e.g. `| head`) is not an error worth reporting
            let _ = stdout.write_all(text.as_bytes());
            Ok(())
        }
    }
}

fn plot_csv(rows: &[TraceRecord], series: &str) -> String {
    type Column = (&'static str, fn(&TraceRecord) -> f64);
    let (header, columns): (&str, Vec<Column>) = match series {
        "yD" => ("t_min,y_d_psi", vec![("", |r| r.y_d_psi)]),
        "emissions" => ("t_min,y_e_kg_per_h", vec![("", |r| r.y_e_kg_per_h)]),
        "chlorine" => ("t_min,y_c_mg_per_gal", vec![("", |r| r.y_c_mg_per_gal)]),
        "tanks" => (
            "t_min,psi,series",
            vec![("tank1", |r| r.x1_psi), ("tank2", |r| r.x2_psi)],
        ),
        "flows" => (
            "t_min,gpm,series",
            vec![
                ("demand", |r| r.demand_gpm),
                ("source", |r| r.source_flow_gpm),
                ("treatment", |r| r.treatment_flow_gpm),
                ("tank1_inflow", |r| r.tank1_inflow_gpm),
                ("tank2_inflow", |r| r.tank2_inflow_gpm),
            ],
        ),
        _ => unreachable!("series validated by caller"),
    };
    let mut s = String::with_capacity(rows.len() * 24 * columns.len());
    s.push_str(header);
    s.push('\n');
    for (name, f) in &columns {
        for r in rows {
            if name.is_empty() {
                s.push_str(&format!("{},{}\n", r.t_min, f(r)));
            } else {
                s.push_str(&format!("{},{},{name}\n", r.t_min, f(r)));
            }
        }
    }
    s
}
