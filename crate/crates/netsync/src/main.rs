//! Scenario-driven command line front end: certification reports,
//! single simulation runs, parameter sweeps, and preset emission.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde_json::json;

use netsync::certification::{
    certify_open_loop, check_decentralized, check_distributed, CertificateReport,
};
use netsync::control::ControllerSpec;
use netsync::scenario::{preset, BuiltScenario, Scenario, PRESET_NAMES};
use netsync::sim::{integrate, settling_time, RunSetup, Trajectory};

#[derive(Parser)]
#[command(name = "netsync", about = "Synchronization certificates and simulations for mismatched oscillator networks", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the spectral certificates for a scenario (exit 0 when the
    /// requested regime's certificate holds, 2 when it fails).
    Certify {
        /// Scenario file path, or a preset name (fig1, fig2-3, fig4-5).
        scenario: String,
    },
    /// Integrate a scenario and write its trajectory CSV plus a summary.
    Simulate {
        /// Scenario file path, or a preset name.
        scenario: String,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the integration seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Record per-node error norms in the CSV.
        #[arg(long)]
        per_node: bool,
    },
    /// Run a scenario once per value of a swept scalar field and write
    /// per-value summaries as CSV.
    Sweep {
        /// Scenario file path, or a preset name.
        scenario: String,
        /// Dotted path of a scalar field, e.g. integration.dt
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit a named preset scenario.
    Preset {
        name: String,
        /// Print to stdout instead of writing <name>.toml.
        #[arg(long)]
        print: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Command::Certify { scenario } => cmd_certify(&scenario),
        Command::Simulate {
            scenario,
            out,
            seed,
            per_node,
        } => cmd_simulate(&scenario, out, seed, per_node),
        Command::Sweep {
            scenario,
            axis,
            values,
            out,
        } => cmd_sweep(&scenario, &axis, &values, out),
        Command::Preset { name, print } => cmd_preset(&name, print),
    }
}

/// Loads a scenario from a file path, or from the preset table when the
/// argument names a preset and no such file exists.
fn load_scenario(arg: &str) -> Result<Scenario, String> {
    let path = Path::new(arg);
    if path.exists() {
        let text = fs::read_to_string(path).map_err(|e| format!("reading {arg}: {e}"))?;
        Scenario::from_toml(&text).map_err(|e| e.to_string())
    } else if let Some(s) = preset(arg) {
        Ok(s)
    } else {
        Err(format!(
            "'{arg}' is neither an existing file nor a preset ({})",
            PRESET_NAMES.join(", ")
        ))
    }
}

struct Certificates {
    lambda_star: Option<f64>,
    epsilon: Option<f64>,
    theorem2_margin: Option<f64>,
    theorem3_margin: Option<f64>,
    binding_mu: f64,
    requested: CertificateReport,
}

fn compute_certificates(built: &BuiltScenario) -> Result<Certificates, String> {
    let open = certify_open_loop(
        &built.quad_bound,
        &built.inner_coupling,
        &built.plant,
        &built.uncertainty,
    )
    .map_err(|e| e.to_string())?;

    let (theorem2, theorem3) = match &built.controller {
        ControllerSpec::OpenLoop => (None, None),
        ControllerSpec::Decentralized { z, .. } => (
            Some(
                check_decentralized(&built.quad_bound, &built.inner_coupling, &built.plant, z)
                    .map_err(|e| e.to_string())?,
            ),
            None,
        ),
        ControllerSpec::Distributed { b, z, .. } => (
            None,
            Some(
                check_distributed(&built.quad_bound, &built.inner_coupling, &built.plant, b, z)
                    .map_err(|e| e.to_string())?,
            ),
        ),
    };

    let requested = match &built.controller {
        ControllerSpec::OpenLoop => open.clone(),
        ControllerSpec::Decentralized { .. } => theorem2.clone().unwrap(),
        ControllerSpec::Distributed { .. } => theorem3.clone().unwrap(),
    };

    Ok(Certificates {
        lambda_star: open.lambda_star,
        epsilon: open.epsilon_bound,
        theorem2_margin: theorem2.as_ref().map(|r| r.margin),
        theorem3_margin: theorem3.as_ref().map(|r| r.margin),
        binding_mu: requested.binding_eigenvalue,
        requested,
    })
}

fn cmd_certify(arg: &str) -> Result<ExitCode, String> {
    let scenario = load_scenario(arg)?;
    let built = scenario.build().map_err(|e| e.to_string())?;

    if built.plant.has_negative_couplings() {
        eprintln!("warning: plant network has negative coupling weights");
    }
    if let ControllerSpec::Decentralized { z, .. } = &built.controller {
        if z.gains().iter().all(|g| *g == 0.0) {
            eprintln!("warning: all feedback gains are zero; the gain condition cannot hold");
        }
    }

    let certs = compute_certificates(&built)?;

    println!("certification report ({} regime)", built.controller.regime_name());
    match certs.lambda_star {
        Some(ls) => println!("  lambda_star       = {ls:.6}"),
        None => println!("  lambda_star       = n/a"),
    }
    match certs.epsilon {
        Some(eps) => println!("  epsilon bound     = {eps:.6}"),
        None => println!("  epsilon bound     = n/a (uniform margin not positive)"),
    }
    if let Some(m) = certs.theorem2_margin {
        println!("  decentralized margin = {m:.6}");
    }
    if let Some(m) = certs.theorem3_margin {
        println!("  distributed margin   = {m:.6}");
    }
    println!("  binding eigenvalue = {:.6}", certs.binding_mu);
    println!(
        "  requested certificate: {}",
        if certs.requested.satisfied { "satisfied" } else { "NOT satisfied" }
    );

    let doc = json!({
        "lambda_star": certs.lambda_star,
        "epsilon": certs.epsilon,
        "theorem2_margin": certs.theorem2_margin,
        "theorem3_margin": certs.theorem3_margin,
        "binding_mu": certs.binding_mu,
    });
    println!("{}", serde_json::to_string_pretty(&doc).unwrap());

    Ok(ExitCode::from(if certs.requested.satisfied { 0 } else { 2 }))
}

fn format_value(v: f64) -> String {
    format!("{v:.8e}")
}

fn write_csv(path: &Path, traj: &Trajectory, n_nodes: usize, per_node: bool) -> Result<(), String> {
    let mut out = String::new();
    out.push_str("t,e_avg,e_ref,gamma_err");
    if per_node {
        for i in 1..=n_nodes {
            out.push_str(&format!(",e_node_{i}"));
        }
    }
    out.push('\n');
    for s in &traj.samples {
        out.push_str(&format!(
            "{},{},{},{}",
            format_value(s.t),
            format_value(s.e_avg),
            format_value(s.e_ref),
            format_value(s.gamma_err)
        ));
        if per_node {
            for v in s.per_node.as_deref().unwrap_or(&[]) {
                out.push_str(&format!(",{}", format_value(*v)));
            }
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| format!("writing {}: {e}", path.display()))
}

fn run_simulation(built: &BuiltScenario, per_node: bool) -> Result<Trajectory, String> {
    let setup = RunSetup {
        model: built.model.as_ref(),
        plant: &built.plant,
        inner_coupling: &built.inner_coupling,
        mismatch: &built.mismatch,
        controller: &built.controller,
        integration: &built.integration,
        stride: built.output.stride,
        per_node,
    };
    integrate(&setup).map_err(|e| e.to_string())
}

fn summary_json(built: &BuiltScenario, traj: &Trajectory, epsilon: Option<f64>) -> serde_json::Value {
    let last = traj.last();
    let settle = epsilon.and_then(|eps| settling_time(traj, eps));
    json!({
        "regime": built.controller.regime_name(),
        "final_t": last.t,
        "final_e_avg": last.e_avg,
        "final_e_ref": last.e_ref,
        "final_gamma_err": last.gamma_err,
        "epsilon": epsilon,
        "settling_time": settle,
        "diverged": traj.diverged,
        "divergence_time": traj.divergence_time,
        "max_error_sum": traj.max_error_sum,
        "observed_quad_max": traj.observed_quad_max,
        "certified_quad_bound": built.uncertainty.worst_case(),
    })
}

fn cmd_simulate(
    arg: &str,
    out: Option<PathBuf>,
    seed: Option<u64>,
    per_node: bool,
) -> Result<ExitCode, String> {
    let mut scenario = load_scenario(arg)?;
    if let Some(seed) = seed {
        scenario.integration.seed = seed;
    }
    if per_node {
        scenario.output.per_node = true;
    }
    if let Some(dir) = out {
        scenario.output.dir = dir.to_string_lossy().into_owned();
    }
    let built = scenario.build().map_err(|e| e.to_string())?;

    if built.plant.has_negative_couplings() {
        eprintln!("warning: plant network has negative coupling weights");
    }

    // Certificates are advisory for simulation: a failed sufficient
    // condition does not stop the run.
    let epsilon = compute_certificates(&built).ok().and_then(|c| c.epsilon);

    let traj = run_simulation(&built, built.output.per_node)?;

    let dir = PathBuf::from(&built.output.dir);
    fs::create_dir_all(&dir).map_err(|e| format!("creating {}: {e}", dir.display()))?;
    let csv_path = dir.join("trajectory.csv");
    write_csv(&csv_path, &traj, built.plant.n(), built.output.per_node)?;

    let summary = summary_json(&built, &traj, epsilon);
    let summary_path = dir.join("summary.json");
    fs::write(
        &summary_path,
        serde_json::to_string_pretty(&summary).unwrap(),
    )
    .map_err(|e| format!("writing {}: {e}", summary_path.display()))?;

    println!("{}", serde_json::to_string_pretty(&summary).unwrap());
    println!("trajectory: {}", csv_path.display());

    if traj.diverged {
        eprintln!(
            "simulation diverged at t = {:.6}; partial trajectory retained",
            traj.divergence_time.unwrap_or(f64::NAN)
        );
        return Ok(ExitCode::from(3));
    }
    Ok(ExitCode::from(0))
}

/// Replaces the scalar at a dotted path inside the scenario document.
fn patch_scenario(base: &Scenario, axis: &str, value: f64) -> Result<Scenario, String> {
    let mut doc: toml::Value =
        toml::Value::try_from(base).map_err(|e| format!("internal serialization: {e}"))?;
    let parts: Vec<&str> = axis.split('.').collect();
    let (leaf, ancestors) = parts.split_last().ok_or_else(|| "empty axis".to_string())?;
    let mut cursor = &mut doc;
    for part in ancestors {
        cursor = cursor
            .as_table_mut()
            .and_then(|t| t.get_mut(*part))
            .ok_or_else(|| format!("axis '{axis}': field '{part}' not found"))?;
    }
    let entry = cursor
        .as_table_mut()
        .and_then(|t| t.get_mut(*leaf))
        .ok_or_else(|| format!("axis '{axis}': field '{leaf}' not found"))?;
    match entry {
        toml::Value::Float(_) => *entry = toml::Value::Float(value),
        toml::Value::Integer(_) => {
            if value.fract() != 0.0 {
                return Err(format!(
                    "axis '{axis}' is an integer field; got non-integer {value}"
                ));
            }
            *entry = toml::Value::Integer(value as i64);
        }
        _ => return Err(format!("axis '{axis}' does not point at a scalar field")),
    }
    doc.try_into()
        .map_err(|e| format!("patched scenario invalid: {e}"))
}

fn cmd_sweep(
    arg: &str,
    axis: &str,
    values: &[f64],
    out: Option<PathBuf>,
) -> Result<ExitCode, String> {
    let base = load_scenario(arg)?;
    let dir = out.unwrap_or_else(|| PathBuf::from(&base.output.dir));
    fs::create_dir_all(&dir).map_err(|e| format!("creating {}: {e}", dir.display()))?;
    let csv_path = dir.join("sweep.csv");

    // Validate the axis up front so an empty sweep still reports a bad
    // path.
    if !values.is_empty() {
        patch_scenario(&base, axis, values[0])?;
    }

    let rows: Result<Vec<String>, String> = values
        .par_iter()
        .map(|&value| {
            let scenario = patch_scenario(&base, axis, value)?;
            let built = scenario.build().map_err(|e| e.to_string())?;
            let epsilon = compute_certificates(&built).ok().and_then(|c| c.epsilon);
            let traj = run_simulation(&built, false)?;
            let last = traj.last();
            let settle = epsilon.and_then(|eps| settling_time(&traj, eps));
            Ok(format!(
                "{},{},{},{},{},{},{}",
                format_value(value),
                epsilon.map(format_value).unwrap_or_else(|| "nan".into()),
                format_value(last.e_avg),
                format_value(last.e_ref),
                format_value(last.gamma_err),
                settle.map(format_value).unwrap_or_else(|| "nan".into()),
                traj.diverged
            ))
        })
        .collect();
    let rows = rows?;

    let mut out_text =
        String::from("value,epsilon,final_e_avg,final_e_ref,final_gamma_err,settling_time,diverged\n");
    for row in rows {
        out_text.push_str(&row);
        out_text.push('\n');
    }
    fs::write(&csv_path, &out_text).map_err(|e| format!("writing {}: {e}", csv_path.display()))?;
    println!("sweep results: {}", csv_path.display());
    Ok(ExitCode::from(0))
}

fn cmd_preset(name: &str, print: bool) -> Result<ExitCode, String> {
    let scenario = preset(name).ok_or_else(|| {
        format!("unknown preset '{name}' (expected one of {})", PRESET_NAMES.join(", "))
    })?;
    let text = scenario.to_toml();
    if print {
        let mut stdout = std::io::stdout();
        stdout.write_all(text.as_bytes()).map_err(|e| e.to_string())?;
    } else {
        let path = PathBuf::from(format!("{name}.toml"));
        fs::write(&path, text).map_err(|e| format!("writing {}: {e}", path.display()))?;
        println!("wrote {}", path.display());
    }
    Ok(ExitCode::from(0))
}
