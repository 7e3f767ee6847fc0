//! Closed-loop simulation commands.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;
use omnimorph_core::config::{Diagonal, Preset, ResolvedScenario, ScenarioConfig};
use omnimorph_core::trace::write_trace_file;
use omnimorph_core::{run_scenario, SimRun, TraceSummary};
use rayon::prelude::*;

use crate::output;
use crate::{Failure, OutArgs};

pub const DEFAULT_OUT_DIR: &str = "omnimorph-out";

/// Command-line overrides applied on top of every scenario file.
#[derive(Debug, Args, Clone, Default)]
pub struct Overrides {
    /// Weight preset (case-a or case-b)
    #[arg(long)]
    pub preset: Option<String>,
    /// Scale on the thrust and drag coefficients seen by the plant
    #[arg(long)]
    pub cf_scale: Option<f64>,
    /// Disable morphing and hold this tilt, degrees
    #[arg(long)]
    pub fixed_alpha: Option<f64>,
    /// Uniform input-rate weight
    #[arg(long)]
    pub w3: Option<f64>,
    /// Simulated time in seconds (defaults to the mission span)
    #[arg(long)]
    pub duration: Option<f64>,
}

impl Overrides {
    fn apply(&self, cfg: &mut ScenarioConfig) -> Result<(), Failure> {
        if let Some(p) = &self.preset {
            cfg.controller.preset = Some(p.parse::<Preset>()?);
        }
        if let Some(s) = self.cf_scale {
            cfg.plant.cf_scale = Some(s);
        }
        if let Some(a) = self.fixed_alpha {
            cfg.controller.fixed_alpha_deg = Some(a);
        }
        if let Some(w) = self.w3 {
            cfg.controller.w3 = Some(Diagonal::Scalar(w));
        }
        if let Some(d) = self.duration {
            cfg.mission.duration = Some(d);
        }
        Ok(())
    }
}

/// Loads a scenario from a TOML path or a preset name.
pub fn load(spec: &str, overrides: &Overrides) -> Result<ResolvedScenario, Failure> {
    let mut cfg = match spec.parse::<Preset>() {
        Ok(p) => ScenarioConfig::preset(p),
        Err(_) => {
            let path = Path::new(spec);
            if !path.exists() {
                return Err(Failure::Usage(format!(
                    "`{spec}` is neither a scenario file nor a preset (case-a, case-b)"
                )));
            }
            ScenarioConfig::from_file(path)?
        }
    };
    overrides.apply(&mut cfg)?;
    let mut resolved = cfg.resolve()?;
    if let Some(a) = overrides.fixed_alpha {
        resolved.name = format!("{}-fixed{a}", resolved.name);
    }
    Ok(resolved)
}

pub fn format_summary(name: &str, s: &TraceSummary) -> String {
    let mut t = String::new();
    writeln!(t, "scenario            {name}").unwrap();
    writeln!(t, "steps               {}", s.steps).unwrap();
    writeln!(t, "duration_s          {:.3}", s.duration).unwrap();
    writeln!(t, "mean_pos_err_m      {:.6}", s.mean_position_error).unwrap();
    writeln!(t, "mean_att_err_rad    {:.6}", s.mean_attitude_error).unwrap();
    writeln!(t, "drag_energy_J       {:.3}", s.drag_energy).unwrap();
    writeln!(t, "prop_accel_energy_J {:.3}", s.prop_accel_energy).unwrap();
    writeln!(t, "max_alpha_deg       {:.3}", s.max_alpha.to_degrees()).unwrap();
    writeln!(t, "final_alpha_deg     {:.3}", s.final_alpha.to_degrees()).unwrap();
    t
}

fn trace_script() -> String {
    output::gnuplot_script(
        "trace.csv",
        "Position error and tilt",
        "t [s]",
        "",
        &[(1, 34, "pos_err [m]"), (1, 16, "alpha [rad]")],
    )
}

fn write_outputs(dir: &Path, run: &ResolvedScenario, sim: &SimRun) -> Result<(), Failure> {
    output::ensure_dir(dir)?;
    let cols: Vec<&str> = if run.columns.is_empty() {
        omnimorph_core::trace::COLUMNS.to_vec()
    } else {
        run.columns.iter().map(String::as_str).collect()
    };
    write_trace_file(&dir.join("trace.csv"), &sim.trace, &cols)?;
    if cols.contains(&"t") && cols.contains(&"pos_err") && cols.contains(&"alpha") {
        let idx = |c: &str| cols.iter().position(|x| *x == c).unwrap() + 1;
        let gp = output::gnuplot_script(
            "trace.csv",
            "Position error and tilt",
            "t [s]",
            "",
            &[
                (idx("t"), idx("pos_err"), "pos_err [m]"),
                (idx("t"), idx("alpha"), "alpha [rad]"),
            ],
        );
        output::write_text(&dir.join("trace.gp"), &gp)?;
    } else if run.columns.is_empty() {
        output::write_text(&dir.join("trace.gp"), &trace_script())?;
    }
    let mut summary = format_summary(&run.name, &sim.trace.summary());
    if let Some(f) = &sim.fault {
        writeln!(summary, "fault               {f}").unwrap();
    }
    output::write_text(&dir.join("summary.txt"), &summary)
}

/// Gives every run its own directory name, suffixing duplicates.
fn unique_names(runs: &[ResolvedScenario]) -> Vec<String> {
    let mut seen: HashMap<&str, usize> = HashMap::new();
    runs.iter()
        .map(|r| {
            let n = seen.entry(r.name.as_str()).or_insert(0);
            *n += 1;
            if *n == 1 {
                r.name.clone()
            } else {
                format!("{}-{}", r.name, n)
            }
        })
        .collect()
}

pub fn simulate(configs: &[String], overrides: &Overrides, jobs: usize, out: &OutArgs) -> Result<(), Failure> {
    if jobs == 0 {
        return Err(Failure::Usage("--jobs must be at least 1".into()));
    }
    let runs: Vec<ResolvedScenario> = configs.iter().map(|c| load(c, overrides)).collect::<Result<_, _>>()?;
    let names = unique_names(&runs);
    let cli_dir = output::explicit_dir(out);
    let dirs: Vec<PathBuf> = runs
        .iter()
        .zip(&names)
        .map(|(r, n)| {
            let base = cli_dir
                .clone()
                .or_else(|| r.output_dir.clone())
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
            base.join(n)
        })
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Failure::Other(e.to_string()))?;
    let results: Vec<Result<SimRun, omnimorph_core::Error>> =
        pool.install(|| runs.par_iter().map(|r| run_scenario(&r.scenario)).collect());

    let mut faults = Vec::new();
    for (((run, name), dir), result) in runs.iter().zip(&names).zip(&dirs).zip(results) {
        let sim = result?;
        write_outputs(dir, run, &sim)?;
        print!("{}", format_summary(name, &sim.trace.summary()));
        println!("output              {}", dir.display());
        if let Some(f) = &sim.fault {
            println!("fault               {f}");
            faults.push(format!("{name}: {f}"));
        }
        println!();
    }
    if faults.is_empty() {
        Ok(())
    } else {
        Err(Failure::Runtime(faults.join("; ")))
    }
}

pub fn compare(a: &str, b: &str, overrides: &Overrides, out: &OutArgs) -> Result<(), Failure> {
    let runs = [load(a, overrides)?, load(b, overrides)?];
    let names = unique_names(&runs);
    let sims: Vec<SimRun> = runs
        .par_iter()
        .map(|r| run_scenario(&r.scenario))
        .collect::<Result<_, _>>()?;
    if let Some(base) = output::explicit_dir(out) {
        for ((run, name), sim) in runs.iter().zip(&names).zip(&sims) {
            write_outputs(&base.join(name), run, sim)?;
        }
    }

    let sa = sims[0].trace.summary();
    let sb = sims[1].trace.summary();
    let rows: [(&str, f64, f64); 6] = [
        ("mean_pos_err_m", sa.mean_position_error, sb.mean_position_error),
        ("mean_att_err_rad", sa.mean_attitude_error, sb.mean_attitude_error),
        ("drag_energy_J", sa.drag_energy, sb.drag_energy),
        ("prop_accel_energy_J", sa.prop_accel_energy, sb.prop_accel_energy),
        ("max_alpha_deg", sa.max_alpha.to_degrees(), sb.max_alpha.to_degrees()),
        ("duration_s", sa.duration, sb.duration),
    ];
    println!("{:<20}  {:>14}  {:>14}  {:>8}", "metric", names[0], names[1], "b/a");
    for (label, va, vb) in rows {
        let ratio = if va != 0.0 {
            format!("{:.3}", vb / va)
        } else {
            "-".into()
        };
        println!("{label:<20}  {va:>14.6}  {vb:>14.6}  {ratio:>8}");
    }
    println!("{:<20}  {:>14}  {:>14}", "steps", sa.steps, sb.steps);
    let faults: Vec<String> = names
        .iter()
        .zip(&sims)
        .filter_map(|(n, s)| s.fault.as_ref().map(|f| format!("{n}: {f}")))
        .collect();
    if faults.is_empty() {
        Ok(())
    } else {
        Err(Failure::Runtime(faults.join("; ")))
    }
}
