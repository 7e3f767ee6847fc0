//! Static analyses: actuation rank, break-even mass, force sets, hover.

use std::fmt::Write as _;

use omnimorph_core::wrench_sets::{fibonacci_sphere, sustains_vertical_hover};
use omnimorph_core::{
    classify_actuation, delta_m_bar, hover_input, inscribed_force_radius, motor_power, support_force, InputVector,
    PlatformParams, PropellerLayout,
};
use rayon::prelude::*;

use crate::output::{self, check_angles, parse_angles, parse_range};
use crate::{Failure, OutArgs};

fn platform() -> Result<(PlatformParams, PropellerLayout), Failure> {
    let params = PlatformParams::default();
    let layout = PropellerLayout::for_params(&params)?;
    Ok((params, layout))
}

fn angles(alpha: &[String], sweep: Option<&str>) -> Result<Vec<f64>, Failure> {
    match sweep {
        Some(spec) => {
            let v = parse_range(spec)?;
            check_angles(&v)?;
            Ok(v)
        }
        None => parse_angles(alpha),
    }
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool, Failure> {
    if jobs == 0 {
        return Err(Failure::Usage("--jobs must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Failure::Other(e.to_string()))
}

/// The `rank` column classifies with `u_w = 0`, i.e. the rank of the
/// allocation matrix with the tilt column vanishing; `rank_hover_u` uses
/// equal hover-magnitude speeds instead.
pub fn analyze(alpha: &[String], sweep: Option<&str>, out: &OutArgs) -> Result<(), Failure> {
    let degs = angles(alpha, sweep)?;
    let (params, layout) = platform()?;
    let zero = InputVector::zeros();
    let uniform = InputVector::from_element(params.weight() / (8.0 * params.thrust_coeff));

    let mut csv = String::from("alpha_deg,rank,rank_allocation,rank_hover_u,class\n");
    let mut table = format!(
        "{:>9}  {:>4}  {:>6}  {:>11}  {}\n",
        "alpha_deg", "rank", "rank_A", "rank_hover_u", "class"
    );
    for &d in &degs {
        let a = d.to_radians();
        let c = classify_actuation(&params, &layout, a, &zero);
        let h = classify_actuation(&params, &layout, a, &uniform);
        writeln!(csv, "{d},{},{},{},{}", c.rank, c.allocation_rank, h.rank, c.tag).unwrap();
        writeln!(
            table,
            "{d:>9.3}  {:>4}  {:>6}  {:>11}  {}",
            c.rank, c.allocation_rank, h.rank, c.tag
        )
        .unwrap();
    }
    if sweep.is_some() {
        print!("{csv}");
    } else {
        print!("{table}");
    }
    if let Some(dir) = output::explicit_dir(out) {
        output::ensure_dir(&dir)?;
        output::write_text(&dir.join("rank.csv"), &csv)?;
        let gp = output::gnuplot_script("rank.csv", "Actuation rank", "alpha [deg]", "rank", &[(1, 2, "rank F")]);
        output::write_text(&dir.join("rank.gp"), &gp)?;
    }
    Ok(())
}

pub fn deltam(range: &str, out: &OutArgs) -> Result<(), Failure> {
    let degs = parse_range(range)?;
    check_angles(&degs)?;
    let (params, layout) = platform()?;
    let mut csv = String::from("alpha_f_deg,delta_m_bar\n");
    for &d in &degs {
        let v = delta_m_bar(&params, &layout, d.to_radians())?;
        writeln!(csv, "{d},{v}").unwrap();
    }
    print!("{csv}");
    if let Some(dir) = output::explicit_dir(out) {
        output::ensure_dir(&dir)?;
        output::write_text(&dir.join("deltam.csv"), &csv)?;
        let gp = output::gnuplot_script(
            "deltam.csv",
            "Break-even tilting mass fraction",
            "alpha_f [deg]",
            "delta m / m",
            &[(1, 2, "delta_m_bar")],
        );
        output::write_text(&dir.join("deltam.gp"), &gp)?;
    }
    Ok(())
}

struct RadiusRow {
    deg: f64,
    radius: f64,
    hover: bool,
}

pub fn forceset(
    alpha: &[String],
    sweep: Option<&str>,
    dirs: usize,
    zero_torque: bool,
    jobs: usize,
    out: &OutArgs,
) -> Result<(), Failure> {
    let degs = angles(alpha, sweep)?;
    let (params, layout) = platform()?;
    let pool = pool(jobs)?;
    let weight = params.weight();

    if sweep.is_some() {
        if !zero_torque {
            return Err(Failure::Usage(
                "--no-zero-torque only applies to --alpha samples".into(),
            ));
        }
        let rows: Vec<RadiusRow> = pool.install(|| {
            degs.par_iter()
                .map(|&deg| {
                    let a = deg.to_radians();
                    Ok(RadiusRow {
                        deg,
                        radius: inscribed_force_radius(&params, &layout, a, dirs)?,
                        hover: sustains_vertical_hover(&params, a),
                    })
                })
                .collect::<Result<_, omnimorph_core::Error>>()
        })?;
        let mut csv = String::from("alpha_deg,radius_N,radius_over_mg,omni\n");
        let mut interval: Option<(f64, f64)> = None;
        for r in &rows {
            let omni = r.hover && r.radius >= weight;
            if omni {
                interval = Some(interval.map_or((r.deg, r.deg), |(lo, _)| (lo, r.deg)));
            }
            writeln!(csv, "{},{},{},{}", r.deg, r.radius, r.radius / weight, u8::from(omni)).unwrap();
        }
        print!("{csv}");
        match interval {
            Some((lo, hi)) => eprintln!("omnidirectional tilt interval: [{lo}, {hi}] deg"),
            None => eprintln!("omnidirectional tilt interval: none"),
        }
        if let Some(dir) = output::explicit_dir(out) {
            output::ensure_dir(&dir)?;
            output::write_text(&dir.join("radius.csv"), &csv)?;
            let gp = output::gnuplot_script(
                "radius.csv",
                "Inscribed zero-torque force radius",
                "alpha [deg]",
                "radius / mg",
                &[(1, 3, "radius / mg")],
            );
            output::write_text(&dir.join("radius.gp"), &gp)?;
        }
        return Ok(());
    }

    if dirs < omnimorph_core::wrench_sets::MIN_DIRECTIONS {
        return Err(Failure::Usage(format!(
            "--dirs must be at least {}",
            omnimorph_core::wrench_sets::MIN_DIRECTIONS
        )));
    }
    let directions = fibonacci_sphere(dirs);
    let mut csv = String::from("alpha_deg,dir_x,dir_y,dir_z,support_N\n");
    for &deg in &degs {
        let a = deg.to_radians();
        let values: Vec<f64> = pool.install(|| {
            directions
                .par_iter()
                .map(|d| support_force(&params, &layout, a, d, zero_torque))
                .collect::<Result<_, omnimorph_core::Error>>()
        })?;
        for (d, v) in directions.iter().zip(&values) {
            writeln!(csv, "{deg},{},{},{},{v}", d.x, d.y, d.z).unwrap();
        }
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        eprintln!("alpha {deg} deg: min support {min:.4} N ({:.4} mg)", min / weight);
    }
    print!("{csv}");
    if let Some(dir) = output::explicit_dir(out) {
        output::ensure_dir(&dir)?;
        output::write_text(&dir.join("forceset.csv"), &csv)?;
        let gp = "set datafile separator ','\n\
                  set key autotitle columnhead\n\
                  set view equal xyz\n\
                  splot 'forceset.csv' using ($2*$5):($3*$5):($4*$5) with points pt 7 ps 0.5 title 'support'\n\
                  pause mouse close\n";
        output::write_text(&dir.join("forceset.gp"), gp)?;
    }
    Ok(())
}

pub fn hover(alpha_deg: f64, mass: Option<f64>) -> Result<(), Failure> {
    if !(0.0..=90.0).contains(&alpha_deg) {
        return Err(Failure::Usage(format!("angle {alpha_deg} deg outside [0, 90]")));
    }
    let (params, layout) = platform()?;
    let m = mass.unwrap_or(params.mass);
    if !(m.is_finite() && m > 0.0) {
        return Err(Failure::Usage("--mass must be positive".into()));
    }
    let u = hover_input(&params, &layout, alpha_deg.to_radians(), m)?;
    println!("alpha {alpha_deg} deg, mass {m} kg");
    println!("{:>4}  {:>14}  {:>10}", "prop", "u_w [rad2/s2]", "of max");
    for (i, v) in u.iter().enumerate() {
        println!("{i:>4}  {v:>14.3}  {:>9.1}%", 100.0 * v / params.u_w_max);
    }
    let saturated = u.iter().any(|v| v.abs() > params.u_w_max);
    println!("power {:.3} W", motor_power(&params, &u));
    if saturated {
        println!("warning: exceeds the per-propeller speed bound");
    }
    Ok(())
}
