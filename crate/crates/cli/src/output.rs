use std::fs;
use std::path::{Path, PathBuf};

use crate::{Failure, OutArgs};

pub const OUT_ENV: &str = "OMNIMORPH_OUT";

/// `--out`, else `OMNIMORPH_OUT`, else `None`.
pub fn explicit_dir(out: &OutArgs) -> Option<PathBuf> {
    out.out
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
}

pub fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Other(format!("cannot create {}: {e}", dir.display())))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Other(format!("cannot write {}: {e}", path.display())))
}

/// Parses `start:step:end` (degrees, inclusive end).
pub fn parse_range(spec: &str) -> Result<Vec<f64>, Failure> {
    let bad = || Failure::Usage(format!("bad range `{spec}`, expected start:step:end in degrees"));
    let parts: Vec<f64> = spec
        .split(':')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad())?;
    let [start, step, end] = parts[..] else {
        return Err(bad());
    };
    if !(start.is_finite() && end.is_finite() && step > 0.0 && end >= start) {
        return Err(bad());
    }
    let n = ((end - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| start + k as f64 * step).collect())
}

/// Parses a list of angles in degrees, each within `[0, 90]`.
pub fn parse_angles(items: &[String]) -> Result<Vec<f64>, Failure> {
    if items.is_empty() {
        return Err(Failure::Usage(
            "no tilt angles given (use --alpha a,b,... or --sweep)".into(),
        ));
    }
    items
        .iter()
        .map(|s| {
            let v: f64 = s
                .trim()
                .parse()
                .map_err(|_| Failure::Usage(format!("bad angle `{s}`")))?;
            if !(0.0..=90.0).contains(&v) {
                return Err(Failure::Usage(format!("angle {v} deg outside [0, 90]")));
            }
            Ok(v)
        })
        .collect()
}

pub fn check_angles(degs: &[f64]) -> Result<(), Failure> {
    match degs.iter().find(|v| !(0.0..=90.0).contains(*v)) {
        Some(v) => Err(Failure::Usage(format!("angle {v} deg outside [0, 90]"))),
        None => Ok(()),
    }
}

/// Gnuplot script plotting columns of a CSV that starts with a comment
/// line and a header.
pub fn gnuplot_script(
    csv_name: &str,
    title: &str,
    xlabel: &str,
    ylabel: &str,
    plots: &[(usize, usize, &str)],
) -> String {
    let mut s = String::new();
    s.push_str("set datafile separator ','\n");
    s.push_str("set key autotitle columnhead\n");
    s.push_str("set grid\n");
    s.push_str(&format!(
        "set title '{title}'\nset xlabel '{xlabel}'\nset ylabel '{ylabel}'\n"
    ));
    let body: Vec<String> = plots
        .iter()
        .map(|(x, y, label)| format!("'{csv_name}' using {x}:{y} with lines title '{label}'"))
        .collect();
    s.push_str(&format!("plot {}\n", body.join(", \\\n     ")));
    s.push_str("pause mouse close\n");
    s
}
