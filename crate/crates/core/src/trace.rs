//! CSV serialization of simulation traces.
//!
//! The first line is a schema comment, `# omnimorph-trace v1`, followed by
//! the column header. Floats are written in Rust's shortest round-trip
//! form, so parsing a written trace reproduces it bit for bit.

use std::io::{BufRead, BufReader, Read, Write};

use nalgebra::{Vector3, Vector4};

use crate::dynamics::{SimTrace, TraceRow};
use crate::error::{Error, Result};
use crate::geometry::{InputVector, Wrench};

pub const SCHEMA_LINE: &str = "# omnimorph-trace v1";

pub const COLUMNS: [&str; 34] = [
    "t", "px", "py", "pz", "pdx", "pdy", "pdz", "qw", "qx", "qy", "qz", "qdw", "qdx", "qdy", "qdz", "alpha", "u0",
    "u1", "u2", "u3", "u4", "u5", "u6", "u7", "fx", "fy", "fz", "tx", "ty", "tz", "p_drag", "e_drag", "e_accel",
    "pos_err",
];

/// Columns a full trace file must contain; `pos_err` is derived.
const STORED: usize = 33;

fn row_values(r: &TraceRow) -> [f64; 34] {
    let mut v = [0.0; 34];
    v[0] = r.t;
    v[1..4].copy_from_slice(r.p.as_slice());
    v[4..7].copy_from_slice(r.p_d.as_slice());
    v[7..11].copy_from_slice(r.q.as_slice());
    v[11..15].copy_from_slice(r.q_d.as_slice());
    v[15] = r.alpha;
    v[16..24].copy_from_slice(r.u_w.as_slice());
    v[24..30].copy_from_slice(r.wrench.as_slice());
    v[30] = r.p_drag;
    v[31] = r.e_drag;
    v[32] = r.e_accel;
    v[33] = r.position_error();
    v
}

fn column_index(name: &str) -> Result<usize> {
    COLUMNS
        .iter()
        .position(|c| *c == name)
        .ok_or_else(|| Error::Trace(format!("unknown column `{name}`")))
}

/// Writes the selected columns (all stored columns if `columns` is empty).
pub fn write_trace<W: Write>(out: W, trace: &SimTrace, columns: &[&str]) -> Result<()> {
    let idx: Vec<usize> = if columns.is_empty() {
        (0..STORED).collect()
    } else {
        columns.iter().map(|c| column_index(c)).collect::<Result<_>>()?
    };
    let mut out = out;
    writeln!(out, "{SCHEMA_LINE}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(idx.iter().map(|&i| COLUMNS[i]))?;
    for row in &trace.rows {
        let v = row_values(row);
        w.write_record(idx.iter().map(|&i| v[i].to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace_file(path: &std::path::Path, trace: &SimTrace, columns: &[&str]) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_trace(std::io::BufWriter::new(file), trace, columns)
}

/// Parses a file written with the full column set.
pub fn read_trace<R: Read>(input: R) -> Result<SimTrace> {
    let mut input = BufReader::new(input);
    let mut first = String::new();
    input.read_line(&mut first)?;
    if first.trim_end() != SCHEMA_LINE {
        return Err(Error::Trace(format!(
            "expected schema line `{SCHEMA_LINE}`, found `{}`",
            first.trim_end()
        )));
    }
    let mut rdr = csv::Reader::from_reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.len() < STORED || header.iter().take(STORED).zip(COLUMNS.iter()).any(|(h, c)| h != c) {
        return Err(Error::Trace("header does not match the full trace schema".into()));
    }
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let mut v = [0.0; STORED];
        for (i, slot) in v.iter_mut().enumerate() {
            let field = rec
                .get(i)
                .ok_or_else(|| Error::Trace(format!("row {}: missing column {}", line + 1, COLUMNS[i])))?;
            *slot = field.parse().map_err(|_| {
                Error::Trace(format!(
                    "row {}: column {}: cannot parse `{field}`",
                    line + 1,
                    COLUMNS[i]
                ))
            })?;
        }
        rows.push(TraceRow {
            t: v[0],
            p: Vector3::from_column_slice(&v[1..4]),
            p_d: Vector3::from_column_slice(&v[4..7]),
            q: Vector4::from_column_slice(&v[7..11]),
            q_d: Vector4::from_column_slice(&v[11..15]),
            alpha: v[15],
            u_w: InputVector::from_column_slice(&v[16..24]),
            wrench: Wrench::from_column_slice(&v[24..30]),
            p_drag: v[30],
            e_drag: v[31],
            e_accel: v[32],
        });
    }
    Ok(SimTrace { rows })
}

pub fn read_trace_file(path: &std::path::Path) -> Result<SimTrace> {
    read_trace(std::fs::File::open(path)?)
}
