//! Trace CSV files: header `index,q1,...,qd,log_density,accepted`, floats
//! written with 17 significant digits, LF line endings.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use crate::samplers::Trace;

use super::HarnessError;

fn float(out: &mut String, x: f64) {
    let _ = write!(out, "{x:.16e}");
}

pub fn trace_to_csv(trace: &Trace) -> String {
    let mut out = String::with_capacity(trace.len() * (trace.dim() + 2) * 24);
    out.push_str("index");
    for j in 1..=trace.dim() {
        let _ = write!(out, ",q{j}");
    }
    out.push_str(",log_density,accepted\n");
    for (i, state) in trace.states().enumerate() {
        let _ = write!(out, "{i}");
        for &x in state {
            out.push(',');
            float(&mut out, x);
        }
        out.push(',');
        float(&mut out, trace.log_density()[i]);
        out.push_str(if trace.accepted()[i] { ",1\n" } else { ",0\n" });
    }
    out
}

pub fn write_trace(path: &Path, trace: &Trace) -> Result<(), HarnessError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| HarnessError::io(parent, e))?;
    }
    fs::write(path, trace_to_csv(trace)).map_err(|e| HarnessError::io(path, e))
}

/// Parses a trace CSV. Sampler metadata is not stored in the file, so the
/// model and sampler names are set to the supplied labels and the proposal
/// counters are zero.
pub fn parse_trace(reader: impl Read, model: &str, sampler: &str) -> Result<Trace, HarnessError> {
    let mut lines = BufReader::new(reader).lines();
    let bad = |line: usize, msg: String| HarnessError::Format { line, message: msg };
    let header = match lines.next() {
        Some(h) => h.map_err(|e| bad(1, e.to_string()))?,
        None => return Err(bad(1, "empty file".into())),
    };
    let cols: Vec<&str> = header.trim_end_matches('\r').split(',').collect();
    let dim = cols
        .len()
        .checked_sub(3)
        .filter(|&d| d > 0)
        .ok_or_else(|| bad(1, "too few columns".into()))?;
    let expected: Vec<String> = std::iter::once("index".to_string())
        .chain((1..=dim).map(|j| format!("q{j}")))
        .chain(["log_density".to_string(), "accepted".to_string()])
        .collect();
    if cols != expected {
        return Err(bad(1, format!("unexpected header `{header}`")));
    }
    let mut trace = Trace::new(model, sampler, dim);
    let mut state = vec![0.0; dim];
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let line = line.map_err(|e| bad(lineno, e.to_string()))?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != dim + 3 {
            return Err(bad(
                lineno,
                format!("expected {} fields, found {}", dim + 3, fields.len()),
            ));
        }
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| bad(lineno, format!("bad number `{s}`")))
        };
        for (j, slot) in state.iter_mut().enumerate() {
            *slot = num(fields[j + 1])?;
        }
        let log_density = num(fields[dim + 1])?;
        let accepted = match fields[dim + 2].trim() {
            "1" => true,
            "0" => false,
            other => return Err(bad(lineno, format!("accepted flag `{other}` is not 0 or 1"))),
        };
        trace.push(&state, log_density, accepted);
    }
    Ok(trace)
}

pub fn read_trace(path: &Path) -> Result<Trace, HarnessError> {
    let file = fs::File::open(path).map_err(|e| HarnessError::io(path, e))?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("trace");
    parse_trace(file, stem, "unknown")
}

/// `lag,autocorrelation` rows.
pub fn autocorrelation_csv(rho: &[f64]) -> String {
    let mut out = String::from("lag,autocorrelation\n");
    for (k, r) in rho.iter().enumerate() {
        let _ = writeln!(out, "{k},{r:.10}");
    }
    out
}

/// Equal-width histogram `bin_start,bin_end,count,density` of one series.
pub fn histogram_csv(series: &[f64], bins: usize) -> String {
    let mut out = String::from("bin_start,bin_end,count,density\n");
    if series.is_empty() || bins == 0 {
        return out;
    }
    let lo = series.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = series.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for &x in series {
        let b = (((x - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let total = series.len() as f64;
    for (b, c) in counts.iter().enumerate() {
        let start = lo + b as f64 * width;
        let _ = writeln!(
            out,
            "{start:.10},{:.10},{c},{:.10}",
            start + width,
            *c as f64 / (total * width)
        );
    }
    out
}
