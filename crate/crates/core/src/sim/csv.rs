use std::io::{self, Write};

use super::{Summary, SweepRow, Trace};

/// Scientific notation with 17 significant digits.
pub fn fmt_float(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    format!("{v:.16e}")
}

fn row<W: Write>(w: &mut W, t: f64, mode: usize, values: &[f64], event: &str) -> io::Result<()> {
    write!(w, "{},{mode}", fmt_float(t))?;
    for v in values {
        write!(w, ",{}", fmt_float(*v))?;
    }
    writeln!(w, ",{event}")
}

/// Samples and jumps in time order; a jump row carries the post-reset
/// valuation and the target mode.
pub fn write_trace_csv<W: Write>(trace: &Trace, w: &mut W) -> io::Result<()> {
    writeln!(w, "t,mode,{},event", trace.variables.join(","))?;
    let mut jumps = trace.jumps.iter().peekable();
    for s in &trace.samples {
        while let Some(j) = jumps.next_if(|j| j.t < s.t) {
            row(w, j.t, j.to, &j.post, &j.event)?;
        }
        row(w, s.t, s.mode, &s.values, "")?;
    }
    for j in jumps {
        row(w, j.t, j.to, &j.post, &j.event)?;
    }
    Ok(())
}

pub fn write_summary_csv<W: Write>(s: &Summary, w: &mut W) -> io::Result<()> {
    let header: Vec<String> = s
        .variables
        .iter()
        .map(|v| format!("{v}_mean,{v}_sd"))
        .collect();
    writeln!(w, "t,{}", header.join(","))?;
    for (k, t) in s.times.iter().enumerate() {
        write!(w, "{}", fmt_float(*t))?;
        for j in 0..s.variables.len() {
            write!(w, ",{},{}", fmt_float(s.mean[k][j]), fmt_float(s.sd[k][j]))?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], w: &mut W) -> io::Result<()> {
    writeln!(w, "value,mean,se,n,failures")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            fmt_float(r.value),
            fmt_float(r.mean),
            fmt_float(r.se),
            r.n,
            r.failures
        )?;
    }
    Ok(())
}
