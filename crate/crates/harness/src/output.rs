//! CSV writers and gnuplot scripts for experiment outputs.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::experiments::{CctRow, GridRow, HarnessResult, LambdaRow};

pub const LAMBDA_HEADER: [&str; 2] = ["s", "lambda"];
pub const GRID_HEADER: [&str; 6] = ["s", "sigma", "rho", "max_real_part", "verdict", "neg_lambda"];
pub const CCT_HEADER: [&str; 4] = ["fault_bus", "sigma_offset", "sigma", "cct_seconds"];

/// Shortest round-trip representation; `NaN` for missing values.
fn num(x: f64) -> String {
    format!("{x}")
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NaN".to_string(), num)
}

pub fn write_lambda_csv<W: Write>(w: W, rows: &[LambdaRow]) -> HarnessResult<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(LAMBDA_HEADER)?;
    for r in rows {
        out.write_record([num(r.s), opt(r.lambda)])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_grid_csv<W: Write>(w: W, rows: &[GridRow]) -> HarnessResult<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(GRID_HEADER)?;
    for r in rows {
        out.write_record([
            num(r.s),
            num(r.sigma),
            num(r.rho),
            num(r.max_real_part),
            r.verdict.clone(),
            num(r.neg_lambda),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Clearing times that were not bracketed are written as `NaN`.
pub fn write_cct_csv<W: Write>(w: W, rows: &[CctRow]) -> HarnessResult<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CCT_HEADER)?;
    for r in rows {
        out.write_record([
            r.fault_bus.to_string(),
            num(r.sigma_offset),
            num(r.sigma),
            opt(r.seconds()),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Creates `dir` and returns the path of `name` inside it.
pub fn prepare(dir: &Path, name: &str) -> HarnessResult<PathBuf> {
    std::fs::create_dir_all(dir)?;
    Ok(dir.join(name))
}

pub fn lambda_plot(csv_name: &str) -> String {
    format!(
        "set datafile separator ','\n\
         set key autotitle columnhead\n\
         set xlabel 's'\n\
         set ylabel 'lambda'\n\
         set terminal pngcairo size 800,500\n\
         set output 'lambda.png'\n\
         plot '{csv_name}' using 1:2 with linespoints title 'lambda(s)'\n"
    )
}

pub fn grid_plot(csv_name: &str, png: &str) -> String {
    format!(
        "set datafile separator ','\n\
         set xlabel 's'\n\
         set ylabel 'sigma'\n\
         set terminal pngcairo size 800,600\n\
         set output '{png}'\n\
         plot '{csv_name}' skip 1 using 1:(strcol(5) eq 'green' ? $2 : 1/0) with points pt 7 lc rgb 'forest-green' title 'stable', \\\n     \
         '' skip 1 using 1:(strcol(5) eq 'red' ? $2 : 1/0) with points pt 7 lc rgb 'red' title 'unstable', \\\n     \
         '' skip 1 using 1:(strcol(5) eq 'marginal' ? $2 : 1/0) with points pt 6 lc rgb 'gray' title 'marginal', \\\n     \
         '' skip 1 using 1:6 with lines lw 2 lc rgb 'black' title '-lambda'\n"
    )
}

pub fn cct_plot(csv_name: &str, png: &str) -> String {
    format!(
        "set datafile separator ','\n\
         set xlabel 'sigma offset above -lambda'\n\
         set ylabel 'critical clearing time [s]'\n\
         set terminal pngcairo size 800,500\n\
         set output '{png}'\n\
         plot for [b=1:3] '{csv_name}' skip 1 using (int($1)==b ? $2 : 1/0):4 with linespoints title sprintf('fault at bus %d', b)\n"
    )
}

pub fn trace_plot(csv_name: &str, n: usize) -> String {
    let volts: Vec<String> = (1..=n)
        .map(|i| format!("'{csv_name}' using 't':'V_{i}' with lines title 'V_{i}'"))
        .collect();
    format!(
        "set datafile separator ','\n\
         set key autotitle columnhead\n\
         set xlabel 't [s]'\n\
         set terminal pngcairo size 800,500\n\
         set output 'trace.png'\n\
         plot {}\n",
        volts.join(", ")
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn headers_are_exact() {
        let mut buf = Vec::new();
        write_lambda_csv(
            &mut buf,
            &[LambdaRow {
                s: 1.0,
                lambda: None,
                error: None,
            }],
        )
        .unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "s,lambda\n1,NaN\n");
        let mut buf = Vec::new();
        write_grid_csv(&mut buf, &[]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "s,sigma,rho,max_real_part,verdict,neg_lambda\n"
        );
        let mut buf = Vec::new();
        write_cct_csv(&mut buf, &[]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "fault_bus,sigma_offset,sigma,cct_seconds\n"
        );
    }
}
