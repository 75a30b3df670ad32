//! Command-line front end. `run` returns the process exit code:
//! 0 success, 1 usage or configuration error, 2 numerical or output failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use passivity_core::sim::{simulate_fault, FaultScenario};

use crate::case::{linspace, load_case};
use crate::experiments::{cct_table, sweep_lambda, sweep_stability_grid, verify, HarnessError, HarnessResult, Study};
use crate::output;

#[derive(Debug, Parser)]
#[command(
    name = "passivity",
    version,
    about = "Passivity-index stability analysis for small power networks"
)]
pub struct Cli {
    /// Directory for CSV outputs and plot scripts (stdout when omitted).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CaseArgs {
    /// Path to a JSON case file.
    pub case: PathBuf,
    /// Replace every line resistance with the case's `lossy_r`.
    #[arg(long)]
    pub lossy: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the power flow at load scale s.
    Powerflow {
        #[command(flatten)]
        case: CaseArgs,
        #[arg(long, default_value_t = 1.0)]
        s: f64,
    },
    /// Network passivity index at load scale s.
    Lambda {
        #[command(flatten)]
        case: CaseArgs,
        #[arg(long, default_value_t = 1.0)]
        s: f64,
    },
    /// Check the per-bus gain inequalities and σ > −λ.
    Verify {
        #[command(flatten)]
        case: CaseArgs,
        #[arg(long, allow_hyphen_values = true)]
        sigma: f64,
        #[arg(long, default_value_t = 1.0)]
        s: f64,
    },
    /// Closed-loop eigenvalues at a uniform σ.
    Smallsignal {
        #[command(flatten)]
        case: CaseArgs,
        #[arg(long, allow_hyphen_values = true)]
        sigma: f64,
        #[arg(long, default_value_t = 1.0)]
        s: f64,
    },
    /// λ over the configured load-scale range.
    SweepLambda {
        #[command(flatten)]
        case: CaseArgs,
    },
    /// Small-signal verdicts over (s, ρ) with σ = −λ(s) + ρ.
    SweepGrid {
        #[command(flatten)]
        case: CaseArgs,
        /// Override the configured number of ρ samples.
        #[arg(long)]
        rho_steps: Option<usize>,
    },
    /// Critical clearing times for every fault bus and σ offsets 0, 1, 2.
    Cct {
        #[command(flatten)]
        case: CaseArgs,
    },
    /// Time-domain fault simulation at base load.
    Simulate {
        #[command(flatten)]
        case: CaseArgs,
        /// 1-based faulted bus.
        #[arg(long)]
        fault_bus: usize,
        /// Fault duration in seconds.
        #[arg(long)]
        clear: f64,
        /// σ offset above −λ.
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        rho: f64,
    },
}

/// Parses `args` (including the program name) and executes the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = write!(stderr, "{}", e.render());
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match execute(&cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn study(args: &CaseArgs) -> HarnessResult<Study> {
    Study::new(load_case(&args.case)?, args.lossy)
}

fn suffix(lossy: bool) -> &'static str {
    if lossy {
        "_lossy"
    } else {
        ""
    }
}

/// Writes `csv` to `<dir>/<name>` plus a companion gnuplot script, or to
/// stdout when no directory was given.
fn emit(
    out: Option<&Path>,
    stdout: &mut dyn Write,
    name: &str,
    script: impl FnOnce(&str) -> String,
    write: impl FnOnce(&mut dyn Write) -> HarnessResult<()>,
) -> HarnessResult<()> {
    match out {
        Some(dir) => {
            let path = output::prepare(dir, name)?;
            let mut f = std::io::BufWriter::new(std::fs::File::create(&path)?);
            write(&mut f)?;
            f.flush()?;
            let gp = dir.join(Path::new(name).with_extension("gp"));
            std::fs::write(&gp, script(name))?;
            writeln!(stdout, "wrote {} and {}", path.display(), gp.display())?;
            Ok(())
        }
        None => write(stdout),
    }
}

fn execute(cli: &Cli, stdout: &mut dyn Write) -> HarnessResult<()> {
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Powerflow { case, s } => {
            let st = study(case)?;
            let eq = st.solve(*s, None)?;
            writeln!(stdout, "bus,theta,V,P,Q")?;
            for i in 0..st.n() {
                writeln!(
                    stdout,
                    "{},{},{},{},{}",
                    i + 1,
                    eq.y_star.theta[i],
                    eq.y_star.v[i],
                    eq.u_star.p[i],
                    eq.u_star.q[i]
                )?;
            }
        }
        Command::Lambda { case, s } => {
            let st = study(case)?;
            let rep = st.lambda(&st.solve(*s, None)?)?;
            writeln!(stdout, "s = {s}")?;
            writeln!(stdout, "lambda = {}", rep.lambda)?;
        }
        Command::Verify { case, sigma, s } => {
            let st = study(case)?;
            let rep = verify(&st, *s, *sigma)?;
            writeln!(
                stdout,
                "s = {}, lambda = {}, -lambda = {}",
                rep.s, rep.lambda, -rep.lambda
            )?;
            writeln!(stdout, "bus,device,sigma,angle_margin,voltage_margin,gains_ok,index_ok")?;
            for b in &rep.buses {
                writeln!(
                    stdout,
                    "{},{},{},{},{},{},{}",
                    b.bus, b.device, b.sigma, b.angle_margin, b.voltage_margin, b.ofp, b.index
                )?;
            }
            writeln!(
                stdout,
                "condition {}",
                if rep.satisfied() { "satisfied" } else { "violated" }
            )?;
        }
        Command::Smallsignal { case, sigma, s } => {
            let st = study(case)?;
            let eq = st.solve(*s, None)?;
            let lambda = st.lambda(&eq)?.lambda;
            let v = st.system(&eq, &st.sigma_vector(*sigma))?.small_signal()?;
            writeln!(stdout, "s = {s}, sigma = {sigma}, -lambda = {}", -lambda)?;
            writeln!(stdout, "re,im")?;
            for e in &v.eigenvalues {
                writeln!(stdout, "{},{}", e.re, e.im)?;
            }
            writeln!(
                stdout,
                "max_real_part = {} (structural zeros excluded: {})",
                v.max_real_part, v.structural_zero_count
            )?;
            writeln!(stdout, "verdict = {}", v.verdict.label())?;
        }
        Command::SweepLambda { case } => {
            let st = study(case)?;
            let sw = &st.case.sweep;
            let rows = sweep_lambda(&st, &linspace(sw.s_min, sw.s_max, sw.s_steps));
            let name = format!("lambda{}.csv", suffix(st.lossy));
            emit(out, stdout, &name, output::lambda_plot, |w| {
                output::write_lambda_csv(w, &rows)
            })?;
        }
        Command::SweepGrid { case, rho_steps } => {
            let st = study(case)?;
            let sw = &st.case.sweep;
            let steps = rho_steps.unwrap_or(sw.rho_steps);
            if steps == 0 {
                return Err(HarnessError::Config("rho-steps must be positive".into()));
            }
            let rows = sweep_stability_grid(
                &st,
                &linspace(sw.s_min, sw.s_max, sw.s_steps),
                &linspace(sw.rho_min, sw.rho_max, steps),
            )?;
            let stem = format!("grid{}", suffix(st.lossy));
            let png = format!("{stem}.png");
            emit(
                out,
                stdout,
                &format!("{stem}.csv"),
                |c| output::grid_plot(c, &png),
                |w| output::write_grid_csv(w, &rows),
            )?;
        }
        Command::Cct { case } => {
            let st = study(case)?;
            let buses: Vec<usize> = (1..=st.n()).collect();
            let rows = cct_table(&st, &[0.0, 1.0, 2.0], &buses)?;
            let stem = format!("cct{}", suffix(st.lossy));
            let png = format!("{stem}.png");
            if out.is_some() {
                for r in &rows {
                    writeln!(
                        stdout,
                        "bus {} offset {}: {} (reference {})",
                        r.fault_bus,
                        r.sigma_offset,
                        r.describe(),
                        r.reference.map_or_else(|| "n/a".into(), |p| p.to_string())
                    )?;
                }
            }
            emit(
                out,
                stdout,
                &format!("{stem}.csv"),
                |c| output::cct_plot(c, &png),
                |w| output::write_cct_csv(w, &rows),
            )?;
        }
        Command::Simulate {
            case,
            fault_bus,
            clear,
            rho,
        } => {
            let st = study(case)?;
            if *fault_bus == 0 || *fault_bus > st.n() {
                return Err(HarnessError::Config(format!("fault bus {fault_bus} does not exist")));
            }
            if !(*clear > 0.0) {
                return Err(HarnessError::Config(format!(
                    "clearing time must be positive, got {clear}"
                )));
            }
            let eq = st.solve(1.0, None)?;
            let lambda = st.lambda(&eq)?.lambda;
            let sys = st.system(&eq, &st.sigma_vector(-lambda + rho))?;
            let sim = &st.case.simulation;
            let scenario = FaultScenario {
                bus: fault_bus - 1,
                fault_shunt_b: sim.fault_shunt_b,
                t_fault_on: sim.t_fault_on,
                clearing_time: *clear,
            };
            let res = simulate_fault(&sys, &scenario, &st.convergence_spec(), st.integrate_options())?;
            let n = st.n();
            emit(
                out,
                stdout,
                "trace.csv",
                |c| output::trace_plot(c, n),
                |w| Ok(res.trace.write_csv(w)?),
            )?;
            let status = match res.aborted_at {
                Some(t) => format!("left the state domain at t = {t}"),
                None if res.converged => format!("converged (tail error {})", res.tail_error),
                None => format!("did not converge (tail error {})", res.tail_error),
            };
            writeln!(stdout, "fault at bus {fault_bus} cleared after {clear} s: {status}")?;
        }
    }
    Ok(())
}
