use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use hwy_core::deficit::{calibrate_constant, deficit_dual, deficit_primal, elementary_grid, ElementaryKind};
use hwy_core::experiments::{
    geometric_schedule, sweep_dual, sweep_primal_p, sweep_quadratic, SweepRow, DUAL_BUBBLE_COUPLING,
    DUAL_BUBBLE_WINDOW, PRIMAL_BUBBLE_COUPLING, PRIMAL_BUBBLE_WINDOW,
};
use hwy_core::search::{min_distance_dual, min_distance_primal, DistanceMode, DistanceResult};
use serde_json::json;

use crate::checks::sweep_checks;
use crate::config::{Lab, LabConfig, SphereRes};
use crate::error::{LabError, LabResult};
use crate::report::{write_sweep_csv, Check, Report};
use crate::spec;
use crate::suite::{verify, Sizes, SUITES};

#[derive(Debug, Parser)]
#[command(name = "hwy", version, about = "Harmonic extension stability lab")]
pub struct Cli {
    /// Ambient dimension d of the ball B^d.
    #[arg(long, global = true, default_value_t = 3)]
    pub dim: usize,
    /// Sphere grid as polar x azimuthal node counts.
    #[arg(long = "sphere-res", global = true, default_value = "64x128")]
    pub sphere_res: SphereRes,
    /// Radial nodes of the ball grid.
    #[arg(long = "radial-res", global = true, default_value_t = 48)]
    pub radial_res: usize,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Directory for output files; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Kernel cache file, read if present and written otherwise.
    #[arg(long = "kernel-cache", global = true)]
    pub kernel_cache: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SideArg {
    Primal,
    Dual,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    TwoTerm,
    L2,
    Lp,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a group of numerical checks.
    Verify {
        #[arg(value_parser = SUITES)]
        suite: String,
    },
    /// Deficit of a function given as a spec.
    Deficit {
        #[arg(long)]
        input: String,
        #[arg(long, value_enum, default_value_t = SideArg::Primal)]
        side: SideArg,
    },
    /// Distance of a function to the optimizer manifold.
    Distance {
        #[arg(long, value_enum)]
        side: SideArg,
        #[arg(long, default_value = "sum(1,scale(0.1,Y(2)))")]
        input: String,
        /// Primal objective; ignored on the dual side.
        #[arg(long, value_enum, default_value_t = ModeArg::TwoTerm)]
        mode: ModeArg,
    },
    /// Sweep one of the optimality families.
    Optimality {
        #[arg(long, value_parser = ["41", "42", "43"])]
        family: String,
        #[arg(long)]
        points: Option<usize>,
        /// Exponent c in 1 - |η| = δ^c (families 42, 43).
        #[arg(long)]
        coupling: Option<f64>,
        /// Parameter range as LO,HI.
        #[arg(long, value_parser = parse_window)]
        window: Option<(f64, f64)>,
        /// Perturbation direction for family 41 (must be orthogonal to affine functions).
        #[arg(long, default_value = "Y(2)")]
        input: String,
    },
    /// Best constant of an elementary inequality.
    Calibrate {
        #[arg(long)]
        kind: String,
        #[arg(long)]
        kappa: f64,
        /// Grid points per sign.
        #[arg(long, default_value_t = 4000)]
        points: usize,
    },
}

fn parse_window(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected LO,HI, got {s:?}"))?;
    let lo: f64 = a.trim().parse().map_err(|_| format!("bad number {a:?}"))?;
    let hi: f64 = b.trim().parse().map_err(|_| format!("bad number {b:?}"))?;
    if !(lo > 0.0 && hi > lo) {
        return Err(format!("need 0 < LO < HI, got {lo}, {hi}"));
    }
    Ok((lo, hi))
}

impl Cli {
    pub fn config(&self) -> LabConfig {
        LabConfig {
            dim: self.dim,
            sphere_res: self.sphere_res,
            radial_res: self.radial_res,
            seed: self.seed,
            kernel_cache: self.kernel_cache.clone(),
        }
    }
}

fn emit(out: Option<&Path>, file: &str, bytes: &[u8]) -> LabResult<()> {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| LabError::io(dir, e))?;
            let path = dir.join(file);
            fs::write(&path, bytes).map_err(|e| LabError::io(&path, e))
        }
        None => {
            let mut so = std::io::stdout().lock();
            so.write_all(bytes)
                .and_then(|_| so.flush())
                .map_err(|e| LabError::io("<stdout>", e))
        }
    }
}

fn emit_report(cli: &Cli, stem: &str, report: &Report) -> LabResult<()> {
    let mut buf = Vec::new();
    match cli.format {
        Format::Json => {
            report.write_json(&mut buf)?;
            buf.push(b'\n');
            emit(cli.out.as_deref(), &format!("{stem}.json"), &buf)
        }
        Format::Csv => {
            report.write_csv(&mut buf)?;
            emit(cli.out.as_deref(), &format!("{stem}.csv"), &buf)
        }
    }
}

fn emit_table(cli: &Cli, stem: &str, report: &Report, header: &[&str], rows: &[Vec<String>]) -> LabResult<()> {
    if cli.format == Format::Json {
        return emit_report(cli, stem, report);
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let buf = w.into_inner().map_err(|e| LabError::io("<csv>", e.into_error()))?;
    emit(cli.out.as_deref(), &format!("{stem}.csv"), &buf)
}

fn distance_json(r: &DistanceResult) -> serde_json::Value {
    json!({
        "lambda": r.lambda,
        "eta": r.eta,
        "value": r.value,
        "value_p": r.value_p,
        "value_2": r.value_2,
        "value_qprime": r.value_qprime,
        "distance": r.distance(),
        "iterations": r.iterations,
        "converged": r.converged,
        "multistart_spread": r.multistart_spread,
        "flagged": r.flagged,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

/// Parse arguments and run; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("hwy: {e}");
            2
        }
    }
}

/// `Ok(false)` when a tolerance check failed.
pub fn run(cli: &Cli) -> LabResult<bool> {
    let config = cli.config();
    match &cli.command {
        Command::Verify { suite } => {
            let lab = Lab::build(&config)?;
            let report = verify(&lab, suite, &Sizes::default())
                .ok_or_else(|| LabError::Usage(format!("unknown suite {suite:?}")))?;
            emit_report(cli, &format!("verify_{suite}"), &report)?;
            Ok(report.passed())
        }
        Command::Deficit { input, side } => {
            let expr = spec::parse(input)?;
            let lab = Lab::build(&config)?;
            let ext = lab.extension();
            let (rep, tol) = match side {
                SideArg::Primal => (deficit_primal(&expr.realize(&lab.sphere)?, &ext)?, 1e-6),
                SideArg::Dual => (deficit_dual(&expr.realize(&lab.ball)?, &ext)?, 3e-3),
            };
            let mut report = Report::new("deficit", &config);
            report
                .tests
                .push(Check::at_least("deficit_nonnegative", rep.deficit, -tol));
            report.data = json!({
                "input": expr.to_string(),
                "side": rep.side.tag(),
                "strong_norm": rep.strong_norm,
                "ext_norm": rep.ext_norm,
                "deficit": rep.deficit,
            });
            let row = vec![
                rep.side.tag().to_string(),
                format!("{:e}", rep.strong_norm),
                format!("{:e}", rep.ext_norm),
                format!("{:e}", rep.deficit),
            ];
            emit_table(
                cli,
                "deficit",
                &report,
                &["side", "strong_norm", "ext_norm", "deficit"],
                &[row],
            )?;
            Ok(report.passed())
        }
        Command::Distance { side, input, mode } => {
            let expr = spec::parse(input)?;
            let lab = Lab::build(&config)?;
            let (r, mode_tag) = match side {
                SideArg::Primal => {
                    let m = match mode {
                        ModeArg::TwoTerm => DistanceMode::TwoTerm,
                        ModeArg::L2 => DistanceMode::L2Only,
                        ModeArg::Lp => DistanceMode::LpOnly,
                    };
                    (min_distance_primal(&expr.realize(&lab.sphere)?, m)?, m.tag())
                }
                SideArg::Dual => (min_distance_dual(&expr.realize(&lab.ball)?)?, "qprime"),
            };
            let mut report = Report::new("distance", &config);
            report.tests.push(Check {
                name: "search_converged".into(),
                value: if r.converged { 1.0 } else { 0.0 },
                tolerance: 1.0,
                pass: r.converged,
                compare: "ge",
                target: None,
            });
            report
                .tests
                .push(Check::at_most("multistart_spread", r.multistart_spread, 0.01));
            let mut data = distance_json(&r);
            data["input"] = json!(expr.to_string());
            data["side"] = json!(format!("{side:?}").to_lowercase());
            data["mode"] = json!(mode_tag);
            report.data = data;
            let eta = r.eta.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(" ");
            let row = vec![
                format!("{side:?}").to_lowercase(),
                mode_tag.to_string(),
                format!("{:e}", r.lambda),
                eta,
                format!("{:e}", r.value),
                opt(r.value_p),
                opt(r.value_2),
                opt(r.value_qprime),
                r.converged.to_string(),
            ];
            let header = [
                "side",
                "mode",
                "lambda",
                "eta",
                "value",
                "value_p",
                "value_2",
                "value_qprime",
                "converged",
            ];
            emit_table(cli, "distance", &report, &header, &[row])?;
            Ok(report.passed())
        }
        Command::Optimality {
            family,
            points,
            coupling,
            window,
            input,
        } => run_optimality(cli, &config, family, *points, *coupling, *window, input),
        Command::Calibrate { kind, kappa, points } => {
            let k = ElementaryKind::from_tag(kind).ok_or_else(|| {
                let all: Vec<&str> = ElementaryKind::ALL.iter().map(|k| k.tag()).collect();
                LabError::Usage(format!("unknown kind {kind:?}; expected one of {}", all.join(", ")))
            })?;
            if !(*kappa > 0.0 && *kappa < 1.0) || *points < 2 {
                return Err(LabError::Usage("need 0 < kappa < 1 and at least 2 points".into()));
            }
            let dim = hwy_core::Dim::new(config.dim)?;
            let cal = calibrate_constant(k, *kappa, &elementary_grid(1e-6, 1e4, *points), dim)?;
            let mut report = Report::new("calibrate", &config);
            match cal.constant {
                Some(c) if k.is_lower() => {
                    report
                        .tests
                        .push(Check::at_least("constant_positive", c, f64::MIN_POSITIVE))
                }
                Some(c) => report.tests.push(Check::at_most("constant_finite", c, f64::MAX)),
                None => report
                    .tests
                    .push(Check::failed("constant (no admissible value on the grid)", 0.0)),
            }
            if cal.constant.is_some() {
                report
                    .tests
                    .push(Check::at_least("min_residual", cal.min_residual, -1e-12));
            }
            report.data = json!({
                "kind": k.tag(),
                "kappa": kappa,
                "constant": cal.constant,
                "argmin": cal.argmin,
                "min_residual": cal.min_residual,
                "grid_points_per_sign": points,
            });
            let row = vec![
                k.tag().to_string(),
                format!("{kappa:e}"),
                opt(cal.constant),
                format!("{:e}", cal.argmin),
                format!("{:e}", cal.min_residual),
            ];
            emit_table(
                cli,
                "calibrate",
                &report,
                &["kind", "kappa", "constant", "argmin", "min_residual"],
                &[row],
            )?;
            Ok(report.passed())
        }
    }
}

fn run_optimality(
    cli: &Cli,
    config: &LabConfig,
    family: &str,
    points: Option<usize>,
    coupling: Option<f64>,
    window: Option<(f64, f64)>,
    input: &str,
) -> LabResult<bool> {
    let dim = hwy_core::Dim::new(config.dim)?;
    let (rows, checks, used_window, used_coupling): (Vec<SweepRow>, Vec<Check>, (f64, f64), Option<f64>) = match family
    {
        "41" => {
            let w = window.unwrap_or((1e-3, 1e-1));
            let sched = geometric_schedule(w.0, w.1, points.unwrap_or(9))?;
            let lab = Lab::build(config)?;
            let phi = spec::parse(input)?.realize(&lab.sphere)?;
            let rows = sweep_quadratic(&lab.extension(), &phi, &sched)?;
            let c = sweep_checks("quadratic", &rows, 2.0, 0.05);
            (rows, c, w, None)
        }
        "42" => {
            let w = window.unwrap_or(PRIMAL_BUBBLE_WINDOW);
            let c = coupling.unwrap_or(PRIMAL_BUBBLE_COUPLING);
            let sched = geometric_schedule(w.0, w.1, points.unwrap_or(8))?;
            let rows = sweep_primal_p(dim, &sched, c)?;
            let checks = sweep_checks("primal_bubble", &rows, dim.p(), 0.3);
            (rows, checks, w, Some(c))
        }
        "43" => {
            let w = window.unwrap_or(DUAL_BUBBLE_WINDOW);
            let c = coupling.unwrap_or(DUAL_BUBBLE_COUPLING);
            let sched = geometric_schedule(w.0, w.1, points.unwrap_or(7))?;
            let rows = sweep_dual(dim, &sched, c)?;
            let checks = sweep_checks("dual_bubble", &rows, dim.q_dual(), 0.15);
            (rows, checks, w, Some(c))
        }
        _ => return Err(LabError::Usage(format!("unknown family {family:?}"))),
    };
    let mut report = Report::new(format!("optimality_{family}"), config);
    report.tests = checks;
    report.data = json!({
        "family": family,
        "window": [used_window.0, used_window.1],
        "coupling": used_coupling,
        "rows": rows.iter().map(|r| json!({
            "parameter": r.parameter,
            "deficit": r.deficit,
            "distance_p": r.distance_p,
            "distance_2": r.distance_2,
            "quotient": r.quotient,
        })).collect::<Vec<_>>(),
    });
    let stem = format!("family_{family}");
    match cli.format {
        Format::Json => emit_report(cli, &stem, &report)?,
        Format::Csv => {
            let mut buf = Vec::new();
            write_sweep_csv(&mut buf, &rows)?;
            emit(cli.out.as_deref(), &format!("{stem}.csv"), &buf)?;
            if cli.out.is_some() {
                let mut j = Vec::new();
                report.write_json(&mut j)?;
                emit(cli.out.as_deref(), &format!("{stem}.json"), &j)?;
            }
        }
    }
    Ok(report.passed())
}
