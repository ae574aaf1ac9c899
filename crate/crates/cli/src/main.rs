#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use nhjacobi::dynamics::{integrate, Formulation, IntegrateOptions, Scheme};
use nhjacobi::field::{Field, FIELD_NAMES};
use nhjacobi::io::{to_json, write_jacobi_csv, write_trajectory_csv};
use nhjacobi::jacobi::{
    fd_variation_oracle, integrate_jacobi_direct, integrate_jacobi_via_lift, run_all_methods,
    JacobiRun,
};
use nhjacobi::model::{check_point, AnyModel, Model, TangentState, MODEL_NAMES};
use nhjacobi::symmetry::{audit, default_samples, verify_symmetry_jacobi, AUDIT_TOL, JACOBI_TOL};
use nhjacobi::tensor::connection_data;
use nhjacobi::verify::{verify, Expect, VerifyConfig};
use nhjacobi::Error;

#[derive(Parser)]
#[command(
    name = "nhjacobi",
    version,
    about = "Nonholonomic geodesics and Jacobi fields"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the built-in models.
    ListModels(OutArgs),
    /// Projector, nonholonomic Christoffel symbols and torsion at a point, as JSON.
    Tensors {
        #[command(flatten)]
        model: ModelArgs,
        /// Configuration point.
        #[arg(long, value_parser = parse_vec, allow_hyphen_values = true)]
        q0: Vector,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Integrate a nonholonomic geodesic.
    Geodesic {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        state: StateArgs,
        #[command(flatten)]
        integ: IntegArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Integrate a Jacobi field along a geodesic.
    Jacobi {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        state: StateArgs,
        /// Initial W (for `fd` and `all`, the position variation).
        #[arg(long, value_parser = parse_vec, allow_hyphen_values = true)]
        w0: Vector,
        /// Initial Ẇ (for `fd` and `all`, the velocity variation). Defaults to zero.
        #[arg(long, value_parser = parse_vec, allow_hyphen_values = true)]
        wd0: Option<Vector>,
        #[arg(long, value_enum, default_value_t = MethodArg::Direct)]
        method: MethodArg,
        /// Finite-difference step of the variation oracle.
        #[arg(long, default_value_t = 1e-4)]
        eps: f64,
        #[command(flatten)]
        integ: IntegArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Audit a candidate symmetry field, optionally along a geodesic.
    Symmetry {
        #[command(flatten)]
        model: ModelArgs,
        /// One of dz, dtheta, counterexample1, counterexample2, zero.
        #[arg(long)]
        field: String,
        /// Field parameter `u`, `x0`, `z0` or `xdot0`, as KEY=VALUE.
        #[arg(long = "field-param", value_parser = parse_param, allow_hyphen_values = true)]
        field_params: Vec<(String, f64)>,
        #[arg(long, default_value_t = AUDIT_TOL)]
        tol: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also check the field along the geodesic from (q0, v0).
        #[arg(long, value_parser = parse_vec, allow_hyphen_values = true, requires = "v0")]
        q0: Option<Vector>,
        #[arg(long, value_parser = parse_vec, allow_hyphen_values = true, requires = "q0")]
        v0: Option<Vector>,
        #[command(flatten)]
        integ: IntegArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Run the acceptance suite. Exits 1 if any check fails.
    Verify {
        /// Only run checks involving this model (and its lift).
        #[arg(long)]
        model: Option<String>,
        /// Override every tolerance.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Only run one acceptance criterion.
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=12))]
        criterion: Option<u8>,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Args)]
struct ModelArgs {
    /// Model name; append `:lift` for the complete lift.
    #[arg(long)]
    model: String,
    /// Model parameter as KEY=VALUE (disk: R, I, J; euclidean: n).
    #[arg(long = "param", value_parser = parse_param, allow_hyphen_values = true)]
    params: Vec<(String, f64)>,
}

#[derive(Args)]
struct StateArgs {
    #[arg(long, value_parser = parse_vec, allow_hyphen_values = true)]
    q0: Vector,
    #[arg(long, value_parser = parse_vec, allow_hyphen_values = true)]
    v0: Vector,
}

#[derive(Args)]
struct IntegArgs {
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long, default_value_t = 1.0)]
    t_end: f64,
    #[arg(long, value_enum, default_value_t = SchemeArg::Rk4)]
    scheme: SchemeArg,
    #[arg(long, value_enum, default_value_t = FormulationArg::Connection)]
    formulation: FormulationArg,
    /// Project the velocity onto the distribution after every step.
    #[arg(long)]
    project: bool,
}

#[derive(Args)]
struct OutArgs {
    /// Write to this file instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
    Text,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Rk4,
    Rk2,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormulationArg {
    Connection,
    Multiplier,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Direct,
    Lift,
    Fd,
    All,
}

/// A comma-separated list of finite numbers.
#[derive(Clone, Debug)]
struct Vector(Vec<f64>);

fn parse_vec(s: &str) -> Result<Vector, String> {
    s.split(',')
        .map(|x| {
            let x = x.trim();
            let v: f64 = x.parse().map_err(|_| format!("'{x}' is not a number"))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(format!("'{x}' is not finite"))
            }
        })
        .collect::<Result<_, _>>()
        .map(Vector)
}

fn parse_param(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected KEY=VALUE, got '{s}'"))?;
    let v: f64 = v
        .trim()
        .parse()
        .map_err(|_| format!("'{v}' is not a number"))?;
    Ok((k.trim().to_string(), v))
}

/// A failed run: the message and the exit code.
struct Failure(String, u8);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_numerical() { 3 } else { 2 };
        Failure(e.to_string(), code)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure(e.to_string(), 2)
    }
}

type Outcome = Result<u8, Failure>;

impl IntegArgs {
    fn options(&self) -> Result<IntegrateOptions, Failure> {
        if !(self.dt > 0.0 && self.dt.is_finite()) || !(self.t_end > 0.0 && self.t_end.is_finite())
        {
            return Err(Failure("dt and t-end must be positive".into(), 2));
        }
        Ok(IntegrateOptions {
            scheme: match self.scheme {
                SchemeArg::Rk4 => Scheme::Rk4,
                SchemeArg::Rk2 => Scheme::Rk2,
            },
            formulation: match self.formulation {
                FormulationArg::Connection => Formulation::Connection,
                FormulationArg::Multiplier => Formulation::Multiplier,
            },
            project_velocity: self.project,
            ..Default::default()
        })
    }
}

impl ModelArgs {
    fn build(&self) -> Result<AnyModel, Failure> {
        Ok(AnyModel::by_name(&self.model, &self.params)?)
    }
}

fn sink(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit_str(out: &OutArgs, s: &str) -> Outcome {
    let mut w = sink(out.output.as_deref())?;
    w.write_all(s.as_bytes())?;
    w.flush()?;
    Ok(0)
}

fn format_or(out: &OutArgs, default: Format, allowed: &[Format]) -> Result<Format, Failure> {
    let f = out.format.unwrap_or(default);
    if allowed.contains(&f) {
        Ok(f)
    } else {
        Err(Failure(
            "output format not supported by this command".into(),
            2,
        ))
    }
}

fn list_models(out: &OutArgs) -> Outcome {
    let rows: Vec<(String, usize, usize)> = MODEL_NAMES
        .iter()
        .flat_map(|n| [n.to_string(), format!("{n}:lift")])
        .map(|n| {
            let m = AnyModel::by_name(&n, &[])?;
            Ok((n, m.dim(), m.rank()))
        })
        .collect::<Result<_, Error>>()?;
    match format_or(out, Format::Text, &[Format::Text, Format::Json])? {
        Format::Json => {
            let v: Vec<_> = rows
                .iter()
                .map(|(n, d, k)| json!({"name": n, "dim": d, "rank": k}))
                .collect();
            emit_str(out, &to_json(&v)?)
        }
        _ => {
            let mut s = String::new();
            for (n, d, k) in rows {
                s.push_str(&format!("{n:<24} dim {d:<2} rank {k}\n"));
            }
            emit_str(out, &s)
        }
    }
}

fn tensors(model: &ModelArgs, q0: &[f64], out: &OutArgs) -> Outcome {
    format_or(out, Format::Json, &[Format::Json])?;
    let m = model.build()?;
    check_point(&m, q0)?;
    let cd = connection_data(&m, q0)?;
    let v = json!({
        "P": cd.p,
        "gammaNH": cd.gamma_nh,
        "torsion": cd.torsion,
    });
    emit_str(out, &to_json(&v)?)
}

fn geodesic(model: &ModelArgs, state: &StateArgs, integ: &IntegArgs, out: &OutArgs) -> Outcome {
    let fmt = format_or(out, Format::Csv, &[Format::Csv, Format::Json])?;
    let m = model.build()?;
    let s0 = TangentState::new(state.q0.0.clone(), state.v0.0.clone());
    let traj = integrate(&m, &s0, integ.dt, integ.t_end, &integ.options()?)?;
    if fmt == Format::Json {
        return emit_str(out, &to_json(&traj)?);
    }
    let mut w = sink(out.output.as_deref())?;
    write_trajectory_csv(&m, &traj, &mut w)?;
    w.flush()?;
    Ok(0)
}

/// `<stem>-<method>.<ext>` next to `path`.
fn sibling(path: &Path, method: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("jacobi");
    let ext = path.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    path.with_file_name(format!("{stem}-{method}.{ext}"))
}

fn write_run(run: &JacobiRun, path: Option<&Path>) -> Outcome {
    let mut w = sink(path)?;
    write_jacobi_csv(run, &mut w)?;
    w.flush()?;
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn jacobi(
    model: &ModelArgs,
    state: &StateArgs,
    w0: &[f64],
    wd0: Option<&[f64]>,
    method: MethodArg,
    eps: f64,
    integ: &IntegArgs,
    out: &OutArgs,
) -> Outcome {
    let fmt = format_or(out, Format::Csv, &[Format::Csv, Format::Json])?;
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Failure("eps must be positive".into(), 2));
    }
    let m = model.build()?;
    let opts = integ.options()?;
    let s0 = TangentState::new(state.q0.0.clone(), state.v0.0.clone());
    let zero = vec![0.0; m.dim()];
    let wd0 = wd0.unwrap_or(&zero);
    let (dt, t_end) = (integ.dt, integ.t_end);

    let run = match method {
        MethodArg::Direct => {
            let base = integrate(&m, &s0, dt, t_end, &opts)?;
            integrate_jacobi_direct(&m, &base, w0, wd0)?
        }
        MethodArg::Lift => integrate_jacobi_via_lift(&m, &s0, w0, wd0, dt, t_end, &opts)?,
        MethodArg::Fd => fd_variation_oracle(&m, &s0, w0, wd0, eps, dt, t_end, &opts)?.run,
        MethodArg::All => {
            let all = run_all_methods(&m, &s0, w0, wd0, eps, dt, t_end, &opts)?;
            if fmt == Format::Json {
                return emit_str(out, &to_json(&all)?);
            }
            if let Some(p) = &out.output {
                for r in [&all.direct, &all.lift, &all.fd] {
                    write_run(r, Some(&sibling(p, r.method.as_str())))?;
                }
            }
            let mut w = sink(None)?;
            w.write_all(to_json(&all.comparison)?.as_bytes())?;
            w.flush()?;
            return Ok(0);
        }
    };
    if fmt == Format::Json {
        return emit_str(out, &to_json(&run)?);
    }
    write_run(&run, out.output.as_deref())
}

#[allow(clippy::too_many_arguments)]
fn symmetry(
    model: &ModelArgs,
    field: &str,
    field_params: &[(String, f64)],
    tol: f64,
    seed: u64,
    start: Option<(&[f64], &[f64])>,
    integ: &IntegArgs,
    out: &OutArgs,
) -> Outcome {
    format_or(out, Format::Json, &[Format::Json])?;
    let m = model.build()?;
    let f = Field::by_name(field, field_params).map_err(|e| match e {
        Error::UnknownField(_) => Failure(format!("{e} (known: {})", FIELD_NAMES.join(", ")), 2),
        e => e.into(),
    })?;
    f.check(&m)?;
    let report = audit(&m, &f, &default_samples(&m, seed), tol)?;
    let along = match start {
        Some((q0, v0)) => {
            let s0 = TangentState::new(q0.to_vec(), v0.to_vec());
            let base = integrate(&m, &s0, integ.dt, integ.t_end, &integ.options()?)?;
            let r = verify_symmetry_jacobi(&m, &f, &base, JACOBI_TOL)?;
            Some(json!({
                "tol": r.tol,
                "max_res_jacobi": r.max_res_jacobi,
                "max_res_lifted": r.max_res_lifted,
                "pass": r.pass,
            }))
        }
        None => None,
    };
    let v = json!({ "audit": report, "trajectory": along });
    emit_str(out, &to_json(&v)?)
}

fn run_verify(
    model: Option<String>,
    tol: Option<f64>,
    seed: u64,
    criterion: Option<u8>,
    out: &OutArgs,
) -> Outcome {
    let fmt = format_or(out, Format::Text, &[Format::Text, Format::Json])?;
    if let Some(name) = &model {
        AnyModel::by_name(name, &[])?;
    }
    if let Some(t) = tol {
        if !(t >= 0.0) {
            return Err(Failure("tol must be non-negative".into(), 2));
        }
    }
    let report = verify(&VerifyConfig {
        model,
        tol,
        seed,
        criterion,
    });
    let body = if fmt == Format::Json {
        to_json(&report)?
    } else {
        let mut s = String::new();
        for c in &report.checks {
            let verdict = if c.pass { "PASS" } else { "FAIL" };
            let rel = match c.expect {
                Expect::Below => "<=",
                Expect::Above => ">",
            };
            match &c.error {
                Some(e) => s.push_str(&format!(
                    "{verdict} [{:>2}] {} error: {e}\n",
                    c.criterion, c.name
                )),
                None => s.push_str(&format!(
                    "{verdict} [{:>2}] {} {:.3e} {rel} {:.1e}\n",
                    c.criterion, c.name, c.measured, c.tol
                )),
            }
        }
        let failed = report.checks.iter().filter(|c| !c.pass).count();
        s.push_str(&format!(
            "{} checks, {failed} failed: {}\n",
            report.checks.len(),
            if report.pass { "PASS" } else { "FAIL" }
        ));
        s
    };
    emit_str(out, &body)?;
    Ok(if report.pass { 0 } else { 1 })
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::ListModels(out) => list_models(&out),
        Command::Tensors { model, q0, out } => tensors(&model, &q0.0, &out),
        Command::Geodesic {
            model,
            state,
            integ,
            out,
        } => geodesic(&model, &state, &integ, &out),
        Command::Jacobi {
            model,
            state,
            w0,
            wd0,
            method,
            eps,
            integ,
            out,
        } => jacobi(
            &model,
            &state,
            &w0.0,
            wd0.as_ref().map(|v| &v.0[..]),
            method,
            eps,
            &integ,
            &out,
        ),
        Command::Symmetry {
            model,
            field,
            field_params,
            tol,
            seed,
            q0,
            v0,
            integ,
            out,
        } => {
            let start = q0
                .as_ref()
                .map(|v| &v.0[..])
                .zip(v0.as_ref().map(|v| &v.0[..]));
            symmetry(
                &model,
                &field,
                &field_params,
                tol,
                seed,
                start,
                &integ,
                &out,
            )
        }
        Command::Verify {
            model,
            tol,
            seed,
            criterion,
            out,
        } => run_verify(model, tol, seed, criterion, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure(msg, code)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
