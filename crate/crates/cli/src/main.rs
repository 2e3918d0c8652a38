//! `nldeg`: command line driver. Every subcommand reads a flat problem file
//! and writes its artifacts, plus `manifest.json`, into the output directory.
//!
//! Exit status: 0 success, 1 invalid config or problem, 2 solver or barrier
//! failure, 3 verification failure.

mod artifacts;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use artifacts::{num, opt, Artifacts, Csv};
use nldeg_core::barriers::{
    build_supersolution_concave, check_subsolution_phi, cone_decay_check, upper_barrier,
    BarrierKind, Certificate, ConeDecayReport,
};
use nldeg_core::config::{parse_config, Config};
use nldeg_core::envelopes::{inf_envelope, sup_envelope, EnvelopeResult};
use nldeg_core::operator::{regularize_f, residual_field};
use nldeg_core::quadrature::{build_kernel_weights, KernelWeights, TailOptions};
use nldeg_core::solver::{solve_degenerate, solve_uniformly_elliptic, SolveReport};
use nldeg_core::verify::{
    comparison_test_with, convergence_study, difference_quotient_probe, holder_seminorm,
    linear_case_oracle_test, transformed_equation_check, ComparisonReport, LinearOracleReport,
    COMPARISON_TOL,
};
use nldeg_core::{validate_problem, Error, GridFunction, ProblemSpec};

#[derive(Parser)]
#[command(
    name = "nldeg",
    version,
    about = "Nonlocal degenerate elliptic solver on an unbounded domain"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Io {
    /// Problem file (`key = value` lines)
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Check the structural conditions on F, g and phi
    Validate(Io),
    /// Solve and write solution, report and continuation trace
    Solve(Io),
    /// Build and certify the sub- and supersolution barriers
    Barriers(Io),
    /// Solve, then run the verification suite
    Verify(Io),
    /// Sup- and inf-convolution envelopes of the solution
    EnvelopeDemo {
        #[command(flatten)]
        io: Io,
        /// Envelope parameter
        #[arg(long, default_value_t = 0.05)]
        eps: f64,
    },
    /// Solve on spacings 4h, 2h, h and tabulate the differences
    Convergence(Io),
    /// Linear-case check of the operator against the exact cosine symbol,
    /// at spacings h, h/2, h/4
    Oracle(Io),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Validate(_) => "validate",
            Command::Solve(_) => "solve",
            Command::Barriers(_) => "barriers",
            Command::Verify(_) => "verify",
            Command::EnvelopeDemo { .. } => "envelope-demo",
            Command::Convergence(_) => "convergence",
            Command::Oracle(_) => "oracle",
        }
    }

    fn io(&self) -> &Io {
        match self {
            Command::Validate(io)
            | Command::Solve(io)
            | Command::Barriers(io)
            | Command::Verify(io)
            | Command::Convergence(io)
            | Command::Oracle(io) => io,
            Command::EnvelopeDemo { io, .. } => io,
        }
    }
}

/// A failure carrying its exit status.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::new(2, format!("i/o error: {e}"))
    }
}

const INVALID: u8 = 1;
const SOLVER: u8 = 2;
const VERIFY: u8 = 3;

fn solver_err(e: Error) -> Failure {
    Failure::new(SOLVER, e.to_string())
}

fn load(path: &Path) -> Result<Config, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::new(INVALID, format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| match e {
        Error::Config { line, message } if line > 0 => {
            Failure::new(INVALID, format!("{}:{line}: {message}", path.display()))
        }
        other => Failure::new(INVALID, format!("{}: {other}", path.display())),
    })
}

fn weights(spec: &ProblemSpec) -> Result<KernelWeights, Failure> {
    build_kernel_weights(spec.dim(), spec.sigma, spec.grid.h(), spec.rho_tail).map_err(solver_err)
}

fn solve(cfg: &Config, w: &KernelWeights) -> Result<SolveReport, Failure> {
    let spec = &cfg.spec;
    let r = if cfg.continuation {
        solve_degenerate(spec, w, &cfg.solver)
    } else {
        solve_uniformly_elliptic(spec, w, &cfg.solver, None)
    };
    r.map_err(solver_err)
}

fn coord_header(dim: usize) -> Vec<&'static str> {
    if dim == 1 {
        vec!["x"]
    } else {
        vec!["x", "y"]
    }
}

fn coords(u: &GridFunction, m: [i64; 2]) -> Vec<String> {
    let g = u.grid();
    g.coords(m)[..g.dim()].iter().map(|&c| num(c)).collect()
}

fn write_solution(
    out: &mut Artifacts,
    cfg: &Config,
    w: &KernelWeights,
    rep: &SolveReport,
) -> Result<(), Failure> {
    let spec = &cfg.spec;
    let res = residual_field(&rep.u, spec, w).map_err(solver_err)?;
    let phi = spec.phi_grid();
    let mut header = coord_header(spec.dim());
    header.extend(["u", "phi", "u_minus_phi", "residual"]);
    let mut csv = Csv::new(&header);
    for (k, m) in spec.grid.nodes().enumerate() {
        let (u, p) = (rep.u.values()[k], phi.values()[k]);
        let r = if res.in_region[k] {
            res.field.values()[k]
        } else {
            0.0
        };
        let mut row = coords(&rep.u, m);
        row.extend([u, p, u - p, r].map(num));
        csv.row(row);
    }
    out.write("solution.csv", &csv.into_bytes())?;
    out.json("report.json", rep)?;
    let mut trace = Csv::new(&["k", "eps", "gap", "iters"]);
    for s in &rep.continuation {
        trace.row([
            s.k.to_string(),
            num(s.eps),
            opt(s.gap),
            s.iterations.to_string(),
        ]);
    }
    out.write("trace.csv", &trace.into_bytes())?;
    Ok(())
}

fn cmd_validate(cfg: &Config, out: &mut Artifacts) -> Result<(), Failure> {
    let report = validate_problem(&cfg.spec);
    out.json("validation.json", &report)?;
    if report.all_passed() {
        Ok(())
    } else {
        let failed: Vec<_> = report
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.id)
            .collect();
        Err(Failure::new(
            INVALID,
            format!("structural conditions fail: {}", failed.join(", ")),
        ))
    }
}

fn cmd_solve(cfg: &Config, out: &mut Artifacts) -> Result<(), Failure> {
    let w = weights(&cfg.spec)?;
    let rep = solve(cfg, &w)?;
    log::info!(
        "solved in {} iterations, residual {:.3e}, {:.1}s",
        rep.iterations,
        rep.final_residual,
        rep.wall_time_s
    );
    write_solution(out, cfg, &w, &rep)
}

#[derive(Serialize)]
struct BarrierJson {
    kind: BarrierKind,
    #[serde(rename = "M")]
    m: f64,
    p_or_tau: f64,
    max_residual: f64,
    worst_node: Vec<f64>,
    passed: bool,
    edge_gap: f64,
    subsolution: Certificate,
    /// Linearized certificate of the concave-F barrier, when it applies.
    concave: Option<nldeg_core::barriers::BarrierSummary>,
    ray_fit: Option<ConeDecayReport>,
}

fn cmd_barriers(cfg: &Config, out: &mut Artifacts) -> Result<(), Failure> {
    let spec = &cfg.spec;
    let w = weights(spec)?;
    let sub = check_subsolution_phi(spec, &w).map_err(solver_err)?;
    let upper = upper_barrier(spec, &w, &spec.f)
        .map_err(solver_err)?
        .summary();
    let concave = if spec.f.meta.concave_on_positive && spec.dim() as f64 > spec.sigma {
        Some(
            build_supersolution_concave(spec, &w)
                .map_err(solver_err)?
                .summary(),
        )
    } else {
        None
    };
    let ray_fit = cone_decay_check(spec, &w).ok();
    let passed = sub.passed && upper.passed && concave.as_ref().is_none_or(|c| c.passed);
    out.json(
        "barriers.json",
        &BarrierJson {
            kind: upper.kind,
            m: upper.m,
            p_or_tau: upper.p_or_tau,
            max_residual: upper.max_residual,
            worst_node: upper.worst_node.clone(),
            passed: upper.passed,
            edge_gap: upper.edge_gap,
            subsolution: sub,
            concave,
            ray_fit,
        },
    )?;
    if passed {
        Ok(())
    } else {
        Err(Failure::new(
            SOLVER,
            "a barrier certificate failed; see barriers.json",
        ))
    }
}

#[derive(Serialize)]
struct VerifyReport {
    passed: bool,
    /// Final `eps` when the solve used continuation.
    eps_final: Option<f64>,
    residual: f64,
    residual_unregularized: f64,
    gap_u: f64,
    gap_barrier: f64,
    gap_bounded: bool,
    comparison_lower: Result<ComparisonReport, String>,
    comparison_upper: Result<ComparisonReport, String>,
    holder_beta: f64,
    holder_estimate: f64,
    quotient_exponent: f64,
    transformed: nldeg_core::verify::TransformedCheck,
    transformed_passed: bool,
    oracle_max_rel_error: f64,
    oracle_passed: bool,
}

const ORACLE_TOL: f64 = 1e-3;

fn oracle_csv(reports: &[LinearOracleReport]) -> Csv {
    let mut csv = Csv::new(&["sigma", "h", "x", "computed", "expected", "rel_error"]);
    for r in reports {
        for p in &r.points {
            csv.row([r.sigma, r.h, p.x, p.computed, p.expected, p.rel_error].map(num));
        }
    }
    csv
}

fn cmd_verify(cfg: &Config, out: &mut Artifacts) -> Result<(), Failure> {
    let w = weights(&cfg.spec)?;
    let rep = solve(cfg, &w)?;
    write_solution(out, cfg, &w, &rep)?;
    let residual_unregularized = residual_field(&rep.u, &cfg.spec, &w)
        .map_err(solver_err)?
        .sup_norm();
    // after continuation the certificates refer to the last regularized problem
    let eps_final = rep.continuation.last().map(|s| s.eps);
    let regularized = eps_final.map(|e| cfg.spec.with_nonlinearity(regularize_f(&cfg.spec.f, e)));
    let spec = regularized.as_ref().unwrap_or(&cfg.spec);
    let phi = spec.phi_grid();
    let ubar = upper_barrier(spec, &w, &spec.f).map_err(solver_err)?;

    // a computed solution is a sub- and supersolution only up to its own residual
    let slack = COMPARISON_TOL.max(1.01 * rep.final_residual);
    let lower = comparison_test_with(&phi, &rep.u, spec, &w, slack).map_err(|e| e.to_string());
    let upper =
        comparison_test_with(&rep.u, &ubar.profile, spec, &w, slack).map_err(|e| e.to_string());
    let mut cmp = Csv::new(&[
        "pair",
        "sub_min_residual",
        "super_max_residual",
        "max_difference",
        "threshold",
        "passed",
    ]);
    for (name, r) in [("phi<=u", &lower), ("u<=ubar", &upper)] {
        match r {
            Ok(c) => cmp.row([
                name.to_string(),
                num(c.sub_min_residual),
                num(c.super_max_residual),
                num(c.max_difference),
                num(c.threshold),
                c.passed.to_string(),
            ]),
            Err(_) => cmp.row([
                name.to_string(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                "false".into(),
            ]),
        }
    }
    out.write("comparison.csv", &cmp.into_bytes())?;

    let h = spec.grid.h();
    let beta = (2.0 - spec.sigma) / 2.0;
    let holder = holder_seminorm(&rep.u, beta, (h, 1.0)).map_err(solver_err)?;
    let mut hcsv = Csv::new(&["step", "max_increment", "max_quotient"]);
    for s in &holder.scales {
        hcsv.row([s.step, s.max_increment, s.max_quotient].map(num));
    }
    out.write("holder.csv", &hcsv.into_bytes())?;

    let wfun = spec.difference_from_phi(&rep.u);
    let quot = difference_quotient_probe(&wfun, beta, &[h, 2.0 * h, 4.0 * h, 8.0 * h])
        .map_err(solver_err)?;
    let mut qcsv = Csv::new(&["step", "quotient"]);
    for (s, q) in &quot.rows {
        qcsv.row([num(*s), num(*q)]);
    }
    out.write("quotients.csv", &qcsv.into_bytes())?;

    let transformed = transformed_equation_check(&rep.u, spec, &w).map_err(solver_err)?;
    let transformed_passed = transformed.max_defect
        <= 10.0 * cfg.solver.tol_residual.max(rep.final_residual) + transformed.consistency;

    let oracles = [h, 0.5 * h].map(|oh| linear_case_oracle_test(spec.sigma, oh));
    let oracles: Vec<LinearOracleReport> = oracles
        .into_iter()
        .collect::<Result<_, _>>()
        .map_err(solver_err)?;
    out.write("oracle.csv", &oracle_csv(&oracles).into_bytes())?;
    let oracle_max_rel_error = oracles.last().map(|r| r.max_rel_error).unwrap_or(f64::NAN);
    let oracle_passed = oracle_max_rel_error <= ORACLE_TOL;

    let gap_u = rep.gap_from_phi(spec);
    let gap_barrier = spec.difference_from_phi(&ubar.profile).sup_norm();
    let gap_bounded = gap_u <= gap_barrier;
    let cmp_ok = |r: &Result<ComparisonReport, String>| r.as_ref().is_ok_and(|c| c.passed);
    let passed =
        cmp_ok(&lower) && cmp_ok(&upper) && transformed_passed && oracle_passed && gap_bounded;
    out.json(
        "verify_report.json",
        &VerifyReport {
            passed,
            eps_final,
            residual: rep.final_residual,
            residual_unregularized,
            gap_u,
            gap_barrier,
            gap_bounded,
            comparison_lower: lower,
            comparison_upper: upper,
            holder_beta: beta,
            holder_estimate: holder.estimate,
            quotient_exponent: quot.exponent,
            transformed,
            transformed_passed,
            oracle_max_rel_error,
            oracle_passed,
        },
    )?;
    if passed {
        Ok(())
    } else {
        Err(Failure::new(
            VERIFY,
            "verification suite failed; see verify_report.json",
        ))
    }
}

fn cmd_envelope(cfg: &Config, out: &mut Artifacts, eps: f64) -> Result<(), Failure> {
    if eps.is_nan() || eps <= 0.0 {
        return Err(Failure::new(
            INVALID,
            format!("--eps must be positive, got {eps}"),
        ));
    }
    let w = weights(&cfg.spec)?;
    let rep = solve(cfg, &w)?;
    let u = &rep.u;
    let up = sup_envelope(u, eps).map_err(solver_err)?;
    let lo = inf_envelope(u, eps).map_err(solver_err)?;
    let grid = *u.grid();
    let offset = |r: &EnvelopeResult, k: usize, m: [i64; 2]| {
        let a = r.argpoint[k];
        let d = [
            (a[0] - m[0]) as f64 * grid.h(),
            (a[1] - m[1]) as f64 * grid.h(),
        ];
        if grid.dim() == 1 {
            d[0]
        } else {
            d[0].hypot(d[1])
        }
    };
    let mut header = coord_header(grid.dim());
    header.extend(["u", "sup_env", "inf_env", "argpoint_offset"]);
    let mut csv = Csv::new(&header);
    for (k, m) in grid.nodes().enumerate() {
        let mut row = coords(u, m);
        row.extend(
            [
                u.values()[k],
                up.env.values()[k],
                lo.env.values()[k],
                offset(&up, k, m),
            ]
            .map(num),
        );
        csv.row(row);
    }
    out.write("envelope.csv", &csv.into_bytes())?;
    Ok(())
}

fn cmd_convergence(cfg: &Config, out: &mut Artifacts) -> Result<(), Failure> {
    let h = cfg.spec.grid.h();
    let table = convergence_study(
        &cfg.spec,
        &[4.0 * h, 2.0 * h, h],
        TailOptions::default(),
        &cfg.solver,
    )
    .map_err(solver_err)?;
    out.write("convergence.csv", table.to_csv().as_bytes())?;
    out.json("convergence.json", &table)?;
    Ok(())
}

fn cmd_oracle(cfg: &Config, out: &mut Artifacts) -> Result<(), Failure> {
    let h = cfg.spec.grid.h();
    let reports: Vec<LinearOracleReport> = [1.0, 0.5, 0.25]
        .into_iter()
        .map(|k| linear_case_oracle_test(cfg.spec.sigma, k * h))
        .collect::<Result<_, _>>()
        .map_err(solver_err)?;
    out.write("oracle.csv", &oracle_csv(&reports).into_bytes())?;
    out.json("oracle.json", &reports)?;
    let finest = reports.last().map(|r| r.max_rel_error).unwrap_or(f64::NAN);
    if finest <= ORACLE_TOL {
        Ok(())
    } else {
        Err(Failure::new(
            VERIFY,
            format!("oracle relative error {finest:.3e} exceeds {ORACLE_TOL:e}"),
        ))
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("NLDEG_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| Failure::new(INVALID, format!("NLDEG_THREADS must be a count, got `{v}`")))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::new(INVALID, e.to_string()))?;
    }
    Ok(())
}

fn run(command: &Command) -> Result<(), Failure> {
    configure_threads()?;
    let io = command.io();
    let cfg = load(&io.config)?;
    let mut out = Artifacts::create(&io.out)?;
    let result = match command {
        Command::Validate(_) => cmd_validate(&cfg, &mut out),
        Command::Solve(_) => cmd_solve(&cfg, &mut out),
        Command::Barriers(_) => cmd_barriers(&cfg, &mut out),
        Command::Verify(_) => cmd_verify(&cfg, &mut out),
        Command::EnvelopeDemo { eps, .. } => cmd_envelope(&cfg, &mut out, *eps),
        Command::Convergence(_) => cmd_convergence(&cfg, &mut out),
        Command::Oracle(_) => cmd_oracle(&cfg, &mut out),
    };
    // the manifest covers whatever was written, also on failure
    out.finish(command.name())?;
    result
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("nldeg {}: {}", cli.command.name(), f.message);
            ExitCode::from(f.code)
        }
    }
}
