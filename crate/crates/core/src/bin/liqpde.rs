use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use liqpde::analysis::{
    barrier_audit, coercivity_audit, comparison_check, embedding_constant, pointwise_bound_audit, weight_check, weighted_norms, Family,
    BARRIER_GRIDS,
};
use liqpde::config::{Format, PayoffKindName, Resolved, RunConfig};
use liqpde::oracle::{constant_payoff_solution, linear_call_solution};
use liqpde::payoff::PayoffKind;
use liqpde::solver::solve_unbounded;
use liqpde::{indifference_prices, solve, BarrierParams, Error, Grid, MertonFactors, ModelParams, PayoffSpec, SolverConfig};

const OK: u8 = 0;
const VALIDATION: u8 = 2;
const SOLVER: u8 = 3;
const AUDIT: u8 = 4;

#[derive(Parser)]
#[command(name = "liqpde", version, about = "Indifference pricing under liquidity shocks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for u and write the surface and a solve report.
    Solve(Common),
    /// Solve and write the indifference prices p, q.
    Price(Common),
    /// Run the selected audits and write a verification report.
    Verify(Common),
    /// Measure convergence orders against closed-form solutions.
    Converge(Common),
    /// Check the weight assumptions on the configured grid.
    CheckWeights(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.directory`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for randomised audits; overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated subset of comparison,coercivity,merton,barrier,truncation,pointwise.
    #[arg(long, value_delimiter = ',')]
    checks: Option<Vec<String>>,
    /// Comma-separated truncation levels for the ladder.
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<f64>>,
    /// Number of grids in the convergence study.
    #[arg(long, default_value_t = 3)]
    refinements: usize,
    /// Record wall-clock time in reports (breaks byte-for-byte reproducibility).
    #[arg(long)]
    timing: bool,
}

/// Error with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Validation { .. } | Error::IllposedFactors | Error::DegenerateSpectrum { .. } | Error::UnboundedPayoff(_) => {
                VALIDATION
            }
            Error::AuditFailure { .. } => AUDIT,
            _ => SOLVER,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: SOLVER,
        message: format!("{}: {e}", path.display()),
    }
}

struct Run {
    config: RunConfig,
    resolved: Resolved,
    base: PathBuf,
    out: PathBuf,
    seed: u64,
    command: &'static str,
    timing: bool,
}

impl Run {
    fn load(args: &Common, command: &'static str) -> Result<Self, Failure> {
        let config = RunConfig::from_path(&args.config)?;
        let base = args.config.parent().map(Path::to_path_buf).unwrap_or_default();
        let resolved = config.resolve(&base)?;
        let out = args
            .out
            .clone()
            .or_else(|| config.output.directory.as_ref().map(|d| base.join(d)))
            .unwrap_or_else(|| PathBuf::from("out"));
        fs::create_dir_all(&out).map_err(|e| io_failure(&out, e))?;
        Ok(Self {
            seed: args.seed.or(config.seed).unwrap_or(42),
            config,
            resolved,
            base,
            out,
            command,
            timing: args.timing,
        })
    }

    fn wants(&self, f: Format) -> bool {
        self.config.output.formats.contains(&f)
    }

    /// Writes `name` through `body` plus the `name.config.json` sidecar.
    fn emit(&self, name: &str, body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<(), Failure> {
        let path = self.out.join(name);
        let file = fs::File::create(&path).map_err(|e| io_failure(&path, e))?;
        let mut w = BufWriter::new(file);
        body(&mut w).and_then(|_| w.flush()).map_err(|e| io_failure(&path, e))?;
        let sidecar = self.out.join(format!("{name}.config.json"));
        let meta = json!({
            "command": self.command,
            "seed": self.seed,
            "config": serde_json::from_str::<Value>(&self.config.to_json()).expect("valid json"),
        });
        let text = serde_json::to_string_pretty(&meta).expect("serialisable") + "\n";
        fs::write(&sidecar, text).map_err(|e| io_failure(&sidecar, e))
    }

    fn emit_json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), Failure> {
        self.emit(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value).map_err(std::io::Error::other)?;
            writeln!(w)
        })
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Price(a) => cmd_price(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Converge(a) => cmd_converge(a),
        Command::CheckWeights(a) => cmd_check_weights(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn cmd_solve(args: &Common) -> Result<u8, Failure> {
    let run = Run::load(args, "solve")?;
    let r = &run.resolved;
    let (surface, mut report) = solve(&r.params, &r.payoff, &r.grid, &r.solver)?;
    if !run.timing {
        report.wall_time_ms = None;
    }
    if run.wants(Format::Csv) {
        run.emit("surface.csv", |w| surface.write_csv(w))?;
    }
    if run.wants(Format::Json) {
        run.emit_json("solve_report.json", &report)?;
    }
    Ok(OK)
}

fn cmd_price(args: &Common) -> Result<u8, Failure> {
    let run = Run::load(args, "price")?;
    let r = &run.resolved;
    let factors = MertonFactors::new(&r.params).map_err(|e| Failure {
        code: VALIDATION,
        message: format!("model.nu01: prices need the Merton factors F0, F1, which require nu01 > 0 ({e})"),
    })?;
    let (surface, _) = solve(&r.params, &r.payoff, &r.grid, &r.solver)?;
    let prices = indifference_prices(&surface, &r.params, &factors, &r.payoff)?;
    if run.wants(Format::Csv) {
        run.emit("prices.csv", |w| prices.write_csv(w))?;
    }
    Ok(OK)
}

const ALL_CHECKS: [&str; 6] = ["comparison", "coercivity", "merton", "barrier", "truncation", "pointwise"];

fn cmd_verify(args: &Common) -> Result<u8, Failure> {
    let checks: Vec<String> = match &args.checks {
        Some(c) => c.iter().map(|s| s.trim().to_string()).collect(),
        None => ALL_CHECKS.iter().map(|s| s.to_string()).collect(),
    };
    if let Some(bad) = checks.iter().find(|c| !ALL_CHECKS.contains(&c.as_str())) {
        return Err(Failure {
            code: VALIDATION,
            message: format!("invalid checks: unknown check '{bad}'"),
        });
    }
    let run = Run::load(args, "verify")?;
    let mut results = serde_json::Map::new();
    let mut all_pass = true;
    for check in &checks {
        let (pass, detail) = match check.as_str() {
            "comparison" => verify_comparison(&run)?,
            "coercivity" => verify_coercivity(&run)?,
            "merton" => verify_merton(&run)?,
            "barrier" => verify_barrier(&run)?,
            "truncation" => verify_truncation(&run, args.levels.as_deref())?,
            "pointwise" => verify_pointwise(&run)?,
            _ => unreachable!(),
        };
        all_pass &= pass;
        results.insert(check.clone(), json!({ "pass": pass, "detail": detail }));
    }
    let report = json!({ "pass": all_pass, "checks": results });
    run.emit_json("verify_report.json", &report)?;
    Ok(if all_pass { OK } else { AUDIT })
}

fn verify_comparison(run: &Run) -> Result<(bool, Value), Failure> {
    let r = &run.resolved;
    let h1 = run
        .config
        .shifted_payoff(&run.base, &r.params, run.config.verify.comparison_shift)?;
    let (a, b) = std::thread::scope(|s| {
        let t1 = s.spawn(|| solve(&r.params, &h1, &r.grid, &r.solver));
        let t0 = s.spawn(|| solve(&r.params, &r.payoff, &r.grid, &r.solver));
        (t1.join().expect("solver thread"), t0.join().expect("solver thread"))
    });
    let (u1, u0) = (a?.0, b?.0);
    let v = comparison_check(&u1, &u0, &h1, &r.payoff, r.params.gamma(), run.config.verify.tol)?;
    Ok((v.pass, serde_json::to_value(v).expect("serialisable")))
}

fn verify_coercivity(run: &Run) -> Result<(bool, Value), Failure> {
    let r = &run.resolved;
    let mut rng = ChaCha8Rng::seed_from_u64(run.seed);
    match coercivity_audit(&r.weight, &r.grid, r.params.sigma(), run.config.verify.trials, &mut rng) {
        Ok(rep) => Ok((rep.pass, serde_json::to_value(rep).expect("serialisable"))),
        Err(Error::AuditFailure { detail, .. }) => Ok((false, serde_json::from_str(&detail).unwrap_or(Value::String(detail)))),
        Err(e) => Err(e.into()),
    }
}

fn verify_merton(run: &Run) -> Result<(bool, Value), Failure> {
    let f = MertonFactors::new(&run.resolved.params)?;
    let a = f.audit(50);
    let pass = a.terminal_error <= 1e-12 && a.max_ode_residual <= 1e-10 && a.positive;
    Ok((pass, json!({ "audit": a, "lambda1": f.lambda1(), "lambda2": f.lambda2() })))
}

fn verify_barrier(run: &Run) -> Result<(bool, Value), Failure> {
    let p = &run.resolved.params;
    let t1 = run.config.verify.barrier_t1.unwrap_or(p.horizon() + 1.0);
    let b = BarrierParams::new(t1, p.sigma()).map_err(prefix_verify)?;
    let rep = barrier_audit(&b, 0.5 * t1.min(p.horizon()), &BARRIER_GRIDS, 1.8)?;
    Ok((rep.pass, serde_json::to_value(rep).expect("serialisable")))
}

fn prefix_verify(e: Error) -> Error {
    match e {
        Error::Validation { field, reason } => Error::Validation {
            field: format!("verify.{}", field.trim_start_matches("barrier.").replace("T1", "barrierT1")),
            reason,
        },
        other => other,
    }
}

fn verify_truncation(run: &Run, levels: Option<&[f64]>) -> Result<(bool, Value), Failure> {
    let r = &run.resolved;
    // smooth cutoff: ||h - xi_eps h||_1 shrinks with eps
    let mut gaps = Vec::new();
    for eps in [0.5, 0.25, 0.125, 0.0625] {
        let t = liqpde::TruncationParams::new(eps, 1.0)?;
        let d: Vec<f64> = r
            .grid
            .s_nodes()
            .iter()
            .map(|&s| (1.0 - t.xi_epsilon(s)) * r.payoff.evaluate(s))
            .collect();
        gaps.push(weighted_norms(&d, &r.weight, &r.grid).h1);
    }
    let cutoff_pass = gaps.windows(2).all(|w| w[1] <= w[0]);
    let levels = levels.unwrap_or(&[1.0, 2.0, 4.0, 8.0]);
    let ladder = match solve_unbounded(&r.params, &r.payoff, &r.grid, &r.solver, levels) {
        Ok((_, rep)) => rep,
        Err(Error::MonotonicityViolation { lower, upper, excess }) => {
            let detail = json!({ "cutoffGaps": gaps, "violation": { "lower": lower, "upper": upper, "excess": excess } });
            return Ok((false, detail));
        }
        Err(e) => return Err(e.into()),
    };
    let pass = cutoff_pass && ladder.differences_nonincreasing;
    Ok((pass, json!({ "cutoffGaps": gaps, "cutoffNonincreasing": cutoff_pass, "ladder": ladder })))
}

fn verify_pointwise(run: &Run) -> Result<(bool, Value), Failure> {
    let r = &run.resolved;
    let mut rng = ChaCha8Rng::seed_from_u64(run.seed);
    let members = [
        ("payoff", r.payoff.sample(r.grid.s_nodes())),
        ("bump", Family::Bump.draw(&r.grid, &mut rng)),
        ("smoothedNoise", Family::SmoothedNoise.draw(&r.grid, &mut rng)),
    ];
    let mut fits = serde_json::Map::new();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for (name, u) in &members {
        let b = pointwise_bound_audit(u, &r.weight, &r.grid)?;
        lo = lo.min(b.c0);
        hi = hi.max(b.c0);
        fits.insert(name.to_string(), serde_json::to_value(b).expect("serialisable"));
    }
    let sharp = embedding_constant(&r.weight, &r.grid)?;
    let spread = hi / lo;
    let pass = hi.is_finite() && hi <= sharp * (1.0 + 1e-9);
    Ok((pass, json!({ "fits": fits, "sharpConstant": sharp, "spread": spread })))
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct OrderRow {
    case: &'static str,
    level: usize,
    n_space: usize,
    n_time: usize,
    error: f64,
    rate: Option<f64>,
}

fn cmd_converge(args: &Common) -> Result<u8, Failure> {
    if args.refinements < 2 {
        return Err(Failure {
            code: VALIDATION,
            message: "invalid refinements: must be >= 2".into(),
        });
    }
    let run = Run::load(args, "converge")?;
    let r = &run.resolved;
    let mut rows = Vec::new();
    let mut pass = true;
    if r.params.nu01() > 0.0 {
        let level = match r.payoff.kind() {
            PayoffKind::Constant { level } => *level,
            _ => 0.7,
        };
        let errors = refine(r, args.refinements, |p, g, cfg| constant_case(p, g, cfg, level))?;
        pass &= push_rows(&mut rows, "constantPayoff", &errors);
    }
    if run.config.payoff.kind == PayoffKindName::Call {
        let strike = run.config.payoff.strike.expect("resolved call has a strike");
        let linear = r.params.with_nu01(0.0)?;
        let errors = refine(r, args.refinements, |_, g, cfg| linear_case(&linear, g, cfg, strike))?;
        pass &= push_rows(&mut rows, "linearCall", &errors);
    }
    if run.wants(Format::Csv) {
        run.emit("convergence.csv", |w| {
            writeln!(w, "case,level,nSpace,nTime,error,rate")?;
            for row in &rows {
                let rate = row.rate.map(|v| v.to_string()).unwrap_or_default();
                writeln!(w, "{},{},{},{},{},{}", row.case, row.level, row.n_space, row.n_time, row.error, rate)?;
            }
            Ok(())
        })?;
    }
    if run.wants(Format::Json) {
        run.emit_json("convergence.json", &json!({ "pass": pass, "rows": rows }))?;
    }
    Ok(if pass { OK } else { AUDIT })
}

type CaseFn<'a> = dyn Fn(&ModelParams, &Grid, &SolverConfig) -> liqpde::Result<f64> + Sync + 'a;

/// Halves dx and dtau `count - 1` times, solving the levels in parallel.
fn refine(r: &Resolved, count: usize, case: impl Fn(&ModelParams, &Grid, &SolverConfig) -> liqpde::Result<f64> + Sync) -> Result<Vec<(Grid, f64)>, Failure> {
    let case: &CaseFn = &case;
    let grids = (0..count)
        .map(|k| {
            let f = 1usize << k;
            Grid::new(
                r.grid.x_min(),
                r.grid.x_max(),
                (r.grid.n_space() - 1) * f + 1,
                r.grid.horizon(),
                r.grid.n_time() * f,
            )
        })
        .collect::<liqpde::Result<Vec<_>>>()?;
    let errors: Vec<liqpde::Result<f64>> = std::thread::scope(|s| {
        let handles: Vec<_> = grids.iter().map(|g| s.spawn(move || case(&r.params, g, &r.solver))).collect();
        handles.into_iter().map(|h| h.join().expect("solver thread")).collect()
    });
    let errors = errors.into_iter().collect::<liqpde::Result<Vec<_>>>()?;
    Ok(grids.into_iter().zip(errors).collect())
}

fn push_rows(rows: &mut Vec<OrderRow>, case: &'static str, errors: &[(Grid, f64)]) -> bool {
    let mut pass = true;
    for (k, (g, e)) in errors.iter().enumerate() {
        let rate = (k > 0).then(|| (errors[k - 1].1 / e).log2());
        if let Some(rate) = rate {
            pass &= rate >= 1.5;
        }
        rows.push(OrderRow {
            case,
            level: k,
            n_space: g.n_space(),
            n_time: g.n_time(),
            error: *e,
            rate,
        });
    }
    pass
}

fn constant_case(p: &ModelParams, g: &Grid, cfg: &SolverConfig, level: f64) -> liqpde::Result<f64> {
    let h = PayoffSpec::constant(level)?;
    let f = MertonFactors::new(p)?;
    let (s, _) = solve(p, &h, g, cfg)?;
    let mut worst = 0.0f64;
    for n in 0..s.n_levels() {
        let exact = constant_payoff_solution(p, &f, level, g.tau(n))?;
        worst = s.level(n).iter().fold(worst, |m, v| m.max((v - exact).abs()));
    }
    Ok(worst)
}

/// Central-region error against the lognormal oracle at `tau = T`.
fn linear_case(p: &ModelParams, g: &Grid, cfg: &SolverConfig, strike: f64) -> liqpde::Result<f64> {
    let h = PayoffSpec::call(strike)?;
    let (s, _) = solve(p, &h, g, &SolverConfig { scheme: liqpde::Scheme::DirectImex, ..cfg.clone() })?;
    let centre = 0.5 * (g.x_min() + g.x_max());
    let half = 0.25 * (g.x_max() - g.x_min());
    let last = g.n_time();
    Ok(g.central_nodes(centre, half).iter().fold(0.0f64, |m, &i| {
        let exact = linear_call_solution(p, strike, g.s_nodes()[i], g.horizon());
        m.max((s.value(last, i) - exact).abs())
    }))
}

fn cmd_check_weights(args: &Common) -> Result<u8, Failure> {
    let run = Run::load(args, "check-weights")?;
    let rep = weight_check(&run.resolved.weight, &run.resolved.grid)?;
    run.emit_json("weights_report.json", &rep)?;
    Ok(if rep.pass { OK } else { AUDIT })
}
