//! Acceptance suite. Runs every criterion at its stated tolerance on the
//! desk grid (x in [-4, 4], 201 nodes, 200 steps, T = 1) and prints one
//! line per criterion. Exits non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use liqpde::analysis::{barrier_audit, coercivity_audit, comparison_check, WeightSpec, BARRIER_GRIDS};
use liqpde::oracle::{constant_payoff_solution, linear_call_solution};
use liqpde::solver::{derive_bracket, linear_parabolic_step, solve_unbounded, Shift, LADDER_TOL};
use liqpde::{
    indifference_prices, solve, BarrierParams, Grid, MertonFactors, ModelParams, PayoffSpec, SolverConfig,
};

const SEED: u64 = 42;

struct Outcome {
    pass: bool,
    summary: String,
}

fn outcome(pass: bool, summary: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        summary: summary.into(),
    }
}

fn desk_params() -> ModelParams {
    ModelParams::new(0.3, 0.06, 1.0, 2.0, 1.0, 1.0).unwrap()
}

fn desk() -> Grid {
    Grid::desk(1.0).unwrap()
}

fn rates(errs: &[f64]) -> Vec<f64> {
    errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

fn fmt(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn constant_error(p: &ModelParams, g: &Grid, level: f64) -> f64 {
    let h = PayoffSpec::constant(level).unwrap();
    let f = MertonFactors::new(p).unwrap();
    let (s, _) = solve(p, &h, g, &SolverConfig::default()).unwrap();
    let mut worst = 0.0f64;
    for n in 0..s.n_levels() {
        let exact = constant_payoff_solution(p, &f, level, g.tau(n)).unwrap();
        worst = s.level(n).iter().fold(worst, |m, v| m.max((v - exact).abs()));
    }
    worst
}

fn constant_closed_form() -> Outcome {
    let p = desk_params();
    let e1 = constant_error(&p, &desk(), 0.7);
    let e2 = constant_error(&p, &desk().with_n_time(400).unwrap(), 0.7);
    let ratio = e1 / e2;
    outcome(
        e1 <= 1e-3 && ratio >= 1.8,
        format!("sup error {e1:.3e} (<= 1e-3), halving dtau reduces it {ratio:.2}x (>= 1.8)"),
    )
}

fn constant_prices() -> Outcome {
    let p = desk_params();
    let g = desk();
    let h = PayoffSpec::constant(0.7).unwrap();
    let f = MertonFactors::new(&p).unwrap();
    let (s, _) = solve(&p, &h, &g, &SolverConfig::default()).unwrap();
    let ps = indifference_prices(&s, &p, &f, &h).unwrap();
    let all = ps.p.iter().chain(&ps.q).fold(0.0f64, |m, v| m.max((v - 0.7).abs()));
    let last = g.n_time();
    let terminal = ps
        .row(&ps.p, last)
        .iter()
        .chain(ps.row(&ps.q, last))
        .fold(0.0f64, |m, v| m.max((v - 0.7).abs()));
    outcome(
        all <= 2e-3 && terminal <= 1e-10,
        format!("max |p - h*|, |q - h*| = {all:.3e} (<= 2e-3), at t = T {terminal:.1e} (<= 1e-10)"),
    )
}

/// Central-region error of the nu01 = 0 call against the lognormal oracle,
/// relative to `max(|ref|, floor)`: (sup over all levels, at tau = T).
fn linear_error(p: &ModelParams, g: &Grid, strike: f64, center: f64, floor: f64) -> (f64, f64) {
    let h = PayoffSpec::call(strike).unwrap();
    let (s, _) = solve(p, &h, g, &SolverConfig::default()).unwrap();
    let nodes = g.central_nodes(center, 2.0);
    let (mut all, mut last) = (0.0f64, 0.0f64);
    for n in 0..s.n_levels() {
        for &i in &nodes {
            let r = linear_call_solution(p, strike, g.s_nodes()[i], g.tau(n));
            let e = (s.value(n, i) - r).abs() / r.abs().max(floor);
            all = all.max(e);
            if n == g.n_time() {
                last = last.max(e);
            }
        }
    }
    (all, last)
}

fn linear_reduction() -> Outcome {
    let strike = 100.0;
    // as stated: desk grid, |x| <= 2; the strike lies beyond the grid
    let p = ModelParams::new(0.3, 0.06, 0.0, 2.0, 1.0, 1.0).unwrap();
    let (literal, _) = linear_error(&p, &desk(), strike, 0.0, 1e-300);
    // companion where the call is active: grid centred at ln K, gamma keeps
    // gamma h under the overflow cap, errors relative to max(|ref|, 1) and
    // judged at tau = T; the first steps are kink-limited in space
    let pk = ModelParams::new(0.3, 0.06, 0.0, 2.0, 0.05, 1.0).unwrap();
    let c = strike.ln();
    let gk = Grid::new(c - 4.0, c + 4.0, 201, 1.0, 200).unwrap();
    let (active_all, active_t) = linear_error(&pk, &gk, strike, c, 1.0);
    outcome(
        literal <= 1e-2 && active_t <= 1e-2,
        format!(
            "desk grid rel. error {literal:.3e} (all tau); grid at ln K rel. error {active_t:.3e} at tau = T \
             (<= 1e-2), {active_all:.3e} over all tau"
        ),
    )
}

fn shifted_table(s: &[f64], h: &[f64], shift: impl Fn(usize) -> f64) -> PayoffSpec {
    PayoffSpec::tabulated(s.to_vec(), h.iter().enumerate().map(|(i, v)| v + shift(i)).collect()).unwrap()
}

fn comparison_pairs() -> Outcome {
    let p = desk_params();
    let g = desk();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let knots: Vec<f64> = (0..9).map(|k| (-2.0 + 0.5 * k as f64).exp()).collect();
    let mut pairs = Vec::new();
    for k in 0..10 {
        let pair = match k % 3 {
            0 => {
                let k0 = rng.random_range(0.5..2.0);
                let k1 = k0 + rng.random_range(-0.4..0.4);
                (PayoffSpec::call(k1).unwrap(), PayoffSpec::call(k0).unwrap())
            }
            1 => {
                let base: Vec<f64> = knots.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
                let c = rng.random_range(-0.5..0.5);
                (shifted_table(&knots, &base, |_| c), shifted_table(&knots, &base, |_| 0.0))
            }
            _ => {
                let base: Vec<f64> = knots.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
                let bump: Vec<f64> = knots.iter().map(|_| rng.random_range(-0.3..0.3)).collect();
                (shifted_table(&knots, &base, |i| bump[i]), shifted_table(&knots, &base, |_| 0.0))
            }
        };
        pairs.push(pair);
    }
    let verdicts: Vec<_> = std::thread::scope(|s| {
        let handles: Vec<_> = pairs
            .iter()
            .map(|(h1, h0)| {
                let (p, g) = (&p, &g);
                s.spawn(move || {
                    let (u1, _) = solve(p, h1, g, &SolverConfig::default()).unwrap();
                    let (u0, _) = solve(p, h0, g, &SolverConfig::default()).unwrap();
                    comparison_check(&u1, &u0, h1, h0, p.gamma(), 2e-3).unwrap()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let worst = verdicts.iter().fold(0.0f64, |m, v| m.max(v.worst_violation));
    let passed = verdicts.iter().filter(|v| v.pass).count();
    outcome(
        passed == verdicts.len(),
        format!("{passed}/{} pairs inside the sandwich, worst excursion {worst:.3e} (<= 2e-3)", verdicts.len()),
    )
}

fn monotone_iteration() -> Outcome {
    let p = desk_params();
    let g = desk();
    let payoffs = [
        PayoffSpec::constant(0.7).unwrap(),
        PayoffSpec::put(1.5).unwrap(),
        PayoffSpec::tabulated(vec![0.2, 0.8, 1.0, 1.5, 4.0], vec![0.0, 0.5, 2.0, -2.0, 1.0]).unwrap(),
    ];
    let mut pass = true;
    let (mut rise, mut out_of_bracket, mut gap, mut iters) = (f64::NEG_INFINITY, f64::NEG_INFINITY, 0.0f64, 0usize);
    for h in &payoffs {
        let bound = derive_bracket(&p, h, &g).unwrap().c0;
        assert!(bound <= 2.0);
        let (m, rep) = solve(&p, h, &g, &SolverConfig::monotone()).unwrap();
        let (d, _) = solve(&p, h, &g, &SolverConfig::default()).unwrap();
        let t = rep.monotone.unwrap();
        rise = rise.max(t.max_rise);
        out_of_bracket = out_of_bracket.max(t.max_above_upper).max(t.max_below_lower);
        gap = gap.max(m.sup_diff(&d, None));
        iters = iters.max(rep.iterations);
        pass &= t.max_rise <= 1e-12
            && t.max_above_upper <= 1e-12
            && t.max_below_lower <= 1e-12
            && m.sup_diff(&d, None) <= 1e-3
            && rep.iterations <= 200;
    }
    outcome(
        pass,
        format!(
            "max rise {rise:.1e} (<= 1e-12), bracket excess {out_of_bracket:.1e} (<= 1e-12), \
             |monotone - direct| {gap:.3e} (<= 1e-3), iterations {iters} (<= 200)"
        ),
    )
}

fn ladder(h: &PayoffSpec) -> (bool, Vec<f64>, f64) {
    let p = desk_params();
    let (_, rep) = solve_unbounded(&p, h, &desk(), &SolverConfig::default(), &[1.0, 2.0, 4.0, 8.0]).unwrap();
    let rise = rep.max_increase.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
    (rise <= LADDER_TOL && rep.differences_nonincreasing, rep.sup_differences, rise)
}

fn truncation_ladder() -> Outcome {
    let (call_ok, call_diffs, call_rise) = ladder(&PayoffSpec::call(1.0).unwrap());
    // companion with an active floor: h = ln S
    let s = desk().s_nodes().to_vec();
    let log = PayoffSpec::tabulated(s.clone(), s.iter().map(|v| v.ln()).collect()).unwrap();
    let (log_ok, log_diffs, log_rise) = ladder(&log);
    outcome(
        call_ok && log_ok,
        format!(
            "call: rise {call_rise:.1e}, sup-diffs {}; ln S: rise {log_rise:.1e}, sup-diffs {}",
            fmt(&call_diffs),
            fmt(&log_diffs)
        ),
    )
}

fn merton_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut terminal, mut ode) = (0.0f64, 0.0f64);
    let mut positive = true;
    for _ in 0..1000 {
        let p = ModelParams::new(
            rng.random_range(0.05..1.0),
            rng.random_range(-0.5..0.5),
            rng.random_range(0.01..5.0),
            rng.random_range(0.0..5.0),
            1.0,
            rng.random_range(0.1..5.0),
        )
        .unwrap();
        let a = MertonFactors::new(&p).unwrap().audit(50);
        terminal = terminal.max(a.terminal_error);
        ode = ode.max(a.max_ode_residual);
        positive &= a.positive;
    }
    outcome(
        terminal <= 1e-12 && ode <= 1e-10 && positive,
        format!("1000 draws x 50 times: terminal error {terminal:.1e} (<= 1e-12), ODE residual {ode:.1e} (<= 1e-10)"),
    )
}

fn barrier() -> Outcome {
    let b = BarrierParams::new(2.0, 0.3).unwrap();
    let r = barrier_audit(&b, 0.5, &BARRIER_GRIDS, 1.8).unwrap();
    outcome(
        r.pass,
        format!(
            "residual rates {} (>= 1.8), increasing in tau at 20 S: {}",
            fmt(&r.rates),
            r.increasing_in_tau
        ),
    )
}

fn coercivity() -> Outcome {
    let ws = WeightSpec::power(-4.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    match coercivity_audit(&ws, &desk(), 0.3, 100, &mut rng) {
        Ok(r) => {
            let beta_expected = 0.09 * (22.0f64.powi(2) + 1.0) / 4.0;
            let pinned = r.c == 20.0 && r.alpha == 0.09 / 4.0 && (r.beta - beta_expected).abs() < 1e-12;
            outcome(
                r.pass && pinned,
                format!(
                    "C = {}, alpha = {}, beta = {:.4}, worst normalised margin {:.3e} over 100 draws",
                    r.c, r.alpha, r.beta, r.worst_margin
                ),
            )
        }
        Err(e) => outcome(false, e.to_string()),
    }
}

type Field = fn(f64, f64) -> f64;

fn mms_error(g: &Grid, exact: Field, exact_tau: Field, lu: Field) -> f64 {
    let x = g.x_nodes().to_vec();
    let m = x.len();
    let dt = g.dtau();
    let source = |tau: f64| -> Vec<f64> { x.iter().map(|&x| exact_tau(x, tau) - lu(x, tau)).collect() };
    let mut u: Vec<f64> = x.iter().map(|&x| exact(x, 0.0)).collect();
    let mut worst = 0.0f64;
    for n in 0..g.n_time() {
        let (t0, t1) = (g.tau(n), g.tau(n + 1));
        let (s0, s1) = (source(t0), source(t1));
        let mut src: Vec<f64> = (0..m).map(|i| 0.5 * (s0[i] + s1[i])).collect();
        for i in [0, m - 1] {
            src[i] = (exact(x[i], t1) - exact(x[i], t0)) / dt;
        }
        u = linear_parabolic_step(g, 0.3, Shift::Uniform(0.0), &u, &src, dt).unwrap();
        for i in 0..m {
            worst = worst.max((u[i] - exact(x[i], t1)).abs());
        }
    }
    worst
}

const HALF_VAR: f64 = 0.5 * 0.3 * 0.3;

fn convergence_orders() -> Outcome {
    let space: Vec<f64> = [51, 101, 201]
        .iter()
        .map(|&n| {
            mms_error(
                &Grid::new(-4.0, 4.0, n, 1.0, 800).unwrap(),
                |x, t| (-t).exp() * x.sin(),
                |x, t| -(-t).exp() * x.sin(),
                |x, t| -HALF_VAR * (-t).exp() * (x.sin() + x.cos()),
            )
        })
        .collect();
    let time: Vec<f64> = [25, 50, 100]
        .iter()
        .map(|&n| {
            mms_error(
                &Grid::new(-4.0, 4.0, 201, 1.0, n).unwrap(),
                |x, t| (-t).exp() * x * x + t.sin() * x,
                |x, t| -(-t).exp() * x * x + t.cos() * x,
                |x, t| HALF_VAR * (2.0 * (-t).exp() * (1.0 - x) - t.sin()),
            )
        })
        .collect();
    let p = desk_params();
    let nonlinear: Vec<f64> = [50, 100, 200]
        .iter()
        .map(|&n| constant_error(&p, &desk().with_n_time(n).unwrap(), 0.7))
        .collect();
    let (rs, rt, rn) = (rates(&space), rates(&time), rates(&nonlinear));
    let pass = rs.iter().all(|r| *r >= 1.9) && rt.iter().all(|r| *r >= 1.9) && rn.iter().all(|r| *r >= 1.8);
    let show = |v: &[f64]| {
        let parts: Vec<String> = v.iter().map(|r| format!("{r:.3}")).collect();
        parts.join(", ")
    };
    outcome(
        pass,
        format!(
            "linear space rates [{}], time rates [{}] (>= 1.9); nonlinear time rates [{}] (>= 1.8)",
            show(&rs),
            show(&rt),
            show(&rn)
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("constant-payoff closed form", constant_closed_form),
        ("price exactness on constants", constant_prices),
        ("linear-reduction oracle", linear_reduction),
        ("comparison principle", comparison_pairs),
        ("monotone iteration", monotone_iteration),
        ("truncation ladder", truncation_ladder),
        ("Merton factor identities", merton_identities),
        ("barrier function", barrier),
        ("semi-coercivity audit", coercivity),
        ("convergence orders", convergence_orders),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        let secs = start.elapsed().as_secs_f64();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] criterion {} {name}: {} ({secs:.2}s)", k + 1, o.summary);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
