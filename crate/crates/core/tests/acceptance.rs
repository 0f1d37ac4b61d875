//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`). The process fails when any
//! criterion fails, except for failures listed as known deviations, which are
//! printed as FAIL with the reason and do not change the exit status.

use std::collections::HashMap;
use std::time::Instant;

use num_rational::Ratio;
use num_traits::Signed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wavelab_core::dalembert::{duhamel_l, duhamel_lt, free_solution, huygens_residual, ClosureField, QuadConfig};
use wavelab_core::functional::{
    auto_windows, combined_lower_bound_trace, holder_constant, ode_comparison_blowup, MomentRecorder, OdeOptions,
};
use wavelab_core::model::bump::Bump;
use wavelab_core::model::{InitialData, NonlinearTerm, ProblemSpec, Profile, WeightSpec};
use wavelab_core::picard::{run_picard, PicardConfig, PicardProblem};
use wavelab_core::regimes::{
    combined_exponent, combined_window, constant_combined_exponent, invert_law, kitamura, ktw23_nonzero_mean,
    ktw23_zero_mean, matching_branches, takamatsu_bound, Branch, BranchParams, InverseKind,
};
use wavelab_core::solver::{run_once, GridConfig, GridSolution, LevelView, RunStatus, SliceRecorder};
use wavelab_core::sweep::{fit_power_law, run_sweep, CellStatus, EpsilonGrid, FitLaw, SweepConfig, SweepResult};

type Q = Ratio<i64>;

struct Outcome {
    pass: bool,
    detail: String,
    /// Why a failure is accepted; only consulted when `pass` is false.
    known: Option<String>,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Self { pass, detail, known: None }
    }
}

fn q(n: i64, d: i64) -> Q {
    Q::new(n, d)
}

// Duhamel operators against closed forms, and the h -> h/2 error ratio.
fn duhamel_oracle() -> Outcome {
    let (x, t) = (0.3, 2.0);
    type Case = (&'static str, Box<dyn Fn(QuadConfig) -> f64>, f64);
    let cases: Vec<Case> = vec![
        ("L(1)", Box::new(move |c| duhamel_l(&ClosureField::new(|_, _| 1.0), x, t, c).unwrap()), t * t / 2.0),
        ("L'(1)", Box::new(move |c| duhamel_lt(&ClosureField::new(|_, _| 1.0), x, t, c).unwrap()), t),
        ("L(s)", Box::new(move |c| duhamel_l(&ClosureField::new(|_, s| s), x, t, c).unwrap()), t.powi(3) / 6.0),
        ("L'(s)", Box::new(move |c| duhamel_lt(&ClosureField::new(|_, s| s), x, t, c).unwrap()), t * t / 2.0),
        ("L(s^2)", Box::new(move |c| duhamel_l(&ClosureField::new(|_, s| s * s), x, t, c).unwrap()), t.powi(4) / 12.0),
        ("L'(s^2)", Box::new(move |c| duhamel_lt(&ClosureField::new(|_, s| s * s), x, t, c).unwrap()), t.powi(3) / 3.0),
        (
            "L(y^2)",
            Box::new(move |c| duhamel_l(&ClosureField::new(|y, _| y * y), x, t, c).unwrap()),
            x * x * t * t / 2.0 + t.powi(4) / 12.0,
        ),
    ];
    let h = 0.1;
    let mut ok = true;
    let mut parts = Vec::new();
    let mut ratios = 0;
    for (name, op, exact) in &cases {
        let e1 = (op(QuadConfig::new(h)) - exact).abs();
        let e2 = (op(QuadConfig::new(h / 2.0)) - exact).abs();
        if e1 < 1e-12 && e2 < 1e-12 {
            parts.push(format!("{name} exact"));
            continue;
        }
        let ratio = e1 / e2;
        ratios += 1;
        ok &= (3.2..=4.8).contains(&ratio) && e1 < 0.05 * exact.abs();
        parts.push(format!("{name} ratio {ratio:.3}"));
    }
    ok &= ratios >= 3;
    Outcome::new(ok, parts.join(", "))
}

// Free solution vanishes inside t - |x| >= R for antisymmetric g, f = 0.
fn huygens() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x4855_5947);
    let mut worst = 0.0f64;
    let families = [
        (Profile::dipole(1.0, 0.7, 0.9), 2.0),
        (Profile::dipole(0.8, 1.0, 1.0).plus(&Profile::dipole(-2.0, 0.3, 0.25)), 2.5),
    ];
    let eps = 0.4;
    for (g, radius) in families {
        let data = InitialData::new(Profile::zero(), g, radius).unwrap();
        let samples: Vec<(f64, f64)> = (0..1000)
            .map(|_| {
                let t = radius + rng.gen_range(0.0..50.0);
                let x = rng.gen_range(-(t - radius)..=(t - radius));
                (x, t)
            })
            .collect();
        worst = worst.max(huygens_residual(&data, eps, &samples).unwrap());
    }
    Outcome::new(
        worst <= 1e-12 * eps,
        format!("sup |u0| = {worst:.2e} over 2x1000 interior samples (bound {:.1e})", 1e-12 * eps),
    )
}

// Diamond scheme with zero source reproduces d'Alembert at every node.
fn linear_exactness() -> Outcome {
    let families = [
        (Profile::single(1.0, 0.0, 1.0), Profile::single(0.5, 0.3, 0.6), 1.5),
        (Profile::zero(), Profile::dipole(1.0, 0.7, 0.9), 2.0),
        (
            Profile::single(0.7, -1.0, 0.8).plus(&Profile::single(-0.4, 0.9, 1.2)),
            Profile::single(1.3, 0.4, 0.5).plus(&Profile::dipole(0.6, 1.1, 0.7)),
            2.5,
        ),
    ];
    let eps = 0.7;
    let mut worst = 0.0f64;
    let mut nodes = 0usize;
    for (f, g, radius) in families {
        let data = InitialData::new(f, g, radius).unwrap();
        let spec = ProblemSpec::new(vec![], data, eps, "free").unwrap();
        let cfg = GridConfig::for_radius(radius, 5.0);
        let mut sol = GridSolution::new(&spec, &cfg).unwrap();
        let mut obs = |lv: &LevelView<'_>| {
            for i in 0..lv.u.len() {
                let exact = free_solution(&spec.data, eps, lv.x(i), lv.t).u;
                worst = worst.max((lv.u[i] - exact).abs());
                nodes += 1;
            }
        };
        sol.run(&spec, &mut obs);
    }
    Outcome::new(worst <= 1e-12, format!("max nodal error {worst:.2e} over {nodes} nodes, 3 data families"))
}

fn check_partition(table: &[Branch<Q>], p: Q, bad: &mut usize, total: &mut usize) {
    for i in 0..100 {
        for j in 0..100 {
            let params = BranchParams {
                p,
                a: q(i - 50, 20),
                b: q(j - 50, 10),
            };
            *total += 1;
            if matching_branches(table, &params).len() != 1 {
                *bad += 1;
            }
        }
    }
}

// Exact rational identities of the exponent atlas.
fn atlas_identities() -> Outcome {
    let mut failures = Vec::new();

    // (i) continuity of the constant-weight exponent at both window edges
    let rs = [q(2, 1), q(5, 2), q(7, 3), q(3, 1), q(4, 1), q(9, 2)];
    let qs = [q(0, 1), q(1, 3)];
    let mut edges = 0;
    for r in rs {
        for qq in qs {
            for s in [(r + 1) / 2, r] {
                let p = s - qq;
                edges += 1;
                if combined_window(&p, &qq, &r) {
                    failures.push(format!("edge {s} counted inside window"));
                }
                let delta = q(1, 1_000_000);
                let inside = if s == r { p - delta } else { p + delta };
                let lhs = constant_combined_exponent(&p, &qq, &r, true);
                let rhs = combined_exponent(&p, &qq, &r);
                let jump = (constant_combined_exponent(&inside, &qq, &r, true) - lhs).abs();
                if lhs != rhs || jump > delta * 2 {
                    failures.push(format!("continuity at r={r}, s={s}"));
                }
            }
        }
    }

    // (ii) strict improvement below 2α, equality at 2α; (iii) sharpness
    let mut pairs = 0;
    for alpha in [q(3, 2), q(2, 1), q(5, 2), q(3, 1), q(4, 1), q(7, 1)] {
        let mut beta0 = alpha + 1;
        while beta0 <= alpha * 2 {
            pairs += 1;
            let improved = takamatsu_bound(alpha, beta0, true);
            let plain = beta0 / 2;
            let formula = (alpha + 1) * beta0 / (beta0 + 2);
            if beta0 < alpha * 2 {
                if !(improved > plain && improved == formula) {
                    failures.push(format!("strict improvement at α={alpha}, β0={beta0}"));
                }
            } else if improved != plain || improved != alpha {
                failures.push(format!("equality at α={alpha}, β0={beta0}"));
            }
            if improved != combined_exponent(&(alpha + 1), &q(0, 1), &(beta0 + 1)) {
                failures.push(format!("sharpness at α={alpha}, β0={beta0}"));
            }
            beta0 += q(1, 7);
        }
    }

    // (iv) partitions
    let (mut bad, mut total) = (0usize, 0usize);
    for p in [q(3, 2), q(2, 1), q(3, 1)] {
        check_partition(&ktw23_nonzero_mean(), p, &mut bad, &mut total);
        check_partition(&ktw23_zero_mean(), p, &mut bad, &mut total);
        check_partition(&kitamura(), p, &mut bad, &mut total);
    }
    if bad > 0 {
        failures.push(format!("{bad} grid points not claimed by exactly one branch"));
    }

    let detail = format!(
        "{edges} window edges, {pairs} (α,β0) pairs, {total} partition points; {}",
        if failures.is_empty() { "no violations".to_string() } else { failures.join("; ") }
    );
    Outcome::new(failures.is_empty(), detail)
}

// Inverse laws round trip; b(1) regression value.
fn inverse_round_trips() -> Outcome {
    let kinds = [
        InverseKind::Phi,
        InverseKind::Psi { p: 2.5 },
        InverseKind::Phi1 { a: -0.5 },
        InverseKind::Psi1 { p: 2.0, a: -0.5 },
        InverseKind::Psi2 { p: 2.0, b: -0.5 },
        InverseKind::BImplicit,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(0x494e_5645);
    let mut worst = 0.0f64;
    for kind in &kinds {
        for _ in 0..100 {
            let y = 10f64.powf(rng.gen_range(-3.0..8.0));
            let s = invert_law(kind, y).unwrap();
            worst = worst.max((kind.value(s) - y).abs() / y);
        }
    }
    let trips_ok = worst <= 1e-10;
    let b1 = invert_law(&InverseKind::BImplicit, 1.0).unwrap();
    let own_residual = b1 * b1.ln_1p() - 1.0;
    let recorded = 1.236f64;
    let recorded_residual = recorded * recorded.ln_1p() - 1.0;
    let b1_ok = (b1 - recorded).abs() <= 1e-3;
    let detail = format!(
        "600 round trips, worst relative error {worst:.1e}; b(1) = {b1:.6} (b ln(1+b) - 1 = {own_residual:.1e}) vs recorded 1.236 (residual {recorded_residual:.1e}), |diff| = {:.1e}",
        (b1 - recorded).abs()
    );
    let mut out = Outcome::new(trips_ok && b1_ok, detail);
    if trips_ok && !b1_ok && own_residual.abs() < 1e-12 && recorded_residual.abs() > 1e-3 {
        out.known = Some("recorded value 1.236 does not solve b ln(1+b) = 1; the root is 1.23998".into());
    }
    out
}

fn slope_line(r: &SweepResult) -> (f64, f64, f64) {
    let fit = r.fit(FitLaw::Power).expect("power fit");
    (fit.slope, fit.slope_se, fit.r_squared)
}

// B-only r = 2, nonzero mean g: T ~ ε^{-1/2}.
fn single_term_slope() -> Outcome {
    let data = InitialData::new(Profile::zero(), Profile::single(1.0, 0.0, 1.0), 1.5).unwrap();
    let spec = ProblemSpec::new(vec![NonlinearTerm::power(2.0)], data, 1.0, "B-only r=2").unwrap();
    let grid = GridConfig::for_radius(1.5, 400.0).with_h(0.05);
    let cfg = SweepConfig::new(spec, EpsilonGrid { max: 0.4, min: 0.05, count: 6 }, grid);
    let r = run_sweep(&cfg).unwrap();
    let blown = r.rows.iter().filter(|x| x.status == CellStatus::BlownUp).count();
    let (slope, se, r2) = slope_line(&r);
    let ok = blown == 6 && (slope + 0.5).abs() <= 0.15 * 0.5 && r2 >= 0.98;
    Outcome::new(
        ok,
        format!("slope {slope:.4} ± {se:.4} (target -0.5 ± 15%), R² {r2:.5}, {blown}/6 cells blown up"),
    )
}

/// Eight alternating unit bumps of width 1/4 tiling [-4, 4]: zero mean.
fn oscillating_data() -> InitialData {
    let (l, w) = (4.0, 0.25);
    let bumps: Vec<Bump> = (0..8)
        .map(|i| Bump::new(if i % 2 == 0 { 1.0 } else { -1.0 }, -l + w + 2.0 * w * i as f64, w))
        .collect();
    InitialData::new(Profile::zero(), Profile { bumps }, l + 0.01).unwrap()
}

fn combined_spec(eps: f64) -> ProblemSpec {
    let terms = vec![
        NonlinearTerm::derivative(1.7, 0.0).with_weight(WeightSpec::constant(0.02)),
        NonlinearTerm::power(2.0).with_weight(WeightSpec::constant(0.02)),
    ];
    ProblemSpec::new(terms, oscillating_data(), eps, "combined (1.7, 0, 2)").unwrap()
}

// (p, q, r) = (1.7, 0, 2), zero-mean g: T ~ ε^{-1.7/3}.
fn combined_slope() -> Outcome {
    let spec = combined_spec(1.0);
    assert!(spec.data.g_zero_mean());
    let grid = GridConfig::for_radius(spec.radius(), 2000.0).with_h(0.05);
    let cfg = SweepConfig::new(spec, EpsilonGrid { max: 0.4, min: 0.05, count: 6 }, grid);
    let r = run_sweep(&cfg).unwrap();
    let blown = r.rows.iter().filter(|x| x.status == CellStatus::BlownUp).count();
    let (slope, se, r2) = slope_line(&r);
    let target = -1.7 / 3.0;
    let conjectured = -2.0 / 3.0;
    let within = (slope - target).abs() <= 0.15 * target.abs() && r2 >= 0.98 && blown == 6;
    let separated = (slope - conjectured).abs() > se;
    let shortest = r.rows.iter().filter_map(|x| x.t_num).fold(f64::INFINITY, f64::min);
    Outcome::new(
        within && separated,
        format!(
            "slope {slope:.4} ± {se:.4} (target {target:.4} ± 15%), R² {r2:.5}, {blown}/6 blown up, min T {shortest:.1} vs R {:.2}; {} from conjectured -2/3",
            cfg.spec.radius(),
            if separated { "distinguishable" } else { "not distinguishable" }
        ),
    )
}

// Early window κ ≈ 2, late window κ >= r + 2 on the combined benchmark.
fn growth_windows() -> Outcome {
    let spec = combined_spec(0.4);
    let cfg = GridConfig::for_radius(spec.radius(), 2000.0).with_h(0.05);
    let mut rec = MomentRecorder::new(&spec);
    run_once(&spec, &cfg, &mut rec).unwrap();
    let (early, late) = auto_windows(&rec.series, spec.radius());
    let (Some(early), Some(late)) = (early, late) else {
        return Outcome::new(false, "windows not found".into());
    };
    let trace = combined_lower_bound_trace(&rec.series, 1.7, 0.0, 2.0, 0.4, &[early, late]).unwrap();
    let (ke, kl) = (trace.windows[0].kappa, trace.windows[1].kappa);
    Outcome::new(
        (ke - 2.0).abs() <= 0.3 && kl >= 4.0,
        format!(
            "early ({:.2}, {:.2}) κ = {ke:.3} (2 ± 0.3), late ({:.2}, {:.2}) κ = {kl:.2} (>= 4)",
            early.0, early.1, late.0, late.1
        ),
    )
}

// Characteristic weight a = 0.5 stays bounded, a = -0.5 blows up.
fn global_existence() -> Outcome {
    let data = InitialData::new(Profile::zero(), Profile::single(1.0, 0.0, 1.0), 1.5).unwrap();
    let eps = 0.3;
    let run = |a: f64, h: f64| {
        let term = NonlinearTerm::derivative(2.0, 0.0).with_weight(WeightSpec::characteristic(a, 0.0, -1.0));
        let spec = ProblemSpec::new(vec![term], data.clone(), eps, "A-only").unwrap();
        let cfg = GridConfig::for_radius(1.5, 200.0).with_h(h);
        let mut sol = GridSolution::new(&spec, &cfg).unwrap();
        sol.run(&spec, &mut ());
        let sup = sol.sup_history().iter().cloned().fold(0.0, f64::max);
        (sol.status(), sol.crossings().0, sol.time(), sup)
    };
    let mut ok = true;
    let mut parts = Vec::new();
    for h in [0.05, 0.025] {
        let (status, crossing, t_end, sup) = run(0.5, h);
        ok &= status == RunStatus::ReachedHorizon && crossing.is_none() && t_end >= 200.0 - 1e-9 && sup < 1.0;
        parts.push(format!("a=0.5 h={h}: t={t_end:.1}, sup {sup:.3}"));
    }
    for h in [0.05, 0.025] {
        let (_, crossing, _, _) = run(-0.5, h);
        ok &= crossing.is_some_and(|t| t < 200.0);
        parts.push(format!(
            "a=-0.5 h={h}: {}",
            crossing.map_or("no blow-up".to_string(), |t| format!("blow-up at {t:.1}"))
        ));
    }
    Outcome::new(ok, parts.join("; "))
}

// Comparison ODE with ε-scaled data: slope -(r-1)/2.
fn ode_scaling() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for r in [2.0, 3.0] {
        let c = holder_constant(1.0, r);
        let pts: Vec<(f64, f64)> = (0..8)
            .map(|i| {
                let e = 1e-2 * 1e-3f64.powf(i as f64 / 7.0);
                (e, ode_comparison_blowup(r, 1.0, 0.0, e, c, &OdeOptions::default()).unwrap().t_star)
            })
            .collect();
        let target = (r - 1.0) / 2.0;
        let fit = fit_power_law(&pts, Some(target), 0.05).unwrap();
        ok &= (fit.slope + target).abs() <= 0.05 * target;
        parts.push(format!("r={r}: slope {:.5} (target {:.2})", fit.slope, -target));
    }
    Outcome::new(ok, parts.join(", "))
}

fn fd_nodes(spec: &ProblemSpec, h: f64, horizon: f64) -> HashMap<(i64, i64), f64> {
    let mut rec = SliceRecorder::new(1);
    let cfg = GridConfig::for_radius(spec.radius(), horizon).with_h(h);
    let mut sol = GridSolution::new(spec, &cfg).unwrap();
    sol.run(spec, &mut rec);
    let mut nodes = HashMap::new();
    for s in &rec.slices {
        let n = (s.t / h).round() as i64;
        for i in 0..s.u.len() {
            let j = (s.x(i) / h).round() as i64;
            if (s.x(i) - j as f64 * h).abs() < 1e-9 {
                nodes.insert((j, n), s.u[i]);
            }
        }
    }
    nodes
}

// Picard iterates against the diamond scheme on common nodes.
fn picard_agreement() -> Outcome {
    let data = InitialData::new(Profile::single(1.0, 0.0, 1.0), Profile::zero(), 1.5).unwrap();
    let spec = ProblemSpec::new(vec![NonlinearTerm::power(3.0)], data, 0.3, "B-only r=3").unwrap();
    let (h, horizon) = (0.1, 1.0);
    let coarse = run_picard(&spec, PicardConfig::new(h, horizon)).unwrap();
    let fine = run_picard(&spec, PicardConfig::new(h / 2.0, horizon)).unwrap();
    let contraction = coarse.report.max_contraction().unwrap_or(f64::NAN);
    let converged = coarse.report.converged && fine.report.converged && contraction < 1.0;
    let problem = PicardProblem::new(&spec, PicardConfig::new(h, horizon)).unwrap();
    let (residual, quad_err) = problem.integral_residual(&coarse).unwrap();

    let (fd, fd_fine) = (fd_nodes(&spec, h, horizon), fd_nodes(&spec, h / 2.0, horizon));
    let mut worst = 0.0f64;
    let mut common = 0;
    for (j, n, _, _, pu) in coarse.u.nodes() {
        let n = n as i64;
        let (Some(&fu), Some(&fu2)) = (fd.get(&(j, n)), fd_fine.get(&(2 * j, 2 * n))) else {
            continue;
        };
        let pu2 = fine.u.node(2 * j, 2 * n as usize);
        let model = 4.0 / 3.0 * ((pu - pu2).abs() + (fu - fu2).abs()) + 1e-8;
        worst = worst.max((pu - fu).abs() / model);
        common += 1;
    }
    let ok = converged && common > 100 && worst <= 3.0 && residual <= 3.0 * quad_err;
    Outcome::new(
        ok,
        format!(
            "contraction {contraction:.3}, {common} common nodes, worst |P-F| / error model {worst:.3} (<= 3), residual {residual:.1e} vs quadrature error {quad_err:.1e}"
        ),
    )
}

// Byte-identical results across reruns and worker counts.
fn determinism() -> Outcome {
    let data = InitialData::new(Profile::zero(), Profile::single(1.0, 0.0, 1.0), 1.5).unwrap();
    let spec = ProblemSpec::new(vec![NonlinearTerm::power(2.0)], data, 1.0, "smoke").unwrap();
    let grid = GridConfig::for_radius(1.5, 100.0).with_h(0.1);
    let mut cfg = SweepConfig::new(spec, EpsilonGrid { max: 0.4, min: 0.1, count: 4 }, grid);
    let mut runs = Vec::new();
    for workers in [1, 4, 1, 4] {
        cfg.workers = workers;
        runs.push(run_sweep(&cfg).unwrap());
    }
    let same = runs.windows(2).all(|w| {
        w[0] == w[1] && w[0].csv_bytes() == w[1].csv_bytes() && w[0].report_toml() == w[1].report_toml()
    });
    Outcome::new(
        same,
        format!("4 runs (workers 1, 4, 1, 4), csv {} bytes, report {} bytes", runs[0].csv_bytes().len(), runs[0].report_toml().len()),
    )
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome); 12] = [
        (1, "Duhamel oracle", duhamel_oracle),
        (2, "Huygens principle", huygens),
        (3, "linear exactness", linear_exactness),
        (4, "atlas identities", atlas_identities),
        (5, "inverse-law round trips", inverse_round_trips),
        (6, "slope, single power term", single_term_slope),
        (7, "slope, combined effect", combined_slope),
        (8, "global-existence evidence", global_existence),
        (9, "ODE comparison scaling", ode_scaling),
        (10, "Picard-FD agreement", picard_agreement),
        (11, "functional growth windows", growth_windows),
        (12, "determinism", determinism),
    ];
    let mut unexpected = 0;
    for (id, name, check) in criteria {
        let start = Instant::now();
        let out = check();
        let secs = start.elapsed().as_secs_f64();
        let tag = if out.pass { "PASS" } else { "FAIL" };
        println!("{tag} {id:>2} {name}: {} [{secs:.1} s]", out.detail);
        if !out.pass {
            match out.known {
                Some(reason) => println!("        known deviation: {reason}"),
                None => unexpected += 1,
            }
        }
    }
    if unexpected > 0 {
        eprintln!("{unexpected} criteria failed");
        std::process::exit(1);
    }
}
