//! Acceptance suite. Runs every criterion in order, prints one PASS/FAIL line
//! each, and exits nonzero if any failed. Reference values are computed here
//! from first principles rather than through the code under test.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use fedkan::codec::{
    encode, optimal_sparsify, position_bits, solve_ratio, topk_sparsify, verify_bound, CodecError, CostModel,
    PayloadHeader, SparsePayload, SparseSet, SplineErrorMetric, HEADER_BITS,
};
use fedkan::data::prepare_split;
use fedkan::fl::{initial_model, RoundMetrics};
use fedkan::kan::{train_local, KanNetwork, KanSpec, Sample, TrainConfig};
use fedkan::spline::{basis_derivative, basis_eval, extend_grid, fit_coefficients, refit_samples, GridSpec, SplineEdge};
use fedkan_cli::bench::codec_bench;
use fedkan_cli::runner::execute;
use fedkan_cli::config::BudgetRule;
use fedkan_cli::{ExperimentConfig, Mode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

/// Exact `C(n, k)` by the multiplicative formula; every intermediate is an
/// exact binomial, so nothing is rounded for `n ≤ 120`.
fn binom(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

fn ceil_log2(v: u128) -> u64 {
    if v <= 1 {
        0
    } else {
        128 - (v - 1).leading_zeros() as u64
    }
}

fn random_net(rng: &mut ChaCha8Rng, widths: &[usize], g: usize, scale: f64) -> KanNetwork<f64> {
    let mut net = KanNetwork::zeros(KanSpec::new(widths.to_vec(), 3, g)).unwrap();
    let values: Vec<f64> = (0..net.layout().len()).map(|_| rng.random_range(-scale..scale)).collect();
    net.assign(&values).unwrap();
    net
}

// 1
fn spline_correctness() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst_pou: f64 = 0.0;
    for _ in 0..10_000 {
        let g = rng.random_range(3..=100);
        let o = rng.random_range(1..=4);
        let grid = GridSpec::new(o, g, -1.0, 1.0).unwrap();
        let x = rng.random_range(-1.0..1.0);
        let sum: f64 = basis_eval(x, &grid).unwrap().iter().sum();
        worst_pou = worst_pou.max((sum - 1.0).abs());
    }
    ensure!(worst_pou < 1e-9, "partition of unity off by {worst_pou:e}");

    // Relative error of the whole derivative vector, ‖B' − FD‖∞ / ‖B'‖∞, at
    // points clear of the knots where low orders have kinks.
    let mut worst_rel: f64 = 0.0;
    let mut checked = 0;
    while checked < 10_000 {
        let g = rng.random_range(3..=100);
        let o = rng.random_range(1..=4);
        let grid = GridSpec::new(o, g, -1.0, 1.0).unwrap();
        let h = 1e-4 * 2.0 / g as f64;
        let x: f64 = rng.random_range(-1.0..1.0);
        if grid.knots().iter().any(|t| (t - x).abs() < 10.0 * h) {
            continue;
        }
        let d = basis_derivative(x, &grid).unwrap();
        let (up, down) = (basis_eval(x + h, &grid).unwrap(), basis_eval(x - h, &grid).unwrap());
        let scale = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let err = (0..d.len()).map(|p| (d[p] - (up[p] - down[p]) / (2.0 * h)).abs()).fold(0.0, f64::max);
        worst_rel = worst_rel.max(err / scale);
        checked += 1;
    }
    ensure!(worst_rel < 1e-5, "derivative relative error {worst_rel:e}");
    Ok(format!("max |Σ B − 1| = {worst_pou:.1e}, max derivative rel. err = {worst_rel:.1e}"))
}

// 2
fn gradient_suite() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let shapes: [&[usize]; 5] = [&[1, 1], &[2, 2, 1], &[3, 2, 1], &[3, 3, 2, 1], &[3, 5, 5, 1]];
    let mut coords = 0;
    let mut worst: f64 = 0.0;
    for n in 0..50 {
        let shape = shapes[n % shapes.len()];
        let g = rng.random_range(3..=10);
        let net = random_net(&mut rng, shape, g, 0.8);
        let batch: Vec<Sample<f64>> = (0..rng.random_range(1..=8))
            .map(|_| {
                let x = (0..shape[0]).map(|_| rng.random_range(-1.0..1.0)).collect();
                Sample::new(x, vec![rng.random_range(-1.0..1.0)])
            })
            .collect();
        let analytic = net.gradients(&batch).unwrap().values;
        let base = net.flatten().values;
        let mut probe = net.clone();
        let h = 1e-5;
        for k in 0..base.len() {
            let mut v = base.clone();
            v[k] = base[k] + h;
            probe.assign(&v).unwrap();
            let up = probe.loss(&batch).unwrap();
            v[k] = base[k] - h;
            probe.assign(&v).unwrap();
            let down = probe.loss(&batch).unwrap();
            let fd = (up - down) / (2.0 * h);
            let err = (analytic[k] - fd).abs();
            let rel = err / analytic[k].abs().max(fd.abs()).max(f64::MIN_POSITIVE);
            ensure!(err <= 1e-7 || rel < 1e-4, "net {n} {shape:?} g={g} coordinate {k}: {} vs {fd}", analytic[k]);
            if err > 1e-7 {
                worst = worst.max(rel);
            }
            coords += 1;
        }
    }
    Ok(format!("50 nets, {coords} coordinates, worst rel. err above the floor {worst:.1e}"))
}

fn poly(coef: &[f64], x: f64) -> f64 {
    coef.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

// 3
fn grid_extension_fidelity() -> Check {
    // Trained edges: the simulator's initial model trained on benchmark data.
    let mut worst: f64 = 0.0;
    let mut edges = 0;
    for (i, name) in ["feynman-I.37.4", "bessel"].into_iter().enumerate() {
        let mut cfg = ExperimentConfig::desk_scale();
        cfg.experiment.benchmark = name.into();
        let data = prepare_split(cfg.benchmark().unwrap(), &cfg.split_config()).unwrap();
        let init = initial_model(data.benchmark.widths(), 3, 3, i as u64).unwrap();
        let train = TrainConfig { local_epochs: 20, seed: i as u64, ..TrainConfig::default() };
        let trained = train_local(&init, &data.pooled_train(), &train).unwrap().network;
        for layer in trained.layers() {
            for edge in layer.edges() {
                let ext = extend_grid(edge, 5).unwrap();
                let xs = refit_samples(ext.grid());
                let max_f = xs.iter().map(|&x| edge.spline_term(x).abs()).fold(0.0, f64::max);
                let diff = xs.iter().map(|&x| (edge.spline_term(x) - ext.spline_term(x)).abs()).fold(0.0, f64::max);
                let ratio = diff / (1e-3 * (1.0 + max_f));
                ensure!(ratio <= 1.0, "{name}: trained edge moved by {diff:e} with max|f| = {max_f}");
                worst = worst.max(ratio);
                edges += 1;
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(303);

    // Cubics lie in the cubic spline space of every grid.
    let mut worst_poly: f64 = 0.0;
    for _ in 0..20 {
        let coef: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let grid = GridSpec::new(3, 3, -1.0, 1.0).unwrap();
        let xs: Vec<f64> = (0..200).map(|s| -1.0 + 2.0 * s as f64 / 199.0).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| poly(&coef, x)).collect();
        let edge = SplineEdge::new(0.0, fit_coefficients(&grid, &xs, &ys).unwrap(), grid).unwrap();
        let ext = extend_grid(&edge, 5).unwrap();
        for _ in 0..200 {
            let x = rng.random_range(-1.0..1.0);
            worst_poly = worst_poly.max((ext.spline_term(x) - poly(&coef, x)).abs());
        }
    }
    ensure!(worst_poly < 1e-8, "cubic not preserved: {worst_poly:e}");
    Ok(format!("{edges} trained edges at ≤ {worst:.2} of tolerance, cubic error {worst_poly:.1e}"))
}

// 4
fn solver_maximality() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let (mut feasible, mut infeasible) = (0, 0);
    for _ in 0..1000 {
        let g = rng.random_range(1..=60);
        let o = rng.random_range(1..=3);
        let b: u64 = if rng.random_bool(0.5) { 32 } else { 64 };
        let omegas: Vec<u64> = (0..rng.random_range(1..=3)).map(|_| rng.random_range(1..=30)).collect();
        let c0: u64 = omegas.iter().sum();
        let edges: u64 = omegas.iter().sum();
        let cost = |k: u64| b * (c0 + k * edges) + edges * ceil_log2(binom(g as u64 + o as u64, k));
        let budget = rng.random_range(cost(0).saturating_sub(200)..=cost(g as u64) + 200);
        let cm = CostModel::new(b as u32, c0, omegas.clone(), o).unwrap();
        match solve_ratio(g, &cm, budget) {
            Ok(plan) => {
                let k = plan.retained_per_edge as u64;
                ensure!(k <= g as u64, "k = {k} exceeds g = {g}");
                ensure!(cost(k) <= budget, "g={g} o={o}: cost({k}) = {} > {budget}", cost(k));
                for k2 in k + 1..=g as u64 {
                    ensure!(cost(k2) > budget, "g={g} o={o}: k = {k} but k' = {k2} also fits {budget}");
                }
                ensure!(plan.total_bits == cost(k), "reported {} bits, expected {}", plan.total_bits, cost(k));
                feasible += 1;
            }
            Err(CodecError::InfeasibleBudget { .. }) => {
                ensure!(cost(0) > budget, "g={g}: rejected budget {budget} although k = 0 costs {}", cost(0));
                infeasible += 1;
            }
            Err(e) => return Err(e.to_string()),
        }
    }
    Ok(format!("{feasible} feasible and {infeasible} infeasible instances, all maximal"))
}

// 5
fn topk_optimality() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut cases = 0;
    for n in 2..=12usize {
        for draw in 0..500 {
            // Every fifth vector has repeated magnitudes to exercise ties.
            let c: Vec<f64> = if draw % 5 == 0 {
                (0..n).map(|_| rng.random_range(-3i32..=3) as f64).collect()
            } else {
                (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
            };
            let distinct = {
                let mut m: Vec<u64> = c.iter().map(|v| v.abs().to_bits()).collect();
                m.sort_unstable();
                m.windows(2).all(|w| w[0] != w[1])
            };
            for k in 0..=n {
                let dropped = |keep: &dyn Fn(usize) -> bool| (0..n).filter(|&i| !keep(i)).map(|i| c[i] * c[i]).sum::<f64>();
                let mut best = (f64::INFINITY, 0u32);
                for mask in 0u32..(1 << n) {
                    if mask.count_ones() as usize == k {
                        let e = dropped(&|i| mask >> i & 1 == 1);
                        if e < best.0 {
                            best = (e, mask);
                        }
                    }
                }
                let top = topk_sparsify(&c, k).unwrap();
                let e_top = dropped(&|i| top.indices().contains(&i));
                ensure!(e_top == best.0, "n={n} k={k} {c:?}: top-k leaves {e_top}, optimum {}", best.0);
                if distinct {
                    let support: Vec<usize> = (0..n).filter(|&i| best.1 >> i & 1 == 1).collect();
                    ensure!(top.indices() == support.as_slice(), "n={n} k={k}: supports differ");
                }
                ensure!(top.values().iter().zip(top.indices()).all(|(v, &i)| *v == c[i]), "values were altered");
                cases += 1;
            }
        }
    }
    Ok(format!("{cases} (vector, k) cases over g+o ≤ 12 match the exhaustive minimum exactly"))
}

// 6
fn proposition_bound() -> Check {
    let report = verify_bound(10_000, 8, 3, 606).map_err(|e| e.to_string())?;
    ensure!(report.trials == 10_000, "ran {} trials", report.trials);
    ensure!(report.violations == 0, "{} violations", report.violations);
    let per: Vec<String> = report.per_order.iter().map(|s| format!("o={}: {:.2} < {}", s.order, s.max_ratio, s.bound)).collect();
    Ok(format!("0 violations in 10000 trials; max e_top/e_opt {}", per.join(", ")))
}

// 7
fn sparsity_ordering() -> Check {
    let rows = codec_bench(10, 3, 500, 707).map_err(|e| e.to_string())?;
    let mut checked = 0;
    for r in &rows {
        let Some(ratio) = r.ratio else { continue };
        if !(0.05..0.95).contains(&ratio) {
            continue;
        }
        ensure!(r.optimal <= r.topk, "ratio {ratio}: optimal {} > top-k {}", r.optimal, r.topk);
        ensure!(r.topk <= r.random.min(r.fixed), "ratio {ratio}: top-k {} vs random {} fixed {}", r.topk, r.random, r.fixed);
        checked += 1;
    }
    ensure!(checked == 9, "swept {checked} ratios");
    let mid = &rows[5];
    Ok(format!(
        "ordering holds at ratios 0.1..0.9 over 500 draws (ratio 0.5: opt {:.3}, top-k {:.3}, random {:.3}, fixed {:.3})",
        mid.optimal, mid.topk, mid.random, mid.fixed
    ))
}

struct DeskRun {
    mode: &'static str,
    seed: u64,
    cfg: ExperimentConfig,
    metrics: Vec<RoundMetrics>,
    final_model: KanNetwork<f64>,
}

fn desk_runs() -> Vec<DeskRun> {
    let variants: [(&'static str, Mode, usize); 5] = [
        ("fixed-3", Mode::FixedGrid, 3),
        ("fixed-5", Mode::FixedGrid, 5),
        ("fixed-10", Mode::FixedGrid, 10),
        ("grid-extended", Mode::GridExtended, 0),
        ("compressed-grid", Mode::CompressedGrid, 0),
    ];
    let mut out = Vec::new();
    for seed in 0..3 {
        for (name, mode, fixed) in variants {
            let mut cfg = ExperimentConfig::desk_scale();
            cfg.experiment.mode = mode;
            cfg.experiment.seed = seed;
            if fixed > 0 {
                cfg.grid.fixed = fixed;
            }
            let outcome = execute(&cfg, |_| Ok(())).expect("desk run");
            out.push(DeskRun { mode: name, seed, cfg, metrics: outcome.metrics, final_model: outcome.final_model });
        }
    }
    out
}

// 8
fn budget_safety(runs: &[DeskRun]) -> Check {
    let mut sparse_rounds = 0;
    let mut uploads = 0;
    for run in runs.iter().filter(|r| r.mode == "compressed-grid") {
        let widths = run.cfg.benchmark().unwrap().widths();
        let omegas: Vec<u64> = widths.windows(2).map(|w| (w[0] * w[1]) as u64).collect();
        let edges: u64 = omegas.iter().sum();
        let b = run.cfg.fl.bits_per_coeff as u64;
        let budget = b * (edges + edges * run.cfg.budget.match_grid as u64);
        ensure!(run.cfg.budget.rule == BudgetRule::MatchGrid, "unexpected budget rule");
        for m in &run.metrics {
            ensure!(m.budget == Some(budget), "round {}: budget {:?}, expected {budget}", m.round, m.budget);
            let Some(plan) = m.plan else {
                ensure!(m.grid <= 10, "round {} at g = {} was not sparsified", m.round, m.grid);
                continue;
            };
            sparse_rounds += 1;
            let pb = ceil_log2(binom((m.grid + 3) as u64, plan.retained_per_edge as u64));
            let expected = b * (edges + plan.retained_per_edge as u64 * edges) + edges * pb;
            for &bits in &m.client_bits {
                ensure!(bits <= budget, "round {}: {bits} bits over budget {budget}", m.round);
                ensure!(bits == expected, "round {}: {bits} bits, layout implies {expected}", m.round);
                uploads += 1;
            }
        }

        // Re-encode the final model with the last plan and read the layout off
        // the encoded bit stream.
        let last = run.metrics.last().unwrap();
        let plan = last.plan.ok_or("final round not sparse")?;
        let k = plan.retained_per_edge;
        let net = &run.final_model;
        let mut alphas = Vec::new();
        let mut sets: Vec<SparseSet<f64>> = Vec::new();
        for layer in net.layers() {
            for edge in layer.edges() {
                alphas.push(edge.base());
                sets.push(topk_sparsify(edge.coeffs(), k).unwrap());
            }
        }
        let header = PayloadHeader { grid: last.grid as u32, order: 3, retained: k as u32, round: 0, client: 0 };
        let payload = SparsePayload::new(header, b as u32, alphas, sets).unwrap();
        let wire = encode(&payload).unwrap();
        let pb = ceil_log2(binom((last.grid + 3) as u64, k as u64));
        ensure!(position_bits(last.grid, 3, k).unwrap() as u64 == pb, "position_bits disagrees with ceil(log2 C)");
        ensure!(payload.position_bits() == edges * pb, "payload position field {} ≠ {edges}·{pb}", payload.position_bits());
        let body = wire.bit_len - HEADER_BITS;
        ensure!(body == b * edges + edges * (pb + k as u64 * b), "encoded body {body} bits does not match the layout");
        ensure!(wire.body_bits() == body && body <= budget, "encoded body {body} vs budget {budget}");
        ensure!(wire.bytes.len() as u64 == wire.bit_len.div_ceil(8), "byte length");
    }
    ensure!(sparse_rounds > 0, "no sparse rounds");
    Ok(format!("{sparse_rounds} sparse rounds, {uploads} uploads, all within budget with ceil(log2 C(g+o,k)) position bits"))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

// 9
fn end_to_end_ordering(runs: &[DeskRun]) -> Check {
    let med = |mode: &str| median(runs.iter().filter(|r| r.mode == mode).map(|r| r.metrics.last().unwrap().rmse).collect());
    let per_seed: Vec<String> = (0..3)
        .map(|s| {
            let vals: Vec<String> = runs
                .iter()
                .filter(|r| r.seed == s)
                .map(|r| format!("{}={:.4}", r.mode, r.metrics.last().unwrap().rmse))
                .collect();
            format!("seed {s}: {}", vals.join(" "))
        })
        .collect();
    for line in &per_seed {
        println!("      {line}");
    }
    let fixed = [med("fixed-3"), med("fixed-5"), med("fixed-10")];
    let best_fixed = fixed.iter().copied().fold(f64::INFINITY, f64::min);
    let (ext, cg) = (med("grid-extended"), med("compressed-grid"));
    let summary = format!(
        "medians: fixed {:.4}/{:.4}/{:.4}, best fixed {best_fixed:.4}, grid-extended {ext:.4}, compressed-grid {cg:.4}",
        fixed[0], fixed[1], fixed[2]
    );
    let a = cg < best_fixed;
    let b = cg <= 1.5 * ext;
    let verdict = format!(
        "(a) compressed < best fixed: {}; (b) compressed ≤ 1.5 × extended ({:.4}): {}",
        if a { "yes" } else { "no" },
        1.5 * ext,
        if b { "yes" } else { "no" }
    );
    if a && b {
        Ok(format!("{summary}; {verdict}"))
    } else {
        Err(format!("{summary}; {verdict}"))
    }
}

// 10
fn degenerate_equivalences() -> Check {
    let mut base = ExperimentConfig::desk_scale();
    base.fl.rounds = 30;
    base.fl.local_epochs = 2;
    base.grid.period = 10;

    let mut extended = base.clone();
    extended.experiment.mode = Mode::GridExtended;
    let mut unlimited = base.clone();
    unlimited.experiment.mode = Mode::CompressedGrid;
    unlimited.budget.rule = BudgetRule::Bits;
    unlimited.budget.bits = i64::MAX as u64;
    let mut limited = base.clone();
    limited.experiment.mode = Mode::CompressedGrid;

    let a = execute(&extended, |_| Ok(())).map_err(|e| e.to_string())?;
    let b = execute(&unlimited, |_| Ok(())).map_err(|e| e.to_string())?;
    let c = execute(&limited, |_| Ok(())).map_err(|e| e.to_string())?;
    ensure!(c.metrics.iter().any(|m| m.plan.is_some()), "the matched budget never triggered, the comparison is vacuous");
    ensure!(b.metrics.iter().all(|m| m.plan.is_none()), "unlimited budget sparsified");
    for (x, y) in a.metrics.iter().zip(&b.metrics) {
        ensure!(x.rmse.to_bits() == y.rmse.to_bits() && x.grid == y.grid, "round {} diverged", x.round);
    }
    ensure!(a.final_model.flatten().values == b.final_model.flatten().values, "final models differ");

    // One client holding all the data, no budget: plain sequential training.
    let mut single = base.clone();
    single.experiment.mode = Mode::GridExtended;
    single.fl.clients = 1;
    single.fl.participation = 1.0;
    single.fl.rounds = 25;
    let fed = execute(&single, |_| Ok(())).map_err(|e| e.to_string())?;
    let data = prepare_split(single.benchmark().unwrap(), &single.split_config()).unwrap();
    let fl = single.fl_config().unwrap();
    let schedule = single.schedule();
    let pooled = data.pooled_train();
    let mut net = initial_model(data.benchmark.widths(), 3, schedule.g0, fl.init_seed).unwrap();
    for t in 0..fl.rounds {
        let g = schedule.grid_size_at(t);
        if g != net.grid_size() {
            net = net.extend_grid(g).unwrap();
        }
        net = train_local(&net, &pooled, &fl.client_train(t, 0)).unwrap().network;
    }
    ensure!(fed.final_model.flatten().values == net.flatten().values, "single-client run differs from centralized");
    Ok(format!(
        "{} rounds bit-identical with unlimited budget; single client equals centralized over {} rounds",
        a.metrics.len(),
        fl.rounds
    ))
}

// 11
fn complexity() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1111);
    let mut instances = 0;
    for (g, o) in [(3, 1), (5, 2), (8, 3), (10, 3), (12, 3), (16, 4)] {
        let metric = SplineErrorMetric::new(&GridSpec::new(o, g, -1.0, 1.0).unwrap());
        let n = g + o;
        for k in 0..=n {
            let c: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let out = optimal_sparsify(&c, k, &metric).unwrap();
            let expected = binom(n as u64, k as u64);
            ensure!(out.supports_evaluated as u128 == expected, "g={g} o={o} k={k}: {} supports, C = {expected}", out.supports_evaluated);
            instances += 1;
        }
    }

    let edges: Vec<Vec<f64>> = (0..10_000).map(|_| (0..103).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let mut best = Duration::MAX;
    for _ in 0..3 {
        let start = Instant::now();
        let mut kept = 0;
        for c in &edges {
            kept += topk_sparsify(c, 60).unwrap().len();
        }
        best = best.min(start.elapsed());
        ensure!(kept == 600_000, "kept {kept}");
    }
    ensure!(best < Duration::from_millis(100), "top-k on 10000 edges took {best:?}");
    Ok(format!("oracle counter equals C(g+o,k) on {instances} instances; top-k on 10000 edges (g=100) in {best:.1?}"))
}

/// `cargo test --test acceptance -- 3 9` runs only the listed criteria.
fn main() -> ExitCode {
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let wanted = |id: u32| selected.is_empty() || selected.contains(&id);
    let mut failures = 0;
    let mut ran = 0;
    let mut report = |id: u32, name: &str, limit: Option<Duration>, f: &mut dyn FnMut() -> Check| {
        if !wanted(id) {
            return;
        }
        ran += 1;
        let start = Instant::now();
        let mut result = f();
        let elapsed = start.elapsed();
        if let (Some(limit), Ok(_)) = (limit, &result) {
            if elapsed > limit {
                result = Err(format!("took {elapsed:.1?}, limit {limit:?}"));
            }
        }
        let (tag, detail) = match &result {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        if result.is_err() {
            failures += 1;
        }
        println!("[{id:>2}] {tag} {name} ({elapsed:.1?}): {detail}");
    };
    let secs = Duration::from_secs;

    report(1, "spline correctness", Some(secs(30)), &mut spline_correctness);
    report(2, "gradient suite", Some(secs(120)), &mut gradient_suite);
    report(3, "grid-extension fidelity", None, &mut grid_extension_fidelity);
    report(4, "ratio solver maximality", None, &mut solver_maximality);
    report(5, "top-k optimality in coefficient space", None, &mut topk_optimality);
    report(6, "top-k error bound", Some(secs(300)), &mut proposition_bound);
    report(7, "error ordering across sparsity ratios", None, &mut sparsity_ordering);
    if wanted(8) || wanted(9) {
        let start = Instant::now();
        let runs = desk_runs();
        let desk_time = start.elapsed();
        println!("     desk-scale protocol: 15 runs in {desk_time:.1?}");
        report(8, "budget safety", None, &mut || budget_safety(&runs));
        report(9, "end-to-end ordering", None, &mut || {
            ensure!(desk_time <= secs(900), "desk protocol took {desk_time:.1?}, limit 15 min");
            end_to_end_ordering(&runs)
        });
    }
    report(10, "degenerate equivalences", None, &mut degenerate_equivalences);
    report(11, "complexity evidence", None, &mut complexity);

    if failures == 0 {
        println!("all {ran} criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("{failures} of {ran} criteria failed");
        ExitCode::FAILURE
    }
}
