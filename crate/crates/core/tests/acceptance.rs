//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::cell::RefCell;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use threshconvex::arrangements::{
    count_bound, deep_construct, enumerate_exact, sample_arrangements, ArrangementMatrix, DEFAULT_BUDGET,
};
use threshconvex::harness::{gen_synthetic, run_experiment, DataSource, ExperimentSpec, Method, SteSettings, SyntheticKind};
use threshconvex::model::{
    canonicalize, forward, objective, Dataset, HiddenLayer, LossKind, Neuron, RegularizedObjective, Subnetwork,
    ThresholdNetwork,
};
use threshconvex::reconstruct::{build_from_delta, build_two_layer, caratheodory_decompose, RealizationMethod};
use threshconvex::solver::{
    closed_form_objective, closed_form_solve, critical_width, kkt_check, lasso_solve, project_l1_ball, prox_linf,
    ConvexSolution, LassoProblem,
};
use threshconvex::ste::{multi_trial, SteConfig, Surrogate};

type Outcome = Result<String, String>;
/// Name, check and time limit in seconds.
type Criterion = (&'static str, fn() -> Outcome, u64);

thread_local! {
    /// (n, critical width) of every converged Lasso solve in the suite.
    static WIDTHS: RefCell<Vec<(usize, usize, &'static str)>> = const { RefCell::new(Vec::new()) };
}

fn record(n: usize, sol: &ConvexSolution, origin: &'static str) {
    if sol.converged {
        WIDTHS.with(|w| w.borrow_mut().push((n, critical_width(sol), origin)));
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

fn rel_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

fn three_points() -> Dataset {
    Dataset::from_rows(&[vec![-1.0, 1.0], vec![0.0, 1.0], vec![1.0, 1.0]], &[0.0; 3]).unwrap()
}

fn c1_three_points() -> Outcome {
    let first = enumerate_exact(&three_points()).map_err(|e| e.to_string())?;
    let mut got = first.bit_strings();
    got.sort();
    // columns of the first-layer matrix, read top to bottom
    let mut want = vec!["000", "001", "011", "111", "110", "100"];
    want.sort();
    ensure(got == want, || format!("P1 patterns {got:?}"))?;
    let second = deep_construct(&first, 2, DEFAULT_BUDGET).map_err(|e| e.to_string())?;
    ensure(second.p() == 8, || format!("P2 = {}", second.p()))?;
    Ok(format!("P1 = {}, P2 = {}", first.p(), second.p()))
}

fn c2_counting_bound() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for k in 0..50 {
        let n = rng.random_range(3..=12);
        let d = rng.random_range(2..=4);
        let x = gaussian(n, d - 1, &mut rng).insert_column(d - 1, 1.0);
        let data = Dataset::new(x, DVector::zeros(n)).unwrap();
        let arr = enumerate_exact(&data).map_err(|e| e.to_string())?;
        let r = d.min(n) as u64;
        let bound = count_bound(n as u64, r).map_err(|e| e.to_string())?;
        ensure(arr.p() as u128 <= bound, || format!("dataset {k}: {} patterns > bound {bound} (n {n}, r {r})", arr.p()))?;
        worst = worst.max(arr.p() as f64 / bound as f64);
    }
    let tight = count_bound(3, 2).map_err(|e| e.to_string())?;
    ensure(tight == 6, || format!("bound(3, 2) = {tight}"))?;
    Ok(format!("50 datasets, max P/bound = {worst:.3}, bound(3,2) = 6"))
}

fn c3_closed_form_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for n in 4..=10 {
        let full = ArrangementMatrix::complete(n).map_err(|e| e.to_string())?;
        for _ in 0..5 {
            let y = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
            for beta in [0.01, 0.1, 1.0] {
                let cf = closed_form_solve(&y, beta);
                let prob = LassoProblem::new(&full, y.clone(), beta, LossKind::Squared).map_err(|e| e.to_string())?;
                let sol = lasso_solve(&prob, 1e-12, 200_000).map_err(|e| e.to_string())?;
                record(n, &sol, "closed-form equivalence");
                let gap = rel_gap(cf.objective, sol.objective);
                worst = worst.max(gap);
                ensure(gap <= 1e-6, || {
                    format!("n {n}, beta {beta}: closed form {} vs lasso {} (converged {})", cf.objective, sol.objective, sol.converged)
                })?;
            }
        }
    }
    Ok(format!("105 instances, max relative gap {worst:.2e}"))
}

fn c4_convex_vs_ste() -> Outcome {
    let data = gen_synthetic(SyntheticKind::TwoLayerGt, 20, 5, 4).map_err(|e| e.to_string())?;
    let beta = 1e-3;
    let arr = enumerate_exact(&data).map_err(|e| e.to_string())?;
    let prob = LassoProblem::new(&arr, data.labels().clone(), beta, LossKind::Squared).map_err(|e| e.to_string())?;
    let sol = lasso_solve(&prob, 1e-12, 500_000).map_err(|e| e.to_string())?;
    record(data.n(), &sol, "convex vs STE");
    let kkt = kkt_check(&prob, &sol, 1e-6);
    ensure(kkt.passed, || format!("KKT failed: residual {:.3e}", kkt.residual()))?;
    let mut best_ste = f64::INFINITY;
    for surrogate in Surrogate::ALL {
        let cfg = SteConfig {
            surrogate,
            beta,
            seed: 40,
            ..SteConfig::default()
        };
        let runs = multi_trial(&data, &[50], &cfg, 5).map_err(|e| e.to_string())?;
        for t in &runs.traces {
            let f = t.final_objective();
            best_ste = best_ste.min(f);
            ensure(sol.objective <= f + 1e-8, || {
                format!("{} seed {}: STE {f} < convex {}", surrogate.name(), t.seed, sol.objective)
            })?;
        }
    }
    Ok(format!(
        "P = {}, convex {:.6e} <= best of 20 STE runs {:.6e}; KKT residual {:.1e}",
        arr.p(),
        sol.objective,
        best_ste,
        kkt.residual()
    ))
}

fn c5_reconstruction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let methods = [RealizationMethod::Witness, RealizationMethod::Pinv, RealizationMethod::Svm];
    let mut worst = 0.0f64;
    for k in 0..25 {
        let method = methods[k % 3];
        let n = rng.random_range(4..=10);
        // least squares plus the 0.5 shift reproduces every pattern only on
        // full row rank data; on the other routes use low-dimensional data
        let d = if method == RealizationMethod::Pinv { n + 1 } else { rng.random_range(2..=4) };
        let x = gaussian(n, d - 1, &mut rng).insert_column(d - 1, 1.0);
        let y = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let data = Dataset::new(x, y.clone()).unwrap();
        let beta = 10f64.powf(rng.random_range(-3.0..-0.5));
        let arr = if k % 2 == 0 && method != RealizationMethod::Pinv {
            enumerate_exact(&data)
        } else {
            sample_arrangements(&data, 60, k as u64)
        }
        .map_err(|e| e.to_string())?;
        let prob = LassoProblem::new(&arr, y, beta, LossKind::Squared).map_err(|e| e.to_string())?;
        let sol = lasso_solve(&prob, 1e-12, 500_000).map_err(|e| e.to_string())?;
        ensure(sol.converged, || format!("instance {k} did not converge"))?;
        record(n, &sol, "reconstruction");
        let net = build_two_layer(&data, &sol, &arr, method).map_err(|e| format!("instance {k}: {e}"))?;
        let (canon, _) = canonicalize(&net);
        let value = objective(&canon, &data, &RegularizedObjective::squared_l1(beta).unwrap()).map_err(|e| e.to_string())?;
        let gap = (value - sol.objective).abs();
        worst = worst.max(gap);
        ensure(gap <= 1e-6, || format!("instance {k} ({method:?}): network {value} vs convex {}", sol.objective))?;
    }
    Ok(format!("25 instances, max |network - convex| = {worst:.2e}"))
}

fn c6_delta_construction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut max_neurons_slack = i64::MIN;
    let mut worst = 0.0f64;
    for k in 0..25 {
        let n = rng.random_range(2..=8);
        // full row rank data has a complete arrangement
        let x = if k % 2 == 0 {
            DMatrix::identity(n, n)
        } else {
            gaussian(n, n + rng.random_range(0..3), &mut rng)
        };
        let y = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let data = Dataset::new(x, y.clone()).unwrap();
        let beta = rng.random_range(0.0..1.0);
        let sol = closed_form_solve(&y, beta);
        let net = build_from_delta(&data, &sol, None).map_err(|e| format!("instance {k}: {e}"))?;
        let delta = sol.delta_vector().unwrap();
        let err = (forward(&net, &data).unwrap() - &delta).amax();
        worst = worst.max(err);
        ensure(net.neuron_count() <= n + 2, || format!("instance {k}: {} neurons for n = {n}", net.neuron_count()))?;
        ensure(err <= 1e-9, || format!("instance {k}: |f - delta| = {err:e}"))?;
        max_neurons_slack = max_neurons_slack.max(net.neuron_count() as i64 - (n as i64 + 2));
    }
    Ok(format!("25 instances, max neurons - (n+2) = {max_neurons_slack}, max error {worst:.1e}"))
}

/// Optimal `δ` from the two scalar levels `t = max δ_+`, `u = max (−δ)_+`:
/// for fixed levels the best `δ` clips `y` to `[−u, t]`, leaving a convex
/// problem in `(t, u)` solved by nested golden-section search.
fn level_oracle(y: &DVector<f64>, beta: f64) -> DVector<f64> {
    let g = |t: f64, u: f64| 0.5 * y.map(|v| (v.clamp(-u, t) - v).powi(2)).sum() + beta * (t + u);
    fn golden(lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
        let r = (5f64.sqrt() - 1.0) / 2.0;
        let (mut a, mut b) = (lo, hi);
        for _ in 0..200 {
            let c = b - r * (b - a);
            let d = a + r * (b - a);
            if f(c) <= f(d) {
                b = d;
            } else {
                a = c;
            }
        }
        0.5 * (a + b)
    }
    let tmax = y.max().max(0.0);
    let umax = (-y.min()).max(0.0);
    let best_u = |t: f64| golden(0.0, umax, |u| g(t, u));
    let t = golden(0.0, tmax, |t| g(t, best_u(t)));
    let u = best_u(t);
    y.map(|v| v.clamp(-u, t))
}

/// `prox` of `β||·||∞` by clipping at the level `τ` with
/// `Σ (|v_i| − τ)_+ = β`, found by bisection.
fn clip_prox(v: &DVector<f64>, beta: f64) -> DVector<f64> {
    if v.lp_norm(1) <= beta {
        return DVector::zeros(v.len());
    }
    let (mut lo, mut hi) = (0.0, v.amax());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if v.map(|x| (x.abs() - mid).max(0.0)).sum() > beta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau = 0.5 * (lo + hi);
    v.map(|x| x.clamp(-tau, tau))
}

fn c7_prox() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for k in 0..100 {
        let n = rng.random_range(1..=3);
        let y = DVector::from_fn(n, |_, _| rng.random_range(-3.0..3.0));
        let beta = rng.random_range(0.0..2.0);
        let sol = closed_form_solve(&y, beta);
        let delta = sol.delta_vector().unwrap();
        let oracle = level_oracle(&y, beta);
        let err = (&delta - &oracle).amax();
        let obj_gap = closed_form_objective(&delta, &y, beta) - closed_form_objective(&oracle, &y, beta);
        worst = worst.max(err);
        ensure(err <= 1e-4, || format!("instance {k}: delta {delta:?} vs oracle {oracle:?}"))?;
        ensure(obj_gap <= 1e-9, || format!("instance {k}: oracle objective lower by {obj_gap:e}"))?;
    }
    let mut moreau = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(1..=20);
        let v = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal) * 3.0);
        let beta = rng.random_range(0.0..5.0);
        let p = prox_linf(&v, beta);
        let q = project_l1_ball(&v, beta);
        let identity = (&p + &q - &v).amax();
        let clip = (&p - clip_prox(&v, beta)).amax();
        ensure(q.lp_norm(1) <= beta * (1.0 + 1e-12) + 1e-15, || format!("projection outside the ball: {}", q.lp_norm(1)))?;
        moreau = moreau.max(identity).max(clip);
    }
    ensure(moreau <= 1e-12, || format!("Moreau identity error {moreau:e}"))?;
    Ok(format!("max |delta - oracle| = {worst:.1e}; Moreau/clip error {moreau:.1e}"))
}

fn c8_caratheodory() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    let mut most = 0usize;
    for k in 0..1000 {
        let n = rng.random_range(1..=50);
        // ties and zeros on every other vector
        let v = DVector::from_fn(n, |_, _| {
            if k % 2 == 0 {
                f64::from(rng.random_range(0..4u8))
            } else {
                rng.random_range(0.0..10.0)
            }
        });
        let dec = caratheodory_decompose(&v).map_err(|e| e.to_string())?;
        let err = (dec.recombine(n) - &v).amax();
        worst = worst.max(err);
        most = most.max(dec.atoms.len());
        ensure(err <= 1e-12, || format!("vector {k}: recombination error {err:e}"))?;
        ensure(dec.atoms.len() <= n + 1, || format!("vector {k}: {} atoms for n = {n}", dec.atoms.len()))?;
    }
    Ok(format!("1000 vectors, max error {worst:.1e}, most atoms {most}"))
}

fn random_network(rng: &mut ChaCha8Rng) -> ThresholdNetwork {
    let d = rng.random_range(1..=4);
    let depth = rng.random_range(2..=4);
    let subs = rng.random_range(1..=3);
    let scale = |rng: &mut ChaCha8Rng| rng.random_range(-3.0..3.0);
    let subnetworks = (0..subs)
        .map(|_| {
            let mut input = d;
            let mut layers = Vec::new();
            for _ in 0..depth - 2 {
                let width = rng.random_range(1..=4);
                let mut layer = HiddenLayer::new(gaussian(input, width, rng));
                layer.amplitudes = DVector::from_fn(width, |_, _| scale(rng));
                layer.shifts = DVector::from_fn(width, |_, _| scale(rng));
                layers.push(layer);
                input = width;
            }
            let neurons = (0..rng.random_range(1..=5))
                .map(|_| {
                    // some zero amplitudes or outputs to exercise pruning
                    let amp = if rng.random_bool(0.1) { 0.0 } else { scale(rng) };
                    let out = if rng.random_bool(0.1) { 0.0 } else { scale(rng) };
                    let w = DVector::from_fn(input, |_, _| rng.sample(StandardNormal));
                    Neuron::new(w, amp, out).with_shift(scale(rng))
                })
                .collect();
            Subnetwork { layers, neurons }
        })
        .collect();
    ThresholdNetwork::new(d, subnetworks).unwrap()
}

fn c9_canonicalization() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut pruned = 0;
    for k in 0..100 {
        let net = random_network(&mut rng);
        let n = rng.random_range(1..=12);
        let data = Dataset::new(gaussian(n, net.input_dim(), &mut rng), DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)))
            .unwrap();
        let (canon, report) = canonicalize(&net);
        pruned += report.pruned.len();
        let before = forward(&net, &data).unwrap();
        let after = forward(&canon, &data).unwrap();
        let same = before.iter().zip(after.iter()).all(|(a, b)| a.to_bits() == b.to_bits() || (*a == 0.0 && *b == 0.0));
        ensure(same, || format!("network {k}: outputs differ {before:?} vs {after:?}"))?;
        let beta = 0.1;
        let loss = LossKind::Squared;
        let l1 = objective(&canon, &data, &RegularizedObjective::new(beta, loss, threshconvex::model::RegularizerForm::L1Canonical).unwrap())
            .unwrap();
        let wd = objective(&net, &data, &RegularizedObjective::new(beta, loss, threshconvex::model::RegularizerForm::WeightDecay).unwrap())
            .unwrap();
        ensure(l1 <= wd + 1e-12 * wd.abs().max(1.0), || format!("network {k}: l1 {l1} > weight decay {wd}"))?;
    }
    Ok(format!("100 networks, {pruned} neurons pruned, outputs bit-identical"))
}

fn c10_critical_width() -> Outcome {
    let widths = WIDTHS.with(|w| w.borrow().clone());
    ensure(!widths.is_empty(), || "no converged instances recorded".into())?;
    let mut over = Vec::new();
    let mut max_slack = i64::MIN;
    for &(n, m, origin) in &widths {
        max_slack = max_slack.max(m as i64 - n as i64 - 1);
        if m > n + 1 {
            over.push(format!("{origin}: m* = {m}, n = {n}"));
        }
    }
    ensure(over.is_empty(), || format!("{} of {} instances exceed n + 1: {}", over.len(), widths.len(), over.join("; ")))?;
    Ok(format!("{} converged instances, max m* - (n+1) = {max_slack}", widths.len()))
}

fn c11_pipeline() -> Outcome {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let spec = |out: &str| ExperimentSpec {
        name: "toy".into(),
        dataset: DataSource::Csv {
            path: root.join("data/toy.csv"),
            label_column: "label".into(),
        },
        methods: vec![Method::ConvexLasso, Method::Ste(Surrogate::Identity)],
        beta: 1e-3,
        widths: vec![50],
        seeds: vec![0, 1],
        split_ratio: 0.8,
        output_dir: dir.path().join(out),
        data_seed: 0,
        ste: SteSettings {
            epochs: 100,
            batch_size: 16,
            ..SteSettings::default()
        },
        representation_dim: 100,
        loss: LossKind::Squared,
    };
    let a = run_experiment(&spec("a")).map_err(|e| e.to_string())?;
    run_experiment(&spec("b")).map_err(|e| e.to_string())?;
    let errors: Vec<_> = a.iter().filter_map(|r| r.error.clone()).collect();
    ensure(errors.is_empty(), || format!("cell errors: {errors:?}"))?;
    let read = |p: &str| std::fs::read(dir.path().join(p).join("metrics.csv")).map_err(|e| e.to_string());
    let (ma, mb) = (read("a")?, read("b")?);
    ensure(ma == mb, || "metrics.csv differs between runs".into())?;
    Ok(format!("{} rows, metrics.csv identical ({} bytes)", a.len(), ma.len()))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("three-point patterns (P1 = 6, P2 = 8)", c1_three_points, 1),
        ("counting bound", c2_counting_bound, 30),
        ("closed form equals complete Lasso", c3_closed_form_equivalence, 60),
        ("convex optimum vs STE", c4_convex_vs_ste, 120),
        ("reconstruction round trip", c5_reconstruction, 30),
        ("delta construction with <= n+2 neurons", c6_delta_construction, 30),
        ("prox oracle and Moreau identity", c7_prox, 30),
        ("Caratheodory decomposition", c8_caratheodory, 10),
        ("canonicalization", c9_canonicalization, 10),
        ("critical width <= n+1", c10_critical_width, 10),
        ("pipeline determinism on the toy CSV", c11_pipeline, 60),
    ];
    let mut failed = 0;
    for (k, (name, run, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let result = match result {
            Ok(detail) if elapsed > Duration::from_secs(*limit) => {
                Err(format!("{detail}; took {:.1}s, limit {limit}s", elapsed.as_secs_f64()))
            }
            other => other,
        };
        match result {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail} [{:.2}s]", k + 1, elapsed.as_secs_f64()),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail} [{:.2}s]", k + 1, elapsed.as_secs_f64());
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
