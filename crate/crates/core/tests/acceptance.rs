//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::Rng as _;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use netcoord::certify::{
    self, coupling_collision_audit, extract_certificate, profile_epsilon, profile_influences,
    sample_certificate, DistributionFamily,
};
use netcoord::equilibrium::{
    cycle_optimal_inefficiency, exact_private_leader, secret_share, simulate_local_transitive,
    simulate_private_leader,
};
use netcoord::graph::{self, make_binary_tree, make_cycle, make_erdos_renyi, make_torus, Graph};
use netcoord::influence::{self, InfluenceDistribution, InputModel};
use netcoord::partition::{greedy_ball_carve, is_stable, peel_to_stable, tile_cycle, tile_torus};
use netcoord::rng::{run_trials, stream, Purpose};
use netcoord::PartitionCertificate;

const SEED: u64 = 20_261_015;

type Verdict = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within_time(elapsed: Duration, limit_secs: f64) -> Result<(), String> {
    ensure(
        elapsed.as_secs_f64() < limit_secs,
        format!("took {:.2}s, limit {limit_secs}s", elapsed.as_secs_f64()),
    )
}

fn leader_equilibrium(g: &Graph, cert: &PartitionCertificate, want: f64, limit: Option<f64>) -> Verdict {
    let start = Instant::now();
    let exact = exact_private_leader(g, cert).map_err(|e| e.to_string())?;
    let mc = simulate_private_leader(g, cert, 10_000, SEED).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let detail = format!(
        "exact={exact}, mc={:.5}±{:.5} over {} trials ({:.2}s)",
        mc.mean,
        mc.std_error,
        mc.trials,
        elapsed.as_secs_f64()
    );
    ensure(exact == want, format!("exact {exact} != {want}; {detail}"))?;
    ensure(mc.within(want, 4.0), format!("mc outside 4σ; {detail}"))?;
    if let Some(l) = limit {
        within_time(elapsed, l)?;
    }
    Ok(detail)
}

fn cycle_leader() -> Verdict {
    let g = make_cycle(105).unwrap();
    let cert = tile_cycle(&g, 2).unwrap();
    leader_equilibrium(&g, &cert, 0.2, Some(1.0))
}

fn torus_leader() -> Verdict {
    let g = make_torus(12, 12).unwrap();
    let cert = tile_torus(&g, 2).unwrap();
    leader_equilibrium(&g, &cert, 1.0 / 3.0, None)
}

fn peeling_bound() -> Verdict {
    let mut corpus: Vec<(String, Graph, PartitionCertificate)> = Vec::new();
    for (n, r) in [(105, 2), (30, 1), (77, 3), (99, 4), (110, 5)] {
        let g = make_cycle(n).unwrap();
        let cert = tile_cycle(&g, r).unwrap();
        corpus.push((format!("cycle({n}) r={r}"), g, cert));
    }
    for (w, h, r) in [(12, 12, 2), (15, 9, 2), (20, 25, 4), (21, 14, 6)] {
        let g = make_torus(w, h).unwrap();
        let cert = tile_torus(&g, r).unwrap();
        corpus.push((format!("torus({w}x{h}) r={r}"), g, cert));
    }
    for n in [50, 120, 250, 500] {
        for d in [1.5, 3.0, 6.0] {
            for r in 1..=3 {
                let g = make_erdos_renyi(n, d, SEED ^ n as u64).unwrap();
                let cert = greedy_ball_carve(&g, r, SEED + r as u64);
                corpus.push((format!("er({n}, {d}) r={r}"), g, cert));
            }
        }
    }
    let mut worst = 0.0f64;
    for (name, g, cert) in &corpus {
        let sp = peel_to_stable(g, cert).map_err(|e| format!("{name}: {e}"))?;
        sp.validate(g).map_err(|e| format!("{name}: {e}"))?;
        for c in &sp.stable_communities {
            ensure(is_stable(g, c), format!("{name}: unstable community"))?;
        }
        let deleted = sp.deleted_edges.ordered_len();
        let allowed = g.max_degree() * cert.cut_edges.ordered_len();
        ensure(deleted <= allowed, format!("{name}: deleted {deleted} > {allowed}"))?;
        if allowed > 0 {
            worst = worst.max(deleted as f64 / allowed as f64);
        }
    }
    Ok(format!(
        "{} certificates, max deleted/(d_max·cut) = {worst:.3}",
        corpus.len()
    ))
}

fn local_transitive() -> Verdict {
    let start = Instant::now();
    let g = make_torus(81, 81).unwrap();
    let rep = simulate_local_transitive(&g, 8, 200, SEED, None).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let d = rep.deleted_fraction;
    let u = rep.uncovered_fraction;
    let detail = format!(
        "ε={:.4}, p={:.5}, M={}: deleted {:.4}±{:.4} ≤ {:.4}; uncovered {:.4}±{:.4} vs {:.4} ({:.1}s)",
        rep.epsilon,
        rep.p,
        rep.per_vertex,
        d.mean,
        d.std_error,
        rep.deleted_bound,
        u.mean,
        u.std_error,
        rep.uncovered_expected,
        elapsed.as_secs_f64()
    );
    ensure(d.mean <= rep.deleted_bound + 4.0 * d.std_error, format!("deleted bound; {detail}"))?;
    ensure(u.within(rep.uncovered_expected, 4.0), format!("uncovered rate; {detail}"))?;
    within_time(elapsed, 60.0)?;
    Ok(detail)
}

fn ks_uniform(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(k, &x)| (x - k as f64 / n).max((k + 1) as f64 / n - x))
        .fold(0.0, f64::max)
}

fn secret_sharing() -> Verdict {
    let n = 100_000;
    // Asymptotic 1% critical value of the one-sample KS statistic.
    let critical = 1.6276 / (n as f64).sqrt();
    let adversaries: [&[f64]; 3] = [&[0.0], &[0.999_999, 0.5, 0.25], &[0.3; 9]];
    let mut worst = 0.0f64;
    for (a, co) in adversaries.iter().enumerate() {
        let outputs = run_trials(n, SEED + a as u64, Purpose::Sweep, |_, rng| {
            let mut shares = vec![rng.gen::<f64>()];
            shares.extend_from_slice(co);
            secret_share(&shares).unwrap()
        });
        let d = ks_uniform(outputs);
        ensure(d < critical, format!("co-shares {co:?}: D={d:.5} ≥ {critical:.5}"))?;
        worst = worst.max(d);
    }
    Ok(format!("max D={worst:.5} < {critical:.5} over {} adversaries", adversaries.len()))
}

fn shapley_correctness() -> Verdict {
    let model = Arc::new(InputModel::rademacher(8));
    let rows = run_trials(1000, SEED, Purpose::Sweep, |_, rng| -> Result<(f64, f64, f64), String> {
        let scope = influence::random_scope(8, 8, rng);
        let f = influence::random_function(&model, scope, rng).map_err(|e| e.to_string())?;
        let x = influence::normalize(&f).map_err(|e| e.to_string())?;
        let mu = influence::shapley_influence(&x).map_err(|e| e.to_string())?;
        let sum_err = (mu.probabilities.iter().sum::<f64>() - 1.0).abs();
        let min = mu.probabilities.iter().copied().fold(f64::INFINITY, f64::min);
        let w = influence::fourier_weights(&x).map_err(|e| e.to_string())?;
        let d = influence::harsanyi_dividends(&influence::variance_game(&x).map_err(|e| e.to_string())?);
        let dev = w.iter().zip(&d).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        Ok((sum_err, min, dev))
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
    let sum_err = rows.iter().map(|r| r.0).fold(0.0, f64::max);
    let min = rows.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let dev = rows.iter().map(|r| r.2).fold(0.0, f64::max);
    let detail = format!("1000 functions: max |Σμ-1|={sum_err:.1e}, min μ={min:.1e}, max |fourier-möbius|={dev:.1e}");
    ensure(sum_err <= 1e-9 && min >= -1e-9 && dev <= 1e-9, detail.clone())?;
    Ok(detail)
}

fn contraction() -> Verdict {
    let start = Instant::now();
    let model = Arc::new(InputModel::rademacher(8));
    let rows = run_trials(1000, SEED, Purpose::Coupling, |_, rng| {
        let (f, h) = influence::random_pair(&model, 8, rng).map_err(|e| e.to_string())?;
        influence::contraction_check(&f, &h).map_err(|e| e.to_string())
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
    let elapsed = start.elapsed();
    let violations = rows.iter().filter(|c| c.tv > c.l2 + 1e-9).count();
    let ratio = rows
        .iter()
        .filter(|c| c.l2 > 1e-9)
        .map(|c| c.tv / c.l2)
        .fold(0.0, f64::max);
    let detail = format!(
        "1000 pairs: {violations} violations, max tv/l2={ratio:.3} ({:.2}s)",
        elapsed.as_secs_f64()
    );
    ensure(violations == 0, detail.clone())?;
    within_time(elapsed, 30.0)?;
    Ok(detail)
}

fn grand_coupling() -> Verdict {
    let mut rng = stream(SEED, Purpose::Sweep, 99);
    let dists: Vec<InfluenceDistribution> = (0..20)
        .map(|_| {
            let w: Vec<f64> = (0..5).map(|_| rng.gen_range(0.01..1.0)).collect();
            let total: f64 = w.iter().sum();
            InfluenceDistribution {
                probabilities: w.iter().map(|x| x / total).collect(),
            }
        })
        .collect();
    let family = DistributionFamily::new(dists).map_err(|e| e.to_string())?;
    let pairs: Vec<(usize, usize)> = (0..20).flat_map(|i| (i + 1..20).map(move |j| (i, j))).collect();
    let audit = coupling_collision_audit(&family, &pairs, 100_000, SEED).map_err(|e| e.to_string())?;
    let critical = ChiSquared::new(4.0).unwrap().inverse_cdf(0.99);
    let max_chi = audit.marginals.iter().map(|m| m.chi_square).fold(0.0, f64::max);
    ensure(
        audit.marginals.iter().all(|m| m.degrees_of_freedom == 4 && m.chi_square < critical),
        format!("marginal chi-square {max_chi:.2} ≥ {critical:.2}"),
    )?;
    let mut worst_z = f64::NEG_INFINITY;
    for p in &audit.pairs {
        let slack = p.mismatch.mean - p.bound_sharp;
        ensure(
            slack <= 4.0 * p.mismatch.std_error,
            format!("pair ({}, {}): mismatch {} > {} + 4σ", p.i, p.j, p.mismatch.mean, p.bound_sharp),
        )?;
        if p.mismatch.std_error > 0.0 {
            worst_z = worst_z.max(slack / p.mismatch.std_error);
        }
    }
    Ok(format!(
        "20 distributions, 1e5 races: max χ²={max_chi:.2} < {critical:.2}; {} pairs, max (mismatch-2TV/(1+TV))/σ={worst_z:.2}",
        audit.pairs.len()
    ))
}

struct PipelineRun {
    mean: f64,
    std_error: f64,
    bound: f64,
    epsilon: f64,
    containment_failures: usize,
    cut_sets: Vec<netcoord::EdgeSet>,
}

fn pipeline(g: &Graph, r: usize, profile: &[influence::LocalFunction], trials: usize) -> Result<PipelineRun, String> {
    let family = profile_influences(g, r, profile).map_err(|e| e.to_string())?;
    let epsilon = profile_epsilon(g, profile).map_err(|e| e.to_string())?;
    let est = extract_certificate(g, r, &family, epsilon, trials, SEED).map_err(|e| e.to_string())?;
    let samples = run_trials(trials, SEED, Purpose::Certify, |_, rng| {
        sample_certificate(g, r, &family, rng).ok().filter(|c| {
            c.communities
                .iter()
                .zip(&c.leaders)
                .all(|(comp, &l)| comp.is_subset(&graph::ball(g, l, r).unwrap()))
        })
    });
    let containment_failures = samples.iter().filter(|s| s.is_none()).count();
    Ok(PipelineRun {
        mean: est.mean_cut_fraction,
        std_error: est.std_error,
        bound: est.bound,
        epsilon,
        containment_failures,
        cut_sets: samples.into_iter().flatten().map(|c| c.cut_edges).collect(),
    })
}

fn pipeline_check(label: &str, run: &PipelineRun) -> Result<String, String> {
    let detail = format!(
        "{label}: ε={:.4}, cut {:.4}±{:.4} ≤ √(8ε)={:.4}",
        run.epsilon, run.mean, run.std_error, run.bound
    );
    ensure(run.containment_failures == 0, format!("{label}: {} containment failures", run.containment_failures))?;
    ensure(run.mean <= run.bound + 4.0 * run.std_error, detail.clone())?;
    Ok(detail)
}

fn certificate_pipeline() -> Verdict {
    let cycle = make_cycle(105).unwrap();
    let tiling = tile_cycle(&cycle, 2).unwrap();

    let leader = certify::leader_profile(&cycle, &tiling).unwrap();
    let a = pipeline(&cycle, 2, &leader, 1000)?;
    let a_detail = pipeline_check("leader", &a)?;
    ensure(
        a.cut_sets.len() == 1000 && a.cut_sets.iter().all(|c| *c == tiling.cut_edges),
        "leader profile did not reproduce the tiling cut set on every trial",
    )?;

    let perturbed = certify::perturbed_leader_profile(&cycle, &tiling, 0.1).unwrap();
    let b = pipeline(&cycle, 2, &perturbed, 2000)?;
    let b_detail = pipeline_check("perturbed", &b)?;

    let tree = make_binary_tree(8).unwrap();
    let iid = certify::iid_profile(&tree).unwrap();
    let c = pipeline(&tree, 1, &iid, 200)?;
    let c_detail = pipeline_check("iid tree", &c)?;

    Ok(format!("{a_detail}; {b_detail}; {c_detail}; zero containment failures"))
}

fn optimality_bridge() -> Verdict {
    let mut count = 0;
    for k in 3..=10 {
        for r in 1..=5 {
            let n = k * (2 * r + 1);
            let g = make_cycle(n).unwrap();
            let cert = tile_cycle(&g, r).unwrap();
            let exact = exact_private_leader(&g, &cert).unwrap();
            let opt = cycle_optimal_inefficiency(r);
            let want = 1.0 / (2 * r + 1) as f64;
            ensure(
                exact == opt && opt == want,
                format!("n={n}, r={r}: exact {exact}, optimum {opt}, 1/(2r+1) {want}"),
            )?;
            count += 1;
        }
    }
    Ok(format!("{count} (n, r) pairs match 1/(2r+1) exactly"))
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 10] = [
        ("cycle leader equilibrium", cycle_leader),
        ("torus leader equilibrium", torus_leader),
        ("peeling bound", peeling_bound),
        ("local-transitive construction", local_transitive),
        ("secret sharing uniformity", secret_sharing),
        ("shapley influence correctness", shapley_correctness),
        ("contraction", contraction),
        ("grand coupling", grand_coupling),
        ("certificate pipeline", certificate_pipeline),
        ("cycle optimality bridge", optimality_bridge),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let verdict = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match verdict {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", k + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why}", k + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
