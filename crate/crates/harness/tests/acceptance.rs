//! One test per acceptance criterion. Each prints a single
//! `criterion N: PASS|FAIL ...` line on stderr (uncaptured) before asserting.

use std::io::Write;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;
use usgd_core::diagnostics::{assemble_risk, run_batch, theory_bounds, variance_exact_h, EstimateBatch, EstimatorTag};
use usgd_core::model::{
    distribution_one, distribution_two, exact_mean_bar_theta, exact_sq_bias, make_gaussian_model, model_constants,
    ModelConstants, ModelSpec,
};
use usgd_core::rmlmc::{auto_q, sample_tau, LevelDistribution, Variant};
use usgd_core::sgd::{run_average_start, run_coupled_pair, run_shifted_chain, CostMeter};
use usgd_core::stream::ControlRng;
use usgd_core::{Lineage, NoiseStream, Role};
use usgd_harness::{
    cmd_diverge_demo, cmd_estimators, cmd_exact_bias, cmd_sqbias, DivergeParams, ExperimentConfig, ModelSelector,
    SqBiasMethod,
};

const SEED: u64 = 20_240_601;

fn verdict(n: u32, pass: bool, detail: &str) {
    let line = format!("criterion {n}: {} {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "criterion {n} failed: {detail}");
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn sig3(x: f64) -> String {
    format!("{x:.2e}")
}

fn dist1() -> (ModelSpec, ModelConstants) {
    let m = distribution_one();
    let c = model_constants(&m, 0.5, 1.5, None).unwrap();
    (m, c)
}

#[test]
fn criterion_01_exact_bias_golden() {
    let expected = [
        (ModelSelector::Dist1, [6.382e-3, 3.729e-3, 1.926e-3, 7.057e-4]),
        (ModelSelector::Dist2, [1.117e-1, 2.594e-2, 4.001e-4, 5.096e-9]),
    ];
    let start = Instant::now();
    let mut bad = Vec::new();
    for (model, values) in expected {
        let cfg = ExperimentConfig { model: model.clone(), ks: vec![50, 200, 800, 3200], ..Default::default() };
        let rep = cmd_exact_bias(&cfg).unwrap();
        for (row, want) in rep.rows.iter().zip(values) {
            let got = row.sq_bias.unwrap();
            if sig3(got) != sig3(want) {
                bad.push(format!("{model} k={}: {got:.4e} vs {want:.3e}", row.k));
            }
        }
    }
    let t = start.elapsed();
    verdict(1, bad.is_empty() && within(t, 1.0), &format!("8 values, {} mismatches {bad:?}, {t:.2?}", bad.len()));
}

#[test]
fn criterion_02_average_start_oracle() {
    let start = Instant::now();
    let mut rng = Lineage::new(SEED).tagged("c2").control();
    let mut worst: f64 = 0.0;
    for i in 0..200u64 {
        let d = 1 + (rand_index(&mut rng, 8) as usize);
        let exponent = rand_index(&mut rng, 300) as f64 / 100.0;
        let model = make_gaussian_model(d, exponent, 0.25 + rand_index(&mut rng, 4) as f64 / 4.0).unwrap();
        let r2 = model_constants(&model, 0.5, 1.5, None).unwrap().r2;
        let gamma = (0.2 + 1.6 * rand_index(&mut rng, 1000) as f64 / 1000.0) / r2;
        let m = -(rand_index(&mut rng, 65) as i64);
        let m_prime = m + rand_index(&mut rng, (-m + 1) as u64) as i64;
        let stream = Lineage::new(SEED).replicate(i).noise(Role::Chain);
        let fast = run_average_start(&model, m, m_prime, gamma, &stream, &mut CostMeter::new()).unwrap();
        let mut brute = vec![0.0; d];
        for h in m..=m_prime {
            let th = run_shifted_chain(&model, h, gamma, &stream, &mut CostMeter::new()).unwrap();
            brute.iter_mut().zip(&th).for_each(|(a, b)| *a += b);
        }
        let count = (m_prime - m + 1) as f64;
        brute.iter_mut().for_each(|b| *b /= count);
        let err = fast.iter().zip(&brute).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm = brute.iter().map(|b| b * b).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        worst = worst.max(err / norm);
    }
    let t = start.elapsed();
    verdict(2, worst <= 1e-10 && within(t, 10.0), &format!("200 instances, max rel err {worst:.2e}, {t:.2?}"));
}

fn rand_index(rng: &mut ControlRng, n: u64) -> u64 {
    rng.random_range(0..n)
}

/// Per-component mean and standard error of a batch.
fn mean_se(batch: &EstimateBatch) -> (Vec<f64>, Vec<f64>) {
    let n = batch.n() as f64;
    let mean = batch.mean();
    let se = (0..batch.dim())
        .map(|i| {
            let ss: f64 = batch.values().iter().map(|r| (r[i] - mean[i]).powi(2)).sum();
            (ss / (n - 1.0) / n).sqrt()
        })
        .collect();
    (mean, se)
}

#[test]
fn criterion_03_debias_draws_are_unbiased() {
    let (m, c) = dist1();
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut notes = Vec::new();
    for k in [50u64, 200] {
        let bar = exact_mean_bar_theta(&m, k, c.burn_in(k), c.gamma).unwrap();
        let target: Vec<f64> = m.theta_star().iter().zip(&bar).map(|(a, b)| a - b).collect();
        for tag in [EstimatorTag::Z, EstimatorTag::Zavg] {
            let lineage = Lineage::new(SEED).tagged(tag.name()).with_k(k);
            let batch = run_batch(&m, &c, k, tag, 1.0, 20_000, lineage).unwrap();
            let (mean, se) = mean_se(&batch);
            let z = (0..m.dim()).map(|i| (mean[i] - target[i]).abs() / se[i]).fold(0.0, f64::max);
            notes.push(format!("{tag} k={k}: max |z| {z:.2}"));
            worst = worst.max(z);
        }
    }
    let t = start.elapsed();
    verdict(3, worst <= 4.0 && within(t, 120.0), &format!("{}, {t:.2?}", notes.join("; ")));
}

#[test]
fn criterion_04_unbiased_estimators() {
    let (m, c) = dist1();
    let k = 800;
    let n = 10_000;
    let start = Instant::now();
    let mut pass = true;
    let mut notes = Vec::new();
    for tag in [EstimatorTag::Usgd, EstimatorTag::Ausgd] {
        let q = auto_q(k, c.burn_in(k), &LevelDistribution::new(c.delta).unwrap(), tag.variant().unwrap()).unwrap();
        let batch = run_batch(&m, &c, k, tag, q, n, Lineage::new(SEED).tagged(tag.name()).with_k(k)).unwrap();
        let dist = batch.sq_dist(&m);
        let var = variance_exact_h(&batch, &m).unwrap().value;
        let limit = 25.0 * var / n as f64;
        pass &= dist <= limit;
        notes.push(format!("{tag}: ‖mean − θ*‖²_H = {dist:.3e} vs limit {limit:.3e}"));
    }
    let t = start.elapsed();
    verdict(4, pass && within(t, 120.0), &format!("{}, {t:.2?}", notes.join("; ")));
}

#[test]
fn criterion_05_cost_bounds() {
    let (m, c) = dist1();
    let n = 10_000;
    let start = Instant::now();
    let mut pass = true;
    let mut notes = Vec::new();
    for k in [50u64, 200] {
        for variant in [Variant::RandomStart, Variant::AverageStart] {
            let (z_tag, f_tag) = match variant {
                Variant::RandomStart => (EstimatorTag::Z, EstimatorTag::Usgd),
                Variant::AverageStart => (EstimatorTag::Zavg, EstimatorTag::Ausgd),
            };
            let z = run_batch(&m, &c, k, z_tag, 1.0, n, Lineage::new(SEED).tagged("c5z").with_k(k)).unwrap();
            let z_ratio = z.mean_cost() / k as f64;
            let q = auto_q(k, c.burn_in(k), &LevelDistribution::new(c.delta).unwrap(), variant).unwrap();
            let f = run_batch(&m, &c, k, f_tag, q, n, Lineage::new(SEED).tagged("c5f").with_k(k)).unwrap();
            let f_ratio = f.mean_cost() / (k - 1) as f64;
            let ok = z_ratio <= 12.0 && (1.8..=2.2).contains(&f_ratio);
            pass &= ok;
            notes.push(format!("{variant} k={k}: debias {z_ratio:.2}k, f̂ {f_ratio:.3}(k−1) (q={q:.4})"));
        }
    }
    let t = start.elapsed();
    verdict(5, pass && within(t, 120.0), &format!("{}, {t:.2?}", notes.join("; ")));
}

#[test]
fn criterion_06_sq_bias_estimators_desk_scale() {
    let start = Instant::now();
    let mut pass = true;
    let mut notes = Vec::new();
    for method in [SqBiasMethod::Rmlmcb, SqBiasMethod::Urmlmcb] {
        for k in [50u64, 200] {
            let mut hits = 0;
            let mut ratios = Vec::new();
            for run in 0..20u64 {
                let cfg = ExperimentConfig {
                    ks: vec![k],
                    budget: 1_000_000,
                    variant: Variant::AverageStart,
                    seed: SEED + run,
                    ..Default::default()
                };
                let row = cmd_sqbias(&cfg, method).unwrap().rows.remove(0);
                let ratio = row.sq_bias.unwrap() / row.exact_sq_bias.unwrap();
                hits += usize::from((ratio - 1.0).abs() <= 0.15);
                ratios.push(ratio);
            }
            let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            pass &= hits >= 18;
            notes.push(format!("{} k={k}: {hits}/20 within 15% (ratio {lo:.2}..{hi:.2})", method.name()));
        }
    }
    let t = start.elapsed();
    verdict(6, pass && within(t, 600.0), &format!("{}, {t:.2?}", notes.join("; ")));
}

#[test]
fn criterion_07_variance_cross_check() {
    let cfg = ExperimentConfig {
        ks: vec![50, 800],
        estimators: vec![EstimatorTag::AvSgd, EstimatorTag::Usgd, EstimatorTag::Ausgd],
        seed: SEED,
        ..Default::default()
    };
    let start = Instant::now();
    let rep = cmd_estimators(&cfg).unwrap();
    let mut pass = true;
    let mut notes = Vec::new();
    for row in &rep.rows {
        let (exact, probe) = (row.variance.unwrap(), row.est_variance.unwrap());
        let rel = (probe - exact).abs() / exact;
        pass &= rel <= 0.2;
        notes.push(format!("{} k={}: {:.1}%", row.method, row.k, 100.0 * rel));
    }
    let t = start.elapsed();
    verdict(7, pass, &format!("relative gaps {}, {t:.2?}", notes.join(", ")));
}

#[test]
fn criterion_08_bound_dominance() {
    let models = [
        ("dist1", distribution_one()),
        ("dist2", distribution_two()),
        ("power-law d=6", make_gaussian_model(6, 1.0, 0.5).unwrap()),
    ];
    let n = 4000usize;
    let slack = 1.0 + 5.0 / (n as f64).sqrt();
    let mut failures = Vec::new();
    let mut checks = 0;
    let mut check = |what: String, value: f64, bound: Option<f64>| {
        if let Some(b) = bound {
            checks += 1;
            if value > b {
                failures.push(format!("{what}: {value:.3e} > {b:.3e}"));
            }
        }
    };
    for (name, m) in &models {
        let c = model_constants(m, 0.5, 1.5, None).unwrap();
        for k in [50u64, 200] {
            let s = c.burn_in(k);
            let tb = theory_bounds(&c, m, k, s).unwrap();
            let tag = |t: &str| Lineage::new(SEED).tagged(&format!("c8/{name}/{t}")).with_k(k);
            check(format!("{name} k={k} sq bias"), exact_sq_bias(m, k, s, c.gamma).unwrap(), tb.sq_bias);

            let av = run_batch(m, &c, k, EstimatorTag::AvSgd, 1.0, n, tag("av")).unwrap();
            let var = variance_exact_h(&av, m).unwrap().value;
            check(format!("{name} k={k} variance"), var, tb.variance.map(|b| b * slack));
            let risk = mean_half_sq_dist(&av, m);
            check(format!("{name} k={k} excess risk"), risk, tb.excess_risk.map(|b| b * slack));

            for variant in [Variant::RandomStart, Variant::AverageStart] {
                let (z_tag, f_tag) = match variant {
                    Variant::RandomStart => (EstimatorTag::Z, EstimatorTag::Usgd),
                    Variant::AverageStart => (EstimatorTag::Zavg, EstimatorTag::Ausgd),
                };
                let z = run_batch(m, &c, k, z_tag, 1.0, n, tag(z_tag.name())).unwrap();
                let z2 = z.values().iter().map(|r| m.h_norm_sq(r)).sum::<f64>() / n as f64;
                check(format!("{name} k={k} E‖{z_tag}‖²_H"), z2, tb.z_second_moment.map(|b| b * slack));
                let q = auto_q(k, s, &LevelDistribution::new(c.delta).unwrap(), variant).unwrap();
                let f = run_batch(m, &c, k, f_tag, q, n, tag(f_tag.name())).unwrap();
                let risk = mean_half_sq_dist(&f, m);
                check(format!("{name} k={k} {f_tag} excess risk"), risk, tb.unbiased_excess_risk(q).map(|b| b * slack));
                check(format!("{name} k={k} {f_tag} cost"), f.mean_cost(), Some(tb.unbiased_cost(q) * slack));
            }

            // Level differences of the random-start chain.
            for l in 0..4u32 {
                let lineage = tag(&format!("level{l}"));
                let mut rng = lineage.control();
                let mut acc = 0.0;
                for r in 0..n as u64 {
                    let hi = sample_tau(k, s, l + 1, &mut rng).unwrap();
                    let lo = sample_tau(k, s, l, &mut rng).unwrap();
                    let stream: NoiseStream = lineage.replicate(r).noise(Role::Chain);
                    let (a, b) =
                        run_coupled_pair(m, -(hi as i64), -(lo as i64), c.gamma, &stream, &mut CostMeter::new())
                            .unwrap();
                    let diff: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
                    acc += m.h_norm_sq(&diff);
                }
                let (poly, expo) = tb.level_difference(l);
                let bound = poly.map_or(expo, |p| p.min(expo));
                check(format!("{name} k={k} level {l} difference"), acc / n as f64, Some(bound * slack));
            }
        }
    }
    let detail = format!("{checks} checks, {} violations {failures:?}", failures.len());
    verdict(8, failures.is_empty(), &detail);
}

fn mean_half_sq_dist(batch: &EstimateBatch, m: &ModelSpec) -> f64 {
    batch
        .values()
        .iter()
        .map(|r| {
            let d: Vec<f64> = r.iter().zip(m.theta_star()).map(|(a, b)| a - b).collect();
            m.h_norm_sq(&d) / 2.0
        })
        .sum::<f64>()
        / batch.n() as f64
}

#[test]
fn criterion_09_figure_assembly() {
    let risk = assemble_risk(6.382e-3, 0.082, 1).unwrap().excess_risk;
    let pass = format!("{risk:.1e}") == format!("{:.1e}", 0.0443);
    verdict(9, pass, &format!("AvSGD k=50 M=1 excess risk {risk:.4} vs 0.0443"));
}

#[test]
fn criterion_10_divergence_demo() {
    let p = DivergeParams { reps: 100_000, k_max: 30, seed: SEED, ..Default::default() };
    let rep = cmd_diverge_demo(&p).unwrap();
    let abs: Vec<f64> = rep.rows.iter().map(|r| r.closed_form.abs()).collect();
    let first_drop = abs.windows(2).position(|w| w[1] <= w[0]).map(|i| i + 2);
    let tenfold = abs.iter().position(|v| *v > 10.0 * abs[0]).map(|i| i + 1);
    let worst_z = rep
        .rows
        .iter()
        .map(|r| {
            // k = 1 is deterministic; allow for rounding in the sum over replicates.
            let dev = ((r.simulated_mean - r.closed_form).abs() - 1e-9 * r.closed_form.abs()).max(0.0);
            if dev == 0.0 {
                0.0
            } else {
                dev / r.simulated_se
            }
        })
        .fold(0.0, f64::max);
    let monotone = first_drop.is_none();
    let grows = tenfold.is_some_and(|k| k <= 26);
    let matches = worst_z <= 4.0;
    let detail = format!(
        "strictly increasing: {monotone} (first decrease at k={first_drop:?}); first k above 10x: {tenfold:?}; \
         simulation max |z| {worst_z:.2} over k ≤ 30"
    );
    verdict(10, monotone && grows && matches, &detail);
}

#[test]
fn criterion_11_level_law() {
    let dist = LevelDistribution::new(1.5).unwrap();
    let bounds_ok = (0..=60u32).all(|l| {
        let scaled = f64::from(l + 1).exp2() * f64::from(l + 1).powf(1.5) * dist.pmf(l);
        (1.0..=2.0).contains(&scaled)
    });
    let n = 1_000_000u64;
    let mut counts = [0u64; 9];
    let mut rng = Lineage::new(SEED).tagged("c11").control();
    for _ in 0..n {
        let l = dist.sample(&mut rng) as usize;
        if l < counts.len() {
            counts[l] += 1;
        }
    }
    let worst_z = counts
        .iter()
        .enumerate()
        .map(|(l, &c)| {
            let p = dist.pmf(l as u32);
            (c as f64 / n as f64 - p).abs() / (p * (1.0 - p) / n as f64).sqrt()
        })
        .fold(0.0, f64::max);
    verdict(
        11,
        bounds_ok && worst_z <= 4.0,
        &format!("bounds hold for l ≤ 60: {bounds_ok}; max |z| {worst_z:.2} for l ≤ 8"),
    );
}

fn run_cli(args: &[&str], threads: &str) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_usgd")).args(args).args(["--threads", threads]).output().unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

#[test]
fn criterion_12_thread_count_determinism() {
    let runs: [&[&str]; 7] = [
        &["exact-bias", "--model", "dist2"],
        &["sqbias", "--k", "50", "--budget", "2e4", "--method", "RMLMCB", "--variant", "average"],
        &["sqbias", "--k", "50", "--budget", "2e4", "--method", "URMLMCB"],
        &["estimators", "--k", "20,50", "--budget", "5000"],
        &["figures", "--k", "50", "--budget", "5000", "--model", "dist2"],
        &["diverge-demo", "--reps", "2000", "--k-max", "12"],
        &["estimators", "--k", "30", "--budget", "3000", "--q", "0.5", "--variant", "average", "--seed", "9"],
    ];
    let mut differing = Vec::new();
    for args in runs {
        let a = run_cli(args, "1");
        let b = run_cli(args, "3");
        assert!(!a.is_empty());
        if a != b {
            differing.push(args[0]);
        }
    }
    verdict(12, differing.is_empty(), &format!("{} subcommand runs, differing: {differing:?}", runs.len()));
}
