//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits non-zero if any fails.
//!
//! Criteria 9-12 fit hundreds of models and take a while on one core; set
//! `SKEWD_ACCEPTANCE_SKIP_REPLICATION=1` to run only criteria 1-8.

#[path = "../src/test_support.rs"]
#[allow(dead_code)]
mod test_support;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use std::time::Instant;

use skewd::datagen::{generate_dataset, DatasetName};
use skewd::distributions::{
    gno_moments, gno_sample, sn_logpdf, sn_moments, sn_sample, std_normal_logpdf, GnoParams, SkewNormalParams,
};
use skewd::ecm::{cm_step1, e_step, ecm_fit, EcmConfig};
use skewd::evaluation::{audrc, ScoredPrediction};
use skewd::hsic::{hsic_test, HsicMethod};
use skewd::inference::{decide_independence_heuristic, gaussian_marginal_term, infer_pair, standardize, Direction};
use skewd::likelihood::{q_function, ModelParams, PenaltyParams};
use skewd::optim::tuning::heuristic_start;
use skewd::optim::CmaSettings;
use skewd::seed::{derive_seed, rng_from_seed};
use skewd::splines::{penalty_matrices, DesignPair};
use skewd::EstimationConfig;
use test_support::{integrate, truncated_moments_by_quadrature};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn sample_moments(v: &[f64]) -> (f64, f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let m2 = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let m4 = v.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    (m, m2, m4)
}

fn criterion_1() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;

    let sym = SkewNormalParams::standard(0.0);
    let worst = (0..1000)
        .map(|i| {
            let x = -10.0 + 20.0 * i as f64 / 999.0;
            (sn_logpdf(x, &sym).unwrap() - std_normal_logpdf(x)).abs()
        })
        .fold(0.0, f64::max);
    pass &= worst < 1e-12;
    notes.push(format!("lambda=0 max dev {worst:.1e}"));

    let mut worst_mass: f64 = 0.0;
    for lambda in [-25.0, -2.0, 0.0, 3.0, 20.0, 25.0] {
        let p = SkewNormalParams::standard(lambda);
        let mass = integrate(|x| sn_logpdf(x, &p).unwrap().exp(), -40.0, 40.0, 1e-13);
        worst_mass = worst_mass.max((mass - 1.0).abs());
    }
    pass &= worst_mass < 1e-8;
    notes.push(format!("mass max dev {worst_mass:.1e}"));

    let n = 1_000_000;
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst_z: f64 = 0.0;
    let mut check = |draws: Vec<f64>, mean: f64, var: f64| {
        let (m, m2, m4) = sample_moments(&draws);
        let z_mean = (m - mean).abs() / (m2 / n as f64).sqrt();
        let z_var = (m2 - var).abs() / ((m4 - m2 * m2) / n as f64).sqrt();
        worst_z = worst_z.max(z_mean).max(z_var);
    };
    for lambda in [-2.0, 3.0, 20.0] {
        let p = SkewNormalParams::standard(lambda);
        let mo = sn_moments(&p);
        check(sn_sample(&p, n, &mut rng).unwrap(), mo.mean, mo.variance);
    }
    for k in [0.15, -0.31, -0.5] {
        let p = GnoParams::standard(k);
        let mo = gno_moments(&p);
        check(gno_sample(&p, n, &mut rng).unwrap(), mo.mean, mo.variance);
    }
    pass &= worst_z < 3.0;
    notes.push(format!("sampler moments max |z| {worst_z:.2}"));
    outcome(pass, notes.join("; "))
}

fn criterion_2() -> Outcome {
    let g_m2 = sn_moments(&SkewNormalParams::standard(-2.0)).skewness;
    let g_20 = sn_moments(&SkewNormalParams::standard(20.0)).skewness;
    let g_gno = gno_moments(&GnoParams::standard(-0.5)).skewness;
    let checks = [(g_m2, -0.4552, "lambda=-2"), (g_20, 0.985, "lambda=20"), (g_gno, 1.750, "k=-0.5")];
    let pass = checks.iter().all(|(v, t, _)| (v - t).abs() <= 0.001);
    let detail = checks
        .iter()
        .map(|(v, t, name)| {
            let ok = if (v - t).abs() <= 0.001 { "ok" } else { "OUT OF BAND" };
            format!("{name}: {v:.6} vs {t} ({ok})")
        })
        .collect::<Vec<_>>()
        .join("; ");
    outcome(pass, detail)
}

fn criterion_3() -> Outcome {
    let n = 200;
    let cause: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    let design = DesignPair::from_cause(&cause, 6, 4).unwrap();
    let mut worst: f64 = 0.0;
    for &(omega2, lambda) in &[(1.0, 1.0), (4.0, 2.5), (0.25, -3.0)] {
        let omega: f64 = f64::sqrt(omega2);
        let theta = ModelParams { psi: vec![0.0; 6], rho: vec![omega2.ln(); 4], lambda };
        // residual chosen so that lambda * e / omega sweeps [-30, 30]
        let y: Vec<f64> = (0..n).map(|i| (-30.0 + 60.0 * i as f64 / (n - 1) as f64) * omega / lambda).collect();
        let (v1, v2) = e_step(&theta, &y, &design).unwrap();
        for i in 0..n {
            let (q1, q2) = truncated_moments_by_quadrature(lambda * y[i], omega2);
            worst = worst.max((v1[i] - q1).abs()).max((v2[i] - q2).abs());
        }
    }
    outcome(worst < 1e-8, format!("max abs deviation {worst:.1e} over 600 grid points"))
}

fn lsnm_pair(n: usize, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
    let lambda = rng.random_range(-10.0..10.0);
    let (a, b) = (rng.random_range(0.5..2.0), rng.random_range(0.1..0.5));
    let x: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let eps = sn_sample(&SkewNormalParams::standard(lambda), n, rng).unwrap();
    let y: Vec<f64> = x.iter().zip(&eps).map(|(&xi, e)| (a * xi).tanh() + (b + 0.2 * (xi - 0.3).abs()) * e).collect();
    (standardize(&x).unwrap().0, standardize(&y).unwrap().0)
}

fn criterion_4() -> Outcome {
    let pen = penalty_matrices(14, 7).unwrap();
    let config = EcmConfig {
        max_iters: 200,
        cma: CmaSettings { population: 8, initial_step: 0.2, max_iters: 40, ..CmaSettings::default() },
        ..EcmConfig::default()
    };
    let worst = (0..50u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(400 + t);
            let (x, y) = lsnm_pair(300, &mut rng);
            let design = DesignPair::from_cause(&x, 14, 7).unwrap();
            let pp = PenaltyParams::from_log(rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0));
            let mut start = heuristic_start(&y, &design, &pp, &pen).unwrap();
            start.lambda = rng.random_range(-5.0..5.0);
            let out = ecm_fit(&start, &y, &design, &pp, &pen, &config, &mut rng).unwrap();
            out.trace.windows(2).map(|w| w[0] - w[1]).fold(f64::NEG_INFINITY, f64::max)
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);
    outcome(worst <= 1e-8, format!("largest decrease between iterations {worst:.2e} over 50 fits"))
}

fn criterion_5() -> Outcome {
    let (mut worst_psi, mut worst_lambda): (f64, f64) = (0.0, 0.0);
    let mut checked = 0;
    for t in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + t);
        let (x, y) = lsnm_pair(300, &mut rng);
        let (q, p) = (14, 7);
        let design = DesignPair::from_cause(&x, q, p).unwrap();
        let pen = penalty_matrices(q, p).unwrap();
        let pp = PenaltyParams::from_log(rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0));
        let mut theta = heuristic_start(&y, &design, &pp, &pen).unwrap();
        theta.lambda = rng.random_range(-4.0..4.0);
        theta.rho.iter_mut().for_each(|r| *r += rng.random_range(-0.5..0.5));
        let (v1, v2) = e_step(&theta, &y, &design).unwrap();
        let step = cm_step1(&theta, &y, &design, &v1, &pp, &pen, false).unwrap();

        // dQ_p/dpsi = N^T H ((1 + l^2) e - l v) - alpha K psi, evaluated densely
        let l = theta.lambda;
        let nd = design.location.to_dense();
        let zd = design.scale.to_dense();
        let eta = &zd * nalgebra::DVector::from_vec(theta.rho.clone());
        let psi = nalgebra::DVector::from_vec(step.psi.clone());
        let e = nalgebra::DVector::from_vec(y.clone()) - &nd * &psi;
        let r = nalgebra::DVector::from_fn(y.len(), |i, _| (-eta[i]).exp() * ((1.0 + l * l) * e[i] - l * v1[i]));
        let grad = nd.transpose() * r - pp.alpha * &pen.k * &psi;
        let ynorm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        worst_psi = worst_psi.max(grad.norm() / (1.0 + ynorm));

        if step.lambda.abs() < 25.0 {
            // Q is quadratic in lambda, so a wide central difference is exact up to rounding
            let h = 1e-3;
            let ql = |lam: f64| q_function(&ModelParams { lambda: lam, ..theta.clone() }, &y, &design, &v1, &v2).unwrap();
            let d = (ql(step.lambda + h) - ql(step.lambda - h)) / (2.0 * h);
            worst_lambda = worst_lambda.max(d.abs());
            checked += 1;
        }
    }
    let pass = worst_psi < 1e-6 && worst_lambda < 1e-6 && checked > 0;
    outcome(
        pass,
        format!("max ||grad_psi||/(1+||y||) {worst_psi:.1e}; max |dQ/dlambda| {worst_lambda:.1e} ({checked} instances)"),
    )
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(600);
    let (mut worst_ss, mut worst_marg): (f64, f64) = (0.0, 0.0);
    for _ in 0..100 {
        let n = rng.random_range(50..2000);
        let scale = rng.random_range(0.01..100.0);
        let x: Vec<f64> = (0..n).map(|_| scale * rng.sample::<f64, _>(rand_distr::Exp1) + 3.0).collect();
        let y: Vec<f64> = x.iter().map(|v| v.ln() + rng.sample::<f64, _>(StandardNormal)).collect();
        let (sx, _, _) = standardize(&x).unwrap();
        let (sy, _, _) = standardize(&y).unwrap();
        let ss = sx.iter().map(|v| v * v).sum::<f64>();
        worst_ss = worst_ss.max((ss - (n as f64 - 1.0)).abs());
        worst_marg = worst_marg.max((gaussian_marginal_term(&sx) - gaussian_marginal_term(&sy)).abs());
    }
    outcome(
        worst_ss < 1e-9 && worst_marg < 1e-9,
        format!("max |sum x^2 - (n-1)| {worst_ss:.1e}; max marginal difference {worst_marg:.1e}"),
    )
}

/// `(1/M) sum_m (1/m) sum_{i<=m} 1[correct(pi(i))]`, recomputing each prefix from scratch.
fn audrc_brute_force(preds: &[ScoredPrediction]) -> f64 {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| {
        preds[b].certainty.total_cmp(&preds[a].certainty).then_with(|| preds[a].pair_id.cmp(&preds[b].pair_id))
    });
    let m_total = preds.len();
    let mut sum = 0.0;
    for m in 1..=m_total {
        let hits = order[..m].iter().filter(|&&i| preds[i].predicted == preds[i].truth).count();
        sum += hits as f64 / m as f64;
    }
    sum / m_total as f64
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(700);
    let mut mismatches = 0;
    for _ in 0..100 {
        let m = rng.random_range(1..=20);
        let preds: Vec<ScoredPrediction> = (0..m)
            .map(|i| ScoredPrediction {
                pair_id: format!("{i:02}"),
                predicted: if rng.random::<bool>() { Direction::XtoY } else { Direction::YtoX },
                truth: Direction::XtoY,
                // coarse certainties so ties occur
                certainty: f64::from(rng.random_range(0..6u8)) * 0.5,
            })
            .collect();
        if audrc(&preds).unwrap() != audrc_brute_force(&preds) {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("{mismatches} mismatches over 100 random sets"))
}

fn criterion_8() -> Outcome {
    let trials = 200;
    let mut pvals: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(800 + t);
            let a: Vec<f64> = (0..300).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let b: Vec<f64> = (0..300).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            hsic_test(&a, &b, HsicMethod::Permutation, 500, &mut rng).unwrap().p_value
        })
        .collect();
    pvals.sort_by(f64::total_cmp);
    let nf = trials as f64;
    let ks = pvals
        .iter()
        .enumerate()
        .map(|(i, &p)| ((i + 1) as f64 / nf - p).max(p - i as f64 / nf))
        .fold(0.0, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(899);
    let a: Vec<f64> = (0..300).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let dep = hsic_test(&a, &a, HsicMethod::Permutation, 500, &mut rng).unwrap().p_value;
    outcome(ks < 0.1 && dep < 0.01, format!("KS distance {ks:.3}; dependent p-value {dep:.4}"))
}

struct PairScores {
    ll: bool,
    it: bool,
    it_heuristic: bool,
}

fn replicate(name: DatasetName, pairs: usize, n: usize, master: u64) -> Vec<PairScores> {
    let config = EstimationConfig::fast();
    let data = generate_dataset(name, pairs, n, master).unwrap();
    data.par_iter()
        .enumerate()
        .map(|(i, p)| {
            let seed = derive_seed(master, 1000 + i as u64);
            let res = infer_pair(&p.x, &p.y, &config, seed, true, true, false).unwrap();
            let heur = decide_independence_heuristic(&res.xy, &res.yx, &config, &mut rng_from_seed(seed)).unwrap();
            PairScores {
                ll: res.likelihood.unwrap().inferred == p.true_direction,
                it: res.independence.unwrap().inferred == p.true_direction,
                it_heuristic: heur.inferred == p.true_direction,
            }
        })
        .collect()
}

fn rate(v: &[PairScores], f: impl Fn(&PairScores) -> bool) -> f64 {
    v.iter().filter(|s| f(s)).count() as f64 / v.len() as f64
}

fn criterion_9() -> Outcome {
    let r = replicate(DatasetName::Ans985, 30, 500, 9);
    let (ll, it) = (rate(&r, |s| s.ll), rate(&r, |s| s.it));
    outcome(ll >= 0.9 && it >= 0.85, format!("ANs(0.985), 30 pairs: LL {:.1}%, IT {:.1}%", 100.0 * ll, 100.0 * it))
}

fn criterion_10() -> Outcome {
    let r = replicate(DatasetName::Lss1750, 20, 500, 10);
    let (ll, it) = (rate(&r, |s| s.ll), rate(&r, |s| s.it));
    outcome(ll >= 0.85 && it >= 0.75, format!("LSs(1.750), 20 pairs: LL {:.1}%, IT {:.1}%", 100.0 * ll, 100.0 * it))
}

fn criterion_11() -> Outcome {
    let r = replicate(DatasetName::Lss985, 20, 500, 11);
    let (it, heur) = (rate(&r, |s| s.it), rate(&r, |s| s.it_heuristic));
    outcome(
        it - heur >= 0.1 - 1e-12,
        format!("LSs(0.985), 20 pairs: IT after ECM {:.1}%, IT on CMA-ES heuristic {:.1}%", 100.0 * it, 100.0 * heur),
    )
}

fn criterion_12() -> Outcome {
    let r = replicate(DatasetName::Ans, 20, 500, 12);
    let ll = rate(&r, |s| s.ll);
    outcome(ll >= 0.9, format!("ANs with Gaussian noise, 20 pairs: LL {:.1}%", 100.0 * ll))
}

fn main() {
    // `cargo test` passes harness flags; a name filter that excludes this
    // target is not supported, so arguments are ignored.
    let skip_replication = std::env::var("SKEWD_ACCEPTANCE_SKIP_REPLICATION").is_ok_and(|v| v == "1");
    let mut criteria: Vec<(u32, &str, fn() -> Outcome)> = vec![
        (1, "distribution correctness", criterion_1),
        (2, "skewness anchors", criterion_2),
        (3, "E-step oracle", criterion_3),
        (4, "ECM monotonicity", criterion_4),
        (5, "CM-step stationarity", criterion_5),
        (6, "marginal-neglect identity", criterion_6),
        (7, "AUDRC oracle", criterion_7),
        (8, "HSIC calibration", criterion_8),
    ];
    if !skip_replication {
        criteria.extend([
            (9, "ANs(0.985) replication", criterion_9 as fn() -> Outcome),
            (10, "LSs(1.750) replication", criterion_10),
            (11, "ECM ablation", criterion_11),
            (12, "symmetric control", criterion_12),
        ]);
    }
    let mut failed = Vec::new();
    for (id, name, run) in criteria {
        let start = Instant::now();
        let o = run();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} [{name}]: {verdict} - {} ({:.1}s)", o.detail, start.elapsed().as_secs_f64());
        if !o.pass {
            failed.push(id);
        }
    }
    if skip_replication {
        println!("criteria 9-12 skipped (SKEWD_ACCEPTANCE_SKIP_REPLICATION=1)");
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
