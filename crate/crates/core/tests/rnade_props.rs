mod common;

use common::*;
use nadekit::math::Activation;
use nadekit::ordering::Ordering;
use nadekit::params::ParamBlocks;
use nadekit::rnade::{conditional_params, log_density_1d, ConditionalFamily, MixtureParams1D, RnadeParams};
use nadekit::training::{RnadeModel, Trainable};
use rand::Rng;

const REAL_FAMILIES: [ConditionalFamily; 6] = [
    ConditionalFamily::FixedVarGaussian,
    ConditionalFamily::Gaussian,
    ConditionalFamily::Laplace,
    ConditionalFamily::MixtureOfGaussians(1),
    ConditionalFamily::MixtureOfGaussians(3),
    ConditionalFamily::MixtureOfLaplace(2),
];

fn simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// Integral of a 1-D conditional, split at every component's location and scale multiples.
fn integrate_conditional(family: ConditionalFamily, c: &MixtureParams1D) -> f64 {
    let mut cuts = Vec::new();
    for (&m, &s) in c.mu.iter().zip(&c.sigma) {
        for t in [-60.0, -30.0, -15.0, -8.0, -4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 8.0, 15.0, 30.0, 60.0] {
            cuts.push(m + t * s);
        }
    }
    cuts.sort_by(f64::total_cmp);
    let f = |v: f64| log_density_1d(family, c, v).exp();
    cuts.windows(2).map(|w| simpson(&f, w[0], w[1], 400)).sum()
}

#[test]
fn two_component_mixture_integrates_to_one() {
    let c = MixtureParams1D {
        pi: vec![0.5, 0.5],
        mu: vec![-1.0, 1.0],
        sigma: vec![1.0, 1.0],
    };
    let fam = ConditionalFamily::MixtureOfGaussians(2);
    let f = |v: f64| log_density_1d(fam, &c, v).exp();
    let total = simpson(&f, -10.0, 10.0, 20_000);
    assert!((total - 1.0).abs() <= 1e-6, "{total}");
}

#[test]
fn every_conditional_of_random_models_integrates_to_one() {
    for (fi, &fam) in REAL_FAMILIES.iter().enumerate() {
        for seed in 0..4u64 {
            let p = random_rnade(4, 3, fam, 10 * fi as u64 + seed);
            let mut r = rng(seed);
            let x: Vec<f64> = (0..4).map(|_| r.random_range(-2.0..2.0)).collect();
            let trace = p.log_prob(&Ordering::from_seed(4, seed), &x).unwrap();
            for c in &trace.conditionals {
                let total = integrate_conditional(fam, c);
                assert!((total - 1.0).abs() <= 1e-6, "{fam}: {total}");
            }
        }
    }
}

fn naive_logp(p: &RnadeParams, o: &Ordering, x: &[f64]) -> f64 {
    let mut lp = 0.0;
    for d in 0..o.len() {
        let h: Vec<f64> = (0..p.hidden())
            .map(|k| {
                let a = p.c[k] + (0..d).map(|j| p.w_t.get(o.at(j), k) * x[o.at(j)]).sum::<f64>();
                p.activation.apply(a)
            })
            .collect();
        let i = o.at(d);
        lp += log_density_1d(p.family, &conditional_params(p.family, &h, &p.heads(i)), x[i]);
    }
    lp
}

#[test]
fn recurrence_matches_from_scratch_recomputation() {
    for seed in 0..10u64 {
        let p = random_rnade(5, 4, ConditionalFamily::MixtureOfGaussians(2), seed);
        let mut r = rng(seed + 50);
        let o = Ordering::random(5, &mut r);
        for _ in 0..10 {
            let x: Vec<f64> = (0..5).map(|_| r.random_range(-3.0..3.0)).collect();
            let fast = p.log_density(&o, &x).unwrap();
            assert!((fast - naive_logp(&p, &o, &x)).abs() <= 1e-12);
        }
    }
}

fn check_gradients(fam: ConditionalFamily, act: Activation, seeds: std::ops::Range<u64>) -> f64 {
    let mut worst: f64 = 0.0;
    for seed in seeds {
        let p = random_rnade(4, 3, fam, 700 + seed).with_activation(act);
        let mut r = rng(seed);
        let o = Ordering::random(4, &mut r);
        let x: Vec<f64> = if fam.is_binary() {
            random_binary(4, &mut r)
        } else {
            (0..4).map(|_| r.random_range(-2.0..2.0)).collect()
        };
        let (g, _) = p.grad_nll(&o, &x, false).unwrap();
        let fd = finite_differences(&p, 1e-5, |q| -q.log_density(&o, &x).unwrap());
        worst = worst.max(max_rel_err(&g.to_flat(), &fd, 1e-6));
    }
    worst
}

#[test]
fn gradients_match_finite_differences_for_mixtures() {
    let worst = check_gradients(ConditionalFamily::MixtureOfGaussians(2), Activation::Sigmoid, 0..20);
    assert!(worst < 1e-4, "worst relative error {worst:e}");
}

#[test]
fn gradients_match_finite_differences_for_every_family() {
    let mut fams = REAL_FAMILIES.to_vec();
    fams.push(ConditionalFamily::Bernoulli);
    for fam in fams {
        for act in [Activation::Sigmoid, Activation::Relu] {
            let worst = check_gradients(fam, act, 0..5);
            assert!(worst < 1e-4, "{fam}/{act:?}: worst relative error {worst:e}");
        }
    }
}

#[test]
fn scaled_location_gradient_is_the_exact_one_times_sigma() {
    let p = random_rnade(3, 2, ConditionalFamily::Gaussian, 4);
    let o = Ordering::identity(3);
    let x = [0.3, -1.1, 0.8];
    let (plain, trace) = p.grad_nll(&o, &x, false).unwrap();
    let (scaled, _) = p.grad_nll(&o, &x, true).unwrap();
    for i in 0..3 {
        let sigma = trace.conditionals[i].sigma[0];
        assert!((scaled.b_mu[i] - sigma * plain.b_mu[i]).abs() <= 1e-12);
    }
    assert_eq!(plain.b_sigma, scaled.b_sigma);
}

#[test]
fn single_component_mixture_is_the_gaussian_family() {
    let g = random_rnade(4, 3, ConditionalFamily::Gaussian, 12);
    let mut m = RnadeParams::zeros(4, 3, ConditionalFamily::MixtureOfGaussians(1)).with_activation(g.activation);
    m.w_t = g.w_t.clone();
    m.c = g.c.clone();
    m.v_mu = g.v_mu.clone();
    m.b_mu = g.b_mu.clone();
    m.v_sigma = g.v_sigma.clone();
    m.b_sigma = g.b_sigma.clone();
    let mut r = rng(1);
    let o = Ordering::random(4, &mut r);
    for _ in 0..50 {
        let x: Vec<f64> = (0..4).map(|_| r.random_range(-3.0..3.0)).collect();
        let a = g.log_density(&o, &x).unwrap();
        let b = m.log_density(&o, &x).unwrap();
        assert!((a - b).abs() <= 1e-12);
    }
}

#[test]
fn location_scaling_flag_does_not_change_the_density() {
    let p = random_rnade(4, 3, ConditionalFamily::MixtureOfGaussians(3), 8);
    let o = Ordering::identity(4);
    let mut r = rng(2);
    let rows: Vec<Vec<f64>> = (0..30).map(|_| (0..4).map(|_| r.random_range(-2.0..2.0)).collect()).collect();
    let on = RnadeModel { params: p.clone(), ordering: o.clone(), scale_mean_grad: true };
    let off = RnadeModel { params: p, ordering: o, scale_mean_grad: false };
    let a = on.validation_score(&rows, 0).unwrap();
    let b = off.validation_score(&rows, 0).unwrap();
    assert_eq!(a.to_bits(), b.to_bits());
}

/// Upper 0.001 quantile of chi-square with `k` degrees of freedom (Wilson–Hilferty).
fn chi2_critical_001(k: f64) -> f64 {
    let z = 3.090_232_306;
    let t = 2.0 / (9.0 * k);
    k * (1.0 - t + z * t.sqrt()).powi(3)
}

#[test]
fn two_dimensional_samples_match_the_density_on_a_grid() {
    let p = random_rnade(2, 4, ConditionalFamily::MixtureOfGaussians(2), 21);
    let o = Ordering::identity(2);
    let mut pilot = rng(1000);
    let pilot_rows: Vec<Vec<f64>> = (0..20_000).map(|_| p.sample(&o, &mut pilot).unwrap()).collect();
    let quantile = |j: usize, q: f64| {
        let mut v: Vec<f64> = pilot_rows.iter().map(|x| x[j]).collect();
        v.sort_by(f64::total_cmp);
        v[((v.len() - 1) as f64 * q) as usize]
    };
    let n_cells = 20;
    let lo = [quantile(0, 0.002), quantile(1, 0.002)];
    let hi = [quantile(0, 0.998), quantile(1, 0.998)];
    let width = [(hi[0] - lo[0]) / n_cells as f64, (hi[1] - lo[1]) / n_cells as f64];

    let density = |a: f64, b: f64| p.log_density(&o, &[a, b]).unwrap().exp();
    let sub = 16;
    let w1d: Vec<f64> = (0..=sub)
        .map(|i| if i == 0 || i == sub { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 })
        .collect();
    let mut expected = vec![0.0; n_cells * n_cells];
    for ci in 0..n_cells {
        for cj in 0..n_cells {
            let (ha, hb) = (width[0] / sub as f64, width[1] / sub as f64);
            let mut s = 0.0;
            for (i, wi) in w1d.iter().enumerate() {
                for (j, wj) in w1d.iter().enumerate() {
                    let a = lo[0] + ci as f64 * width[0] + i as f64 * ha;
                    let b = lo[1] + cj as f64 * width[1] + j as f64 * hb;
                    s += wi * wj * density(a, b);
                }
            }
            expected[ci * n_cells + cj] = s * ha * hb / 9.0;
        }
    }

    let n = 100_000usize;
    let mut r = rng(77);
    let mut counts = vec![0usize; n_cells * n_cells];
    let mut outside = 0usize;
    for _ in 0..n {
        let x = p.sample(&o, &mut r).unwrap();
        let ci = ((x[0] - lo[0]) / width[0]).floor();
        let cj = ((x[1] - lo[1]) / width[1]).floor();
        if ci >= 0.0 && cj >= 0.0 && (ci as usize) < n_cells && (cj as usize) < n_cells {
            counts[ci as usize * n_cells + cj as usize] += 1;
        } else {
            outside += 1;
        }
    }

    let mut stat = 0.0;
    let mut bins = 0usize;
    let mut pooled_obs = outside as f64;
    let mut pooled_exp = (1.0 - expected.iter().sum::<f64>()) * n as f64;
    for (c, e) in counts.iter().zip(&expected) {
        let e = e * n as f64;
        if e < 5.0 {
            pooled_obs += *c as f64;
            pooled_exp += e;
        } else {
            stat += (*c as f64 - e).powi(2) / e;
            bins += 1;
        }
    }
    stat += (pooled_obs - pooled_exp).powi(2) / pooled_exp;
    bins += 1;
    let crit = chi2_critical_001((bins - 1) as f64);
    assert!(stat < crit, "chi-square {stat:.1} over {bins} bins exceeds {crit:.1}");
}
