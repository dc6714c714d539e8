//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::time::Instant;

use imstitch_cli::{run, Command, ModelId, RunConfig};
use imstitch_core::models::{
    CorrelationModel, GammaModel, LogisticModel, NormalMeanModel, ParametricModel,
};
use imstitch_core::oracle::validity_rates;
use imstitch_core::possibility::{alpha_cut, ContourTable};
use imstitch_core::possibilize::{
    feature_values, gaussian_density_ranking, kde_ranking, likelihood_ranking, FnRanking,
    RankingFunction,
};
use imstitch_core::rng::substream;
use imstitch_core::special::{chi2_cdf, chi2_quantile};
use imstitch_core::stitch::{build_calibration_table, SquareRoot};
use imstitch_core::{
    fit, fixtures, CalibrationConfig, CalibrationTable, FeatureMap, Fit, NaiveOracle, OracleConfig,
    StitchSampler, StitchedContour, WeightedSampleSet, WorkingScale,
};
use statrs::distribution::{ChiSquared, ContinuousCDF};

const SEED: u64 = 2024;
const ALPHAS: [f64; 19] = [
    0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85,
    0.9, 0.95,
];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn ks_uniform(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| (x - i as f64 / n).max((i + 1) as f64 / n - x))
        .fold(0.0, f64::max)
}

fn ks_two_sample(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

fn stitched<M: ParametricModel>(
    model: &M,
    z: &M::Data,
    n: usize,
    seed: u64,
) -> (Fit, CalibrationTable, WeightedSampleSet) {
    let f = fit(model, z).expect("fit");
    let cfg = CalibrationConfig {
        seed,
        ..CalibrationConfig::default()
    };
    let table = build_calibration_table(model, z, &f, &cfg).expect("calibration");
    let s = StitchSampler::new(table.clone())
        .unwrap()
        .sample(n, seed + 1)
        .unwrap();
    (f, table, s)
}

fn normal_data() -> Vec<f64> {
    let mut rng = substream(SEED, 77);
    NormalMeanModel
        .simulate(&[0.3], &vec![0.0; 10], &mut rng)
        .unwrap()
}

/// Closed-form contour `1 - F_1(n (theta - xbar)^2)` of the normal mean.
fn normal_pi(z: &[f64], theta: f64) -> f64 {
    let n = z.len() as f64;
    let xbar = z.iter().sum::<f64>() / n;
    1.0 - ChiSquared::new(1.0)
        .unwrap()
        .cdf(n * (theta - xbar).powi(2))
}

fn c1_gaussian_fixed_point() -> Outcome {
    let t = Instant::now();
    let z = normal_data();
    let n = z.len() as f64;
    let xbar = z.iter().sum::<f64>() / n;
    let (_, _, s) = stitched(&NormalMeanModel, &z, 10_000, SEED);
    let th: Vec<f64> = s.natural().map(|p| p[0]).collect();
    let ks = ks_uniform(th.iter().map(|&x| normal_pi(&z, x)).collect());
    let big_n = th.len() as f64;
    let mean = th.iter().sum::<f64>() / big_n;
    let var = th.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (big_n - 1.0);
    let (v0, se_mean, se_var) = (
        1.0 / n,
        (1.0 / n / big_n).sqrt(),
        (1.0 / n) * (2.0 / (big_n - 1.0)).sqrt(),
    );
    let secs = t.elapsed().as_secs_f64();
    let pass = ks <= 0.02
        && (mean - xbar).abs() <= 3.0 * se_mean
        && (var - v0).abs() <= 3.0 * se_var
        && secs <= 30.0;
    outcome(
        pass,
        format!(
            "KS={ks:.4} mean err={:.2} se, var err={:.2} se, {secs:.1}s",
            (mean - xbar) / se_mean,
            (var - v0) / se_var
        ),
    )
}

fn c2_credal_membership() -> Outcome {
    let t = Instant::now();
    let z = fixtures::rats().unwrap();
    let (_, _, s) = stitched(&GammaModel, &z, 10_000, SEED);
    let oracle = NaiveOracle::new(&GammaModel, &z, OracleConfig::new(2000, SEED + 2)).unwrap();
    let pts: Vec<Vec<f64>> = s.natural().map(<[f64]>::to_vec).collect();
    let pi = oracle.contour_grid(&pts).unwrap().values;
    let mut worst = (f64::INFINITY, 0.0);
    for a in ALPHAS {
        let mass = pi.iter().filter(|&&p| p >= a).count() as f64 / pi.len() as f64;
        let margin = mass - (1.0 - a);
        if margin < worst.0 {
            worst = (margin, a);
        }
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(
        worst.0 >= -0.03 && secs <= 600.0,
        format!(
            "worst mass - (1-alpha) = {:+.4} at alpha={}, {secs:.0}s",
            worst.0, worst.1
        ),
    )
}

fn c3_exact_inner_approximation() -> Outcome {
    // calibrated sampler against the closed-form normal-mean contour
    let z = normal_data();
    let (_, _, s) = stitched(&NormalMeanModel, &z, 10_000, SEED + 3);
    let pi: Vec<f64> = s.natural().map(|p| normal_pi(&z, p[0])).collect();
    let worst_cal = ALPHAS
        .iter()
        .map(|&a| {
            (pi.iter().filter(|&&p| p >= a).count() as f64 / pi.len() as f64 - (1.0 - a)).abs()
        })
        .fold(0.0, f64::max);

    // exact two-dimensional Gaussian possibility, unit variational index
    let (c, sn) = (0.6f64, 0.8f64);
    let table = CalibrationTable {
        alpha_grid: vec![0.5],
        xi_rows: vec![vec![1.0, 1.0]],
        center: vec![1.0, -2.0],
        eigvecs: vec![vec![c, -sn], vec![sn, c]],
        eigvals: vec![4.0, 0.25],
        diagnostics: Vec::new(),
        seed: 0,
        model: "gaussian".into(),
        param_names: vec!["a".into(), "b".into()],
        scale: WorkingScale::identity(2),
    };
    let j = table.eigvec_matrix()
        * nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_vec(table.eigvals.clone()))
        * table.eigvec_matrix().transpose();
    let s2 = StitchSampler::new(table)
        .unwrap()
        .sample(10_000, SEED + 4)
        .unwrap();
    let chi2 = ChiSquared::new(2.0).unwrap();
    let pi2: Vec<f64> = s2
        .natural()
        .map(|p| {
            let d = nalgebra::DVector::from_vec(vec![p[0] - 1.0, p[1] + 2.0]);
            1.0 - chi2.cdf((d.transpose() * &j * &d)[(0, 0)])
        })
        .collect();
    let worst_exact = ALPHAS
        .iter()
        .map(|&a| {
            (pi2.iter().filter(|&&p| p >= a - 1e-9).count() as f64 / pi2.len() as f64 - (1.0 - a))
                .abs()
        })
        .fold(0.0, f64::max);
    outcome(
        worst_cal <= 0.02 && worst_exact <= 0.02,
        format!(
            "max |mass - (1-alpha)|: calibrated d=1 {worst_cal:.4}, exact d=2 {worst_exact:.4}"
        ),
    )
}

fn c4_correlation() -> Outcome {
    let z = fixtures::law_school().unwrap();
    let model = CorrelationModel;
    let (f, _, s) = stitched(&model, &z, 40_000, SEED + 5);
    let rho_hat = f.theta_hat[0];
    let se = 1.0 / f.info_matrix()[(0, 0)].sqrt();
    let grid: Vec<Vec<f64>> = (0..50)
        .map(|i| vec![(f.psi_hat[0] - 4.0 * se + 8.0 * se * i as f64 / 49.0).tanh()])
        .collect();
    let oracle = NaiveOracle::new(&model, &z, OracleConfig::new(5000, SEED + 6)).unwrap();
    let pi = oracle.contour_grid(&grid).unwrap().values;
    let pts: Vec<Vec<f64>> = s.natural().map(<[f64]>::to_vec).collect();
    let working: Vec<Vec<f64>> = s.working().map(<[f64]>::to_vec).collect();
    let scale = model.scale();
    let rankings: Vec<(&str, Box<dyn RankingFunction>)> = vec![
        ("likelihood", Box::new(likelihood_ranking(&model, &z))),
        (
            "gauss",
            Box::new(gaussian_density_ranking(&working, &scale).unwrap()),
        ),
        ("kde", Box::new(kde_ranking(&working, &scale).unwrap())),
    ];
    let mut pass = (rho_hat - 0.789).abs() <= 0.001;
    let mut detail = format!("rho_hat={rho_hat:.4};");
    let mut lik_omega = Vec::new();
    for (name, r) in rankings {
        let c = StitchedContour::from_points(pts.clone(), r).unwrap();
        let omega: Vec<f64> = grid.iter().map(|p| c.eval(p)).collect();
        let sup = omega
            .iter()
            .zip(&pi)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        pass &= sup <= 0.07;
        detail += &format!(" sup[{name}]={sup:.3}");
        if name == "likelihood" {
            lik_omega = omega;
        }
    }
    // mean signed difference omega - pi on each flank where 0.05 <= pi <= 0.95
    let flank = |left: bool| {
        let d: Vec<f64> = grid
            .iter()
            .zip(lik_omega.iter().zip(&pi))
            .filter(|(p, (_, &q))| (p[0] < rho_hat) == left && (0.05..=0.95).contains(&q))
            .map(|(_, (w, q))| w - q)
            .collect();
        d.iter().sum::<f64>() / d.len().max(1) as f64
    };
    let (dl, dr) = (flank(true), flank(false));
    let signed = dl > 0.0 && dr.abs() <= 0.02 && dl > dr.abs();
    pass &= signed;
    detail += &format!("; likelihood signed diff left={dl:+.4} right={dr:+.4}");
    outcome(pass, detail)
}

fn c5_ld50() -> Outcome {
    let z = fixtures::chloracetic().unwrap();
    let (f, _, s) = stitched(&LogisticModel, &z, 10_000, SEED + 7);
    let lam = LogisticModel::ld50(&f.theta_hat);
    let vals: Vec<Vec<f64>> = feature_values(&s, FeatureMap::Ld50)
        .unwrap()
        .into_iter()
        .map(|v| vec![v])
        .collect();
    let r = gaussian_density_ranking(&vals, &WorkingScale::identity(1)).unwrap();
    let c = StitchedContour::from_points(vals, r).unwrap();
    let (mut best, mut arg) = (-1.0, f64::NAN);
    for i in 0..=4000 {
        let x = 0.1 + 0.3 * i as f64 / 4000.0;
        let w = c.eval(&[x]);
        if w > best {
            (best, arg) = (w, x);
        }
    }
    outcome(
        (lam - 0.244).abs() <= 0.002 && (arg - lam).abs() <= 0.01,
        format!("lambda_hat={lam:.4}, argmax={arg:.4} (plaus {best:.3})"),
    )
}

fn c6_ovarian() -> Outcome {
    let t = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::new(ModelId::WeibullCens, SEED, dir.path());
    cfg.feature = Some(FeatureMap::WeibullLogMean);
    for cmd in [
        Command::Fit,
        Command::Calibrate,
        Command::Sample,
        Command::Possibilize,
    ] {
        run(cmd, &cfg).expect("pipeline stage");
    }
    let ci: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("interval.json")).unwrap())
            .unwrap();
    let (lo, hi) = (ci["lo"].as_f64().unwrap(), ci["hi"].as_f64().unwrap());
    let secs = t.elapsed().as_secs_f64();
    let log_ok = (lo - 6.41).abs() <= 0.15 && (hi - 7.74).abs() <= 0.15;
    let (elo, ehi) = (lo.exp() / 610.7 - 1.0, hi.exp() / 2309.0 - 1.0);
    let exp_ok = elo.abs() <= 0.08 && ehi.abs() <= 0.08;
    outcome(
        log_ok && exp_ok && secs <= 120.0,
        format!(
            "log-mean ({lo:.3}, {hi:.3}); mean ({:.1}, {:.1}) rel err ({elo:+.3}, {ehi:+.3}); {secs:.1}s",
            lo.exp(),
            hi.exp()
        ),
    )
}

fn c7_speedup() -> Outcome {
    let z = fixtures::rats().unwrap();
    let t = Instant::now();
    let (_, _, s) = stitched(&GammaModel, &z, 10_000, SEED + 8);
    let pts: Vec<Vec<f64>> = s.natural().map(<[f64]>::to_vec).collect();
    let working: Vec<Vec<f64>> = s.working().map(<[f64]>::to_vec).collect();
    let c = StitchedContour::from_points(
        pts,
        gaussian_density_ranking(&working, &GammaModel.scale()).unwrap(),
    )
    .unwrap();
    let f = fit(&GammaModel, &z).unwrap();
    let cov = f.info_matrix().try_inverse().unwrap();
    let grid: Vec<Vec<f64>> = (0..2500)
        .map(|k| {
            let (i, j) = (k / 50, k % 50);
            let a = f.psi_hat[0] + 4.0 * cov[(0, 0)].sqrt() * (i as f64 / 24.5 - 1.0);
            let b = f.psi_hat[1] + 4.0 * cov[(1, 1)].sqrt() * (j as f64 / 24.5 - 1.0);
            vec![a.exp(), b.exp()]
        })
        .collect();
    let _table = ContourTable::from_contour(&c, GammaModel.param_names(), grid.clone()).unwrap();
    let stitched_secs = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let oracle = NaiveOracle::new(&GammaModel, &z, OracleConfig::new(1000, SEED + 9)).unwrap();
    oracle.contour_grid(&grid).unwrap();
    let oracle_secs = t.elapsed().as_secs_f64();
    outcome(
        stitched_secs * 10.0 <= oracle_secs,
        format!(
            "stitched {stitched_secs:.2}s vs oracle 50x50 {oracle_secs:.2}s (ratio {:.1})",
            oracle_secs / stitched_secs
        ),
    )
}

fn c8_validity() -> Outcome {
    let z = fixtures::law_school().unwrap();
    let alphas = [0.05, 0.1, 0.2];
    let r = validity_rates(
        &CorrelationModel,
        &[0.5],
        &z,
        500,
        &alphas,
        &OracleConfig::new(1000, SEED + 10),
    )
    .unwrap();
    let mut pass = !r.degraded;
    let mut detail = String::new();
    for (row, a) in r.rows.iter().zip(alphas) {
        let bound = a + 2.0 * (a * (1.0 - a) / 500.0).sqrt();
        pass &= row.rate <= bound;
        detail += &format!(" P(pi<={a})={:.3}<={bound:.3}", row.rate);
    }
    outcome(pass, format!("{} failures;{detail}", r.failures))
}

fn gamma_info_exact(z: &[f64], theta: &[f64]) -> nalgebra::DMatrix<f64> {
    // trigamma by recurrence plus asymptotic series
    fn trigamma(mut x: f64) -> f64 {
        let mut acc = 0.0;
        while x < 20.0 {
            acc += 1.0 / (x * x);
            x += 1.0;
        }
        let x2 = x * x;
        acc + 1.0 / x + 1.0 / (2.0 * x2) + 1.0 / (6.0 * x2 * x) - 1.0 / (30.0 * x2 * x2 * x)
            + 1.0 / (42.0 * x2 * x2 * x2 * x)
    }
    let (k, s) = (theta[0], theta[1]);
    let n = z.len() as f64;
    let sy: f64 = z.iter().sum();
    // natural-scale Hessian; at the MLE the gradient vanishes so the
    // log-scale information is D H D with D = diag(k, s)
    let hkk = -n * trigamma(k);
    let hks = -n / s;
    let hss = n * k / (s * s) - 2.0 * sy / (s * s * s);
    -nalgebra::DMatrix::from_row_slice(2, 2, &[hkk * k * k, hks * k * s, hks * k * s, hss * s * s])
}

fn c9_properties() -> Outcome {
    let mut fails = Vec::new();
    let mut detail = Vec::new();

    // square-root equivalence
    let z = fixtures::rats().unwrap();
    let f = fit(&GammaModel, &z).unwrap();
    let cfg = CalibrationConfig {
        seed: SEED,
        grid_size: 40,
        ..CalibrationConfig::default()
    };
    let table = build_calibration_table(&GammaModel, &z, &f, &cfg).unwrap();
    let sym = StitchSampler::new(table.clone())
        .unwrap()
        .sample(10_000, SEED + 11)
        .unwrap();
    let chol = StitchSampler::new(table)
        .unwrap()
        .with_root(SquareRoot::Cholesky)
        .sample(10_000, SEED + 11)
        .unwrap();
    let ks = (0..2)
        .map(|j| {
            ks_two_sample(
                sym.natural().map(|p| p[j]).collect(),
                chol.natural().map(|p| p[j]).collect(),
            )
        })
        .fold(0.0, f64::max);
    detail.push(format!("root KS={ks:.4}"));
    if ks > 0.02 {
        fails.push("square-root equivalence");
    }

    // ranking monotone invariance
    let pts: Vec<Vec<f64>> = sym.natural().map(<[f64]>::to_vec).collect();
    let a = StitchedContour::from_points(pts.clone(), likelihood_ranking(&GammaModel, &z)).unwrap();
    let b = StitchedContour::from_points(
        pts.clone(),
        FnRanking(|t: &[f64]| 8.0 * GammaModel.loglik(t, &z)),
    )
    .unwrap();
    if !pts.iter().take(3000).all(|p| a.eval(p) == b.eval(p)) {
        fails.push("monotone invariance");
    }

    // alpha-cut nesting of a stitched contour table
    let working: Vec<Vec<f64>> = sym.working().map(<[f64]>::to_vec).collect();
    let g = StitchedContour::from_points(
        pts,
        gaussian_density_ranking(&working, &GammaModel.scale()).unwrap(),
    )
    .unwrap();
    let grid: Vec<Vec<f64>> = (0..900)
        .map(|k| {
            vec![
                f.theta_hat[0] * (0.3 + 0.05 * (k / 30) as f64),
                f.theta_hat[1] * (0.3 + 0.05 * (k % 30) as f64),
            ]
        })
        .collect();
    let t = ContourTable::from_contour(&g, vec!["shape".into(), "scale".into()], grid).unwrap();
    let cuts: Vec<Vec<Vec<f64>>> = ALPHAS.iter().map(|&a| alpha_cut(&t, a).unwrap()).collect();
    if !cuts
        .windows(2)
        .all(|w| w[1].iter().all(|p| w[0].contains(p)))
    {
        fails.push("alpha-cut nesting");
    }

    // finite-difference Hessian against analytic information
    let exact = gamma_info_exact(&z, &f.theta_hat);
    let fd_err = (f.info_matrix() - &exact).amax() / exact.amax();
    let zl = fixtures::chloracetic().unwrap();
    let fl = fit(&LogisticModel, &zl).unwrap();
    let mut jl = nalgebra::DMatrix::zeros(2, 2);
    for (&x, _) in zl.x.iter().zip(&zl.y) {
        let p = 1.0 / (1.0 + (-(fl.theta_hat[0] + fl.theta_hat[1] * x)).exp());
        let w = p * (1.0 - p);
        jl += nalgebra::DMatrix::from_row_slice(2, 2, &[w, w * x, w * x, w * x * x]);
    }
    let fd_err = fd_err.max((fl.info_matrix() - &jl).amax() / jl.amax());
    detail.push(format!("FD Hessian rel err={fd_err:.1e}"));
    if fd_err > 1e-4 {
        fails.push("finite-difference Hessian");
    }

    // chi-square CDF and quantile
    let mut chi_err = 0.0f64;
    for d in 1..=4 {
        let reference = ChiSquared::new(d as f64).unwrap();
        for i in 1..200 {
            let x = i as f64 * 0.1;
            chi_err = chi_err.max((chi2_cdf(d, x) - reference.cdf(x)).abs());
            let p = i as f64 / 200.0;
            let q = chi2_quantile(d, p).unwrap();
            chi_err = chi_err.max((reference.cdf(q) - p).abs());
        }
    }
    detail.push(format!("chi2 err={chi_err:.1e}"));
    if chi_err > 1e-8 {
        fails.push("chi-square inversion");
    }

    let mut d = detail.join(", ");
    if !fails.is_empty() {
        d += &format!("; failed: {}", fails.join(", "));
    }
    outcome(fails.is_empty(), d)
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("Gaussian fixed point", c1_gaussian_fixed_point),
        ("credal membership", c2_credal_membership),
        ("exact inner approximation", c3_exact_inner_approximation),
        ("correlation contours", c4_correlation),
        ("LD50 marginal", c5_ld50),
        ("censored Weibull interval", c6_ovarian),
        ("speedup", c7_speedup),
        ("validity", c8_validity),
        ("property suites", c9_properties),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let id = format!("C{}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|x| x == &id) {
            continue;
        }
        let t = Instant::now();
        let o = f();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        failed += !o.pass as usize;
        println!(
            "{id} {name}: {verdict} ({}) [{:.1}s]",
            o.detail,
            t.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
