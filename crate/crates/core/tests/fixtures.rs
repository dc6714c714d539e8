use imstitch_core::models::{
    kaplan_meier_censoring, CorrelationModel, GammaModel, LogisticModel, ParametricModel,
    WeibullCensoredModel,
};
use imstitch_core::special::{chi2_cdf, chi2_quantile};
use imstitch_core::{fit, fixtures};
use statrs::distribution::{ChiSquared, ContinuousCDF};

#[test]
fn fixture_sizes() {
    assert_eq!(fixtures::law_school().unwrap().len(), 15);
    assert_eq!(fixtures::rats().unwrap().len(), 20);
    assert_eq!(fixtures::chloracetic().unwrap().len(), 120);
    let z = fixtures::ovarian().unwrap();
    assert_eq!((z.len(), z.events()), (26, 12));
}

#[test]
fn law_school_correlation_mle() {
    let f = fit(&CorrelationModel, &fixtures::law_school().unwrap()).unwrap();
    assert!((f.theta_hat[0] - 0.789).abs() <= 0.001, "{:?}", f.theta_hat);
    assert!((f.psi_hat[0] - 1.07).abs() < 0.005);
}

#[test]
fn chloracetic_ld50() {
    let f = fit(&LogisticModel, &fixtures::chloracetic().unwrap()).unwrap();
    assert!((LogisticModel::ld50(&f.theta_hat) - 0.244).abs() <= 0.002);
}

#[test]
fn gamma_mle_solves_score_equations() {
    let z = fixtures::rats().unwrap();
    let th = GammaModel.mle(&z).unwrap();
    let n = z.len() as f64;
    // shape * scale equals the sample mean at the MLE
    assert!((th[0] * th[1] - z.iter().sum::<f64>() / n).abs() < 1e-8);
    let h = 1e-6;
    let l = |k: f64| GammaModel.loglik(&[k, th[0] * th[1] / k], &z);
    assert!(((l(th[0] + h) - l(th[0] - h)) / (2.0 * h)).abs() < 1e-4);
}

#[test]
fn ovarian_weibull_fit_is_finite() {
    let z = fixtures::ovarian().unwrap();
    let model = WeibullCensoredModel::from_data(&z).unwrap();
    let f = fit(&model, &z).unwrap();
    assert!(f.theta_hat.iter().all(|t| t.is_finite() && *t > 0.0));
    assert!(f.eigvals.iter().all(|l| *l > 0.0));
}

#[test]
fn ovarian_censoring_estimate() {
    let z = fixtures::ovarian().unwrap();
    let g = kaplan_meier_censoring(&z).unwrap();
    let total: f64 = g.masses.iter().sum();
    assert_eq!(g.atoms.len(), 14);
    assert!((total - 1.0).abs() < 1e-12);

    // independent product-limit with censorings as events
    let mut idx: Vec<usize> = (0..z.len()).collect();
    idx.sort_by(|&a, &b| z.time[a].total_cmp(&z.time[b]));
    let mut surv = 1.0;
    let mut want = Vec::new();
    for (r, &i) in idx.iter().enumerate() {
        if !z.event[i] {
            let next = surv * (1.0 - 1.0 / (z.len() - r) as f64);
            want.push((z.time[i], surv - next));
            surv = next;
        }
    }
    if let Some(last) = want.last_mut() {
        last.1 += surv;
    }
    for ((a, m), (t, w)) in g.atoms.iter().zip(&g.masses).zip(&want) {
        assert_eq!(a, t);
        assert!((m - w).abs() < 1e-12);
    }
}

#[test]
fn chi_square_against_reference() {
    for d in 1..=5 {
        let r = ChiSquared::new(d as f64).unwrap();
        for i in 1..100 {
            let x = 0.2 * i as f64;
            assert!((chi2_cdf(d, x) - r.cdf(x)).abs() < 1e-10);
            let p = i as f64 / 100.0;
            assert!((r.cdf(chi2_quantile(d, p).unwrap()) - p).abs() < 1e-8);
        }
    }
}
