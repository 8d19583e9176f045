use std::path::PathBuf;

use gradpred::harness::*;
use gradpred::numeric::{norm, sq_norm};
use gradpred::*;

fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

#[test]
fn committed_configs_match_presets() {
    for (file, opt) in [
        ("logreg_sgd_momentum.json", LogRegOptimizer::SgdMomentum),
        ("logreg_adamw_like.json", LogRegOptimizer::AdamwLike),
    ] {
        let text = std::fs::read_to_string(config_path(file)).unwrap();
        let cfg: LogRegConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(cfg, LogRegConfig::preset(opt), "{file}");
    }
}

#[test]
fn regularization_dominated_logreg_orders_predictors() {
    let mut cfg = LogRegConfig::preset(LogRegOptimizer::SgdMomentum);
    cfg.l2 = 10.0;
    cfg.momentum = 0.0;
    cfg.lr = 0.08;
    // Contraction ≈ 0.18 per step; by step ~25 the gradient is exactly zero.
    cfg.steps = 20;
    let t = generate_logreg_trace(&cfg).unwrap();
    let norms: Vec<f64> = t.columns().map(norm).collect();
    assert!(
        norms.windows(2).all(|w| w[1] < w[0]),
        "gradient norms must shrink"
    );
    let kappa = |p: &str| predictability_report(&t, p.parse().unwrap()).unwrap().kappa;
    let (ema, one, trend) = (kappa("ema:0.99"), kappa("one-step"), kappa("trend"));
    assert!(ema < one && one < trend, "{ema} {one} {trend}");
}

#[test]
fn logreg_meta_records_the_run() {
    let mut cfg = LogRegConfig::preset(LogRegOptimizer::AdamwLike);
    cfg.steps = 5;
    cfg.seed = 3;
    let t = generate_logreg_trace(&cfg).unwrap();
    assert_eq!(t.meta()["run"], "LogReg_adamw_like_seed3");
    assert_eq!(t.meta()["optimizer"], "adamw_like");
    let back: LogRegConfig = serde_json::from_str(&t.meta()["config"]).unwrap();
    assert_eq!(back, cfg);
}

#[test]
fn exact_gradient_descent_decreases_strictly() {
    let a = gradpred::linalg::Matrix::identity(4);
    let obj = SmoothObjective::new(ObjectiveFamily::Quadratic, a, vec![1.0; 4]).unwrap();
    let theta0 = [1.0, -2.0, 0.5, 3.0];
    let run = run_proxy_gd(&obj, ProxySource::ExactGradient, 0.5, 30, &theta0).unwrap();
    assert_eq!(run.proxy_path, 0.0);
    assert!(run.avg_sq_grad <= 2.0 * run.values[0] / (0.5 * 30.0));
    let c1 = descent_check(&run);
    assert_eq!(c1.violations, 0);
    assert_eq!(c1.strict, 30);
}

#[test]
fn zero_proxy_is_the_boundary_case() {
    let obj = SmoothObjective::generate(ObjectiveFamily::QuadPlusCos { c: 1.0 }, 6, 2).unwrap();
    let theta0 = initial_point(6, 2);
    let eta = 1.0 / obj.smoothness;
    let run = run_proxy_gd(&obj, PredictorConfig::Zero, eta, 50, &theta0).unwrap();
    let g0 = sq_norm(run.gradient(0));
    assert!((run.avg_sq_grad - g0).abs() <= 1e-12 * g0);
    let expected = 2.0 * (run.values[0] - obj.f_star) / (eta * 50.0) + g0;
    assert!((run.bound - expected).abs() <= 1e-12 * expected);
    assert!(run.satisfied());
    let c1 = descent_check(&run);
    assert_eq!((c1.violations, c1.strict), (0, 0));
    assert!(run.report("q").satisfied);
}

#[test]
fn proxy_gd_with_ema_certifies_on_a_few_seeds() {
    for seed in 0..5 {
        let obj =
            SmoothObjective::generate(ObjectiveFamily::QuadPlusCos { c: 1.0 }, 20, seed).unwrap();
        let cfg = PredictorConfig::ema(0.9).unwrap();
        let run = run_proxy_gd(
            &obj,
            cfg,
            1.0 / obj.smoothness,
            2000,
            &initial_point(20, seed),
        )
        .unwrap();
        assert!(run.satisfied());
        assert!(run.min_sq_grad <= run.avg_sq_grad);
        assert_eq!(descent_check(&run).violations, 0);
        let report = run.report(&obj.family.to_string());
        assert_eq!(report.descent_violations, 0);
        assert_eq!(report.t, 2000);
    }
}

#[test]
fn drifting_omd_stays_within_twice_the_tuned_bound() {
    for seed in 0..10 {
        let p = OnlineLinearProblem::generate(LossKind::Drifting, 10, 500, 1.0, seed).unwrap();
        for cfg in ["one-step", "ema:0.9", "ema:0.99"] {
            let cfg: PredictorConfig = cfg.parse().unwrap();
            let eta = tune_eta(p.residual_energy(cfg).unwrap(), p.d_phi()).unwrap();
            let run = run_omd(&p, cfg, eta, OmdVariant::TwoStep).unwrap();
            assert!(run.satisfied());
            assert!(run.measured_regret <= 2.0 * run.bound_tuned);
            for th in run.iterates.chunks(10) {
                assert!(norm(th) <= 1.0 + 1e-9);
            }
        }
    }
}

#[test]
fn omd_report_fields() {
    let p = OnlineLinearProblem::generate(LossKind::Constant, 3, 20, 1.0, 0).unwrap();
    let run = run_omd(&p, PredictorConfig::OneStep, 0.3, OmdVariant::AsWritten).unwrap();
    let json = serde_json::to_value(run.report(&p.label())).unwrap();
    let mut keys: Vec<_> = json.as_object().unwrap().keys().cloned().collect();
    keys.sort();
    assert_eq!(
        keys,
        [
            "bound_tuned",
            "bound_untuned",
            "eta",
            "predictor",
            "problem",
            "regret",
            "satisfied",
            "variant"
        ]
    );
    assert_eq!(json["variant"], "as-written");
}
