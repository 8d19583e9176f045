use gradpred::linalg::{random_orthogonal, Matrix};
use gradpred::metrics::windowed_kappa;
use gradpred::rng::CounterRng;
use gradpred::trace::{decode_binary, decode_csv, encode_binary, encode_csv};
use gradpred::*;
use proptest::prelude::*;

fn trace_strategy(max_dim: usize, max_steps: usize) -> impl Strategy<Value = GradientTrace> {
    (1..=max_dim, 1..=max_steps).prop_flat_map(|(d, n)| {
        prop::collection::vec(-10.0f64..10.0, d * n)
            .prop_map(move |v| GradientTrace::new(d, v).unwrap())
    })
}

fn family_strategy() -> impl Strategy<Value = PredictorConfig> {
    prop_oneof![
        Just(PredictorConfig::Zero),
        Just(PredictorConfig::OneStep),
        (0.01f64..0.999).prop_map(|b| PredictorConfig::ema(b).unwrap()),
        (-2.0f64..2.0).prop_map(|g| PredictorConfig::trend(g).unwrap()),
    ]
}

/// New trace whose column `s` is `f(s, g_s)`.
fn rebuild(t: &GradientTrace, mut f: impl FnMut(usize, &[f64]) -> Vec<f64>) -> GradientTrace {
    let cols: Vec<Vec<f64>> = t.columns().enumerate().map(|(s, c)| f(s, c)).collect();
    GradientTrace::from_steps(&cols).unwrap()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn binary_roundtrip_is_bitwise(t in trace_strategy(16, 64)) {
        let back = decode_binary(&encode_binary(&t)).unwrap();
        prop_assert_eq!(back.dim(), t.dim());
        let a: Vec<u64> = t.values().iter().map(|x| x.to_bits()).collect();
        let b: Vec<u64> = back.values().iter().map(|x| x.to_bits()).collect();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn csv_roundtrip_is_exact(t in trace_strategy(6, 20)) {
        let back = decode_csv(&encode_csv(&t)).unwrap();
        prop_assert_eq!(back.values(), t.values());
    }

    #[test]
    fn predictions_ignore_the_present_and_future(
        t in trace_strategy(5, 30),
        cfg in family_strategy(),
        pick in any::<prop::sample::Index>(),
        bump in -5.0f64..5.0,
    ) {
        let at = pick.index(t.steps());
        let before = run_predictor(&t, cfg).unwrap();
        let edited = rebuild(&t, |s, col| {
            if s >= at { col.iter().map(|x| x + bump).collect() } else { col.to_vec() }
        });
        let after = run_predictor(&edited, cfg).unwrap();
        for s in 0..=at {
            prop_assert_eq!(before.column(s), after.column(s));
        }
    }

    #[test]
    fn predictors_are_linear(
        d in 1usize..5,
        n in 1usize..30,
        seed in any::<u64>(),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
        cfg in family_strategy(),
    ) {
        let mut rng = CounterRng::new(seed, 1);
        let x = rng.normal_vec(d * n);
        let y = rng.normal_vec(d * n);
        let z: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        let px = run_predictor(&GradientTrace::new(d, x).unwrap(), cfg).unwrap();
        let py = run_predictor(&GradientTrace::new(d, y).unwrap(), cfg).unwrap();
        let pz = run_predictor(&GradientTrace::new(d, z).unwrap(), cfg).unwrap();
        let scale = px.values().iter().chain(py.values()).fold(1.0f64, |m, v| m.max(v.abs()));
        for ((u, v), w) in px.values().iter().zip(py.values()).zip(pz.values()) {
            prop_assert!((a * u + b * v - w).abs() <= 1e-10 * scale * (a.abs() + b.abs()).max(1.0));
        }
    }

    #[test]
    fn zero_predictor_calibrates_to_one(t in trace_strategy(32, 64)) {
        prop_assume!(validate_trace(&t).total_energy > 0.0);
        let r = predictability_report(&t, PredictorConfig::Zero).unwrap();
        prop_assert!(close(r.kappa, 1.0, 1e-12));
    }

    #[test]
    fn kappa_is_scale_invariant(
        t in trace_strategy(6, 40),
        cfg in family_strategy(),
        c in prop_oneof![-1e3f64..-1e-3, 1e-3f64..1e3],
    ) {
        prop_assume!(validate_trace(&t).total_energy > 0.0);
        let scaled = rebuild(&t, |_, col| col.iter().map(|x| c * x).collect());
        let a = predictability_report(&t, cfg).unwrap();
        let b = predictability_report(&scaled, cfg).unwrap();
        prop_assert!(close(a.kappa, b.kappa, 1e-10));
        let w = (t.steps() / 2).max(1);
        let wa = windowed_kappa(&t, cfg, w, 1).unwrap();
        let wb = windowed_kappa(&scaled, cfg, w, 1).unwrap();
        for (x, y) in wa.entries.iter().zip(&wb.entries) {
            match (x.kappa, y.kappa) {
                (Some(p), Some(q)) => prop_assert!(close(p, q, 1e-10)),
                (p, q) => prop_assert_eq!(p, q),
            }
        }
    }

    #[test]
    fn path_length_splits_over_exact_partitions(
        d in 1usize..5,
        blocks in 1usize..8,
        w in 1usize..10,
        seed in any::<u64>(),
        cfg in family_strategy(),
    ) {
        let n = blocks * w;
        let t = GradientTrace::new(d, CounterRng::new(seed, 2).normal_vec(d * n)).unwrap();
        let res = residuals(&t, &run_predictor(&t, cfg).unwrap()).unwrap();
        let total = path_length(&res);
        let parts: f64 = res
            .per_step_sq_norms()
            .chunks(w)
            .map(|c| c.iter().sum::<f64>())
            .sum();
        prop_assert!(close(total, parts, 1e-12));
    }

    #[test]
    fn magnitude_bound_holds(t in trace_strategy(8, 50), cfg in family_strategy()) {
        prop_assume!(validate_trace(&t).total_energy > 0.0);
        let r = predictability_report(&t, cfg).unwrap();
        if r.bound_applicable {
            prop_assert!(r.kappa <= r.alpha_bound.unwrap() + 1e-9);
        }
    }

    #[test]
    fn energy_is_permutation_and_rotation_invariant(
        d in 1usize..8,
        n in 1usize..40,
        seed in any::<u64>(),
    ) {
        let mut rng = CounterRng::new(seed, 3);
        let t = GradientTrace::new(d, rng.normal_vec(d * n)).unwrap();
        let e = validate_trace(&t).total_energy;

        let mut order: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            order.swap(i, rng.below(i as u64 + 1) as usize);
        }
        let shuffled = rebuild(&t, |s, _| t.column(order[s]).to_vec());
        prop_assert!(close(validate_trace(&shuffled).total_energy, e, 1e-12));

        let q = random_orthogonal(d, &mut rng);
        let rotated = rebuild(&t, |_, col| q.matvec(col));
        prop_assert!(close(validate_trace(&rotated).total_energy, e, 1e-10));
    }

    #[test]
    fn tiny_beta_ema_is_one_step(t in trace_strategy(5, 30)) {
        let ema = run_predictor(&t, PredictorConfig::ema(1e-12).unwrap()).unwrap();
        let one = run_predictor(&t, PredictorConfig::OneStep).unwrap();
        let scale = t.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for s in 1..t.steps() {
            for (a, b) in ema.column(s).iter().zip(one.column(s)) {
                prop_assert!((a - b).abs() <= 1e-9 * scale);
            }
        }
    }

    #[test]
    fn flat_trend_is_one_step(t in trace_strategy(5, 30)) {
        let trend = run_predictor(&t, PredictorConfig::trend(0.0).unwrap()).unwrap();
        let one = run_predictor(&t, PredictorConfig::OneStep).unwrap();
        for s in 1..t.steps() {
            prop_assert_eq!(trend.column(s), one.column(s));
        }
    }

    #[test]
    fn projection_commutes_with_differencing(
        d in 2usize..40,
        k in 1usize..16,
        n in 2usize..30,
        seed in any::<u64>(),
    ) {
        let t = GradientTrace::new(d, CounterRng::new(seed, 4).normal_vec(d * n)).unwrap();
        let proj = make_projection(d, k, seed).unwrap();
        let lhs = increment_matrix(&apply_projection(&proj, &t).unwrap()).unwrap();
        let h = increment_matrix(&t).unwrap();
        let rhs = proj.matrix().matmul(h.matrix()).unwrap();
        let scale = rhs.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in lhs.matrix().as_slice().iter().zip(rhs.as_slice()) {
            prop_assert!((a - b).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn singular_values_survive_rotation(
        d in 1usize..10,
        n in 2usize..30,
        seed in any::<u64>(),
    ) {
        let mut rng = CounterRng::new(seed, 5);
        let t = GradientTrace::new(d, rng.normal_vec(d * n)).unwrap();
        let q = random_orthogonal(d, &mut rng);
        let rotated = rebuild(&t, |_, col| q.matvec(col));
        let a = singular_spectrum(&increment_matrix(&t).unwrap()).unwrap();
        let b = singular_spectrum(&increment_matrix(&rotated).unwrap()).unwrap();
        let top = a.singular_values[0];
        for (x, y) in a.singular_values.iter().zip(&b.singular_values) {
            prop_assert!((x - y).abs() <= 1e-8 * top);
        }
    }

    #[test]
    fn spectrum_invariants(rows in 1usize..20, cols in 1usize..40, seed in any::<u64>()) {
        let m = Matrix::gaussian(rows, cols, &mut CounterRng::new(seed, 6));
        let fro = m.frobenius_sq();
        let h = gradpred::spectral::IncrementMatrix::from_matrix(m).unwrap();
        let spec = singular_spectrum(&h).unwrap();
        prop_assert!(close(spec.total_energy, fro, 1e-8));
        prop_assert!(spec.singular_values.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(spec.cumulative_fractions.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!((spec.cumulative_fractions.last().unwrap() - 1.0).abs() <= 1e-10);
        let ranks: Vec<usize> = [0.01, 0.05, 0.1, 0.3]
            .iter()
            .map(|&e| predictable_rank(&spec, e).unwrap())
            .collect();
        prop_assert!(ranks.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(ranks.iter().all(|&r| r >= 1 && r <= rows.min(cols)));
        for r in 1..=rows.min(cols) {
            let res = best_rank_r_residual(&h, r).unwrap();
            let tail = tail_energy(&spec, r).unwrap();
            prop_assert!((res - tail).abs() <= 1e-8 * fro);
        }
    }
}
