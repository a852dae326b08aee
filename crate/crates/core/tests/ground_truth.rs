//! Simulator and Monte Carlo ground truth against closed-form oracles.

use proxcausal::rng::derive_seed;
use proxcausal::scenarios::synthetic_main;
use proxcausal::scm::{LinkFn, NodeRole, NodeSpec, Noise, Term};
use proxcausal::ScmSpec;

fn linear_confounded() -> ScmSpec {
    // Y = 2A + U, A = U + ε, U ~ Uniform[-1, 1].
    ScmSpec::new(vec![
        NodeSpec::new("U", NodeRole::Confounder, Noise::Uniform { lo: -1.0, hi: 1.0 }),
        NodeSpec::new("A", NodeRole::Treatment, Noise::standard_normal())
            .term(Term::of(1.0, LinkFn::Linear, "U")),
        NodeSpec::new("B", NodeRole::Treatment, Noise::standard_normal())
            .term(Term::of(1.0, LinkFn::Linear, "U")),
        NodeSpec::new("Y", NodeRole::Outcome, Noise::Normal { mean: 0.0, sd: 0.0 })
            .term(Term::of(2.0, LinkFn::Linear, "A"))
            .term(Term::of(1.0, LinkFn::Linear, "U")),
    ])
    .unwrap()
}

fn grid(points: &[f64]) -> Vec<Vec<f64>> {
    points.iter().map(|&a| vec![a]).collect()
}

#[test]
fn sampling_is_bit_identical_for_equal_inputs() {
    let spec = synthetic_main();
    let a = spec.sample(1000, 7).unwrap();
    let b = spec.sample(1000, 7).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.to_csv_string(), b.to_csv_string());
    assert_eq!(a.columns().len(), 9);
    assert_ne!(a, spec.sample(1000, 8).unwrap());
}

#[test]
fn outcome_minus_twice_treatment_has_zero_mean() {
    let ds = linear_confounded().sample(200_000, 3).unwrap();
    let y = &ds.column("Y").unwrap().values;
    let a = &ds.column("A").unwrap().values;
    let d: Vec<f64> = y.iter().zip(a).map(|(y, a)| y - 2.0 * a).collect();
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let sd = (d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!(mean.abs() <= 3.0 * sd / n.sqrt(), "mean {mean}, se {}", sd / n.sqrt());
}

#[test]
fn linear_truth_is_twice_the_dose() {
    let curve = linear_confounded()
        .ground_truth_curve("Y", &["A".into()], &grid(&[-1.0, 0.0, 0.5, 2.0]), 20_000, 1)
        .unwrap();
    let se = curve.std_errors.clone().unwrap();
    for ((a, v), s) in curve.grid.iter().zip(&curve.estimates).zip(&se) {
        assert!((v - 2.0 * a[0]).abs() <= 3.0 * s.max(1e-12), "{a:?}: {v} ± {s}");
    }
}

#[test]
fn untouched_outcome_gives_flat_truth() {
    // Y does not depend on B.
    let curve = linear_confounded()
        .ground_truth_curve("Y", &["B".into()], &grid(&[0.0, 0.5, 1.0]), 5_000, 2)
        .unwrap();
    let se = curve.std_errors.clone().unwrap();
    let first = curve.estimates[0];
    for (v, s) in curve.estimates.iter().zip(&se) {
        assert!((v - first).abs() <= 3.0 * s.max(1e-12));
    }
}

/// `E[A4²]` with `A4 = 1.5 + 0.5·sigmoid(−U) + ε`, by Simpson's rule over
/// `U ∈ [−1, 1]`.
fn second_moment_of_a4() -> f64 {
    let sig = |u: f64| 1.0 / (1.0 + u.exp());
    let m = 2000;
    let h = 2.0 / m as f64;
    let mut e2 = 0.0;
    for k in 0..=m {
        let u = -1.0 + k as f64 * h;
        let w = if k == 0 || k == m { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
        let g = 1.5 + 0.5 * sig(u);
        e2 += w * g * g;
    }
    // U has density 1/2 on [−1, 1]; the noise adds its unit variance.
    e2 * h / 3.0 / 2.0 + 1.0
}

#[test]
fn synthetic_second_outcome_matches_closed_form() {
    let spec = synthetic_main();
    let doses = [0.0, 1.0];
    let curve = spec
        .ground_truth_curve("Y2", &["A2".into()], &grid(&doses), 10_000, 5)
        .unwrap();
    let se = curve.std_errors.clone().unwrap();
    let e_a4_sq = second_moment_of_a4();
    for (k, &a) in doses.iter().enumerate() {
        let exact = -2.0 * (1.8 * a).cos() + 1.5 * e_a4_sq;
        let diff = (curve.estimates[k] - exact).abs();
        assert!(diff <= 3.0 * se[k], "a = {a}: {} vs {exact} (se {})", curve.estimates[k], se[k]);
    }
}

#[test]
fn standard_error_shrinks_with_replicates() {
    let spec = synthetic_main();
    let g = grid(&[0.5]);
    let target = ["A3".to_string()];
    let mut shrunk = 0;
    for t in 0..20 {
        let seed = derive_seed(77, t);
        let small = spec.ground_truth_curve("Y1", &target, &g, 1000, seed).unwrap();
        let large = spec.ground_truth_curve("Y1", &target, &g, 4000, seed).unwrap();
        let (s, l) = (small.std_errors.unwrap()[0], large.std_errors.unwrap()[0]);
        if l <= 0.6 * s {
            shrunk += 1;
        }
    }
    assert_eq!(shrunk, 20);
}

#[test]
fn intervention_differs_from_conditioning() {
    // Y3 = 0.7 A3² + 1.2 A4 + U + ε and A4 falls with U, so the observational
    // slope of Y3 on A4 sits below the interventional slope of 1.2.
    let spec = synthetic_main();
    let n = 200_000;
    let all = spec.sample_all(n, 9).unwrap();
    let idx = |name: &str| spec.node_index(name).unwrap();
    let (x, y) = (&all[idx("A4")], &all[idx("Y3")]);
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let resid: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - my - slope * (a - mx)).powi(2))
        .sum::<f64>()
        / (nf - 2.0);
    let slope_se = (resid / sxx).sqrt();

    let doit = spec
        .ground_truth_curve("Y3", &["A4".into()], &grid(&[0.0, 1.0]), 50_000, 10)
        .unwrap();
    // Shared exogenous draws make the difference exact.
    let do_slope = doit.estimates[1] - doit.estimates[0];
    assert!((do_slope - 1.2).abs() < 1e-9, "{do_slope}");
    assert!(do_slope - slope > 3.0 * slope_se, "observational {slope} ± {slope_se}");
}

#[test]
fn zero_replicates_and_empty_grid_rejected() {
    let spec = synthetic_main();
    assert!(spec.ground_truth_curve("Y1", &["A3".into()], &[], 10, 0).is_err());
    assert!(spec.ground_truth_curve("Y1", &["A3".into()], &grid(&[0.0]), 0, 0).is_err());
    assert!(spec.ground_truth_curve("Y9", &["A3".into()], &grid(&[0.0]), 1, 0).is_err());
}
