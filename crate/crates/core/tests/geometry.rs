mod common;

use common::{box_distance_sq_exhaustive, dense_diff1d, gram, jacobi_eigenvalues};
use cosparse::geometry::{
    dist_to_scaled_subdiff, tangent_cone_min_gain, width_upper_mc, SubdifferentialSpec,
};
use cosparse::harness::{gen_cosparse_frame_signal, gen_gradient_sparse_signal};
use cosparse::operators::random_unit_frame;
use cosparse::{DenseMatrix, Operator, SeededRng};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn box_distance_matches_active_set_enumeration(
        seed in any::<u64>(),
        d in 3usize..9,
        s_frac in 0.0f64..1.0,
        t in 0.05f64..3.0,
    ) {
        let s = ((d - 1) as f64 * s_frac) as usize;
        let mut rng = SeededRng::new(seed, 0);
        let signal = gen_gradient_sparse_signal(&mut rng, d, s).unwrap();
        let op = Operator::diff1d(d).unwrap();
        let spec = SubdifferentialSpec::at(&op, &signal.x, None).unwrap();
        let g: Vec<f64> = (0..d).map(|_| rng.gaussian()).collect();
        let got = dist_to_scaled_subdiff(&g, &spec, t, 1e-12, 200_000).unwrap();
        let want = box_distance_sq_exhaustive(&dense_diff1d(d), spec.fixed_part(), spec.cosupport(), &g, t);
        prop_assert!((got * got - want).abs() <= 1e-7 * (1.0 + want), "{} vs {want}", got * got);
    }
}

#[test]
fn distance_at_zero_scale_is_norm() {
    let op = Operator::diff1d(6).unwrap();
    let x = [0.0, 0.0, 1.0, 1.0, 1.0, 3.0];
    let spec = SubdifferentialSpec::at(&op, &x, None).unwrap();
    let g = [3.0, 4.0, 0.0, 0.0, 0.0, 0.0];
    assert_eq!(dist_to_scaled_subdiff(&g, &spec, 0.0, 1e-10, 100).unwrap(), 5.0);
    assert!(dist_to_scaled_subdiff(&g, &spec, -1.0, 1e-10, 100).is_err());
}

#[test]
fn spec_rejects_bad_fixed_part() {
    let op = Operator::diff1d(4).unwrap();
    assert!(SubdifferentialSpec::new(&op, vec![1.0, 0.0, -1.0], vec![1]).is_ok());
    assert!(SubdifferentialSpec::new(&op, vec![1.0, 0.5, -1.0], vec![1]).is_err());
    assert!(SubdifferentialSpec::new(&op, vec![1.0, 1.0, -1.0], vec![1]).is_err());
    assert!(SubdifferentialSpec::new(&op, vec![1.0, 0.0], vec![1]).is_err());
}

#[test]
fn cone_gain_lies_between_extreme_singular_values() {
    let mut rng = SeededRng::new(11, 0);
    let d = 20;
    let op = Operator::diff1d(d).unwrap();
    for m in [20usize, 30, 45] {
        let signal = gen_gradient_sparse_signal(&mut rng, d, 4).unwrap();
        let a = DenseMatrix::<f64>::gaussian(&mut rng, m, d);
        let rows: Vec<Vec<f64>> = (0..m).map(|i| a.row(i).to_vec()).collect();
        let ev = jacobi_eigenvalues(gram(&rows));
        let (lo, hi) = (ev[0].max(0.0).sqrt(), ev[d - 1].sqrt());
        let gain = tangent_cone_min_gain(&signal.x, &op, &a, &mut rng, 200).unwrap();
        assert!(gain >= lo * (1.0 - 1e-9) && gain <= hi * (1.0 + 1e-9), "m={m}: {lo} <= {gain} <= {hi}");
    }
}

#[test]
fn width_of_2d_and_frame_models_stays_below_closed_form() {
    let mut rng = SeededRng::new(12, 0);

    let side = 6;
    let op = Operator::diff2d(side).unwrap();
    let p = op.num_rows();
    let mut fixed = vec![0.0; p];
    let mut cos = Vec::new();
    for (j, f) in fixed.iter_mut().enumerate() {
        if rng.uniform() < 0.2 {
            *f = if rng.uniform() < 0.5 { -1.0 } else { 1.0 };
        } else {
            cos.push(j);
        }
    }
    let spec = SubdifferentialSpec::new(&op, fixed, cos).unwrap();
    let w = width_upper_mc(&spec, &mut rng, 400).unwrap();
    assert!(w.mean_sq_dist <= w.closed_form_upper + 3.0 * w.std_err, "{w:?}");
    assert!(w.mean_sq_dist > 0.0 && w.mean_sq_dist < (side * side) as f64);

    let (frame, _) = random_unit_frame::<f64>(&mut rng, 45, 30).unwrap();
    let signal = gen_cosparse_frame_signal(&mut rng, &frame, 20).unwrap();
    let spec = SubdifferentialSpec::at(&frame, &signal.x, None).unwrap();
    assert_eq!(spec.cosupport().len(), 20);
    let w = width_upper_mc(&spec, &mut rng, 400).unwrap();
    assert!(w.mean_sq_dist <= w.closed_form_upper + 3.0 * w.std_err, "{w:?}");
}

#[test]
fn width_needs_enough_samples() {
    let op = Operator::diff1d(5).unwrap();
    let spec = SubdifferentialSpec::at(&op, &[1.0, 1.0, 2.0, 2.0, 2.0], None).unwrap();
    assert!(width_upper_mc(&spec, &mut SeededRng::new(1, 1), 10).is_err());
}

#[test]
fn distance_is_convex_in_scale() {
    let mut rng = SeededRng::new(21, 0);
    for _ in 0..20 {
        let d = 12;
        let s = 1 + rng.index(6);
        let signal = gen_gradient_sparse_signal(&mut rng, d, s).unwrap();
        let op = Operator::diff1d(d).unwrap();
        let spec = SubdifferentialSpec::at(&op, &signal.x, None).unwrap();
        let g: Vec<f64> = (0..d).map(|_| rng.gaussian()).collect();
        let (t1, t2) = (3.0 * rng.uniform(), 3.0 * rng.uniform());
        let f = |t: f64| dist_to_scaled_subdiff(&g, &spec, t, 1e-12, 200_000).unwrap();
        assert!(f(0.5 * (t1 + t2)) <= 0.5 * (f(t1) + f(t2)) + 1e-8);
    }
}

#[test]
fn cone_gain_is_positively_homogeneous_in_the_matrix() {
    let mut rng = SeededRng::new(22, 0);
    let d = 30;
    let op = Operator::diff1d(d).unwrap();
    let signal = gen_gradient_sparse_signal(&mut rng, d, 3).unwrap();
    let a = DenseMatrix::<f64>::gaussian(&mut rng, 25, d);
    let base = tangent_cone_min_gain(&signal.x, &op, &a, &mut SeededRng::new(5, 5), 300).unwrap();
    let scaled = tangent_cone_min_gain(&signal.x, &op, &a.scaled(10.0), &mut SeededRng::new(5, 5), 300).unwrap();
    assert!((scaled - 10.0 * base).abs() <= 1e-9 * scaled);
    let zero = DenseMatrix::<f64>::zeros(25, d);
    assert_eq!(tangent_cone_min_gain(&signal.x, &op, &zero, &mut rng, 50).unwrap(), 0.0);
}

#[test]
fn cone_gain_shrinks_with_fewer_measurements() {
    let d = 30;
    let op = Operator::diff1d(d).unwrap();
    let median_gain = |m: usize| {
        let mut gains: Vec<f64> = (0..20)
            .map(|seed| {
                let mut rng = SeededRng::new(seed, 23);
                let signal = gen_gradient_sparse_signal(&mut rng, d, 3).unwrap();
                let a = DenseMatrix::<f64>::gaussian(&mut rng, m, d);
                tangent_cone_min_gain(&signal.x, &op, &a, &mut rng, 200).unwrap()
            })
            .collect();
        gains.sort_by(f64::total_cmp);
        0.5 * (gains[9] + gains[10])
    };
    let (g25, g15, g5) = (median_gain(25), median_gain(15), median_gain(5));
    assert!(g25 >= g15 && g15 >= g5, "{g25} {g15} {g5}");
    assert!(g5 >= 0.0);
}
