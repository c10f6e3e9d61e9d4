use std::sync::Arc;

use pai_core::analysis::TransformerMode;
use pai_core::oracle::oracle_abstracted;
use pai_core::{
    abstract_transformer, build_A, build_G, check_penrose, discretize, exact_transformer,
    lift_function, load_network, lower_conv, relu_sharp, sample_cell, sign_partition,
    tensor_product, tv_distance, AxisSpec, Conv2d, Distribution, GridSpec, LinearOperator, Matrix,
    Partition, Pipeline, PlanSpec, Rational, Role, Scalar, StateSpace,
};
use proptest::prelude::*;

fn q(n: i128, d: i128) -> Rational {
    Rational::new(n, d)
}

/// Assignment of `n` states to `cells` cells; cells may be empty.
fn assignment() -> impl Strategy<Value = (Vec<usize>, usize)> {
    (1usize..40, 1usize..12)
        .prop_flat_map(|(n, cells)| (prop::collection::vec(0..cells, n), Just(cells)))
}

fn distribution(n: usize) -> impl Strategy<Value = Distribution<Rational>> {
    prop::collection::vec(0i128..6, n).prop_filter_map("all zero", |w| {
        let total: i128 = w.iter().sum();
        (total > 0).then(|| {
            Distribution::new(
                w.len(),
                w.iter().enumerate().map(|(i, &x)| (i, q(x, total))),
            )
            .unwrap()
        })
    })
}

fn integer_grid(dims: usize, low: i128, high: i128) -> StateSpace {
    discretize(&GridSpec::cube(AxisSpec::integers(low, high), dims))
        .unwrap()
        .into()
}

proptest! {
    #[test]
    fn penrose_holds_for_any_partition((cell_of, cells) in assignment()) {
        let p = Partition::from_assignment(cell_of, cells).unwrap();
        let a = build_A::<Rational>(&p).unwrap();
        let g = build_G::<Rational>(&p).unwrap();
        let r = check_penrose(&a, &g).unwrap();
        prop_assert!(r.all_conditions());
        prop_assert!(r.ag_identity_on_support);
        prop_assert_eq!(r.ag_identity, r.empty_cells == 0);

        let af = build_A::<f64>(&p).unwrap();
        let gf = build_G::<f64>(&p).unwrap();
        prop_assert!(check_penrose(&af, &gf).unwrap().all_conditions());
    }

    #[test]
    fn concretize_then_abstract_is_idempotent((cell_of, cells) in assignment()) {
        let p = Partition::from_assignment(cell_of, cells).unwrap();
        let a = build_A::<Rational>(&p).unwrap();
        let g = build_G::<Rational>(&p).unwrap();
        let ga = g.matmul(&a, Role::General).unwrap();
        prop_assert_eq!(ga.matmul(&ga, Role::General).unwrap(), ga);
        for col in 0..a.cols() {
            prop_assert_eq!(a.entries().iter().filter(|e| e.1 == col).count(), 1);
        }
        for row in 0..g.rows() {
            prop_assert_eq!(g.entries().iter().filter(|e| e.0 == row).count(), 1);
        }
    }

    #[test]
    fn abstraction_preserves_mass(
        (cell_of, cells, d) in assignment()
            .prop_flat_map(|(cell_of, cells)| {
                let n = cell_of.len();
                (Just(cell_of), Just(cells), distribution(n))
            })
    ) {
        let p = Partition::from_assignment(cell_of, cells).unwrap();
        let ad = build_A::<Rational>(&p).unwrap().apply(&d).unwrap();
        prop_assert_eq!(ad.total(), q(1, 1));
        let gad = build_G::<Rational>(&p).unwrap().apply(&ad).unwrap();
        prop_assert_eq!(gad.total(), q(1, 1));
    }

    #[test]
    fn tensor_product_is_associative(
        d1 in distribution(3),
        d2 in distribution(2),
        d3 in distribution(4),
    ) {
        let left = tensor_product(&tensor_product(&d1, &d2), &d3);
        let right = tensor_product(&d1, &tensor_product(&d2, &d3));
        prop_assert_eq!(&left, &right);
        prop_assert_eq!(left.total(), q(1, 1));
        // last axis fastest
        prop_assert_eq!(left.get(2 * 8 + 4 + 3), d1.get(2) * d2.get(1) * d3.get(3));
    }

    #[test]
    fn lowered_convolution_matches_sliding_window(
        filter in prop::collection::vec(-3i128..=3, 4),
        image in prop::collection::vec(-5i128..=5, 20),
        bias in -2i128..=2,
    ) {
        let filter = Matrix::new(2, 2, filter.into_iter().map(Rational::from_integer).collect()).unwrap();
        let conv = Conv2d::new(filter, (4, 5), Some(vec![Rational::from_integer(bias); 12])).unwrap();
        let x: Vec<Rational> = image.into_iter().map(Rational::from_integer).collect();
        prop_assert_eq!(lower_conv(&conv).eval(&x), conv.eval(&x));
    }

    #[test]
    fn snapping_picks_nearest_with_ties_down(x in -400i64..=400) {
        let space: StateSpace = discretize(&GridSpec::cube(
            AxisSpec::range(q(-3, 1), q(3, 1), q(1, 2)), 1)).unwrap().into();
        let v = x as f64 / 100.0;
        if v.abs() > 3.25 {
            prop_assert!(space.locate(&[v]).is_err());
        } else if v.abs() < 3.25 {
            let snapped = space.point::<f64>(space.locate(&[v]).unwrap())[0];
            prop_assert!((snapped - v).abs() <= 0.25 + 1e-12);
            if (v * 4.0).fract() == 0.0 && (v * 2.0).fract() != 0.0 {
                prop_assert!(snapped < v);
            }
        }
    }

    #[test]
    fn pushforward_moves_points_to_their_images(
        w in prop::collection::vec(-2i128..=2, 2),
        b in -1i128..=1,
    ) {
        let dom_in = integer_grid(2, -2, 2);
        let dom_out = integer_grid(1, -9, 9);
        let f = |x: &[Rational]| -> pai_core::Result<Vec<Rational>> {
            Ok(vec![Rational::from_integer(w[0]) * x[0] + Rational::from_integer(w[1]) * x[1] + Rational::from_integer(b)])
        };
        let op = lift_function(f, &dom_in, &dom_out).unwrap();
        prop_assert!(op.column_sums().iter().all(|s| *s == q(1, 1)));
        for i in 0..dom_in.len() {
            let image = op.apply(&Distribution::point_mass(dom_in.len(), i).unwrap()).unwrap();
            let y = f(&dom_in.exact_point(i)).unwrap();
            prop_assert_eq!(image, Distribution::point_mass(dom_out.len(), dom_out.locate(&y).unwrap()).unwrap());
        }
    }

    #[test]
    fn relu_sharp_never_reaches_negative_cells(d in distribution(27)) {
        let space = integer_grid(3, -1, 1);
        let p = Arc::new(sign_partition(&space));
        let t = relu_sharp::<Rational>(p.clone()).unwrap();
        let out = t.apply(&d).unwrap();
        prop_assert_eq!(out.total(), q(1, 1));
        for (cell, _) in out.iter() {
            prop_assert!(!p.sign_digits(cell).unwrap().contains(&0));
        }
    }

    #[test]
    fn single_layer_agreement_on_within_cell_uniform_inputs(
        w in prop::collection::vec(-3i128..=3, 4),
        weights in prop::collection::vec(1i128..=5, 9),
    ) {
        let dom_in = integer_grid(2, -2, 2);
        let dom_out = integer_grid(2, -12, 12);
        let p_in = Arc::new(sign_partition(&dom_in));
        let p_out = Arc::new(sign_partition(&dom_out));
        let m = |x: &[Rational]| -> pai_core::Result<Vec<Rational>> {
            let c = |v: i128| Rational::from_integer(v);
            Ok(vec![c(w[0]) * x[0] + c(w[1]) * x[1], c(w[2]) * x[0] + c(w[3]) * x[1]])
        };
        let f = lift_function(m, &dom_in, &dom_out).unwrap();
        let a_out = build_A::<Rational>(&p_out).unwrap();
        let g_in = build_G::<Rational>(&p_in).unwrap();
        let t = abstract_transformer(&f, &a_out, &g_in).unwrap();
        prop_assert_eq!(&t, &exact_transformer(&f, p_in.clone(), p_out.clone()).unwrap().operator().clone());
        let total: i128 = weights.iter().sum();
        let v = Distribution::new(9, weights.iter().enumerate().map(|(c, &x)| (c, q(x, total)))).unwrap();
        let d = g_in.apply(&v).unwrap();
        let lhs = t.apply(&build_A::<Rational>(&p_in).unwrap().apply(&d).unwrap()).unwrap();
        let rhs = a_out.apply(&f.apply(&d).unwrap()).unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn sampling_is_deterministic_and_in_cell(seed in any::<u64>(), cell in 0usize..9) {
        let space = integer_grid(2, -2, 2);
        let p = sign_partition(&space);
        let a = sample_cell(&p, cell, 16, seed).unwrap();
        prop_assert_eq!(&a, &sample_cell(&p, cell, 16, seed).unwrap());
        prop_assert!(a.iter().all(|&m| p.cell_of(m) == cell));
    }
}

fn mlp_plan(step: &str) -> PlanSpec {
    let axis = format!(r#"{{"low": -3, "high": 3, "step": {step}}}"#);
    let out = format!(r#"{{"low": -6, "high": 6, "step": {step}}}"#);
    let relu = format!(r#"{{"low": 0, "high": 6, "step": {step}}}"#);
    PlanSpec::from_json(
        format!(
            r#"{{"format_version": 1, "arithmetic": "float",
                "input": {{"space": {{"grid": [{axis}, {axis}]}}, "partition": "sign"}},
                "stages": [{{"space": {{"grid": [{out}, {out}]}}, "partition": "sign"}},
                           {{"space": {{"grid": [{relu}, {relu}]}}, "partition": "sign", "relu": "sign_rule"}}]}}"#
        )
        .as_bytes(),
    )
    .unwrap()
}

const MLP: &[u8] = br#"{"format_version": 1, "layers": [
    {"type": "dense", "weights": [[1, 1], [1, 1]]}, {"type": "relu"}, {"type": "dense", "weights": [[1, 1]]}]}"#;

#[test]
fn grid_refinement_is_consistent() {
    let net = load_network(MLP).unwrap();
    for (coarse, fine) in [("0.5", "0.25"), ("0.1", "0.05"), ("0.02", "0.01")] {
        let run = |step: &str| {
            let p = Pipeline::<f64>::from_spec(&mlp_plan(step), &net).unwrap();
            p.run().unwrap().output().clone()
        };
        let points_per_axis = 6.0 / coarse.parse::<f64>().unwrap() + 1.0;
        let tv = tv_distance(&run(coarse), &run(fine)).unwrap();
        assert!(tv < 2.0 / points_per_axis, "step {coarse}: tv {tv}");
    }
}

#[test]
fn sampled_error_shrinks_with_more_samples() {
    let net = load_network(
        br#"{"format_version": 1, "layers": [{"type": "dense", "weights": [[1, 2]]}]}"#,
    )
    .unwrap();
    let spec = PlanSpec::from_json(
        br#"{"format_version": 1, "arithmetic": "float",
            "input": {"space": {"grid": [{"low": -3, "high": 3, "step": 1}, {"low": -3, "high": 3, "step": 1}]},
                      "partition": {"grid": {"cell_size": [3, 3], "anchor": [0, 0]}}},
            "stages": [{"space": "image", "partition": {"grid": {"cell_size": [2], "anchor": [0]}}}]}"#,
    )
    .unwrap();
    let p = Pipeline::<f64>::from_spec(&spec, &net).unwrap();
    let d = p.input_distribution().clone();
    let oracle = oracle_abstracted(&p, &d, 1000).unwrap();
    assert!(tv_distance(p.run().unwrap().output(), &oracle).unwrap() < 1e-12);
    let medians: Vec<f64> = [64, 128, 256, 512]
        .iter()
        .map(|&k| {
            let mut tvs: Vec<f64> = (0..10u64)
                .map(|seed| {
                    let s = p.clone().with_mode(TransformerMode::Sampled { k, seed });
                    tv_distance(s.run().unwrap().output(), &oracle).unwrap()
                })
                .collect();
            tvs.sort_by(f64::total_cmp);
            (tvs[4] + tvs[5]) / 2.0
        })
        .collect();
    assert!(
        medians.windows(2).all(|w| w[1] <= w[0]),
        "medians {medians:?}"
    );
}

#[test]
fn operator_application_keeps_float_mass() {
    let space = integer_grid(2, -3, 3);
    let p = sign_partition(&space);
    let a = build_A::<f64>(&p).unwrap();
    let d = Distribution::<f64>::uniform(space.len()).unwrap();
    let ad = a.apply(&d).unwrap();
    assert!((ad.total() - 1.0).abs() < 1e-9);
    let back = build_G::<f64>(&p).unwrap().apply(&ad).unwrap();
    assert!((back.total() - 1.0).abs() < 1e-9);
    let op = LinearOperator::<f64>::identity(9, Role::Transformer).unwrap();
    assert_eq!(op.apply(&ad).unwrap(), ad);
    assert!(ad.iter().all(|(_, p)| p.to_f64() > 0.0));
}
