mod common;

use common::{naive_layer_term, orthogonal, random_stack, random_stack_shape, rng};
use hwnas::estimator::{layer_term, layer_terms, rmi_score, FeatureStack};
use ndarray::Array2;
use proptest::prelude::*;

#[test]
fn self_similarity_equals_depth() {
    let mut r = rng(1);
    for _ in 0..500 {
        let (rows, widths) = random_stack_shape(&mut r);
        let s = random_stack(&mut r, rows, &widths);
        let score = rmi_score(&s, &s).unwrap();
        assert!(
            (score - widths.len() as f64).abs() < 1e-9,
            "{score} vs {}",
            widths.len()
        );
    }
}

#[test]
fn symmetric_in_its_arguments() {
    let mut r = rng(2);
    for _ in 0..500 {
        let (rows, widths) = random_stack_shape(&mut r);
        let other: Vec<usize> = widths.iter().map(|w| w % 5 + 1).collect();
        let a = random_stack(&mut r, rows, &widths);
        let b = random_stack(&mut r, rows, &other);
        let ab = rmi_score(&a, &b).unwrap();
        let ba = rmi_score(&b, &a).unwrap();
        assert!((ab - ba).abs() < 1e-12, "{ab} vs {ba}");
    }
}

#[test]
fn matches_brute_force_definition() {
    let mut r = rng(3);
    for _ in 0..300 {
        let (rows, widths) = random_stack_shape(&mut r);
        let a = random_stack(&mut r, rows, &widths);
        let b = random_stack(&mut r, rows, &widths);
        for ((x, y), t) in a.layers().iter().zip(b.layers()).zip(layer_terms(&a, &b).unwrap()) {
            assert!((t - naive_layer_term(x, y)).abs() < 1e-12);
        }
    }
}

#[test]
fn invariant_under_orthogonal_right_multiplication() {
    let mut r = rng(4);
    for _ in 0..200 {
        let (rows, widths) = random_stack_shape(&mut r);
        let a = random_stack(&mut r, rows, &widths);
        let b = random_stack(&mut r, rows, &widths);
        let base = rmi_score(&a, &b).unwrap();
        let rotated_b = b.map_layers(|_, x| x.dot(&orthogonal(&mut r, x.ncols()))).unwrap();
        let rotated_a = a.map_layers(|_, x| x.dot(&orthogonal(&mut r, x.ncols()))).unwrap();
        assert!((rmi_score(&a, &rotated_b).unwrap() - base).abs() < 1e-9);
        assert!((rmi_score(&rotated_a, &b).unwrap() - base).abs() < 1e-9);
        let self_rotated = rmi_score(&a, &rotated_a).unwrap();
        assert!((self_rotated - widths.len() as f64).abs() < 1e-9);
    }
}

#[test]
fn invariant_under_isotropic_scaling() {
    let mut r = rng(5);
    for _ in 0..200 {
        let (rows, widths) = random_stack_shape(&mut r);
        let a = random_stack(&mut r, rows, &widths);
        let b = random_stack(&mut r, rows, &widths);
        let base = rmi_score(&a, &b).unwrap();
        let scales = [1e-3, 0.37, 2.0, 1e3];
        let scaled = b.map_layers(|i, x| x * scales[i % scales.len()]).unwrap();
        assert!((rmi_score(&a, &scaled).unwrap() - base).abs() < 1e-9);
        assert!((rmi_score(&scaled, &a).unwrap() - base).abs() < 1e-9);
    }
}

#[test]
fn identity_against_rank_one_projection() {
    let eye = Array2::<f64>::eye(2);
    let proj = ndarray::array![[1.0, 0.0], [0.0, 0.0]];
    let t = layer_term(eye.view(), proj.view()).unwrap();
    assert!((t - naive_layer_term(&eye, &proj)).abs() < 1e-15);
    assert!((t - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
}

#[test]
fn dead_layers_score_zero() {
    let a = FeatureStack::new(vec![Array2::<f64>::ones((4, 3)), Array2::zeros((4, 2))]).unwrap();
    let terms = layer_terms(&a, &a).unwrap();
    assert_eq!(terms, vec![1.0, 0.0]);
}

fn stack_strategy() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<Vec<f64>>, usize, Vec<usize>)> {
    (2usize..8, prop::collection::vec(1usize..6, 1..4)).prop_flat_map(|(rows, widths)| {
        let cells = |w: &Vec<usize>| {
            w.iter()
                .map(|&c| prop::collection::vec(-1e3f64..1e3, rows * c))
                .collect::<Vec<_>>()
        };
        (cells(&widths), cells(&widths), Just(rows), Just(widths))
    })
}

fn build(data: &[Vec<f64>], rows: usize, widths: &[usize]) -> FeatureStack<f64> {
    FeatureStack::new(
        data.iter()
            .zip(widths)
            .map(|(d, &w)| Array2::from_shape_vec((rows, w), d.clone()).unwrap())
            .collect(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn terms_are_bounded((a, b, rows, widths) in stack_strategy()) {
        let a = build(&a, rows, &widths);
        let b = build(&b, rows, &widths);
        for t in layer_terms(&a, &b).unwrap() {
            prop_assert!((0.0..=1.0).contains(&t));
        }
        let s = rmi_score(&a, &b).unwrap();
        prop_assert!(s >= 0.0 && s <= widths.len() as f64);
    }
}
