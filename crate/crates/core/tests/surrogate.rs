mod common;

use common::{gaussian, gradient_check, random_instance, rng, two_layer_instance};
use hwnas::estimator::{synth_forward, train_single_batch, SurrogateNet, SurrogateTask};
use hwnas::genotype::{enumerate_space, Genotype, Operation, NUM_EDGES, SPACE_SIZE};

#[test]
fn gradients_match_central_differences() {
    let mut r = rng(11);
    let mut worst: f64 = 0.0;
    for id in 0..100 {
        let inst = random_instance(&mut r, id);
        worst = worst.max(gradient_check(&inst, 1e-5));
    }
    assert!(worst <= 1e-4, "worst relative error {worst:e}");
}

#[test]
fn two_layer_gradient() {
    let mut r = rng(12);
    let inst = two_layer_instance(&mut r);
    assert_eq!(inst.net.depth(), 2);
    assert_eq!(inst.net.parameters().len(), 2);
    let err = gradient_check(&inst, 1e-5);
    assert!(err <= 1e-4, "relative error {err:e}");
}

#[test]
fn single_gene_neighbours_have_distinct_stacks() {
    let batch = gaussian(&mut rng(13), 8, 4);
    let stacks: Vec<_> = enumerate_space()
        .map(|g| synth_forward(&g, batch.view(), 99).unwrap())
        .collect();
    assert_eq!(stacks.len(), SPACE_SIZE);
    let mut pairs = 0usize;
    for g in enumerate_space() {
        for edge in 0..NUM_EDGES {
            for op in Operation::ALL {
                if op == g.gene(edge) {
                    continue;
                }
                let n = g.with_gene(edge, op);
                assert_ne!(stacks[g.index()], stacks[n.index()], "{g} vs {n}");
                pairs += 1;
            }
        }
    }
    assert_eq!(pairs, SPACE_SIZE * NUM_EDGES * 4);
}

#[test]
fn training_raises_similarity_on_pinned_instance() {
    let task = SurrogateTask::<f64>::synthetic(32, 16, 2024).unwrap();
    let g: Genotype = "|nor_conv_1x1~0|+|skip_connect~0|nor_conv_3x3~1|+|none~0|avg_pool_3x3~1|nor_conv_1x1~2|"
        .parse()
        .unwrap();
    let net = SurrogateNet::from_genotype(&g, 16, 16, 7).unwrap();
    let trained = train_single_batch(net, &task.reference, &task.settings(100, 0.8, 1e-2)).unwrap();
    assert_eq!(trained.losses.len(), 101);
    assert!(
        trained.phi >= trained.initial_phi,
        "{} < {}",
        trained.phi,
        trained.initial_phi
    );
    // recorded from this fixed-seed run
    assert!(
        (trained.initial_phi - PINNED_INITIAL).abs() < 1e-9,
        "{:.12}",
        trained.initial_phi
    );
    assert!((trained.phi - PINNED_FINAL).abs() < 1e-9, "{:.12}", trained.phi);
}

const PINNED_INITIAL: f64 = 2.115608542519;
const PINNED_FINAL: f64 = 2.355503368891;

#[test]
fn small_steps_decrease_the_loss() {
    let task = SurrogateTask::<f64>::synthetic(32, 16, 5).unwrap();
    for idx in [17usize, 4242, 9001, 15624] {
        let g = Genotype::from_index(idx).unwrap();
        let net = SurrogateNet::from_genotype(&g, 16, 16, 3).unwrap();
        let trained = train_single_batch(net, &task.reference, &task.settings(100, 0.8, 1e-2)).unwrap();
        for w in trained.losses.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{g}: loss rose {} -> {}", w[0], w[1]);
        }
    }
}

#[test]
fn single_precision_training_tracks_double() {
    let t64 = SurrogateTask::<f64>::synthetic(16, 8, 1).unwrap();
    let t32 = SurrogateTask::<f32>::synthetic(16, 8, 1).unwrap();
    let g = Genotype::uniform(Operation::NorConv3x3);
    let n64 = SurrogateNet::<f64>::from_genotype(&g, 8, 8, 2).unwrap();
    let n32 = SurrogateNet::<f32>::from_genotype(&g, 8, 8, 2).unwrap();
    let a = train_single_batch(n64, &t64.reference, &t64.settings(20, 0.8, 1e-2)).unwrap();
    let b = train_single_batch(n32, &t32.reference, &t32.settings(20, 0.8, 1e-2)).unwrap();
    assert!((a.phi - b.phi as f64).abs() < 1e-3);
}
