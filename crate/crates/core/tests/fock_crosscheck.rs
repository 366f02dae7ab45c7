use num_complex::Complex64;
use qonn_core::fock::fock_network;
use qonn_core::gaussian::GaussianLayerParams;
use qonn_core::ladder::{LadderOp, LayerOps};
use qonn_core::model::{evaluate_network, NetworkLayer};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_layer(n: usize, r_max: f64, d_max: f64, ops: Vec<LadderOp>, rng: &mut ChaCha8Rng) -> NetworkLayer {
    let u = |rng: &mut ChaCha8Rng| (0..n * n).map(|_| rng.random_range(-3.0..3.0)).collect::<Vec<f64>>();
    let params = GaussianLayerParams {
        u1: u(rng),
        r: (0..n).map(|_| rng.random_range(-r_max..r_max)).collect(),
        u2: u(rng),
        delta: (0..n)
            .map(|_| Complex64::new(rng.random_range(-d_max..d_max), rng.random_range(-d_max..d_max)))
            .collect(),
    };
    NetworkLayer { params, ops: LayerOps { ops } }
}

fn random_string(n: usize, len: usize, rng: &mut ChaCha8Rng) -> Vec<LadderOp> {
    (0..len).map(|_| LadderOp { mode: rng.random_range(0..n), dagger: rng.random_bool(0.5) }).collect()
}

fn compare(n: usize, layers: &[NetworkLayer], alpha: &[f64], obs: Vec<Vec<LadderOp>>, tol: f64) {
    let (eng, norm_e) = evaluate_network(n, layers, alpha, obs.clone()).unwrap();
    let (orc, norm_o) = fock_network(n, 60, layers, alpha, &obs, 1e-6).unwrap();
    assert!((norm_e - norm_o).abs() <= tol * norm_o.max(1.0), "norm {norm_e} vs {norm_o}");
    for ((e, o), ops) in eng.iter().zip(&orc).zip(&obs) {
        assert!((e - o).norm() <= tol * o.norm().max(1.0), "{ops:?}: {e} vs {o}");
    }
}

#[test]
fn gaussian_circuits_match() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for n in 1..=2 {
        for _ in 0..4 {
            let layers = vec![random_layer(n, 0.4, 0.5, vec![], &mut rng)];
            let obs: Vec<_> = (1..=4).map(|len| random_string(n, len, &mut rng)).collect();
            compare(n, &layers, &[0.6], obs, 1e-8);
        }
    }
}

#[test]
fn multilayer_subtraction_matches() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..3 {
        let layers = vec![
            random_layer(2, 0.4, 0.4, vec![LadderOp::annihilate(0)], &mut rng),
            random_layer(2, 0.4, 0.4, vec![LadderOp::annihilate(1)], &mut rng),
            random_layer(2, 0.3, 0.4, vec![LadderOp::annihilate(0)], &mut rng),
        ];
        let obs: Vec<_> = (1..=3).map(|len| random_string(2, len, &mut rng)).collect();
        compare(2, &layers, &[0.7, -0.4], obs, 1e-8);
    }
}

#[test]
fn mixed_addition_and_subtraction_matches() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let layers = vec![
        random_layer(2, 0.3, 0.3, vec![LadderOp::create(1), LadderOp::annihilate(0)], &mut rng),
        random_layer(2, 0.3, 0.3, vec![LadderOp::create(0)], &mut rng),
    ];
    let obs: Vec<_> = (1..=4).map(|len| random_string(2, len, &mut rng)).collect();
    compare(2, &layers, &[0.5, 0.2], obs, 1e-8);
}

#[test]
fn single_mode_addition_closed_forms() {
    use qonn_core::activations::{phi_addition_n, phi_addition_squeezed};
    let a = vec![vec![LadderOp::annihilate(0)]];
    let (v, _) = fock_network(
        1,
        60,
        &[NetworkLayer { params: identity(1), ops: LayerOps { ops: vec![LadderOp::create(0)] } }],
        &[3.0],
        &a,
        1e-9,
    )
    .unwrap();
    assert!((2f64.sqrt() * v[0].re - phi_addition_n(3.0, 1).unwrap()).abs() < 1e-8);

    let mut p = identity(1);
    p.r = vec![0.5];
    let layer = NetworkLayer { params: p, ops: LayerOps { ops: vec![LadderOp::create(0)] } };
    let (v, _) = fock_network(1, 60, std::slice::from_ref(&layer), &[1.0], &a, 1e-6).unwrap();
    assert!((2f64.sqrt() * v[0].re - phi_addition_squeezed(1.0, 0.5)).abs() < 1e-8);
    let (e, _) = evaluate_network(1, &[layer], &[1.0], a).unwrap();
    assert!((2f64.sqrt() * e[0].re - phi_addition_squeezed(1.0, 0.5)).abs() < 1e-10);
}

fn identity(n: usize) -> GaussianLayerParams<f64> {
    GaussianLayerParams {
        u1: vec![0.0; n * n],
        r: vec![0.0; n],
        u2: vec![0.0; n * n],
        delta: vec![Complex64::new(0.0, 0.0); n],
    }
}
