use fac_core::learner::{Mlp, OutputActivation};
use fac_oracles::central_gradient;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-5;
const TOL: f64 = 1e-4;

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-6))
        .fold(0.0, f64::max)
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn with_params(net: &Mlp, p: &[f64]) -> Mlp {
    let mut n = net.clone();
    n.params_mut().copy_from_slice(p);
    n
}

#[test]
fn parameter_and_input_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let outputs = [
        OutputActivation::Identity,
        OutputActivation::ScaledTanh {
            low: vec![-2.0, 0.0],
            high: vec![2.0, 1.0],
        },
    ];
    for out in outputs {
        for _ in 0..10 {
            let net = Mlp::new(&[4, 7, 5, 2], out.clone(), &mut rng).unwrap();
            let x = random_vec(&mut rng, 4);
            let up = random_vec(&mut rng, 2);
            let dot = |n: &Mlp, x: &[f64]| n.forward(x).unwrap().iter().zip(&up).map(|(a, b)| a * b).sum::<f64>();
            let (pg, ig) = net.gradient(&x, &up).unwrap();
            let fd_p = central_gradient(|p| dot(&with_params(&net, p), &x), net.params(), STEP);
            let fd_x = central_gradient(|xx| dot(&net, xx), &x, STEP);
            assert!(rel_err(&pg, &fd_p) <= TOL, "params {}", rel_err(&pg, &fd_p));
            assert!(rel_err(&ig, &fd_x) <= TOL, "input {}", rel_err(&ig, &fd_x));
        }
    }
}

#[test]
fn critic_td_loss_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..10 {
        let critic = Mlp::new(&[4, 8, 8, 1], OutputActivation::Identity, &mut rng).unwrap();
        let x = random_vec(&mut rng, 4);
        let y = rng.random_range(-3.0..3.0);
        let loss = |n: &Mlp| (n.forward(&x).unwrap()[0] - y).powi(2);
        let q = critic.forward(&x).unwrap()[0];
        let (g, _) = critic.gradient(&x, &[2.0 * (q - y)]).unwrap();
        let fd = central_gradient(|p| loss(&with_params(&critic, p)), critic.params(), STEP);
        assert!(rel_err(&g, &fd) <= TOL);
    }
}

#[test]
fn actor_gradient_through_critic() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..10 {
        let actor = Mlp::new(
            &[3, 8, 8, 1],
            OutputActivation::ScaledTanh {
                low: vec![-2.0],
                high: vec![2.0],
            },
            &mut rng,
        )
        .unwrap();
        let critic = Mlp::new(&[4, 8, 8, 1], OutputActivation::Identity, &mut rng).unwrap();
        let s = random_vec(&mut rng, 3);
        let objective = |a_net: &Mlp| {
            let mut x = s.clone();
            x.extend(a_net.forward(&s).unwrap());
            critic.forward(&x).unwrap()[0]
        };
        let mut x = s.clone();
        x.extend(actor.forward(&s).unwrap());
        let (_, dq_dx) = critic.gradient(&x, &[1.0]).unwrap();
        let (g, _) = actor.gradient(&s, &dq_dx[3..]).unwrap();
        let fd = central_gradient(|p| objective(&with_params(&actor, p)), actor.params(), STEP);
        assert!(rel_err(&g, &fd) <= TOL);
    }
}
