//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use ndarray::Array2;
use rand::Rng;
use sdafc::rng::seeded;
use sdafc::synthesis::{
    discriminator_loss, discriminator_loss_grads, generator_loss, generator_loss_grads, sample_latent,
    Activation, LatentSpec, MlpNet,
};

pub const FD_STEP: f64 = 1e-5;

/// Outcome of comparing analytic gradients with central differences.
#[derive(Debug, Clone, Copy)]
pub struct GradCheck {
    pub max_rel_err: f64,
    pub checked: usize,
    /// Parameters skipped because the perturbation crossed a relu kink.
    pub skipped: usize,
}

/// `|a - b| / max(|a|, |b|)`, with magnitudes below 1e-6 treated as 1e-6
/// so that round-off on vanishing gradients is not amplified.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

fn relu_pattern(net: &MlpNet, x: &Array2<f64>) -> Vec<bool> {
    let cache = net.forward_cached(x.view()).unwrap();
    net.layers
        .iter()
        .zip(&cache.pre)
        .filter(|(l, _)| l.activation == Activation::Relu)
        .flat_map(|(_, z)| z.iter().map(|&v| v > 0.0).collect::<Vec<_>>())
        .collect()
}

/// Both players' relu patterns on real and generated rows.
fn patterns(g: &MlpNet, d: &MlpNet, real: &Array2<f64>, z: &Array2<f64>) -> Vec<bool> {
    let fake = g.forward(z.view()).unwrap();
    let mut p = relu_pattern(g, z);
    p.extend(relu_pattern(d, real));
    p.extend(relu_pattern(d, &fake));
    p
}

fn pick_activation<R: Rng>(rng: &mut R) -> Activation {
    [Activation::Relu, Activation::Relu, Activation::Tanh, Activation::Sigmoid][rng.random_range(0..4)]
}

/// Builds a random generator/discriminator pair in the default layout
/// (two hidden layers, sigmoid outputs) with random small widths, and
/// checks every parameter of both on a 4-row batch.
pub fn gradient_check(seed: u64) -> GradCheck {
    let mut rng = seeded(seed);
    let k = rng.random_range(1..=3);
    let noise = rng.random_range(1..=3);
    let d = rng.random_range(1..=4);
    let latent = LatentSpec::new(k, noise).unwrap();
    let g_hidden = pick_activation(&mut rng);
    let d_hidden = pick_activation(&mut rng);
    let g_sizes = [latent.input_dim(), rng.random_range(2..=6), rng.random_range(2..=6), d];
    let d_sizes = [d, rng.random_range(2..=6), rng.random_range(2..=6), 1];
    let mut g = MlpNet::init(&g_sizes, g_hidden, Activation::Sigmoid, &mut rng);
    let mut disc = MlpNet::init(&d_sizes, d_hidden, Activation::Sigmoid, &mut rng);
    // Larger weights than the default init so that gradients are not tiny.
    for net in [&mut g, &mut disc] {
        for i in 0..net.param_count() {
            let v = net.param(i);
            net.set_param(i, 2.0 * v);
        }
    }
    let real = Array2::from_shape_simple_fn((4, d), || rng.random_range(0.0..1.0));
    let (z, _) = sample_latent(&latent, 4, &mut rng);

    let (grad_d, _) = discriminator_loss_grads(&g, &disc, real.view(), z.view()).unwrap();
    let (grad_g, _) = generator_loss_grads(&g, &disc, z.view()).unwrap();

    let mut out = GradCheck {
        max_rel_err: 0.0,
        checked: 0,
        skipped: 0,
    };
    for i in 0..disc.param_count() {
        let base = disc.param(i);
        let mut plus = disc.clone();
        plus.set_param(i, base + FD_STEP);
        let mut minus = disc.clone();
        minus.set_param(i, base - FD_STEP);
        if patterns(&g, &plus, &real, &z) != patterns(&g, &minus, &real, &z) {
            out.skipped += 1;
            continue;
        }
        let fd = (discriminator_loss(&g, &plus, real.view(), z.view()).unwrap()
            - discriminator_loss(&g, &minus, real.view(), z.view()).unwrap())
            / (2.0 * FD_STEP);
        out.max_rel_err = out.max_rel_err.max(rel_err(grad_d.get(i), fd));
        out.checked += 1;
    }
    for i in 0..g.param_count() {
        let base = g.param(i);
        let mut plus = g.clone();
        plus.set_param(i, base + FD_STEP);
        let mut minus = g.clone();
        minus.set_param(i, base - FD_STEP);
        if patterns(&plus, &disc, &real, &z) != patterns(&minus, &disc, &real, &z) {
            out.skipped += 1;
            continue;
        }
        let fd = (generator_loss(&plus, &disc, z.view()).unwrap() - generator_loss(&minus, &disc, z.view()).unwrap())
            / (2.0 * FD_STEP);
        out.max_rel_err = out.max_rel_err.max(rel_err(grad_g.get(i), fd));
        out.checked += 1;
    }
    out
}
