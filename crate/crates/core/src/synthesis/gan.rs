//! GAN losses, gradients, training loop and sampling.
//!
//! Losses are minimized. The discriminator minimizes
//! `-mean ln D(x) - mean ln(1 - D(G(z)))`, i.e. ascends the two-player
//! value; the generator minimizes the non-saturating `-mean ln D(G(z))`.
//! Log arguments are floored at [`LOG_FLOOR`]; below the floor the loss is
//! flat and contributes no gradient.

use ndarray::{s, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{Activation, Adam, EpochLoss, GanConfig, GeneratorNet, LatentSpec, MlpGrads, MlpNet};
use crate::error::{Error, Result};
use crate::rng::{self, SimRng};

pub const LOG_FLOOR: f64 = 1e-12;

/// Gradients of both players' losses at the same parameters.
#[derive(Debug, Clone)]
pub struct GanGrads {
    pub grad_g: MlpGrads,
    pub grad_d: MlpGrads,
    pub d_loss: f64,
    pub g_loss: f64,
}

/// `-mean ln(p)` and its gradient w.r.t. each `p`.
fn neg_log_mean(p: &Array2<f64>) -> (f64, Array2<f64>) {
    let n = p.nrows() as f64;
    let loss = -p.iter().map(|&v| v.max(LOG_FLOOR).ln()).sum::<f64>() / n;
    let grad = p.mapv(|v| if v > LOG_FLOOR { -1.0 / (v * n) } else { 0.0 });
    (loss, grad)
}

/// `-mean ln(1 - p)` and its gradient w.r.t. each `p`.
fn neg_log_one_minus_mean(p: &Array2<f64>) -> (f64, Array2<f64>) {
    let n = p.nrows() as f64;
    let loss = -p.iter().map(|&v| (1.0 - v).max(LOG_FLOOR).ln()).sum::<f64>() / n;
    let grad = p.mapv(|v| if 1.0 - v > LOG_FLOOR { 1.0 / ((1.0 - v) * n) } else { 0.0 });
    (loss, grad)
}

fn check_players(g: &MlpNet, d: &MlpNet, latent: ArrayView2<f64>) -> Result<()> {
    let last = d.layers.last().expect("non-empty network");
    if last.activation != Activation::Sigmoid || d.output_dim() != 1 {
        return Err(Error::contract("discriminator must end in a single sigmoid unit"));
    }
    if g.output_dim() != d.input_dim() {
        return Err(Error::contract("generator output does not match discriminator input"));
    }
    if latent.nrows() == 0 {
        return Err(Error::contract("empty latent batch"));
    }
    Ok(())
}

pub fn discriminator_loss_grads(
    g: &MlpNet,
    d: &MlpNet,
    real: ArrayView2<f64>,
    latent: ArrayView2<f64>,
) -> Result<(MlpGrads, f64)> {
    check_players(g, d, latent)?;
    if real.nrows() == 0 {
        return Err(Error::contract("empty real batch"));
    }
    let fake = g.forward(latent)?;
    let real_cache = d.forward_cached(real)?;
    let fake_cache = d.forward_cached(fake.view())?;
    let (l_real, g_real) = neg_log_mean(real_cache.output());
    let (l_fake, g_fake) = neg_log_one_minus_mean(fake_cache.output());
    let (mut grads, _) = d.backward(&real_cache, &g_real);
    let (fake_grads, _) = d.backward(&fake_cache, &g_fake);
    for ((w, b), (fw, fb)) in grads.layers.iter_mut().zip(fake_grads.layers) {
        *w += &fw;
        *b += &fb;
    }
    Ok((grads, l_real + l_fake))
}

pub fn generator_loss_grads(g: &MlpNet, d: &MlpNet, latent: ArrayView2<f64>) -> Result<(MlpGrads, f64)> {
    check_players(g, d, latent)?;
    let g_cache = g.forward_cached(latent)?;
    let d_cache = d.forward_cached(g_cache.output().view())?;
    let (loss, grad_p) = neg_log_mean(d_cache.output());
    let grad_fake = d.backward_input(&d_cache, &grad_p);
    let (grads, _) = g.backward(&g_cache, &grad_fake);
    Ok((grads, loss))
}

pub fn discriminator_loss(g: &MlpNet, d: &MlpNet, real: ArrayView2<f64>, latent: ArrayView2<f64>) -> Result<f64> {
    check_players(g, d, latent)?;
    let fake = g.forward(latent)?;
    let (l_real, _) = neg_log_mean(&d.forward(real)?);
    let (l_fake, _) = neg_log_one_minus_mean(&d.forward(fake.view())?);
    Ok(l_real + l_fake)
}

pub fn generator_loss(g: &MlpNet, d: &MlpNet, latent: ArrayView2<f64>) -> Result<f64> {
    check_players(g, d, latent)?;
    let fake = g.forward(latent)?;
    Ok(neg_log_mean(&d.forward(fake.view())?).0)
}

/// Loss gradients for both players on one real batch and one latent batch.
pub fn gan_grads(g: &MlpNet, d: &MlpNet, real: ArrayView2<f64>, latent: ArrayView2<f64>) -> Result<GanGrads> {
    let (grad_d, d_loss) = discriminator_loss_grads(g, d, real, latent)?;
    let (grad_g, g_loss) = generator_loss_grads(g, d, latent)?;
    Ok(GanGrads {
        grad_g,
        grad_d,
        d_loss,
        g_loss,
    })
}

/// `n` latent rows (one-hot category, then standard normal noise) and the
/// drawn categories.
pub fn sample_latent<R: Rng>(spec: &LatentSpec, n: usize, rng: &mut R) -> (Array2<f64>, Vec<usize>) {
    let mut z = Array2::<f64>::zeros((n, spec.input_dim()));
    let mut cats = Vec::with_capacity(n);
    for mut row in z.outer_iter_mut() {
        let u = rng.random_range(0..spec.k_categories);
        row[u] = 1.0;
        for v in row.slice_mut(s![spec.k_categories..]) {
            *v = rng.sample(StandardNormal);
        }
        cats.push(u);
    }
    (z, cats)
}

pub fn sample_generator(gen: &GeneratorNet, n: usize, seed: u64) -> Result<Array2<f64>> {
    if n == 0 {
        return Err(Error::precondition("sample size must be at least 1"));
    }
    let (z, _) = sample_latent(&gen.latent, n, &mut rng::seeded(seed));
    gen.net.forward(z.view())
}

/// Trains a generator on rows scaled to `[0, 1]`.
pub fn train_local_gan(x: ArrayView2<f64>, cfg: &GanConfig) -> Result<GeneratorNet> {
    cfg.validate()?;
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(Error::EmptyInput("no rows to train on".into()));
    }
    if x.iter().any(|v| !(-1e-9..=1.0 + 1e-9).contains(v)) {
        return Err(Error::precondition("training data must be scaled to [0, 1]"));
    }
    let d = x.ncols();
    let mut rng: SimRng = rng::seeded(cfg.seed);
    let g_sizes: Vec<usize> = std::iter::once(cfg.latent.input_dim())
        .chain(cfg.generator_hidden.iter().copied())
        .chain(std::iter::once(d))
        .collect();
    let d_sizes: Vec<usize> = std::iter::once(d)
        .chain(cfg.discriminator_hidden.iter().copied())
        .chain(std::iter::once(1))
        .collect();
    let mut gen = MlpNet::init(&g_sizes, Activation::Relu, Activation::Sigmoid, &mut rng);
    let mut disc = MlpNet::init(&d_sizes, Activation::Relu, Activation::Sigmoid, &mut rng);
    let mut opt_g = Adam::new(&gen, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2);
    let mut opt_d = Adam::new(&disc, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2);

    let n = x.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let (mut d_sum, mut g_sum, mut d_cnt, mut g_cnt) = (0.0, 0.0, 0usize, 0usize);
        for chunk in order.chunks(cfg.batch_size) {
            let real = x.select(Axis(0), chunk);
            let (z, _) = sample_latent(&cfg.latent, chunk.len(), &mut rng);
            let (grads, loss) = discriminator_loss_grads(&gen, &disc, real.view(), z.view())?;
            opt_d.step(&mut disc, &grads);
            d_sum += loss;
            d_cnt += 1;
            for _ in 0..cfg.generator_steps {
                let (z, _) = sample_latent(&cfg.latent, chunk.len(), &mut rng);
                let (grads, loss) = generator_loss_grads(&gen, &disc, z.view())?;
                opt_g.step(&mut gen, &grads);
                g_sum += loss;
                g_cnt += 1;
            }
        }
        let record = EpochLoss {
            discriminator: d_sum / d_cnt as f64,
            generator: if g_cnt > 0 { g_sum / g_cnt as f64 } else { 0.0 },
        };
        if !record.discriminator.is_finite() || !record.generator.is_finite() {
            return Err(Error::TrainingDiverged { epoch });
        }
        history.push(record);
    }
    let mut out = GeneratorNet::new(gen, cfg.latent)?;
    out.train_loss_history = history;
    Ok(out)
}
