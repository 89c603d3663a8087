//! Per-client generative models and synthetic sampling.
//!
//! The GAN generator takes a one-hot category concatenated with standard
//! normal noise. Training runs on min-max scaled rows in `[0, 1]`; the
//! federation layer folds the inverse scaling into an extra identity
//! layer before upload (see [`GeneratorNet::with_output_affine`]) so that
//! samples come out in the client's native coordinates.

mod adam;
mod gan;
mod gmm;
mod mlp;

pub use adam::Adam;
pub use gan::{
    discriminator_loss, discriminator_loss_grads, gan_grads, generator_loss, generator_loss_grads,
    sample_generator, sample_latent, train_local_gan, GanGrads, LOG_FLOOR,
};
pub use gmm::{fit_gmm_synthesizer, GaussianMixtureSampler, VARIANCE_FLOOR};
pub use mlp::{sigmoid, Activation, DenseLayer, ForwardCache, MlpGrads, MlpNet, SIGMOID_CLAMP};

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatentSpec {
    #[serde(rename = "k")]
    pub k_categories: usize,
    pub noise_dim: usize,
}

impl LatentSpec {
    pub fn new(k_categories: usize, noise_dim: usize) -> Result<Self> {
        let spec = Self {
            k_categories,
            noise_dim,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// 8 noise dimensions for data with at most 16 features, 32 above.
    pub fn default_for(k: usize, d: usize) -> Self {
        Self {
            k_categories: k,
            noise_dim: if d <= 16 { 8 } else { 32 },
        }
    }

    pub fn input_dim(&self) -> usize {
        self.k_categories + self.noise_dim
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_categories == 0 || self.noise_dim == 0 {
            return Err(Error::precondition("latent needs k >= 1 and noise_dim >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GanConfig {
    pub latent: LatentSpec,
    pub generator_hidden: Vec<usize>,
    pub discriminator_hidden: Vec<usize>,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Generator updates after each discriminator update.
    pub generator_steps: usize,
    pub seed: u64,
}

impl GanConfig {
    /// Default architecture and optimizer settings for `k` clusters in `d` dimensions.
    pub fn defaults(k: usize, d: usize) -> Self {
        Self {
            latent: LatentSpec::default_for(k, d),
            generator_hidden: vec![64, 128],
            discriminator_hidden: vec![128, 64],
            learning_rate: 2e-4,
            adam_beta1: 0.5,
            adam_beta2: 0.999,
            batch_size: 64,
            epochs: 500,
            generator_steps: 1,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.latent.validate()?;
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::precondition("learning rate must be positive"));
        }
        for (name, b) in [("beta1", self.adam_beta1), ("beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::precondition(format!("{name} must lie in [0, 1)")));
            }
        }
        if self.batch_size == 0 {
            return Err(Error::precondition("batch size must be at least 1"));
        }
        if self.generator_hidden.contains(&0) || self.discriminator_hidden.contains(&0) {
            return Err(Error::precondition("hidden layers must be non-empty"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub discriminator: f64,
    pub generator: f64,
}

/// A trained generator together with its latent layout.
///
/// Serializes to `{latent: {k, noise_dim}, layers: [...]}`; the loss
/// history stays local.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GeneratorDoc", into = "GeneratorDoc")]
pub struct GeneratorNet {
    pub net: MlpNet,
    pub latent: LatentSpec,
    pub train_loss_history: Vec<EpochLoss>,
}

#[derive(Serialize, Deserialize)]
struct GeneratorDoc {
    latent: LatentSpec,
    #[serde(flatten)]
    net: MlpNet,
}

impl From<GeneratorNet> for GeneratorDoc {
    fn from(g: GeneratorNet) -> Self {
        Self {
            latent: g.latent,
            net: g.net,
        }
    }
}

impl TryFrom<GeneratorDoc> for GeneratorNet {
    type Error = Error;

    fn try_from(doc: GeneratorDoc) -> Result<Self> {
        GeneratorNet::new(doc.net, doc.latent)
    }
}

impl GeneratorNet {
    pub fn new(net: MlpNet, latent: LatentSpec) -> Result<Self> {
        latent.validate()?;
        if net.input_dim() != latent.input_dim() {
            return Err(Error::contract(format!(
                "generator input is {} but latent has {} dimensions",
                net.input_dim(),
                latent.input_dim()
            )));
        }
        Ok(Self {
            net,
            latent,
            train_loss_history: Vec::new(),
        })
    }

    pub fn output_dim(&self) -> usize {
        self.net.output_dim()
    }

    /// Appends an identity-activation layer computing `scale * y + offset`
    /// per coordinate.
    pub fn with_output_affine(&self, scale: &[f64], offset: &[f64]) -> Result<Self> {
        let d = self.output_dim();
        if scale.len() != d || offset.len() != d {
            return Err(Error::contract("affine fold dimension mismatch"));
        }
        let mut layers = self.net.layers.clone();
        layers.push(DenseLayer {
            weights: Array2::from_diag(&Array1::from(scale.to_vec())),
            bias: Array1::from(offset.to_vec()),
            activation: Activation::Identity,
        });
        Ok(Self {
            net: MlpNet::from_layers(layers)?,
            latent: self.latent,
            train_loss_history: self.train_loss_history.clone(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Anything a client can upload for the server to sample from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Synthesizer {
    Gan(GeneratorNet),
    Gmm(GaussianMixtureSampler),
}

impl Synthesizer {
    pub fn sample(&self, n: usize, seed: u64) -> Result<Array2<f64>> {
        match self {
            Synthesizer::Gan(g) => sample_generator(g, n, seed),
            Synthesizer::Gmm(g) => g.sample(n, seed),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            Synthesizer::Gan(g) => g.output_dim(),
            Synthesizer::Gmm(g) => g.means.ncols(),
        }
    }
}
