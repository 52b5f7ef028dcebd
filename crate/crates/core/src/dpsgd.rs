//! DP-SGD: Poisson lot sampling, per-example ℓ₂ clipping, Gaussian noising,
//! and descent over any model exposing per-example loss gradients.
//!
//! The lot sum is normalized by the configured lot size `L`, not the
//! realized lot size; the privacy analysis assumes `L` in the denominator.
//! Lot sampling and noise draw from separate seeded streams so changing one
//! never shifts the other.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::accountant::{MechanismParams, PrivacyParams};
use crate::rng::{seeded, STREAM_NOISE, STREAM_SAMPLE};
use crate::{Error, Result};

/// A model trainable by DP-SGD: per-example loss and exact gradient over a
/// flat parameter vector.
pub trait GradModel {
    type Example;

    fn param_len(&self) -> usize;

    fn example_loss(&self, theta: &[f64], example: &Self::Example) -> Result<f64>;

    /// Overwrites `grad_out` with the per-example gradient; returns the loss.
    fn example_grad(&self, theta: &[f64], example: &Self::Example, grad_out: &mut [f64])
        -> Result<f64>;
}

/// Hyperparameters of one DP-SGD run.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DpSgdConfig {
    /// Gradient norm bound C.
    pub clip_bound: f64,
    /// Noise multiplier σ; 0 disables noise (the plain-SGD path).
    pub noise_multiplier: f64,
    /// Expected lot size L; the sampling rate is q = L/N.
    pub lot_size: usize,
    /// Dataset size N.
    pub dataset_size: usize,
    /// Passes over the data; may be fractional. One epoch is N/L lots.
    pub epochs: f64,
    /// Constant learning rate η.
    pub learning_rate: f64,
    /// Seed for the sampling and noise streams.
    pub seed: u64,
    /// Per-example gradients are summed in chunks of this size.
    pub accumulation_chunk: usize,
}

impl DpSgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.clip_bound > 0.0) {
            return Err(Error::Domain(format!(
                "clip bound must be > 0, got {}",
                self.clip_bound
            )));
        }
        if self.clip_bound.is_infinite() && self.noise_multiplier > 0.0 {
            return Err(Error::Domain(
                "infinite clip bound requires zero noise".into(),
            ));
        }
        if self.noise_multiplier < 0.0 || self.noise_multiplier.is_nan() {
            return Err(Error::Domain(format!(
                "noise multiplier must be >= 0, got {}",
                self.noise_multiplier
            )));
        }
        if self.dataset_size == 0 {
            return Err(Error::Domain("dataset size must be >= 1".into()));
        }
        if self.lot_size == 0 || self.lot_size > self.dataset_size {
            return Err(Error::Domain(format!(
                "lot size must be in 1..={}, got {}",
                self.dataset_size, self.lot_size
            )));
        }
        if !(self.epochs > 0.0) {
            return Err(Error::Domain(format!("epochs must be > 0, got {}", self.epochs)));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Domain(format!(
                "learning rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if self.accumulation_chunk == 0 {
            return Err(Error::Domain("accumulation chunk must be >= 1".into()));
        }
        Ok(())
    }

    /// Poisson sampling rate q = L/N.
    pub fn sampling_rate(&self) -> f64 {
        self.lot_size as f64 / self.dataset_size as f64
    }

    /// Lot count T = round(epochs·N/L), at least 1.
    pub fn steps(&self) -> u64 {
        let t = (self.epochs * self.dataset_size as f64 / self.lot_size as f64).round();
        (t as u64).max(1)
    }
}

/// Mutable state of a run: the flat parameter vector, the step counter, and
/// the two deterministic streams.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub theta: Vec<f64>,
    pub step: u64,
    sample_rng: ChaCha8Rng,
    noise_rng: ChaCha8Rng,
}

impl TrainState {
    pub fn new(theta: Vec<f64>, seed: u64) -> TrainState {
        TrainState {
            theta,
            step: 0,
            sample_rng: seeded(seed, STREAM_SAMPLE),
            noise_rng: seeded(seed, STREAM_NOISE),
        }
    }
}

/// Observability record for one lot update.
#[derive(Debug, Clone, PartialEq)]
pub struct StepTrace {
    pub lot: Vec<usize>,
    pub preclip_norms: Vec<f64>,
    pub postclip_norms: Vec<f64>,
    pub noise_norm: f64,
    pub update_norm: f64,
}

/// Per-lot summary used for loss-history reports.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LotStats {
    pub step: u64,
    pub lot_size_realized: usize,
    /// Mean pre-update loss over the lot; NaN for an empty lot.
    pub mean_loss: f64,
    pub mean_preclip_norm: f64,
    pub frac_clipped: f64,
    pub max_postclip_norm: f64,
}

/// Everything a finished run produces.
#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub state: TrainState,
    pub privacy: PrivacyParams,
    /// Mean training loss per lot, in step order.
    pub loss_history: Vec<f64>,
    pub lot_stats: Vec<LotStats>,
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn clip_scale(norm: f64, clip_bound: f64) -> f64 {
    1.0 / f64::max(1.0, norm / clip_bound)
}

/// `g / max(1, ‖g‖₂/C)`: norm at most C, direction preserved.
pub fn clip_gradient(g: &[f64], clip_bound: f64) -> Vec<f64> {
    assert!(clip_bound > 0.0, "clip bound must be positive");
    let scale = clip_scale(l2_norm(g), clip_bound);
    g.iter().map(|x| x * scale).collect()
}

/// Independent inclusion of each index with probability q; sorted output.
pub fn poisson_sample<R: Rng>(n: usize, q: f64, rng: &mut R) -> Vec<usize> {
    assert!((0.0..=1.0).contains(&q), "sampling rate must be in [0, 1]");
    let mut lot = Vec::with_capacity((q * n as f64) as usize + 1);
    for i in 0..n {
        if rng.random::<f64>() < q {
            lot.push(i);
        }
    }
    lot
}

/// One DP-SGD step over the given lot:
/// `θ ← θ − η·(1/L)·(Σ clipped per-example gradients + N(0, σ²C²I))`.
///
/// Per-example gradients are computed independently and summed in chunks of
/// `accumulation_chunk` in index order, so the result does not depend on
/// how the lot is partitioned beyond float rounding.
pub fn noisy_lot_update<M: GradModel>(
    state: &mut TrainState,
    model: &M,
    dataset: &[M::Example],
    lot: &[usize],
    cfg: &DpSgdConfig,
) -> Result<(StepTrace, f64)> {
    let plen = model.param_len();
    if state.theta.len() != plen {
        return Err(Error::DimensionMismatch {
            got: state.theta.len(),
            expected: plen,
        });
    }

    let mut sum = vec![0.0; plen];
    let mut chunk_sum = vec![0.0; plen];
    let mut grad = vec![0.0; plen];
    let mut preclip = Vec::with_capacity(lot.len());
    let mut postclip = Vec::with_capacity(lot.len());
    let mut loss_total = 0.0;

    for chunk in lot.chunks(cfg.accumulation_chunk.max(1)) {
        chunk_sum.fill(0.0);
        for &idx in chunk {
            let example = dataset.get(idx).ok_or(Error::DimensionMismatch {
                got: idx,
                expected: dataset.len(),
            })?;
            loss_total += model.example_grad(&state.theta, example, &mut grad)?;
            let norm = l2_norm(&grad);
            let scale = clip_scale(norm, cfg.clip_bound);
            for (acc, g) in chunk_sum.iter_mut().zip(&grad) {
                *acc += scale * g;
            }
            preclip.push(norm);
            postclip.push(norm * scale);
        }
        for (total, part) in sum.iter_mut().zip(&chunk_sum) {
            *total += part;
        }
    }

    let mut noise_norm = 0.0;
    if cfg.noise_multiplier > 0.0 {
        let std = cfg.noise_multiplier * cfg.clip_bound;
        let normal = Normal::new(0.0, std)
            .map_err(|e| Error::Domain(format!("noise distribution: {e}")))?;
        let mut sq = 0.0;
        for v in sum.iter_mut() {
            let z: f64 = normal.sample(&mut state.noise_rng);
            sq += z * z;
            *v += z;
        }
        noise_norm = sq.sqrt();
    }

    let step_scale = cfg.learning_rate / cfg.lot_size as f64;
    let mut update_sq = 0.0;
    for (theta, total) in state.theta.iter_mut().zip(&sum) {
        let delta = step_scale * total;
        update_sq += delta * delta;
        *theta -= delta;
    }
    state.step += 1;

    let mean_loss = loss_total / lot.len() as f64; // NaN when empty
    let trace = StepTrace {
        lot: lot.to_vec(),
        preclip_norms: preclip,
        postclip_norms: postclip,
        noise_norm,
        update_norm: update_sq.sqrt(),
    };
    Ok((trace, mean_loss))
}

/// Run T = round(epochs·N/L) lots of DP-SGD from `theta0`. With σ > 0 the
/// accountant hook receives the mechanism parameters; with σ = 0 the run is
/// non-private and the hook is never invoked.
pub fn train<M, A>(
    model: &M,
    dataset: &[M::Example],
    cfg: &DpSgdConfig,
    theta0: Vec<f64>,
    account: A,
) -> Result<TrainOutput>
where
    M: GradModel,
    A: FnOnce(&MechanismParams) -> Result<PrivacyParams>,
{
    cfg.validate()?;
    if dataset.len() != cfg.dataset_size {
        return Err(Error::InvalidInput(format!(
            "dataset has {} examples but config says {}",
            dataset.len(),
            cfg.dataset_size
        )));
    }
    let steps = cfg.steps();
    let q = cfg.sampling_rate();
    let mut state = TrainState::new(theta0, cfg.seed);
    let mut loss_history = Vec::with_capacity(steps as usize);
    let mut lot_stats = Vec::with_capacity(steps as usize);

    for _ in 0..steps {
        let lot = poisson_sample(cfg.dataset_size, q, &mut state.sample_rng);
        let (trace, mean_loss) = noisy_lot_update(&mut state, model, dataset, &lot, cfg)?;
        let bound = cfg.clip_bound + 1e-9;
        for &norm in &trace.postclip_norms {
            assert!(norm <= bound, "post-clip norm {norm} exceeds bound {bound}");
        }
        let n = trace.lot.len();
        lot_stats.push(LotStats {
            step: state.step,
            lot_size_realized: n,
            mean_loss,
            mean_preclip_norm: trace.preclip_norms.iter().sum::<f64>() / n as f64,
            frac_clipped: trace
                .preclip_norms
                .iter()
                .filter(|&&p| p > cfg.clip_bound)
                .count() as f64
                / n as f64,
            max_postclip_norm: trace
                .postclip_norms
                .iter()
                .copied()
                .fold(0.0, f64::max),
        });
        loss_history.push(mean_loss);
    }

    let privacy = if cfg.noise_multiplier > 0.0 {
        account(&MechanismParams::new(cfg.noise_multiplier, q, steps)?)?
    } else {
        PrivacyParams::non_private()
    };

    Ok(TrainOutput {
        state,
        privacy,
        loss_history,
        lot_stats,
    })
}

/// Mean loss of a model over a dataset (scoring helper, no gradients).
pub fn mean_loss<M: GradModel>(model: &M, theta: &[f64], dataset: &[M::Example]) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::Empty("dataset".into()));
    }
    let mut total = 0.0;
    for example in dataset {
        total += model.example_loss(theta, example)?;
    }
    Ok(total / dataset.len() as f64)
}
