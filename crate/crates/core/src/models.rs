//! Tiny differentiable models with closed-form per-example gradients.
//!
//! [`TinySeq2Seq`] is a mean-of-embeddings encoder with previous-token
//! conditioning: small enough for exact analytic gradients, expressive
//! enough to memorize names in context, which is all the membership attack
//! needs. [`LogisticModel`] is the minimal test vehicle for the DP-SGD
//! mechanics.
//!
//! Parameters live in one flat `Vec<f64>` owned by the training loop;
//! model structs only hold dimensions and interpret the vector.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dpsgd::GradModel;
use crate::rng::{seeded, STREAM_INIT};
use crate::text::{EncodedPair, BOS, EOS};
use crate::{Error, Result};

/// Mean-of-source-embeddings encoder, bigram-conditioned softmax decoder.
///
/// Parameter layout (flattened, in order): source embeddings `V_s × d`,
/// target embeddings `V_t × d`, output projection `d × V_t`, bias `V_t`.
/// Step logits are `Wᵀ(h + E_tgt[y_{t−1}]) + b` with `y_0 = <bos>` and
/// `h` the mean of the source token embeddings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TinySeq2Seq {
    pub v_src: usize,
    pub v_tgt: usize,
    pub dim: usize,
}

impl TinySeq2Seq {
    pub fn new(v_src: usize, v_tgt: usize, dim: usize) -> Result<Self> {
        if v_src == 0 || dim == 0 {
            return Err(Error::Domain("vocab sizes and dim must be >= 1".into()));
        }
        if v_tgt <= BOS as usize {
            return Err(Error::Domain(format!(
                "target vocab must contain the <bos> id, got size {v_tgt}"
            )));
        }
        Ok(TinySeq2Seq { v_src, v_tgt, dim })
    }

    pub fn param_len(&self) -> usize {
        self.v_src * self.dim + self.v_tgt * self.dim + self.dim * self.v_tgt + self.v_tgt
    }

    fn offset_e_tgt(&self) -> usize {
        self.v_src * self.dim
    }

    fn offset_w(&self) -> usize {
        self.offset_e_tgt() + self.v_tgt * self.dim
    }

    fn offset_b(&self) -> usize {
        self.offset_w() + self.dim * self.v_tgt
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.param_len() {
            return Err(Error::DimensionMismatch {
                got: theta.len(),
                expected: self.param_len(),
            });
        }
        Ok(())
    }

    fn check_ids(&self, src: &[u32], tgt: &[u32]) -> Result<()> {
        for &id in src {
            if id as usize >= self.v_src {
                return Err(Error::OutOfVocab {
                    id,
                    vocab_size: self.v_src,
                });
            }
        }
        for &id in tgt {
            if id as usize >= self.v_tgt {
                return Err(Error::OutOfVocab {
                    id,
                    vocab_size: self.v_tgt,
                });
            }
        }
        Ok(())
    }

    /// Uniform(−0.1, 0.1) initialization from the run seed.
    pub fn init_params(&self, seed: u64) -> Vec<f64> {
        let mut rng = seeded(seed, STREAM_INIT);
        (0..self.param_len())
            .map(|_| rng.random_range(-0.1..0.1))
            .collect()
    }

    /// Mean of source token embeddings; all zeros for an empty source.
    fn encoder_state(&self, theta: &[f64], src: &[u32]) -> Vec<f64> {
        let d = self.dim;
        let mut h = vec![0.0; d];
        if src.is_empty() {
            return h;
        }
        for &id in src {
            let row = &theta[id as usize * d..(id as usize + 1) * d];
            for (hk, rk) in h.iter_mut().zip(row) {
                *hk += rk;
            }
        }
        let inv = 1.0 / src.len() as f64;
        for hk in &mut h {
            *hk *= inv;
        }
        h
    }

    /// Writes `Wᵀu + b` into `z`.
    fn logits_into(&self, theta: &[f64], u: &[f64], z: &mut [f64]) {
        let v = self.v_tgt;
        let w = &theta[self.offset_w()..self.offset_b()];
        z.copy_from_slice(&theta[self.offset_b()..]);
        for (k, &uk) in u.iter().enumerate() {
            let row = &w[k * v..(k + 1) * v];
            for (zj, wj) in z.iter_mut().zip(row) {
                *zj += uk * wj;
            }
        }
    }

    /// Mean cross-entropy over target positions.
    pub fn loss(&self, theta: &[f64], src: &[u32], tgt: &[u32]) -> Result<f64> {
        self.check_theta(theta)?;
        self.check_ids(src, tgt)?;
        if tgt.is_empty() {
            return Err(Error::Empty("target sequence".into()));
        }
        let d = self.dim;
        let h = self.encoder_state(theta, src);
        let mut u = vec![0.0; d];
        let mut z = vec![0.0; self.v_tgt];
        let mut total = 0.0;
        for (t, &gold) in tgt.iter().enumerate() {
            let prev = if t == 0 { BOS } else { tgt[t - 1] } as usize;
            let e_prev = &theta[self.offset_e_tgt() + prev * d..self.offset_e_tgt() + (prev + 1) * d];
            for k in 0..d {
                u[k] = h[k] + e_prev[k];
            }
            self.logits_into(theta, &u, &mut z);
            total += log_sum_exp(&z) - z[gold as usize];
        }
        Ok(total / tgt.len() as f64)
    }

    /// Analytic gradient of [`Self::loss`] w.r.t. the flat parameters.
    /// Overwrites `grad_out` and returns the loss.
    pub fn grad(&self, theta: &[f64], src: &[u32], tgt: &[u32], grad_out: &mut [f64]) -> Result<f64> {
        self.check_theta(theta)?;
        self.check_theta(grad_out)?;
        self.check_ids(src, tgt)?;
        if tgt.is_empty() {
            return Err(Error::Empty("target sequence".into()));
        }
        grad_out.fill(0.0);

        let d = self.dim;
        let v = self.v_tgt;
        let m = tgt.len();
        let inv_m = 1.0 / m as f64;
        let off_et = self.offset_e_tgt();
        let off_w = self.offset_w();
        let off_b = self.offset_b();

        let h = self.encoder_state(theta, src);
        let mut u = vec![0.0; d];
        let mut z = vec![0.0; v];
        let mut dz = vec![0.0; v];
        let mut du = vec![0.0; d];
        let mut dh = vec![0.0; d];
        let mut total = 0.0;

        for (t, &gold) in tgt.iter().enumerate() {
            let prev = if t == 0 { BOS } else { tgt[t - 1] } as usize;
            let e_prev = &theta[off_et + prev * d..off_et + (prev + 1) * d];
            for k in 0..d {
                u[k] = h[k] + e_prev[k];
            }
            self.logits_into(theta, &u, &mut z);
            let lse = log_sum_exp(&z);
            total += lse - z[gold as usize];

            // dz = (softmax(z) − onehot(gold)) / m
            for j in 0..v {
                dz[j] = (z[j] - lse).exp() * inv_m;
            }
            dz[gold as usize] -= inv_m;

            // bias and projection
            let w = &theta[off_w..off_b];
            for j in 0..v {
                grad_out[off_b + j] += dz[j];
            }
            for k in 0..d {
                let uk = u[k];
                let wrow = &w[k * v..(k + 1) * v];
                let grow = &mut grad_out[off_w + k * v..off_w + (k + 1) * v];
                let mut acc = 0.0;
                for j in 0..v {
                    grow[j] += uk * dz[j];
                    acc += wrow[j] * dz[j];
                }
                du[k] = acc;
            }

            // previous-token embedding and encoder state
            let g_prev = &mut grad_out[off_et + prev * d..off_et + (prev + 1) * d];
            for k in 0..d {
                g_prev[k] += du[k];
                dh[k] += du[k];
            }
        }

        if !src.is_empty() {
            let inv_n = 1.0 / src.len() as f64;
            for &id in src {
                let g_src = &mut grad_out[id as usize * d..(id as usize + 1) * d];
                for k in 0..d {
                    g_src[k] += dh[k] * inv_n;
                }
            }
        }

        Ok(total * inv_m)
    }

    /// Argmax decoding from `<bos>` until `<eos>` (not emitted) or
    /// `max_len`; ties break toward the lowest id.
    pub fn greedy_decode(&self, theta: &[f64], src: &[u32], max_len: usize) -> Result<Vec<u32>> {
        self.check_theta(theta)?;
        self.check_ids(src, &[])?;
        if max_len == 0 {
            return Err(Error::Domain("max_len must be >= 1".into()));
        }
        let d = self.dim;
        let h = self.encoder_state(theta, src);
        let mut u = vec![0.0; d];
        let mut z = vec![0.0; self.v_tgt];
        let mut out = Vec::new();
        let mut prev = BOS as usize;
        for _ in 0..max_len {
            let e_prev = &theta[self.offset_e_tgt() + prev * d..self.offset_e_tgt() + (prev + 1) * d];
            for k in 0..d {
                u[k] = h[k] + e_prev[k];
            }
            self.logits_into(theta, &u, &mut z);
            let mut best = 0usize;
            for (j, &zj) in z.iter().enumerate() {
                if zj > z[best] {
                    best = j;
                }
            }
            if best as u32 == EOS {
                break;
            }
            out.push(best as u32);
            prev = best;
        }
        Ok(out)
    }
}

fn log_sum_exp(z: &[f64]) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + z.iter().map(|&v| (v - max).exp()).sum::<f64>().ln()
}

impl GradModel for TinySeq2Seq {
    type Example = EncodedPair;

    fn param_len(&self) -> usize {
        TinySeq2Seq::param_len(self)
    }

    fn example_loss(&self, theta: &[f64], example: &EncodedPair) -> Result<f64> {
        self.loss(theta, &example.src, &example.tgt)
    }

    fn example_grad(&self, theta: &[f64], example: &EncodedPair, grad_out: &mut [f64]) -> Result<f64> {
        self.grad(theta, &example.src, &example.tgt, grad_out)
    }
}

/// Binary logistic regression; parameters are `[w_0..w_{d−1}, bias]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LogisticModel {
    pub dim: usize,
}

/// One labeled point for [`LogisticModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticExample {
    pub x: Vec<f64>,
    pub y: u8,
}

impl LogisticModel {
    pub fn param_len(&self) -> usize {
        self.dim + 1
    }
}

/// Stable binary cross-entropy with sigmoid, plus its closed-form gradient.
pub fn logistic_loss_grad(params: &[f64], x: &[f64], y: u8) -> Result<(f64, Vec<f64>)> {
    if params.len() != x.len() + 1 {
        return Err(Error::DimensionMismatch {
            got: params.len(),
            expected: x.len() + 1,
        });
    }
    let (w, b) = params.split_at(x.len());
    let z: f64 = w.iter().zip(x).map(|(wi, xi)| wi * xi).sum::<f64>() + b[0];
    let y_f = f64::from(y);
    let loss = z.max(0.0) - z * y_f + (-z.abs()).exp().ln_1p();
    let p = 1.0 / (1.0 + (-z).exp());
    let factor = p - y_f;
    let mut grad = Vec::with_capacity(params.len());
    grad.extend(x.iter().map(|xi| factor * xi));
    grad.push(factor);
    Ok((loss, grad))
}

impl GradModel for LogisticModel {
    type Example = LogisticExample;

    fn param_len(&self) -> usize {
        LogisticModel::param_len(self)
    }

    fn example_loss(&self, theta: &[f64], example: &LogisticExample) -> Result<f64> {
        logistic_loss_grad(theta, &example.x, example.y).map(|(loss, _)| loss)
    }

    fn example_grad(&self, theta: &[f64], example: &LogisticExample, grad_out: &mut [f64]) -> Result<f64> {
        let (loss, grad) = logistic_loss_grad(theta, &example.x, example.y)?;
        grad_out.copy_from_slice(&grad);
        Ok(loss)
    }
}

// --- Checkpoints --------------------------------------------------------------

/// JSON header preceding the flat little-endian f64 parameter dump.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub kind: String,
    pub v_src: usize,
    pub v_tgt: usize,
    pub dim: usize,
    pub param_len: usize,
    pub src_vocab_hash: String,
    pub tgt_vocab_hash: String,
}

pub fn save_checkpoint(path: &Path, header: &CheckpointHeader, theta: &[f64]) -> Result<()> {
    if theta.len() != header.param_len {
        return Err(Error::DimensionMismatch {
            got: theta.len(),
            expected: header.param_len,
        });
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let head = serde_json::to_string(header)
        .map_err(|e| Error::InvalidInput(format!("serialize header: {e}")))?;
    file.write_all(head.as_bytes())
        .and_then(|_| file.write_all(b"\n"))
        .map_err(|e| Error::io(path, e))?;
    let mut bytes = Vec::with_capacity(theta.len() * 8);
    for &v in theta {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    file.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<(CheckpointHeader, Vec<f64>)> {
    let mut file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut raw = Vec::new();
    file.read_to_end(&mut raw).map_err(|e| Error::io(path, e))?;
    let newline = raw
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::CheckpointMismatch("missing header line".into()))?;
    let header: CheckpointHeader = serde_json::from_slice(&raw[..newline])
        .map_err(|e| Error::CheckpointMismatch(format!("bad header: {e}")))?;
    let body = &raw[newline + 1..];
    if body.len() != header.param_len * 8 {
        return Err(Error::CheckpointMismatch(format!(
            "expected {} parameter bytes, found {}",
            header.param_len * 8,
            body.len()
        )));
    }
    let theta = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((header, theta))
}
