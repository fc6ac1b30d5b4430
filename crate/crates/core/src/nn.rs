//! Small fully connected networks with exact reverse-mode gradients.
//!
//! Hidden layers use `tanh`; the output layer is affine. Parameters live in a
//! single flat vector, layer by layer: the `fan_out × fan_in` weight matrix
//! (row-major) followed by the `fan_out` biases.

use std::io::{Read, Write};
use std::path::Path;

use rand::distributions::{Distribution, Uniform};
use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
    version: u64,
}

/// Intermediates of one forward pass: the input and every layer's output.
#[derive(Debug, Clone)]
pub struct GradientTape {
    version: u64,
    activations: Vec<Vec<f64>>,
}

impl GradientTape {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("tape holds the input")
    }
}

pub fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
}

impl Mlp {
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::param("layer sizes", "need >= 2 layers of width >= 1"));
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            params: vec![0.0; param_count(sizes)],
            version: 0,
        })
    }

    /// Uniform `(−1/√fan_in, 1/√fan_in)` initialization.
    pub fn init<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(sizes)?;
        let mut offset = 0;
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let a = 1.0 / (fan_in as f64).sqrt();
            let dist = Uniform::new(-a, a);
            let n = (fan_in + 1) * fan_out;
            for p in &mut net.params[offset..offset + n] {
                *p = dist.sample(rng);
            }
            offset += n;
        }
        Ok(net)
    }

    pub fn from_params(sizes: &[usize], params: Vec<f64>) -> Result<Self> {
        let mut net = Self::zeros(sizes)?;
        if params.len() != net.params.len() {
            return Err(Error::DimensionMismatch {
                expected: net.params.len(),
                got: params.len(),
            });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("network parameters".into()));
        }
        net.params = params;
        Ok(net)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Mutable access; bumps the version so older tapes become stale.
    pub fn params_mut(&mut self) -> &mut [f64] {
        self.version += 1;
        &mut self.params
    }

    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, GradientTape)> {
        if input.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: input.len(),
            });
        }
        let layers = self.sizes.len() - 1;
        let mut activations = Vec::with_capacity(layers + 1);
        activations.push(input.to_vec());
        let mut offset = 0;
        for l in 0..layers {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let weights = &self.params[offset..offset + fan_in * fan_out];
            let biases = &self.params[offset + fan_in * fan_out..offset + (fan_in + 1) * fan_out];
            let x = activations.last().unwrap();
            let mut out: Vec<f64> = weights
                .chunks_exact(fan_in)
                .zip(biases)
                .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
                .collect();
            if l + 1 < layers {
                out.iter_mut().for_each(|z| *z = z.tanh());
            }
            activations.push(out);
            offset += (fan_in + 1) * fan_out;
        }
        let output = activations.last().unwrap().clone();
        Ok((
            output,
            GradientTape {
                version: self.version,
                activations,
            },
        ))
    }

    /// Gradient of `⟨output_grad, output⟩` with respect to every parameter.
    pub fn backward(&self, tape: &GradientTape, output_grad: &[f64]) -> Result<Vec<f64>> {
        if tape.version != self.version {
            return Err(Error::StaleTape {
                tape: tape.version,
                net: self.version,
            });
        }
        if output_grad.len() != self.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.output_dim(),
                got: output_grad.len(),
            });
        }
        let layers = self.sizes.len() - 1;
        let mut grads = vec![0.0; self.params.len()];
        let mut delta = output_grad.to_vec();
        let mut end = self.params.len();
        for l in (0..layers).rev() {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let start = end - (fan_in + 1) * fan_out;
            let x = &tape.activations[l];
            let (gw, gb) = grads[start..end].split_at_mut(fan_in * fan_out);
            for (o, &dl) in delta.iter().enumerate() {
                gb[o] = dl;
                for (g, v) in gw[o * fan_in..(o + 1) * fan_in].iter_mut().zip(x) {
                    *g = dl * v;
                }
            }
            if l > 0 {
                let weights = &self.params[start..start + fan_in * fan_out];
                let mut below = vec![0.0; fan_in];
                for (row, &dl) in weights.chunks_exact(fan_in).zip(&delta) {
                    for (b, w) in below.iter_mut().zip(row) {
                        *b += w * dl;
                    }
                }
                // x is a tanh output here.
                for (b, a) in below.iter_mut().zip(x) {
                    *b *= 1.0 - a * a;
                }
                delta = below;
            }
            end = start;
        }
        Ok(grads)
    }

    pub fn step(&mut self, grads: &[f64], lr: f64, direction: Direction) -> Result<()> {
        sgd_step(&mut self.params, grads, lr, direction)?;
        self.version += 1;
        Ok(())
    }

    /// Writes the checkpoint layout: `u64` layer count `L`, `L` × `u64`
    /// layer sizes, then every parameter as `f64`; all little-endian.
    pub fn write_checkpoint<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&(self.sizes.len() as u64).to_le_bytes())?;
        for &s in &self.sizes {
            w.write_all(&(s as u64).to_le_bytes())?;
        }
        for &p in &self.params {
            w.write_all(&p.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_checkpoint<R: Read>(mut r: R, origin: &Path) -> Result<Self> {
        let bad = |reason: &str| Error::Checkpoint {
            path: origin.to_path_buf(),
            reason: reason.into(),
        };
        let mut word = [0u8; 8];
        r.read_exact(&mut word).map_err(|_| bad("missing header"))?;
        let layers = u64::from_le_bytes(word) as usize;
        if !(2..=64).contains(&layers) {
            return Err(bad("implausible layer count"));
        }
        let mut sizes = Vec::with_capacity(layers);
        for _ in 0..layers {
            r.read_exact(&mut word).map_err(|_| bad("truncated header"))?;
            sizes.push(u64::from_le_bytes(word) as usize);
        }
        let mut params = Vec::with_capacity(param_count(&sizes));
        for _ in 0..param_count(&sizes) {
            r.read_exact(&mut word).map_err(|_| bad("truncated parameters"))?;
            params.push(f64::from_le_bytes(word));
        }
        if r.read(&mut word)? != 0 {
            return Err(bad("trailing bytes"));
        }
        Self::from_params(&sizes, params)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_checkpoint(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_checkpoint(std::io::BufReader::new(f), path)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Ascend,
    Descend,
}

/// `params ± lr·grads`; fails before touching anything if a gradient is not
/// finite.
pub fn sgd_step(params: &mut [f64], grads: &[f64], lr: f64, direction: Direction) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::DimensionMismatch {
            expected: params.len(),
            got: grads.len(),
        });
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient(format!("component {i}")));
    }
    let signed = match direction {
        Direction::Ascend => lr,
        Direction::Descend => -lr,
    };
    for (p, g) in params.iter_mut().zip(grads) {
        *p += signed * g;
    }
    Ok(())
}

/// Rescales `grads` in place so its Euclidean norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm(grads: &mut [f64], max_norm: f64) -> f64 {
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        grads.iter_mut().for_each(|g| *g *= s);
    }
    norm
}

/// Categorical policy over evenly spaced contribution bins.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyDistribution {
    logits: Vec<f64>,
    log_probs: Vec<f64>,
}

impl PolicyDistribution {
    pub fn from_logits(logits: Vec<f64>) -> Result<Self> {
        if logits.len() < 2 {
            return Err(Error::param("action bins", "need at least 2"));
        }
        if logits.iter().any(|l| !l.is_finite()) {
            return Err(Error::NonFinite("policy logits".into()));
        }
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
        let log_probs = logits.iter().map(|l| l - lse).collect();
        Ok(Self { logits, log_probs })
    }

    pub fn bins(&self) -> usize {
        self.logits.len()
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn log_prob(&self, bin: usize) -> f64 {
        self.log_probs[bin]
    }

    pub fn probs(&self) -> Vec<f64> {
        self.log_probs.iter().map(|l| l.exp()).collect()
    }

    pub fn entropy(&self) -> f64 {
        -self
            .log_probs
            .iter()
            .map(|&l| if l == f64::NEG_INFINITY { 0.0 } else { l.exp() * l })
            .sum::<f64>()
    }

    /// Contribution fraction represented by `bin`.
    pub fn bin_value(&self, bin: usize) -> f64 {
        bin as f64 / (self.bins() - 1) as f64
    }

    /// `∂ log π(bin) / ∂ logits = onehot(bin) − π`.
    pub fn log_prob_grad(&self, bin: usize) -> Vec<f64> {
        let mut g: Vec<f64> = self.probs().into_iter().map(|p| -p).collect();
        g[bin] += 1.0;
        g
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, f64) {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (i, l) in self.log_probs.iter().enumerate() {
            acc += l.exp();
            if u < acc {
                return (i, *l);
            }
        }
        // Rounding left the cumulative sum just below one.
        let last = (0..self.bins())
            .rev()
            .find(|&i| self.log_probs[i] > f64::NEG_INFINITY)
            .unwrap_or(self.bins() - 1);
        (last, self.log_probs[last])
    }
}
