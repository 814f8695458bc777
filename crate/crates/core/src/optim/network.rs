//! Permutation-invariant point encoder that emits warp parameters, trained
//! per scene pair by minimizing the registration loss.
//!
//! Architecture: a shared per-point MLP (affine + ReLU per layer), a max pool
//! over points, then a head MLP whose final affine layer emits the 6K raw
//! warp outputs. Reverse mode is written out per layer.

use std::time::Instant;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::loss::Objective;
use crate::scalar::Real;
use crate::warp::make_anchor_grid;

use super::{
    check_steps, clip_global_norm, initial_raw, raw_gradient, theta_from_raw, AdamState, LossRecord, Mode,
    OptimizationReport, RegistrationConfig,
};

/// Rows of the last per-point layer evaluated per block.
const POOL_BLOCK: usize = 256;

/// Hidden widths of the per-point stage and of the head.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetWidths {
    pub point: Vec<usize>,
    pub head: Vec<usize>,
}

impl Default for NetWidths {
    fn default() -> Self {
        Self {
            point: vec![64, 128, 1024],
            head: vec![512, 256],
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Layer {
    n_in: usize,
    n_out: usize,
    w: usize,
    b: usize,
}

impl Layer {
    fn len(&self) -> usize {
        self.n_in * self.n_out + self.n_out
    }
}

#[derive(Debug, Clone)]
pub struct PointEncoderNet<T: Real> {
    widths: NetWidths,
    k: usize,
    layers: Vec<Layer>,
    params: Vec<T>,
}

/// Everything the backward pass needs from a forward pass.
#[derive(Debug, Clone)]
pub struct NetForward<T> {
    n_points: usize,
    /// `acts[0]` is the input; `acts[l + 1]` the post-ReLU output of point
    /// layer `l`, for every point layer except the pooled one.
    acts: Vec<Vec<T>>,
    /// Per channel: largest pre-activation over points, and the first point
    /// attaining it.
    pool_max: Vec<T>,
    argmax: Vec<u32>,
    /// Input of each head layer; `head_in[0]` is the pooled feature.
    head_in: Vec<Vec<T>>,
    pub output: Vec<T>,
}

impl<T: Real> NetForward<T> {
    pub fn pooled(&self) -> &[T] {
        &self.head_in[0]
    }

    pub fn argmax(&self) -> &[u32] {
        &self.argmax
    }

    /// Activation pattern of every ReLU and pooling decision, for detecting
    /// kinks between two evaluations.
    pub fn pattern(&self) -> Vec<u32> {
        let mut sig: Vec<u32> = self.argmax.clone();
        let layers = self.acts[1..].iter().chain([&self.pool_max]).chain(&self.head_in[1..]);
        for v in layers {
            sig.extend(v.iter().map(|x| u32::from(*x > T::zero())));
        }
        sig
    }
}

impl<T: Real> PointEncoderNet<T> {
    /// Weights and biases drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
    pub fn new<R: Rng>(widths: NetWidths, k: usize, rng: &mut R) -> Result<Self> {
        if widths.point.is_empty() || widths.point.iter().chain(&widths.head).any(|&w| w == 0) || k == 0 {
            return Err(Error::Config(format!("invalid network widths {widths:?} for K = {k}")));
        }
        let mut dims = vec![3];
        dims.extend(&widths.point);
        dims.extend(&widths.head);
        dims.push(6 * k);
        let mut layers = Vec::with_capacity(dims.len() - 1);
        let mut off = 0;
        for pair in dims.windows(2) {
            let (n_in, n_out) = (pair[0], pair[1]);
            layers.push(Layer {
                n_in,
                n_out,
                w: off,
                b: off + n_in * n_out,
            });
            off += n_in * n_out + n_out;
        }
        let mut params = Vec::with_capacity(off);
        for layer in &layers {
            let bound = 1.0 / (layer.n_in as f64).sqrt();
            params.extend((0..layer.len()).map(|_| T::lit(rng.random_range(-bound..bound))));
        }
        Ok(Self {
            widths,
            k,
            layers,
            params,
        })
    }

    pub fn seeded(widths: NetWidths, k: usize, seed: u64) -> Result<Self> {
        Self::new(widths, k, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn widths(&self) -> &NetWidths {
        &self.widths
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    fn n_point_layers(&self) -> usize {
        self.widths.point.len()
    }

    /// Zero the output layer's weights and set its bias, so the network
    /// starts by emitting exactly `raw` for any input.
    pub fn set_constant_output(&mut self, raw: &[T]) -> Result<()> {
        let last = *self.layers.last().unwrap();
        if raw.len() != last.n_out {
            return Err(Error::ShapeMismatch {
                expected: last.n_out,
                actual: raw.len(),
            });
        }
        self.params[last.w..last.b].iter_mut().for_each(|w| *w = T::zero());
        self.params[last.b..last.b + last.n_out].copy_from_slice(raw);
        Ok(())
    }

    /// Zero every head parameter (weights and biases).
    pub fn zero_head(&mut self) {
        let first_head = self.layers[self.n_point_layers()];
        self.params[first_head.w..].iter_mut().for_each(|p| *p = T::zero());
    }

    /// Forward pass over `input`, an N x 3 row-major array.
    pub fn forward(&self, input: &[T]) -> NetForward<T> {
        assert!(input.len().is_multiple_of(3) && !input.is_empty(), "input must be a non-empty N x 3 array");
        let n = input.len() / 3;
        let np = self.n_point_layers();
        let p = &self.params;

        let mut acts = vec![input.to_vec()];
        for layer in &self.layers[..np - 1] {
            let mut z = Vec::with_capacity(n * layer.n_out);
            for _ in 0..n {
                z.extend_from_slice(&p[layer.b..layer.b + layer.n_out]);
            }
            T::gemm_nt(n, layer.n_in, layer.n_out, acts.last().unwrap(), &p[layer.w..layer.b], &mut z);
            z.iter_mut().for_each(|v| *v = v.max(T::zero()));
            acts.push(z);
        }

        let pool = self.layers[np - 1];
        let a_in = acts.last().unwrap();
        let mut pool_max = vec![-T::infinity(); pool.n_out];
        let mut argmax = vec![0u32; pool.n_out];
        let mut block = vec![T::zero(); POOL_BLOCK * pool.n_out];
        for start in (0..n).step_by(POOL_BLOCK) {
            let rows = POOL_BLOCK.min(n - start);
            let z = &mut block[..rows * pool.n_out];
            for r in 0..rows {
                z[r * pool.n_out..(r + 1) * pool.n_out].copy_from_slice(&p[pool.b..pool.b + pool.n_out]);
            }
            T::gemm_nt(
                rows,
                pool.n_in,
                pool.n_out,
                &a_in[start * pool.n_in..(start + rows) * pool.n_in],
                &p[pool.w..pool.b],
                z,
            );
            for r in 0..rows {
                let row = &z[r * pool.n_out..(r + 1) * pool.n_out];
                for (c, &v) in row.iter().enumerate() {
                    if v > pool_max[c] {
                        pool_max[c] = v;
                        argmax[c] = (start + r) as u32;
                    }
                }
            }
        }

        let mut head_in = vec![pool_max.iter().map(|v| v.max(T::zero())).collect::<Vec<T>>()];
        let head = &self.layers[np..];
        let mut output = Vec::new();
        for (i, layer) in head.iter().enumerate() {
            let x = head_in.last().unwrap();
            let mut z = p[layer.b..layer.b + layer.n_out].to_vec();
            T::gemm_nt(1, layer.n_in, layer.n_out, x, &p[layer.w..layer.b], &mut z);
            if i + 1 < head.len() {
                z.iter_mut().for_each(|v| *v = v.max(T::zero()));
                head_in.push(z);
            } else {
                output = z;
            }
        }

        NetForward {
            n_points: n,
            acts,
            pool_max,
            argmax,
            head_in,
            output,
        }
    }

    /// Gradient over all parameters given `d_out = dL/d(output)`.
    pub fn backward(&self, fwd: &NetForward<T>, d_out: &[T]) -> Vec<T> {
        let np = self.n_point_layers();
        let p = &self.params;
        let mut grad = vec![T::zero(); p.len()];

        // Head, last layer first.
        let head = &self.layers[np..];
        let mut d_post = d_out.to_vec();
        for (i, layer) in head.iter().enumerate().rev() {
            let d_z: Vec<T> = if i + 1 < head.len() {
                d_post
                    .iter()
                    .zip(&fwd.head_in[i + 1])
                    .map(|(d, h)| if *h > T::zero() { *d } else { T::zero() })
                    .collect()
            } else {
                d_post
            };
            let x = &fwd.head_in[i];
            let mut d_in = vec![T::zero(); layer.n_in];
            for (o, &g) in d_z.iter().enumerate() {
                if g == T::zero() {
                    continue;
                }
                let w_row = &p[layer.w + o * layer.n_in..layer.w + (o + 1) * layer.n_in];
                let gw = &mut grad[layer.w + o * layer.n_in..layer.w + (o + 1) * layer.n_in];
                for j in 0..layer.n_in {
                    gw[j] += g * x[j];
                    d_in[j] += g * w_row[j];
                }
                grad[layer.b + o] += g;
            }
            d_post = d_in;
        }

        // Max pool: each channel routes its gradient to its argmax point.
        let pool = self.layers[np - 1];
        let mut routed: Vec<(u32, usize, T)> = d_post
            .iter()
            .enumerate()
            .filter(|(c, g)| fwd.pool_max[*c] > T::zero() && **g != T::zero())
            .map(|(c, g)| (fwd.argmax[c], c, *g))
            .collect();
        routed.sort_by_key(|r| (r.0, r.1));
        let mut rows: Vec<u32> = routed.iter().map(|r| r.0).collect();
        rows.dedup();
        if rows.is_empty() {
            return grad;
        }
        let row_slot = |pt: u32| rows.binary_search(&pt).unwrap();

        let a_in = fwd.acts.last().unwrap();
        let mut d_a = vec![T::zero(); rows.len() * pool.n_in];
        for &(pt, c, g) in &routed {
            let slot = row_slot(pt);
            let x = &a_in[pt as usize * pool.n_in..(pt as usize + 1) * pool.n_in];
            let w_row = &p[pool.w + c * pool.n_in..pool.w + (c + 1) * pool.n_in];
            let gw = &mut grad[pool.w + c * pool.n_in..pool.w + (c + 1) * pool.n_in];
            let da = &mut d_a[slot * pool.n_in..(slot + 1) * pool.n_in];
            for j in 0..pool.n_in {
                gw[j] += g * x[j];
                da[j] += g * w_row[j];
            }
            grad[pool.b + c] += g;
        }

        // Remaining per-point layers, restricted to the routed rows.
        for l in (0..np - 1).rev() {
            let layer = self.layers[l];
            let out = &fwd.acts[l + 1];
            let x_all = &fwd.acts[l];
            let mut d_prev = if l > 0 {
                vec![T::zero(); rows.len() * layer.n_in]
            } else {
                Vec::new()
            };
            for (slot, &pt) in rows.iter().enumerate() {
                let pt = pt as usize;
                let x = &x_all[pt * layer.n_in..(pt + 1) * layer.n_in];
                for o in 0..layer.n_out {
                    if out[pt * layer.n_out + o] <= T::zero() {
                        continue;
                    }
                    let g = d_a[slot * layer.n_out + o];
                    if g == T::zero() {
                        continue;
                    }
                    let base = layer.w + o * layer.n_in;
                    for j in 0..layer.n_in {
                        grad[base + j] += g * x[j];
                    }
                    grad[layer.b + o] += g;
                    if l > 0 {
                        let dp = &mut d_prev[slot * layer.n_in..(slot + 1) * layer.n_in];
                        for j in 0..layer.n_in {
                            dp[j] += g * p[base + j];
                        }
                    }
                }
            }
            d_a = d_prev;
        }
        debug_assert!(fwd.n_points > 0);
        grad
    }
}

/// Deterministic network input: at most `n_net` source points (uniform
/// without replacement, kept in cloud order), centered and scaled into the
/// unit ball.
pub(crate) fn network_input<T: Real, R: Rng>(source: &PointCloud<T>, n_net: usize, rng: &mut R) -> Vec<T> {
    let n = source.len();
    let idx: Vec<usize> = if n > n_net {
        let mut v = sample(rng, n, n_net).into_vec();
        v.sort_unstable();
        v
    } else {
        (0..n).collect()
    };
    let subset = source.select(&idx);
    let center = subset.centroid().expect("non-empty source");
    let radius = subset
        .points()
        .iter()
        .map(|p| (p - center).norm())
        .fold(T::zero(), |a, b| a.max(b));
    let scale = if radius > T::zero() { T::one() / radius } else { T::one() };
    let mut input = Vec::with_capacity(3 * idx.len());
    for p in subset.points() {
        let d = (p - center) * scale;
        input.extend([d.x, d.y, d.z]);
    }
    input
}

/// Train a freshly initialized encoder on this scene pair so that its output
/// warp minimizes the registration loss. Returns the warp of the final
/// weights.
pub fn optimize_network<T: Real>(
    reference: &PointCloud<T>,
    source: &PointCloud<T>,
    steps: usize,
    seed: u64,
    config: &RegistrationConfig,
) -> Result<OptimizationReport<T>> {
    check_steps(steps)?;
    if config.n_net == 0 {
        return Err(Error::Config("n_net must be positive".into()));
    }
    let started = Instant::now();
    let reference = reference.sorted_by_id();
    let source = source.sorted_by_id();
    let objective = Objective::new(&reference, &source, T::lit(config.lambda_reg), T::lit(config.delta_reg))?;
    let grid = make_anchor_grid(&reference, &source, config.k_anchors)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let input = network_input(&source, config.n_net, &mut rng);
    let mut net = PointEncoderNet::new(config.widths.clone(), config.k_anchors, &mut rng)?;
    net.set_constant_output(&initial_raw(&grid))?;

    let mut adam = AdamState::new(net.param_count(), config.adam);
    let clip = T::lit(config.grad_clip);
    let mut trace = Vec::with_capacity(steps);

    for step in 0..steps {
        let fwd = net.forward(&input);
        let params = theta_from_raw(&grid.centers, &fwd.output)?;
        let (value, mut d_raw) = objective.loss_and_gradient(&params)?;
        let record = LossRecord::from_value(&value);
        trace.push(record);
        if !record.is_finite() || d_raw.iter().any(|g| !g.is_finite()) {
            return Err(Error::Diverged { step, trace });
        }
        raw_gradient(&fwd.output, &mut d_raw);
        let mut grad = net.backward(&fwd, &d_raw);
        clip_global_norm(&mut grad, clip);
        adam.step(net.params_mut(), &grad)?;
    }

    let params = theta_from_raw(&grid.centers, &net.forward(&input).output)?;
    let final_loss = LossRecord::from_value(&objective.loss(&params)?);
    if !final_loss.is_finite() {
        return Err(Error::Diverged { step: steps, trace });
    }
    Ok(OptimizationReport {
        mode: Mode::Network,
        trace,
        params,
        final_loss,
        steps,
        elapsed: started.elapsed(),
    })
}
