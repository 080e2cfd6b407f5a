use std::io::{Read, Write};

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use super::tensor::{affine, Tensor};
use crate::error::{LabError, Result};

pub const ADAM_BETA1: f64 = 0.9;
/// Second-moment decay used by every optimizer in the lab (0.99, not 0.999).
pub const ADAM_BETA2: f64 = 0.99;
pub const ADAM_EPS: f64 = 1e-8;

/// Weight initialization distribution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitKind {
    /// Linear-layer default of the common frameworks: weights and biases
    /// uniform in `±1/sqrt(fan_in)` (Kaiming-uniform with `a = sqrt(5)`).
    KaimingUniform,
    /// `N(0, 2/fan_in)`, zero bias.
    KaimingNormal,
    /// `U(±sqrt(6/(fan_in+fan_out)))`, zero bias.
    XavierUniform,
    /// `N(0, 1)`, zero bias.
    Normal01,
    /// `U(-1, 1)`, zero bias.
    UniformPm1,
}

impl InitKind {
    pub const ALL: [InitKind; 5] = [
        InitKind::KaimingUniform,
        InitKind::KaimingNormal,
        InitKind::XavierUniform,
        InitKind::Normal01,
        InitKind::UniformPm1,
    ];

    pub fn id(self) -> &'static str {
        match self {
            InitKind::KaimingUniform => "kaiming-uniform",
            InitKind::KaimingNormal => "kaiming-normal",
            InitKind::XavierUniform => "xavier-uniform",
            InitKind::Normal01 => "normal",
            InitKind::UniformPm1 => "uniform",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        InitKind::ALL
            .into_iter()
            .find(|k| k.id() == s)
            .ok_or_else(|| LabError::config(format!("unknown init scheme `{s}`")))
    }

    fn tag(self) -> u8 {
        match self {
            InitKind::KaimingUniform => 0,
            InitKind::KaimingNormal => 1,
            InitKind::XavierUniform => 2,
            InitKind::Normal01 => 3,
            InitKind::UniformPm1 => 4,
        }
    }

    fn from_tag(t: u8) -> Result<Self> {
        InitKind::ALL
            .into_iter()
            .find(|k| k.tag() == t)
            .ok_or_else(|| LabError::State(format!("bad init tag {t}")))
    }
}

/// Initialization scheme plus the bias given to the output neuron.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitScheme {
    pub kind: InitKind,
    pub output_bias: f64,
}

impl Default for InitScheme {
    fn default() -> Self {
        InitScheme {
            kind: InitKind::KaimingUniform,
            output_bias: 0.0,
        }
    }
}

impl InitScheme {
    pub fn new(kind: InitKind, output_bias: f64) -> Self {
        InitScheme { kind, output_bias }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct LayerSlot {
    fan_in: usize,
    fan_out: usize,
    w_off: usize,
    b_off: usize,
}

/// Gradient of a scalar loss with respect to every parameter of a net, in
/// the net's flat parameter layout.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    data: Vec<f64>,
}

impl Gradients {
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn from_vec(data: Vec<f64>) -> Self {
        Gradients { data }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, g| m.max(g.abs()))
    }
}

/// Activations recorded by [`MlpNet::forward_train`]; `acts[0]` is the input.
#[derive(Clone, Debug)]
struct ForwardCache {
    rows: usize,
    acts: Vec<Vec<f64>>,
}

/// Fully connected ReLU network with a linear output layer and its own Adam state.
///
/// Parameters live in one flat vector, layer by layer: weights (`fan_in x fan_out`,
/// row-major) followed by biases.
#[derive(Clone, Debug)]
pub struct MlpNet {
    dims: Vec<usize>,
    slots: Vec<LayerSlot>,
    params: Vec<f64>,
    adam_m: Vec<f64>,
    adam_v: Vec<f64>,
    adam_t: u64,
    learning_rate: f64,
    scheme: InitScheme,
    cache: Option<ForwardCache>,
}

impl PartialEq for MlpNet {
    fn eq(&self, other: &Self) -> bool {
        self.dims == other.dims
            && self.params == other.params
            && self.adam_m == other.adam_m
            && self.adam_v == other.adam_v
            && self.adam_t == other.adam_t
            && self.learning_rate == other.learning_rate
            && self.scheme == other.scheme
    }
}

fn layout(dims: &[usize]) -> (Vec<LayerSlot>, usize) {
    let mut slots = Vec::with_capacity(dims.len().saturating_sub(1));
    let mut off = 0;
    for w in dims.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        let w_off = off;
        let b_off = w_off + fan_in * fan_out;
        off = b_off + fan_out;
        slots.push(LayerSlot {
            fan_in,
            fan_out,
            w_off,
            b_off,
        });
    }
    (slots, off)
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 {
        return Err(LabError::config(format!(
            "a network needs at least input and output sizes, got {dims:?}"
        )));
    }
    if dims.contains(&0) {
        return Err(LabError::config(format!("zero-width layer in {dims:?}")));
    }
    Ok(())
}

impl MlpNet {
    /// Draws a fresh network. `dims` lists input, hidden and output widths.
    pub fn new<R: Rng + ?Sized>(
        dims: &[usize],
        scheme: InitScheme,
        learning_rate: f64,
        rng: &mut R,
    ) -> Result<Self> {
        check_dims(dims)?;
        if !(learning_rate.is_finite() && learning_rate >= 0.0) {
            return Err(LabError::config(format!("bad learning rate {learning_rate}")));
        }
        let (slots, n) = layout(dims);
        let mut params = vec![0.0; n];
        let last = slots.len() - 1;
        for (i, s) in slots.iter().enumerate() {
            let (w, rest) = params[s.w_off..].split_at_mut(s.fan_in * s.fan_out);
            let b = &mut rest[..s.fan_out];
            fill_layer(scheme.kind, s.fan_in, s.fan_out, w, b, rng);
            if i == last {
                b.fill(scheme.output_bias);
            }
        }
        Ok(MlpNet {
            dims: dims.to_vec(),
            slots,
            adam_m: vec![0.0; n],
            adam_v: vec![0.0; n],
            params,
            adam_t: 0,
            learning_rate,
            scheme,
            cache: None,
        })
    }

    /// Builds a net from explicit parameters in the flat layout.
    pub fn from_params(dims: &[usize], params: Vec<f64>, learning_rate: f64) -> Result<Self> {
        check_dims(dims)?;
        let (slots, n) = layout(dims);
        if params.len() != n {
            return Err(LabError::shape(format!(
                "{dims:?} needs {n} parameters, got {}",
                params.len()
            )));
        }
        Ok(MlpNet {
            dims: dims.to_vec(),
            slots,
            adam_m: vec![0.0; n],
            adam_v: vec![0.0; n],
            params,
            adam_t: 0,
            learning_rate,
            scheme: InitScheme::default(),
            cache: None,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.slots.len()
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn weights(&self, layer: usize) -> Tensor {
        let s = self.slots[layer];
        Tensor::from_vec(
            s.fan_in,
            s.fan_out,
            self.params[s.w_off..s.b_off].to_vec(),
        )
        .expect("layout is consistent")
    }

    pub fn bias(&self, layer: usize) -> &[f64] {
        let s = self.slots[layer];
        &self.params[s.b_off..s.b_off + s.fan_out]
    }

    pub fn bias_mut(&mut self, layer: usize) -> &mut [f64] {
        let s = self.slots[layer];
        &mut self.params[s.b_off..s.b_off + s.fan_out]
    }

    pub fn adam_step_count(&self) -> u64 {
        self.adam_t
    }

    pub fn adam_moments(&self) -> (&[f64], &[f64]) {
        (&self.adam_m, &self.adam_v)
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn set_learning_rate(&mut self, lr: f64) {
        self.learning_rate = lr;
    }

    pub fn scheme(&self) -> InitScheme {
        self.scheme
    }

    fn check_input(&self, batch: &Tensor) -> Result<()> {
        if batch.cols() != self.input_dim() {
            return Err(LabError::shape(format!(
                "net expects {} inputs, batch has {} columns",
                self.input_dim(),
                batch.cols()
            )));
        }
        Ok(())
    }

    /// Pure forward pass.
    pub fn forward(&self, batch: &Tensor) -> Result<Tensor> {
        self.check_input(batch)?;
        let rows = batch.rows();
        let mut cur = batch.data().to_vec();
        let last = self.slots.len() - 1;
        for (i, s) in self.slots.iter().enumerate() {
            let mut out = vec![0.0; rows * s.fan_out];
            affine(
                &cur,
                rows,
                s.fan_in,
                &self.params[s.w_off..s.b_off],
                &self.params[s.b_off..s.b_off + s.fan_out],
                &mut out,
            );
            if i != last {
                relu(&mut out);
            }
            cur = out;
        }
        Tensor::from_vec(rows, self.output_dim(), cur)
    }

    /// Forward pass that records activations for a following [`backward`](Self::backward).
    pub fn forward_train(&mut self, batch: &Tensor) -> Result<Tensor> {
        self.check_input(batch)?;
        let rows = batch.rows();
        let mut acts = Vec::with_capacity(self.slots.len() + 1);
        acts.push(batch.data().to_vec());
        let last = self.slots.len() - 1;
        for (i, s) in self.slots.iter().enumerate() {
            let mut out = vec![0.0; rows * s.fan_out];
            affine(
                acts.last().unwrap(),
                rows,
                s.fan_in,
                &self.params[s.w_off..s.b_off],
                &self.params[s.b_off..s.b_off + s.fan_out],
                &mut out,
            );
            if i != last {
                relu(&mut out);
            }
            acts.push(out);
        }
        let output = Tensor::from_vec(rows, self.output_dim(), acts.last().unwrap().clone())?;
        self.cache = Some(ForwardCache { rows, acts });
        Ok(output)
    }

    /// Gradients of `sum(upstream ⊙ output)` with respect to every parameter,
    /// using (and consuming) the activations of the last `forward_train`.
    pub fn backward(&mut self, upstream: &Tensor) -> Result<Gradients> {
        let cache = self
            .cache
            .take()
            .ok_or_else(|| LabError::State("backward called without a cached forward pass".into()))?;
        if upstream.rows() != cache.rows || upstream.cols() != self.output_dim() {
            let msg = format!(
                "upstream gradient is {}x{}, output is {}x{}",
                upstream.rows(),
                upstream.cols(),
                cache.rows,
                self.output_dim()
            );
            self.cache = Some(cache);
            return Err(LabError::shape(msg));
        }
        let rows = cache.rows;
        let mut grads = vec![0.0; self.params.len()];
        let mut delta = upstream.data().to_vec();
        for (li, s) in self.slots.iter().enumerate().rev() {
            let input = &cache.acts[li];
            let (gw, rest) = grads[s.w_off..].split_at_mut(s.fan_in * s.fan_out);
            let gb = &mut rest[..s.fan_out];
            for r in 0..rows {
                let dr = &delta[r * s.fan_out..(r + 1) * s.fan_out];
                for (b, &d) in gb.iter_mut().zip(dr) {
                    *b += d;
                }
                let xr = &input[r * s.fan_in..(r + 1) * s.fan_in];
                for (k, &xv) in xr.iter().enumerate() {
                    if xv == 0.0 {
                        continue;
                    }
                    let row = &mut gw[k * s.fan_out..(k + 1) * s.fan_out];
                    for (g, &d) in row.iter_mut().zip(dr) {
                        *g += xv * d;
                    }
                }
            }
            if li == 0 {
                break;
            }
            // Propagate through the weights, then through the ReLU of the layer below.
            let w = &self.params[s.w_off..s.b_off];
            let mut below = vec![0.0; rows * s.fan_in];
            for r in 0..rows {
                let dr = &delta[r * s.fan_out..(r + 1) * s.fan_out];
                let xr = &input[r * s.fan_in..(r + 1) * s.fan_in];
                let br = &mut below[r * s.fan_in..(r + 1) * s.fan_in];
                for k in 0..s.fan_in {
                    if xr[k] <= 0.0 {
                        continue;
                    }
                    let wk = &w[k * s.fan_out..(k + 1) * s.fan_out];
                    br[k] = wk.iter().zip(dr).map(|(a, b)| a * b).sum();
                }
            }
            delta = below;
        }
        Ok(Gradients { data: grads })
    }

    /// Forward + mean-squared-error gradient against `targets` in one call.
    /// Returns the loss `mean((f(x) - y)^2)` and its gradients.
    pub fn mse_gradients(&mut self, batch: &Tensor, targets: &Tensor) -> Result<(f64, Gradients)> {
        let out = self.forward_train(batch)?;
        if targets.rows() != out.rows() || targets.cols() != out.cols() {
            self.cache = None;
            return Err(LabError::shape(format!(
                "targets are {}x{}, outputs {}x{}",
                targets.rows(),
                targets.cols(),
                out.rows(),
                out.cols()
            )));
        }
        let n = out.data().len().max(1) as f64;
        let mut loss = 0.0;
        let up: Vec<f64> = out
            .data()
            .iter()
            .zip(targets.data())
            .map(|(o, t)| {
                let e = o - t;
                loss += e * e;
                2.0 * e / n
            })
            .collect();
        let up = Tensor::from_vec(out.rows(), out.cols(), up)?;
        let g = self.backward(&up)?;
        Ok((loss / n, g))
    }

    /// One Adam update with bias correction.
    pub fn adam_step(&mut self, grads: &Gradients) -> Result<()> {
        if grads.len() != self.params.len() {
            return Err(LabError::shape(format!(
                "{} gradients for {} parameters",
                grads.len(),
                self.params.len()
            )));
        }
        self.adam_t += 1;
        let t = self.adam_t as i32;
        let c1 = 1.0 - ADAM_BETA1.powi(t);
        let c2 = 1.0 - ADAM_BETA2.powi(t);
        let lr = self.learning_rate;
        for (((p, m), v), &g) in self
            .params
            .iter_mut()
            .zip(self.adam_m.iter_mut())
            .zip(self.adam_v.iter_mut())
            .zip(&grads.data)
        {
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
        Ok(())
    }

    /// Copies parameters (not optimizer state) from `other`.
    pub fn copy_params_from(&mut self, other: &MlpNet) -> Result<()> {
        if self.dims != other.dims {
            return Err(LabError::shape(format!(
                "cannot copy {:?} into {:?}",
                other.dims, self.dims
            )));
        }
        self.params.copy_from_slice(&other.params);
        Ok(())
    }

    const MAGIC: &'static [u8; 8] = b"QXNET001";

    /// Writes dims, learning rate, Adam state and parameters as little-endian binary.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(Self::MAGIC)?;
        w.write_all(&(self.dims.len() as u64).to_le_bytes())?;
        for &d in &self.dims {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        w.write_all(&[self.scheme.kind.tag()])?;
        w.write_all(&self.scheme.output_bias.to_le_bytes())?;
        w.write_all(&self.learning_rate.to_le_bytes())?;
        w.write_all(&self.adam_t.to_le_bytes())?;
        for block in [&self.params, &self.adam_m, &self.adam_v] {
            for v in block.iter() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != Self::MAGIC {
            return Err(LabError::State("not a network checkpoint".into()));
        }
        let n_dims = read_u64(&mut r)? as usize;
        if n_dims > 64 {
            return Err(LabError::State(format!("implausible layer count {n_dims}")));
        }
        let dims = (0..n_dims)
            .map(|_| read_u64(&mut r).map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let mut tag = [0u8; 1];
        r.read_exact(&mut tag)?;
        let kind = InitKind::from_tag(tag[0])?;
        let output_bias = read_f64(&mut r)?;
        let learning_rate = read_f64(&mut r)?;
        let adam_t = read_u64(&mut r)?;
        let mut net = MlpNet::from_params(&dims, vec![0.0; layout(&dims).1], learning_rate)?;
        net.scheme = InitScheme::new(kind, output_bias);
        net.adam_t = adam_t;
        for block in [&mut net.params, &mut net.adam_m, &mut net.adam_v] {
            for v in block.iter_mut() {
                *v = read_f64(&mut r)?;
            }
        }
        Ok(net)
    }
}

pub(crate) fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub(crate) fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

#[inline]
fn relu(xs: &mut [f64]) {
    for x in xs {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

fn fill_layer<R: Rng + ?Sized>(
    kind: InitKind,
    fan_in: usize,
    fan_out: usize,
    w: &mut [f64],
    b: &mut [f64],
    rng: &mut R,
) {
    let uniform = |bound: f64, xs: &mut [f64], rng: &mut R| {
        let d = Uniform::new_inclusive(-bound, bound).expect("finite bound");
        xs.iter_mut().for_each(|x| *x = d.sample(rng));
    };
    let normal = |std: f64, xs: &mut [f64], rng: &mut R| {
        let d = Normal::new(0.0, std).expect("finite std");
        xs.iter_mut().for_each(|x| *x = d.sample(rng));
    };
    match kind {
        InitKind::KaimingUniform => {
            let bound = 1.0 / (fan_in as f64).sqrt();
            uniform(bound, w, rng);
            uniform(bound, b, rng);
        }
        InitKind::KaimingNormal => {
            normal((2.0 / fan_in as f64).sqrt(), w, rng);
            b.fill(0.0);
        }
        InitKind::XavierUniform => {
            uniform((6.0 / (fan_in + fan_out) as f64).sqrt(), w, rng);
            b.fill(0.0);
        }
        InitKind::Normal01 => {
            normal(1.0, w, rng);
            b.fill(0.0);
        }
        InitKind::UniformPm1 => {
            uniform(1.0, w, rng);
            b.fill(0.0);
        }
    }
}
