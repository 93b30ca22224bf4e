//! Fully convolutional Q-map approximator with hand-written backpropagation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{cast, QModel, Scalar};
use crate::blockworld::Observation;

/// Input planes: heightmap, broadcast gripper flag, centered in-hand crop.
pub const INPUT_CHANNELS: usize = 3;
/// Heights are multiplied by this before entering the network.
pub const HEIGHT_SCALE: f64 = 20.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub in_c: usize,
    pub out_c: usize,
    /// Odd kernel side.
    pub kernel: usize,
    pub dilation: usize,
    pub relu: bool,
}

impl LayerSpec {
    fn weights(&self) -> usize {
        self.out_c * self.in_c * self.kernel * self.kernel
    }

    fn params(&self) -> usize {
        self.weights() + self.out_c
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    /// Three 3x3 ReLU layers (the last dilated by 2) and a 1x1 head.
    Conv,
    /// A single linear 7x7 filter bank over the input planes.
    PatchLinear,
}

impl Architecture {
    pub fn id(self) -> u16 {
        match self {
            Architecture::Conv => 1,
            Architecture::PatchLinear => 2,
        }
    }

    pub fn from_id(id: u16) -> Option<Self> {
        [Architecture::Conv, Architecture::PatchLinear].into_iter().find(|a| a.id() == id)
    }

    pub fn layers(self, hidden: usize, rotations: usize) -> Vec<LayerSpec> {
        let l = |in_c, out_c, kernel, dilation, relu| LayerSpec { in_c, out_c, kernel, dilation, relu };
        match self {
            Architecture::Conv => vec![
                l(INPUT_CHANNELS, hidden, 3, 1, true),
                l(hidden, hidden, 3, 1, true),
                l(hidden, hidden, 3, 2, true),
                l(hidden, rotations, 1, 1, false),
            ],
            Architecture::PatchLinear => vec![l(INPUT_CHANNELS, rotations, 7, 1, false)],
        }
    }
}

impl std::str::FromStr for Architecture {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "conv" => Ok(Architecture::Conv),
            "patch_linear" => Ok(Architecture::PatchLinear),
            _ => Err(format!("unknown architecture '{s}' (expected conv or patch_linear)")),
        }
    }
}

/// Network input planes, `[channel][i][j]`.
pub fn encode<T: Scalar>(obs: &Observation) -> Vec<T> {
    let g = obs.heightmap.side;
    let gg = g * g;
    let mut x = vec![T::zero(); INPUT_CHANNELS * gg];
    let s = HEIGHT_SCALE as f32;
    for (dst, &h) in x[..gg].iter_mut().zip(&obs.heightmap.data) {
        *dst = cast(f64::from(h * s));
    }
    x[gg..2 * gg].fill(cast(f64::from(obs.gripper)));
    let c = obs.inhand.side.min(g);
    let off = (g - c) / 2;
    for a in 0..c {
        for b in 0..c {
            x[2 * gg + (a + off) * g + b + off] = cast(f64::from(obs.inhand.get(a, b) * s));
        }
    }
    x
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvQNet<T> {
    pub arch: Architecture,
    g: usize,
    r: usize,
    layers: Vec<LayerSpec>,
    offsets: Vec<usize>,
    params: Vec<T>,
}

/// Activations kept for the backward pass; `acts[0]` is the input.
pub struct Activations<T> {
    acts: Vec<Vec<T>>,
}

impl<T: Scalar> ConvQNet<T> {
    pub fn new(arch: Architecture, g: usize, r: usize, hidden: usize, seed: u64) -> Self {
        Self::from_layers(arch, g, r, arch.layers(hidden, r), seed)
    }

    /// He-normal weights and zero biases drawn from `seed`.
    pub fn from_layers(arch: Architecture, g: usize, r: usize, layers: Vec<LayerSpec>, seed: u64) -> Self {
        let mut net = Self::zeroed(arch, g, r, layers);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (l, spec) in net.layers.iter().enumerate() {
            let fan_in = (spec.in_c * spec.kernel * spec.kernel) as f64;
            let std = if spec.relu { (2.0 / fan_in).sqrt() } else { (1.0 / fan_in).sqrt() };
            let start = net.offsets[l];
            for w in &mut net.params[start..start + spec.weights()] {
                let z: f64 = StandardNormal.sample(&mut rng);
                *w = cast(z * std);
            }
        }
        net
    }

    pub fn zeroed(arch: Architecture, g: usize, r: usize, layers: Vec<LayerSpec>) -> Self {
        assert!(!layers.is_empty(), "a network needs at least one layer");
        assert_eq!(layers[0].in_c, INPUT_CHANNELS, "first layer must take the input planes");
        assert_eq!(layers.last().map(|l| l.out_c), Some(r), "last layer must emit one plane per rotation");
        for w in layers.windows(2) {
            assert_eq!(w[0].out_c, w[1].in_c, "layer channel mismatch");
        }
        assert!(layers.iter().all(|l| l.kernel % 2 == 1 && l.dilation >= 1), "kernels must be odd");
        let mut offsets = Vec::with_capacity(layers.len());
        let mut n = 0;
        for l in &layers {
            offsets.push(n);
            n += l.params();
        }
        Self { arch, g, r, layers, offsets, params: vec![T::zero(); n] }
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn set_params(&mut self, p: &[T]) {
        self.params.copy_from_slice(p);
    }

    fn split(&self, l: usize) -> (&[T], &[T]) {
        let spec = &self.layers[l];
        let start = self.offsets[l];
        self.params[start..start + spec.params()].split_at(spec.weights())
    }

    pub fn forward_train(&self, input: &[T]) -> (Vec<T>, Activations<T>) {
        let gg = self.g * self.g;
        assert_eq!(input.len(), INPUT_CHANNELS * gg, "input does not match the network grid");
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(input.to_vec());
        for (l, spec) in self.layers.iter().enumerate() {
            let (w, b) = self.split(l);
            let mut out = vec![T::zero(); spec.out_c * gg];
            conv_forward(spec, w, b, acts.last().expect("input"), &mut out, self.g);
            if spec.relu {
                for v in &mut out {
                    if *v < T::zero() {
                        *v = T::zero();
                    }
                }
            }
            acts.push(out);
        }
        let q = self.to_flat(acts.last().expect("output"));
        (q, Activations { acts })
    }

    /// Planes `[k][i][j]` to flat `(i*G + j)*R + k`.
    fn to_flat(&self, planes: &[T]) -> Vec<T> {
        let gg = self.g * self.g;
        let mut q = vec![T::zero(); gg * self.r];
        for k in 0..self.r {
            for p in 0..gg {
                q[p * self.r + k] = planes[k * gg + p];
            }
        }
        q
    }

    /// Accumulates d(loss)/d(params) into `grad` given d(loss)/dQ in flat order.
    pub fn backward(&self, cache: &Activations<T>, dq: &[T], grad: &mut [T]) {
        let gg = self.g * self.g;
        let mut d = vec![T::zero(); self.r * gg];
        for k in 0..self.r {
            for p in 0..gg {
                d[k * gg + p] = dq[p * self.r + k];
            }
        }
        for l in (0..self.layers.len()).rev() {
            let spec = &self.layers[l];
            if spec.relu {
                for (dv, &a) in d.iter_mut().zip(&cache.acts[l + 1]) {
                    if a <= T::zero() {
                        *dv = T::zero();
                    }
                }
            }
            let (w, _) = self.split(l);
            let start = self.offsets[l];
            let (gw, gb) = grad[start..start + spec.params()].split_at_mut(spec.weights());
            let mut din = if l > 0 { Some(vec![T::zero(); spec.in_c * gg]) } else { None };
            conv_backward(spec, w, &cache.acts[l], &d, gw, gb, din.as_deref_mut(), self.g);
            if let Some(next) = din {
                d = next;
            }
        }
    }
}

impl<T: Scalar> QModel<T> for ConvQNet<T> {
    fn grid(&self) -> usize {
        self.g
    }

    fn rotations(&self) -> usize {
        self.r
    }

    fn q_values(&self, input: &[T]) -> Vec<T> {
        self.forward_train(input).0
    }
}

/// Row/column offset of kernel tap `t` and the valid output range along one axis.
fn tap(t: usize, spec: &LayerSpec, g: usize) -> (isize, usize, usize) {
    let d = (t as isize - (spec.kernel / 2) as isize) * spec.dilation as isize;
    let lo = (-d).max(0) as usize;
    let hi = (g as isize - d.max(0)).max(0) as usize;
    (d, lo, hi.max(lo))
}

fn conv_forward<T: Scalar>(spec: &LayerSpec, w: &[T], b: &[T], input: &[T], out: &mut [T], g: usize) {
    let gg = g * g;
    let k = spec.kernel;
    for o in 0..spec.out_c {
        let plane = &mut out[o * gg..(o + 1) * gg];
        plane.fill(b[o]);
        for c in 0..spec.in_c {
            let src = &input[c * gg..(c + 1) * gg];
            for ki in 0..k {
                let (di, i0, i1) = tap(ki, spec, g);
                for kj in 0..k {
                    let (dj, j0, j1) = tap(kj, spec, g);
                    let wv = w[((o * spec.in_c + c) * k + ki) * k + kj];
                    for i in i0..i1 {
                        let si = (i as isize + di) as usize;
                        let s = &src[si * g..si * g + g];
                        let dst = &mut plane[i * g + j0..i * g + j1];
                        let s = &s[(j0 as isize + dj) as usize..(j1 as isize + dj) as usize];
                        for (y, &x) in dst.iter_mut().zip(s) {
                            *y += wv * x;
                        }
                    }
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn conv_backward<T: Scalar>(
    spec: &LayerSpec,
    w: &[T],
    input: &[T],
    dout: &[T],
    gw: &mut [T],
    gb: &mut [T],
    mut din: Option<&mut [T]>,
    g: usize,
) {
    let gg = g * g;
    let k = spec.kernel;
    for o in 0..spec.out_c {
        let dplane = &dout[o * gg..(o + 1) * gg];
        gb[o] += dplane.iter().copied().sum::<T>();
        for c in 0..spec.in_c {
            let src = &input[c * gg..(c + 1) * gg];
            for ki in 0..k {
                let (di, i0, i1) = tap(ki, spec, g);
                for kj in 0..k {
                    let (dj, j0, j1) = tap(kj, spec, g);
                    let widx = ((o * spec.in_c + c) * k + ki) * k + kj;
                    let wv = w[widx];
                    let mut acc = T::zero();
                    for i in i0..i1 {
                        let si = (i as isize + di) as usize;
                        let sj = (j0 as isize + dj) as usize;
                        let drow = &dplane[i * g + j0..i * g + j1];
                        let srow = &src[si * g + sj..si * g + sj + (j1 - j0)];
                        for (&dv, &x) in drow.iter().zip(srow) {
                            acc += dv * x;
                        }
                        if let Some(din) = din.as_deref_mut() {
                            let irow = &mut din[c * gg + si * g + sj..c * gg + si * g + sj + (j1 - j0)];
                            for (y, &dv) in irow.iter_mut().zip(drow) {
                                *y += wv * dv;
                            }
                        }
                    }
                    gw[widx] += acc;
                }
            }
        }
    }
}
