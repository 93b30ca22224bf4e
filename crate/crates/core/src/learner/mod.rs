//! Offline Q-learning from demonstrations over spatial action maps: n-step TD
//! plus a strict large-margin loss, and a greedy policy for rollouts.

mod checkpoint;
mod net;


use std::fmt::Debug;
use std::iter::Sum;

use num_traits::{Float, NumAssign};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blockworld::{observe, Observation, SimConfig};
use crate::demostore::{Episode, GridAction, StoreGrid};
use crate::dsl::Skill;
use crate::tasks::{make_scene, oracle_check, TaskName};

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use net::{encode, Activations, Architecture, ConvQNet, LayerSpec, HEIGHT_SCALE, INPUT_CHANNELS};

/// Real type the learner is generic over.
pub trait Scalar: Float + NumAssign + Sum + Debug + Default + Send + Sync + 'static {}

impl<T: Float + NumAssign + Sum + Debug + Default + Send + Sync + 'static> Scalar for T {}

pub(crate) fn cast<T: Scalar>(x: f64) -> T {
    T::from(x).expect("f64 converts to any float type")
}

/// Single-precision network used by the CLI.
pub type QNet = ConvQNet<f32>;
/// Double precision, for gradient checks.
pub type QNet64 = ConvQNet<f64>;

#[derive(Debug, thiserror::Error)]
pub enum LearnerError {
    #[error("NONFINITE_LOSS at step {step}: {detail}")]
    NonfiniteLoss { step: usize, detail: String },
    #[error("IO: {0}")]
    Io(#[from] std::io::Error),
    #[error("CORRUPT: {0}")]
    Corrupt(String),
    #[error("VERSION_MISMATCH: checkpoint version {found}, expected {CHECKPOINT_VERSION}")]
    VersionMismatch { found: u16 },
    #[error("shape: {0}")]
    Shape(String),
    #[error("no transitions to train on")]
    EmptyDataset,
}

/// Anything that maps encoded input planes to a flat `G*G*R` Q-grid.
pub trait QModel<T: Scalar>: Send + Sync {
    fn grid(&self) -> usize;
    fn rotations(&self) -> usize;
    fn q_values(&self, input: &[T]) -> Vec<T>;
}

pub fn flat_index(a: GridAction, g: usize, r: usize) -> usize {
    (a.i as usize * g + a.j as usize) * r + a.k as usize
}

pub fn unflatten(idx: usize, g: usize, r: usize, skill: Skill) -> GridAction {
    let k = idx % r;
    let cell = idx / r;
    GridAction { skill, i: (cell / g) as u16, j: (cell % g) as u16, k: k as u16 }
}

/// Mean hinge over the actions that come within `margin` of the expert's value.
pub fn slm_loss<T: Scalar>(q: &[T], expert: usize, margin: T) -> T {
    slm_loss_grad(q, expert, margin, None)
}

/// As [`slm_loss`]; when `grad` is given, adds `scale * d(loss)/dq` to it.
pub fn slm_loss_grad<T: Scalar>(q: &[T], expert: usize, margin: T, grad: Option<(&mut [T], T)>) -> T {
    let qe = q[expert];
    let mut sum = T::zero();
    let mut n = 0usize;
    for (a, &v) in q.iter().enumerate() {
        if a != expert && v + margin > qe {
            sum += v + margin - qe;
            n += 1;
        }
    }
    if n == 0 {
        return T::zero();
    }
    let inv = T::one() / cast::<T>(n as f64);
    if let Some((g, scale)) = grad {
        let s = scale * inv;
        for (a, &v) in q.iter().enumerate() {
            if a != expert && v + margin > qe {
                g[a] += s;
            }
        }
        g[expert] -= scale;
    }
    sum * inv
}

/// One episode in network input form.
#[derive(Clone, Debug)]
pub struct EncodedEpisode<T> {
    /// `n + 1` inputs: every pre-action observation, then the final one.
    pub inputs: Vec<Vec<T>>,
    pub actions: Vec<usize>,
    pub rewards: Vec<T>,
    pub dones: Vec<bool>,
}

impl<T: Scalar> EncodedEpisode<T> {
    pub fn from_episode(ep: &Episode, g: usize, r: usize) -> Result<Self, LearnerError> {
        let tr = &ep.transitions;
        if tr.is_empty() {
            return Err(LearnerError::Shape(format!("episode {} seed {} has no transitions", ep.task, ep.seed)));
        }
        if tr[0].obs.heightmap.side != g {
            return Err(LearnerError::Shape(format!("demos use G = {}, the network G = {g}", tr[0].obs.heightmap.side)));
        }
        let mut inputs: Vec<Vec<T>> = tr.iter().map(|t| encode(&t.obs)).collect();
        inputs.push(encode(&tr[tr.len() - 1].next_obs));
        let actions = tr
            .iter()
            .map(|t| {
                if (t.action.k as usize) < r {
                    Ok(flat_index(t.action, g, r))
                } else {
                    Err(LearnerError::Shape(format!("rotation index {} with R = {r}", t.action.k)))
                }
            })
            .collect::<Result<_, _>>()?;
        Ok(Self {
            inputs,
            actions,
            rewards: tr.iter().map(|t| cast(f64::from(t.reward))).collect(),
            dones: tr.iter().map(|t| t.done).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// `sum_{i<m} gamma^i r_{t+i}`, plus `gamma^m max_a Q_target(s_{t+m})` unless the episode ends first.
pub fn nstep_targets<T: Scalar, M: QModel<T> + ?Sized>(ep: &EncodedEpisode<T>, t: usize, gamma: T, n: usize, target: &M) -> T {
    assert!(t < ep.len(), "t is outside the episode");
    let n = n.max(1);
    let mut y = T::zero();
    let mut discount = T::one();
    let mut m = 0;
    while m < n && t + m < ep.len() {
        y += discount * ep.rewards[t + m];
        discount *= gamma;
        m += 1;
        if ep.dones[t + m - 1] {
            return y;
        }
    }
    let q = target.q_values(&ep.inputs[t + m]);
    let best = q.iter().copied().fold(T::neg_infinity(), T::max);
    y + discount * best
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub gamma: f64,
    pub n_step: usize,
    pub margin: f64,
    pub slm_weight: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub target_sync: usize,
    pub steps: usize,
    pub seed: u64,
    pub arch: Architecture,
    pub hidden: usize,
    pub rotations: usize,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            gamma: 0.9,
            n_step: 3,
            margin: 0.1,
            slm_weight: 1.0,
            lr: 1e-3,
            batch_size: 16,
            target_sync: 100,
            steps: 1500,
            seed: 0,
            arch: Architecture::Conv,
            hidden: 16,
            rotations: 8,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<(), String> {
        let checks = [
            (self.gamma > 0.0 && self.gamma <= 1.0, "gamma must be in (0, 1]"),
            (self.n_step >= 1, "n_step must be at least 1"),
            (self.margin > 0.0, "margin must be positive"),
            (self.slm_weight >= 0.0, "slm_weight must be non-negative"),
            (self.lr > 0.0, "lr must be positive"),
            (self.batch_size >= 1, "batch_size must be at least 1"),
            (self.target_sync >= 1, "target_sync must be at least 1"),
            (self.hidden >= 1, "hidden must be at least 1"),
            (self.rotations >= 1, "rotations must be at least 1"),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(msg.to_string()),
            None => Ok(()),
        }
    }
}

/// Demonstrations prepared for training.
#[derive(Clone, Debug)]
pub struct Dataset<T> {
    pub episodes: Vec<EncodedEpisode<T>>,
    /// (episode, step) of every transition.
    pub index: Vec<(usize, usize)>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(episodes: &[Episode], g: usize, r: usize) -> Result<Self, LearnerError> {
        let episodes: Vec<EncodedEpisode<T>> =
            episodes.iter().map(|e| EncodedEpisode::from_episode(e, g, r)).collect::<Result<_, _>>()?;
        let index = episodes.iter().enumerate().flat_map(|(e, ep)| (0..ep.len()).map(move |t| (e, t))).collect();
        Ok(Self { episodes, index })
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }
}

/// Mean over `batch` of `(Q(s, a_E) - y)^2 + w * slm`, and its gradient.
pub fn batch_loss_and_grad<T: Scalar>(
    model: &ConvQNet<T>,
    target: &ConvQNet<T>,
    data: &Dataset<T>,
    batch: &[(usize, usize)],
    cfg: &LearnerConfig,
) -> (T, Vec<T>) {
    let (gamma, margin, w) = (cast::<T>(cfg.gamma), cast::<T>(cfg.margin), cast::<T>(cfg.slm_weight));
    let per_sample: Vec<(T, Vec<T>)> = batch
        .par_iter()
        .map(|&(e, t)| {
            let ep = &data.episodes[e];
            let y = nstep_targets(ep, t, gamma, cfg.n_step, target);
            let (q, cache) = model.forward_train(&ep.inputs[t]);
            let a = ep.actions[t];
            let td = q[a] - y;
            let mut dq = vec![T::zero(); q.len()];
            let slm = slm_loss_grad(&q, a, margin, Some((&mut dq, w)));
            dq[a] += cast::<T>(2.0) * td;
            let mut grad = vec![T::zero(); model.params().len()];
            model.backward(&cache, &dq, &mut grad);
            (td * td + w * slm, grad)
        })
        .collect();
    let scale = T::one() / cast::<T>(batch.len().max(1) as f64);
    let mut grad = vec![T::zero(); model.params().len()];
    let mut loss = T::zero();
    for (l, g) in per_sample {
        loss += l;
        for (acc, v) in grad.iter_mut().zip(g) {
            *acc += v;
        }
    }
    for v in &mut grad {
        *v *= scale;
    }
    (loss * scale, grad)
}

#[derive(Clone, Debug)]
pub struct Adam<T> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    m: Vec<T>,
    v: Vec<T>,
    t: i32,
}

impl<T: Scalar> Adam<T> {
    pub fn new(n: usize, lr: f64) -> Self {
        Self { lr: cast(lr), beta1: cast(0.9), beta2: cast(0.999), eps: cast(1e-8), m: vec![T::zero(); n], v: vec![T::zero(); n], t: 0 }
    }

    pub fn step(&mut self, params: &mut [T], grad: &[T]) {
        self.t += 1;
        let one = T::one();
        let c1 = one - self.beta1.powi(self.t);
        let c2 = one - self.beta2.powi(self.t);
        for (((p, &g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = self.beta1 * *m + (one - self.beta1) * g;
            *v = self.beta2 * *v + (one - self.beta2) * g * g;
            *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
        }
    }
}

/// Online network, target network and optimizer state.
pub struct Trainer<T> {
    pub model: ConvQNet<T>,
    pub target: ConvQNet<T>,
    pub cfg: LearnerConfig,
    adam: Adam<T>,
    rng: ChaCha8Rng,
    pub step: usize,
    pub losses: Vec<T>,
}

impl<T: Scalar> Trainer<T> {
    pub fn new(cfg: LearnerConfig, grid: usize) -> Self {
        let model = ConvQNet::new(cfg.arch, grid, cfg.rotations, cfg.hidden, cfg.seed);
        Self::with_model(cfg, model)
    }

    pub fn with_model(cfg: LearnerConfig, model: ConvQNet<T>) -> Self {
        let adam = Adam::new(model.params().len(), cfg.lr);
        let rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x05ee_d0fb_a7c4);
        Self { target: model.clone(), model, adam, rng, step: 0, losses: Vec::new(), cfg }
    }

    /// One gradient step on a uniformly sampled batch. The target network is
    /// refreshed every `target_sync` steps.
    pub fn train_step(&mut self, data: &Dataset<T>) -> Result<T, LearnerError> {
        if data.is_empty() {
            return Err(LearnerError::EmptyDataset);
        }
        let batch: Vec<(usize, usize)> =
            (0..self.cfg.batch_size).map(|_| data.index[self.rng.random_range(0..data.len())]).collect();
        let (loss, grad) = batch_loss_and_grad(&self.model, &self.target, data, &batch, &self.cfg);
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(LearnerError::NonfiniteLoss {
                step: self.step,
                detail: format!("loss {loss:?}, batch {batch:?}"),
            });
        }
        self.adam.step(self.model.params_mut(), &grad);
        self.step += 1;
        if self.step.is_multiple_of(self.cfg.target_sync) {
            self.target.set_params(self.model.params());
        }
        self.losses.push(loss);
        Ok(loss)
    }

    /// Runs `cfg.steps` steps, calling `progress(step, loss)` after each.
    pub fn train(&mut self, data: &Dataset<T>, mut progress: impl FnMut(usize, T)) -> Result<(), LearnerError> {
        for _ in 0..self.cfg.steps {
            let loss = self.train_step(data)?;
            progress(self.step, loss);
        }
        Ok(())
    }
}

/// Argmax over the flat Q-grid with ties to the lowest index. With `mask`,
/// PICK actions over empty heightmap cells are excluded unless every cell is empty.
pub fn greedy_action<T: Scalar>(q: &[T], obs: &Observation, g: usize, r: usize, mask: bool) -> GridAction {
    assert_eq!(q.len(), g * g * r, "Q-grid does not match G and R");
    let skill = if obs.gripper == 0 { Skill::Pick } else { Skill::Place };
    let masked = mask && skill == Skill::Pick && !obs.heightmap.is_zero() && obs.heightmap.side == g;
    let mut best: Option<(usize, T)> = None;
    for (idx, &v) in q.iter().enumerate() {
        if v.is_nan() || (masked && obs.heightmap.data[idx / r] == 0.0) {
            continue;
        }
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((idx, v));
        }
    }
    unflatten(best.map_or(0, |(i, _)| i), g, r, skill)
}

pub fn act_greedy<T: Scalar, M: QModel<T> + ?Sized>(model: &M, obs: &Observation, mask: bool) -> GridAction {
    let q = model.q_values(&encode::<T>(obs));
    greedy_action(&q, obs, model.grid(), model.rotations(), mask)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalSettings {
    pub sim: SimConfig,
    pub grid: StoreGrid,
    pub mask: bool,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self { sim: SimConfig::default(), grid: StoreGrid::default(), mask: true }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rollout {
    pub seed: u64,
    pub success: bool,
    pub actions: Vec<GridAction>,
    /// Robot fault that ended the rollout early.
    pub fault: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub task: TaskName,
    pub rollouts: Vec<Rollout>,
}

impl EvalReport {
    pub fn successes(&self) -> usize {
        self.rollouts.iter().filter(|r| r.success).count()
    }

    /// Success rate, undefined without scenes.
    pub fn ap(&self) -> Option<f64> {
        (!self.rollouts.is_empty()).then(|| self.successes() as f64 / self.rollouts.len() as f64)
    }
}

/// Greedy rollout for at most twice the task's step count. A robot fault ends
/// the rollout: the policy is deterministic and would repeat the action.
pub fn rollout<T: Scalar, M: QModel<T> + ?Sized>(model: &M, task: TaskName, seed: u64, s: &EvalSettings) -> Rollout {
    let mut out = Rollout { seed, success: false, actions: Vec::new(), fault: None };
    let mut scene = match make_scene(task, seed, &s.sim) {
        Ok(sc) => sc,
        Err(e) => {
            out.fault = Some(e.to_string());
            return out;
        }
    };
    let side = s.sim.side;
    for _ in 0..2 * task.spec().steps() {
        let obs = match s.grid.pool(&observe(&scene, s.sim.render())) {
            Ok(o) => o,
            Err(e) => {
                out.fault = Some(e.to_string());
                return out;
            }
        };
        let a = act_greedy(model, &obs, s.mask);
        out.actions.push(a);
        let (x, y, theta) = s.grid.to_world(side, a.i, a.j, a.k);
        let next = match a.skill {
            Skill::Pick => scene.pick(x, y, theta),
            Skill::Place => scene.place(x, y, theta),
        };
        match next {
            Ok(n) => scene = n,
            Err(f) => {
                out.fault = Some(f.to_string());
                return out;
            }
        }
        if oracle_check(task, &scene) {
            out.success = true;
            return out;
        }
    }
    out
}

pub fn evaluate<T: Scalar, M: QModel<T> + ?Sized>(model: &M, task: TaskName, seeds: &[u64], s: &EvalSettings) -> EvalReport {
    let rollouts = seeds.par_iter().map(|&seed| rollout(model, task, seed, s)).collect();
    EvalReport { task, rollouts }
}
