//! Recognition networks: feed-forward maps from an observation vector to a
//! factorized approximate posterior `Q(d; o) = Π_k z_k^{d_k} (1 - z_k)^{1 - d_k}`.
//!
//! The input only marks positive findings (`x_i = 1` iff `o_i = +`), so
//! negative and unobserved findings look the same to the network. Two
//! architectures share one parameter layout:
//!
//! * logistic regression: `z = σ(a + W x)`
//! * MLP with skip connection: `y = tanh(b + V x)`, `z = σ(a + W x + U y)`
//!
//! Matrices are row-major: `W` is K×I, `V` is H×I, `U` is K×H.

mod train;

pub use train::{held_out_loss, train, train_on_network, TrainError, TrainReport, TrainerConfig, TrainingStream};

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Bn2oNetwork, DiseaseVector, ObservationVector};
use crate::numeric::{logit, sigmoid};
use crate::rng::Rng;
use crate::scalar::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum RecogError {
    #[error("{what}: expected size {expected}, found {found}")]
    SizeMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("input index {index} out of range for {len} inputs")]
    InputOutOfRange { index: usize, len: usize },
    #[error("recognition model weights must be finite")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Lr,
    Mlp,
}

/// Binary input vector, stored as the sorted indices of its ones.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryInput {
    len: usize,
    active: Vec<usize>,
}

impl BinaryInput {
    pub fn new(len: usize, mut active: Vec<usize>) -> Result<Self, RecogError> {
        active.sort_unstable();
        active.dedup();
        if let Some(&index) = active.iter().find(|&&i| i >= len) {
            return Err(RecogError::InputOutOfRange { index, len });
        }
        Ok(Self { len, active })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn active(&self) -> &[usize] {
        &self.active
    }

    pub fn to_dense<S: Scalar>(&self) -> Vec<S> {
        let mut x = vec![S::zero(); self.len];
        for &i in &self.active {
            x[i] = S::one();
        }
        x
    }
}

/// `x_i = 1` exactly when finding `i` is observed positive.
pub fn encode_input(o: &ObservationVector) -> BinaryInput {
    BinaryInput {
        len: o.len(),
        active: o.pos().to_vec(),
    }
}

/// The parameter set `{W, a, V, b, U}`; also used for gradients and
/// optimizer state. LR models keep `V`, `b`, `U` empty.
#[derive(Debug, Clone, PartialEq)]
pub struct Params<S> {
    pub w: Vec<S>,
    pub a: Vec<S>,
    pub v: Vec<S>,
    pub b: Vec<S>,
    pub u: Vec<S>,
}

impl<S: Scalar> Params<S> {
    pub fn zeros(inputs: usize, outputs: usize, hidden: usize) -> Self {
        Self {
            w: vec![S::zero(); outputs * inputs],
            a: vec![S::zero(); outputs],
            v: vec![S::zero(); hidden * inputs],
            b: vec![S::zero(); hidden],
            u: vec![S::zero(); outputs * hidden],
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            w: vec![S::zero(); self.w.len()],
            a: vec![S::zero(); self.a.len()],
            v: vec![S::zero(); self.v.len()],
            b: vec![S::zero(); self.b.len()],
            u: vec![S::zero(); self.u.len()],
        }
    }

    /// `(name, values, is_bias)` for every group, in file order.
    pub fn groups(&self) -> [(&'static str, &[S], bool); 5] {
        [
            ("W", &self.w, false),
            ("a", &self.a, true),
            ("V", &self.v, false),
            ("b", &self.b, true),
            ("U", &self.u, false),
        ]
    }

    pub fn groups_mut(&mut self) -> [(&'static str, &mut Vec<S>, bool); 5] {
        [
            ("W", &mut self.w, false),
            ("a", &mut self.a, true),
            ("V", &mut self.v, false),
            ("b", &mut self.b, true),
            ("U", &mut self.u, false),
        ]
    }

    pub fn scale(&mut self, c: S) {
        for (_, g, _) in self.groups_mut() {
            g.iter_mut().for_each(|x| *x *= c);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.groups().iter().all(|(_, g, _)| g.iter().all(|x| x.is_finite()))
    }
}

/// LR or MLP recognition network.
#[derive(Debug, Clone, PartialEq)]
pub struct RecognitionModel<S> {
    kind: Kind,
    inputs: usize,
    outputs: usize,
    hidden: usize,
    params: Params<S>,
    frozen_w: bool,
}

/// Forward-pass activations kept for backpropagation.
#[derive(Debug, Clone)]
pub struct Activations<S> {
    pub hidden: Vec<S>,
    pub logits: Vec<S>,
    pub output: Vec<S>,
}

impl<S: Scalar> RecognitionModel<S> {
    /// Assembles a model from explicit parameters, checking their sizes.
    pub fn from_params(
        kind: Kind,
        inputs: usize,
        outputs: usize,
        hidden: usize,
        params: Params<S>,
        frozen_w: bool,
    ) -> Result<Self, RecogError> {
        let hidden = if kind == Kind::Lr { 0 } else { hidden };
        let expect = [
            ("W", outputs * inputs),
            ("a", outputs),
            ("V", hidden * inputs),
            ("b", hidden),
            ("U", outputs * hidden),
        ];
        for ((name, n), (_, g, _)) in expect.iter().zip(params.groups()) {
            if g.len() != *n {
                return Err(RecogError::SizeMismatch {
                    what: name,
                    expected: *n,
                    found: g.len(),
                });
            }
        }
        if !params.all_finite() {
            return Err(RecogError::NonFinite);
        }
        Ok(Self {
            kind,
            inputs,
            outputs,
            hidden,
            params,
            frozen_w,
        })
    }

    /// LR model with zero weights whose biases reproduce the prior:
    /// `a_k = ln(P(d_k=1) / P(d_k=0))`.
    pub fn lr_from_prior(net: &Bn2oNetwork<S>) -> Self {
        let mut params = Params::zeros(net.num_findings(), net.num_diseases(), 0);
        params.a = net.prior().iter().map(|&p| logit(p)).collect();
        Self {
            kind: Kind::Lr,
            inputs: net.num_findings(),
            outputs: net.num_diseases(),
            hidden: 0,
            params,
            frozen_w: false,
        }
    }

    /// MLP whose skip weights `W` and output biases come from a trained LR
    /// model. `W` is frozen; `V` and `U` start uniform in `±init_scale`.
    pub fn mlp_from_lr(lr: &Self, hidden: usize, init_scale: f64, rng: &mut Rng) -> Self {
        let mut params = Params::zeros(lr.inputs, lr.outputs, hidden);
        params.w.clone_from(&lr.params.w);
        params.a.clone_from(&lr.params.a);
        let mut uniform = |n: usize| -> Vec<S> {
            (0..n)
                .map(|_| S::of(rng.gen_range(-init_scale..=init_scale)))
                .collect()
        };
        params.v = uniform(hidden * lr.inputs);
        params.u = uniform(lr.outputs * hidden);
        Self {
            kind: Kind::Mlp,
            inputs: lr.inputs,
            outputs: lr.outputs,
            hidden,
            params,
            frozen_w: true,
        }
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    /// I
    pub fn inputs(&self) -> usize {
        self.inputs
    }

    /// K
    pub fn outputs(&self) -> usize {
        self.outputs
    }

    /// H (0 for LR)
    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn frozen_w(&self) -> bool {
        self.frozen_w
    }

    pub fn set_frozen_w(&mut self, frozen: bool) {
        self.frozen_w = frozen;
    }

    pub fn params(&self) -> &Params<S> {
        &self.params
    }

    pub(crate) fn params_mut(&mut self) -> &mut Params<S> {
        &mut self.params
    }

    fn check_input(&self, x: &BinaryInput) -> Result<(), RecogError> {
        if x.len() != self.inputs {
            return Err(RecogError::SizeMismatch {
                what: "input vector",
                expected: self.inputs,
                found: x.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn activations(&self, x: &BinaryInput) -> Activations<S> {
        let (i_len, h_len) = (self.inputs, self.hidden);
        let p = &self.params;
        let hidden: Vec<S> = (0..h_len)
            .map(|j| {
                let row = &p.v[j * i_len..(j + 1) * i_len];
                let pre = x.active.iter().fold(p.b[j], |acc, &i| acc + row[i]);
                pre.tanh()
            })
            .collect();
        let logits: Vec<S> = (0..self.outputs)
            .map(|k| {
                let row = &p.w[k * i_len..(k + 1) * i_len];
                let mut acc = x.active.iter().fold(p.a[k], |acc, &i| acc + row[i]);
                let urow = &p.u[k * h_len..(k + 1) * h_len];
                for (&ukj, &yj) in urow.iter().zip(&hidden) {
                    acc += ukj * yj;
                }
                acc
            })
            .collect();
        let output = logits.iter().map(|&l| sigmoid(l)).collect();
        Activations {
            hidden,
            logits,
            output,
        }
    }

    /// Approximate posterior marginals `z`.
    pub fn forward(&self, x: &BinaryInput) -> Result<Vec<S>, RecogError> {
        self.check_input(x)?;
        Ok(self.activations(x).output)
    }

    /// `encode_input` followed by `forward`.
    pub fn predict_case(&self, o: &ObservationVector) -> Result<Vec<S>, RecogError> {
        self.forward(&encode_input(o))
    }

    /// Cross-entropy `E = -Σ_n Σ_k [d_k ln z_k + (1-d_k) ln(1-z_k)]` over the
    /// batch with `z` clipped to `[clip, 1-clip]`, and its gradient.
    ///
    /// The gradient is that of the unclipped loss (`∂E/∂logit_k = z_k - d_k`),
    /// which coincides with the clipped one wherever no output is clipped.
    /// A frozen `W` gets a zero gradient.
    pub fn loss_and_grad(
        &self,
        batch: &[(BinaryInput, DiseaseVector)],
        clip: S,
    ) -> Result<(S, Params<S>), RecogError> {
        let mut grad = self.params.zeros_like();
        let mut loss = S::zero();
        let (i_len, h_len) = (self.inputs, self.hidden);
        let (ln_lo, ln_hi) = (clip.ln(), (-clip).ln_1p());
        let mut delta = vec![S::zero(); self.outputs];
        let mut delta_h = vec![S::zero(); h_len];
        for (x, d) in batch {
            self.check_input(x)?;
            if d.len() != self.outputs {
                return Err(RecogError::SizeMismatch {
                    what: "target vector",
                    expected: self.outputs,
                    found: d.len(),
                });
            }
            let act = self.activations(x);
            for k in 0..self.outputs {
                let l = act.logits[k];
                // ln σ(l) = -softplus(-l), ln(1 - σ(l)) = -softplus(l)
                let ln_z = -softplus(-l);
                let ln_1mz = -softplus(l);
                loss -= if d.get(k) {
                    ln_z.max(ln_lo).min(ln_hi)
                } else {
                    ln_1mz.max(ln_lo).min(ln_hi)
                };
                delta[k] = act.output[k] - if d.get(k) { S::one() } else { S::zero() };
            }
            for k in 0..self.outputs {
                let dk = delta[k];
                grad.a[k] += dk;
                if !self.frozen_w {
                    let row = &mut grad.w[k * i_len..(k + 1) * i_len];
                    for &i in &x.active {
                        row[i] += dk;
                    }
                }
                let urow = &mut grad.u[k * h_len..(k + 1) * h_len];
                for (g, &y) in urow.iter_mut().zip(&act.hidden) {
                    *g += dk * y;
                }
            }
            if h_len > 0 {
                for j in 0..h_len {
                    let mut back = S::zero();
                    for k in 0..self.outputs {
                        back += self.params.u[k * h_len + j] * delta[k];
                    }
                    let y = act.hidden[j];
                    delta_h[j] = (S::one() - y * y) * back;
                }
                for j in 0..h_len {
                    grad.b[j] += delta_h[j];
                    let row = &mut grad.v[j * i_len..(j + 1) * i_len];
                    for &i in &x.active {
                        row[i] += delta_h[j];
                    }
                }
            }
        }
        Ok((loss, grad))
    }
}

#[inline]
fn softplus<S: Scalar>(x: S) -> S {
    if x > S::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}
