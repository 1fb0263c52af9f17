//! Two-phase adaptive importance sampling (AIS-BN) on the unaugmented network.
//!
//! Diseases are roots, so the importance function is a product of independent
//! Bernoulli proposals. Phase 1 adapts them towards the running posterior
//! estimate; phase 2 keeps them fixed and estimates `P(d_k = 1 | F)` and
//! `P(F)` from the same weighted samples. Unobserved findings are ignored.
//!
//! Weights are handled as logarithms and accumulated against a running
//! maximum, so evidence far below `f64::MIN_POSITIVE` is still representable.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exact::check_findings;
use crate::model::{Bn2oNetwork, DiseaseVector, ModelError};
use crate::numeric::ln_one_minus_exp;
use crate::rng::{derive_seed, stream, substream, Rng};
use crate::scalar::Scalar;

/// Proposal probabilities stay inside `[FLOOR, 1 - FLOOR]`.
pub const FLOOR: f64 = 1e-6;
/// Priors at or below this start at this value instead.
pub const INIT_FLOOR: f64 = 0.04;

#[derive(Debug, Error, PartialEq)]
pub enum AisbnError {
    #[error("invalid sampler config: {0}")]
    InvalidConfig(String),
    #[error("proposal entry {index} is {value}; must lie strictly inside (0, 1)")]
    InvalidProposal { index: usize, value: f64 },
    #[error("proposal has {found} entries for {expected} diseases")]
    ProposalSize { expected: usize, found: usize },
    #[error("every phase-2 sample had zero weight")]
    ZeroWeight,
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    probs: Vec<f64>,
}

impl Proposal {
    pub fn new(probs: Vec<f64>) -> Result<Self, AisbnError> {
        if let Some(index) = probs.iter().position(|&p| !(p > 0.0 && p < 1.0)) {
            return Err(AisbnError::InvalidProposal {
                index,
                value: probs[index],
            });
        }
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

/// `P̃(d_k = 1) = P(d_k = 1)` if that exceeds 0.04, else 0.04.
pub fn init_proposal<S: Scalar>(net: &Bn2oNetwork<S>) -> Proposal {
    let probs = net
        .prior()
        .iter()
        .map(|p| {
            let p = p.as_f64();
            if p > INIT_FLOOR {
                p.min(1.0 - FLOOR)
            } else {
                INIT_FLOOR
            }
        })
        .collect();
    Proposal { probs }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AisbnConfig {
    pub phase1_samples: usize,
    pub phase2_samples: usize,
    pub block_size: usize,
    pub a: f64,
    pub b: f64,
    pub seed: u64,
}

impl Default for AisbnConfig {
    fn default() -> Self {
        Self {
            phase1_samples: 25_000,
            phase2_samples: 75_000,
            block_size: 2_500,
            a: 0.4,
            b: 0.14,
            seed: 0,
        }
    }
}

impl AisbnConfig {
    pub fn validate(&self) -> Result<(), AisbnError> {
        let bad = |m: &str| Err(AisbnError::InvalidConfig(m.to_string()));
        if self.phase2_samples == 0 || self.block_size == 0 {
            return bad("phase-2 samples and block size must be positive");
        }
        if !(self.a > 0.0 && self.a < 1.0 && self.b > 0.0 && self.b < 1.0) {
            return bad("learning-rate constants a and b must lie in (0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AisbnResult {
    pub marginals: Vec<f64>,
    /// `ln(Σw / N)` over phase 2, an unbiased estimate of `P(F)` before the log.
    pub log_evidence: f64,
    pub log_sum_w: f64,
    /// `(Σw)² / Σw²`
    pub ess: f64,
    pub proposal: Proposal,
}

/// Case data for the weight computation. The negative-evidence factor of each
/// disease is folded into one number; positive findings keep their parent
/// lists.
struct Evidence {
    ln_prior: Vec<f64>,
    ln_not_prior: Vec<f64>,
    /// `Σ_{j∈F⁻} θ_jk`
    neg_theta: Vec<f64>,
    /// `Σ_{j∈F⁻} θ_j0`
    neg_const: f64,
    pos_theta0: Vec<f64>,
    /// For each disease, `(n, θ_ik)` over positive findings `i = F⁺[n]`.
    pos_children: Vec<Vec<(usize, f64)>>,
}

impl Evidence {
    fn new<S: Scalar>(net: &Bn2oNetwork<S>, pos: &[usize], neg: &[usize]) -> Result<Self, ModelError> {
        check_findings(net, pos, neg)?;
        let k_len = net.num_diseases();
        let mut neg_theta = vec![0.0; k_len];
        let mut neg_const = 0.0;
        for &j in neg {
            neg_const += net.theta0()[j].as_f64();
            let f = net.finding(j);
            for (&k, &t) in f.parents.iter().zip(&f.theta) {
                neg_theta[k] += t.as_f64();
            }
        }
        let mut pos_children = vec![Vec::new(); k_len];
        for (n, &i) in pos.iter().enumerate() {
            let f = net.finding(i);
            for (&k, &t) in f.parents.iter().zip(&f.theta) {
                pos_children[k].push((n, t.as_f64()));
            }
        }
        Ok(Self {
            ln_prior: net.prior().iter().map(|p| p.as_f64().ln()).collect(),
            ln_not_prior: net.prior().iter().map(|p| (-p.as_f64()).ln_1p()).collect(),
            neg_theta,
            neg_const,
            pos_theta0: pos.iter().map(|&i| net.theta0()[i].as_f64()).collect(),
            pos_children,
        })
    }

    /// Draws `d` from the proposal into `bits` and returns `ln w`.
    fn sample(&self, proposal: &LogProposal, bits: &mut [bool], x: &mut Vec<f64>, rng: &mut Rng) -> f64 {
        x.clone_from(&self.pos_theta0);
        let mut lw = -self.neg_const;
        for (k, bit) in bits.iter_mut().enumerate() {
            *bit = rng.gen::<f64>() < proposal.p[k];
            if *bit {
                lw += self.ln_prior[k] - proposal.ln_p[k] - self.neg_theta[k];
                for &(n, t) in &self.pos_children[k] {
                    x[n] += t;
                }
            } else {
                lw += self.ln_not_prior[k] - proposal.ln_q[k];
            }
        }
        for &xi in x.iter() {
            lw += ln_one_minus_exp(-xi);
        }
        lw
    }
}

struct LogProposal {
    p: Vec<f64>,
    ln_p: Vec<f64>,
    ln_q: Vec<f64>,
}

impl LogProposal {
    fn new(p: &Proposal) -> Self {
        Self {
            p: p.probs.clone(),
            ln_p: p.probs.iter().map(|v| v.ln()).collect(),
            ln_q: p.probs.iter().map(|v| (-v).ln_1p()).collect(),
        }
    }
}

/// Weighted sums kept relative to `exp(shift)`.
#[derive(Debug, Clone)]
struct Accumulator {
    shift: f64,
    sum: f64,
    sum_sq: f64,
    per_disease: Vec<f64>,
    count: usize,
}

impl Accumulator {
    fn new(k: usize) -> Self {
        Self {
            shift: f64::NEG_INFINITY,
            sum: 0.0,
            sum_sq: 0.0,
            per_disease: vec![0.0; k],
            count: 0,
        }
    }

    fn rescale(&mut self, shift: f64) {
        if shift > self.shift {
            let c = (self.shift - shift).exp();
            self.sum *= c;
            self.sum_sq *= c * c;
            self.per_disease.iter_mut().for_each(|v| *v *= c);
            self.shift = shift;
        }
    }

    fn add(&mut self, lw: f64, bits: &[bool]) {
        self.count += 1;
        if lw == f64::NEG_INFINITY {
            return;
        }
        self.rescale(lw);
        let w = (lw - self.shift).exp();
        self.sum += w;
        self.sum_sq += w * w;
        for (acc, &b) in self.per_disease.iter_mut().zip(bits) {
            if b {
                *acc += w;
            }
        }
    }

    fn merge(&mut self, other: &Self) {
        self.count += other.count;
        if other.sum == 0.0 {
            return;
        }
        self.rescale(other.shift);
        let c = (other.shift - self.shift).exp();
        self.sum += c * other.sum;
        self.sum_sq += c * c * other.sum_sq;
        for (a, b) in self.per_disease.iter_mut().zip(&other.per_disease) {
            *a += c * b;
        }
    }

    fn marginals(&self) -> Option<Vec<f64>> {
        (self.sum > 0.0).then(|| self.per_disease.iter().map(|v| (v / self.sum).clamp(0.0, 1.0)).collect())
    }
}

/// One draw `d ~ P̃` with its importance weight
/// `w = P(d) P(F⁺, F⁻ | d) / P̃(d)`.
pub fn weighted_sample<S: Scalar>(
    net: &Bn2oNetwork<S>,
    proposal: &Proposal,
    pos: &[usize],
    neg: &[usize],
    rng: &mut Rng,
) -> Result<(DiseaseVector, f64), AisbnError> {
    check_proposal(net, proposal)?;
    let ev = Evidence::new(net, pos, neg)?;
    let mut bits = vec![false; net.num_diseases()];
    let lw = ev.sample(&LogProposal::new(proposal), &mut bits, &mut Vec::new(), rng);
    Ok((DiseaseVector::from_bits(bits), lw.exp()))
}

fn check_proposal<S: Scalar>(net: &Bn2oNetwork<S>, proposal: &Proposal) -> Result<(), AisbnError> {
    if proposal.probs.len() != net.num_diseases() {
        return Err(AisbnError::ProposalSize {
            expected: net.num_diseases(),
            found: proposal.probs.len(),
        });
    }
    Ok(())
}

fn sample_block(ev: &Evidence, proposal: &LogProposal, n: usize, rng: &mut Rng) -> Accumulator {
    let k = proposal.p.len();
    let mut acc = Accumulator::new(k);
    let mut bits = vec![false; k];
    let mut x = Vec::with_capacity(ev.pos_theta0.len());
    for _ in 0..n {
        let lw = ev.sample(proposal, &mut bits, &mut x, rng);
        acc.add(lw, &bits);
    }
    acc
}

/// Runs both phases for one case. `case_id` selects the random streams, so
/// cases can be run in any order or in parallel.
pub fn run<S: Scalar>(
    net: &Bn2oNetwork<S>,
    pos: &[usize],
    neg: &[usize],
    cfg: &AisbnConfig,
    case_id: u64,
) -> Result<AisbnResult, AisbnError> {
    cfg.validate()?;
    let ev = Evidence::new(net, pos, neg)?;
    let k_len = net.num_diseases();
    let mut proposal = init_proposal(net);

    let adapt_seed = derive_seed(cfg.seed, stream::AISBN_ADAPT, case_id);
    let blocks = cfg.phase1_samples.div_ceil(cfg.block_size);
    let mut seen = Accumulator::new(k_len);
    for t in 0..blocks {
        let n = cfg.block_size.min(cfg.phase1_samples - t * cfg.block_size);
        let mut rng = substream(adapt_seed, stream::AISBN_ADAPT, t as u64);
        seen.merge(&sample_block(&ev, &LogProposal::new(&proposal), n, &mut rng));
        if let Some(est) = seen.marginals() {
            let eta = cfg.a * (cfg.b / cfg.a).powf(t as f64 / blocks as f64);
            for (p, e) in proposal.probs.iter_mut().zip(est) {
                *p = (*p + eta * (e - *p)).clamp(FLOOR, 1.0 - FLOOR);
            }
        }
    }

    let est_seed = derive_seed(cfg.seed, stream::AISBN_ESTIMATE, case_id);
    let fixed = LogProposal::new(&proposal);
    let blocks = cfg.phase2_samples.div_ceil(cfg.block_size);
    let parts: Vec<Accumulator> = (0..blocks)
        .into_par_iter()
        .map(|t| {
            let n = cfg.block_size.min(cfg.phase2_samples - t * cfg.block_size);
            let mut rng = substream(est_seed, stream::AISBN_ESTIMATE, t as u64);
            sample_block(&ev, &fixed, n, &mut rng)
        })
        .collect();
    let mut total = Accumulator::new(k_len);
    for part in &parts {
        total.merge(part);
    }
    let marginals = total.marginals().ok_or(AisbnError::ZeroWeight)?;
    let log_sum_w = total.shift + total.sum.ln();
    Ok(AisbnResult {
        marginals,
        log_evidence: log_sum_w - (total.count as f64).ln(),
        log_sum_w,
        ess: total.sum * total.sum / total.sum_sq,
        proposal,
    })
}
