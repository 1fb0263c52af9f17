//! Exact inference oracles.
//!
//! [`enumerate_posterior`] sums the augmented joint over all `2^K` disease
//! configurations and works for any observation model. [`quickscore`] is the
//! inclusion-exclusion formula over positive findings for the unaugmented
//! network, exponential in `|F+|` instead of `K`.
//!
//! Both parallelize over fixed-size chunks and reduce in chunk order, so the
//! results do not depend on the thread count.

use rayon::prelude::*;
use thiserror::Error;
use twofloat::TwoFloat;

use crate::model::{Bn2oNetwork, ModelError, ObservationModel, ObservationVector};
use crate::numeric::NeumaierSum;
use crate::scalar::Scalar;

pub const DEFAULT_ENUMERATION_CAP: usize = 20;
pub const DEFAULT_QUICKSCORE_CAP: usize = 18;

const CHUNK: u64 = 1 << 12;

#[derive(Debug, Error, PartialEq)]
pub enum ExactError {
    #[error("enumeration over {diseases} diseases exceeds the cap of {cap}")]
    TooManyDiseases { diseases: usize, cap: usize },
    #[error("quickscore over {positives} positive findings exceeds the cap of {cap}")]
    TooManyPositives { positives: usize, cap: usize },
    #[error("evidence has probability zero")]
    ImpossibleEvidence,
    #[error("inclusion-exclusion cancelled to a non-positive total {total:e}")]
    Cancellation { total: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Exact posterior marginals and log evidence.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactPosterior<S> {
    /// `P(d_k = 1 | evidence)`
    pub marginals: Vec<S>,
    /// `ln P(evidence)`
    pub log_evidence: S,
}

/// Brute-force posterior in the augmented network.
pub fn enumerate_posterior<S: Scalar>(
    net: &Bn2oNetwork<S>,
    obs: &ObservationModel<S>,
    o: &ObservationVector,
    cap: usize,
) -> Result<ExactPosterior<S>, ExactError> {
    net.check_observations(o)?;
    enumerate_with(net, cap, |bits, scratch| net.log_joint_bits(obs, bits, o, scratch))
}

/// Brute-force posterior in the unaugmented network given `F+` and `F-`
/// (unobserved findings are marginalized out).
pub fn enumerate_findings<S: Scalar>(
    net: &Bn2oNetwork<S>,
    pos: &[usize],
    neg: &[usize],
    cap: usize,
) -> Result<ExactPosterior<S>, ExactError> {
    check_findings(net, pos, neg)?;
    enumerate_with(net, cap, |bits, scratch| {
        net.log_joint_findings_bits(bits, pos, neg, scratch)
    })
}

pub(crate) fn check_findings<S: Scalar>(net: &Bn2oNetwork<S>, pos: &[usize], neg: &[usize]) -> Result<(), ModelError> {
    // from_sets rejects out-of-range, duplicate and conflicting indices
    ObservationVector::from_sets(net.num_findings(), pos, neg).map(|_| ())
}

fn enumerate_with<S, F>(net: &Bn2oNetwork<S>, cap: usize, log_joint: F) -> Result<ExactPosterior<S>, ExactError>
where
    S: Scalar,
    F: Fn(&[bool], &mut Vec<S>) -> S + Sync,
{
    let k_len = net.num_diseases();
    if k_len > cap || k_len >= 63 {
        return Err(ExactError::TooManyDiseases {
            diseases: k_len,
            cap,
        });
    }
    let total = 1u64 << k_len;
    let chunks: Vec<u64> = (0..total.div_ceil(CHUNK)).collect();
    let fill_bits = |bits: &mut [bool], mask: u64| {
        for (k, b) in bits.iter_mut().enumerate() {
            *b = mask >> k & 1 == 1;
        }
    };

    let logs: Vec<Vec<S>> = chunks
        .par_iter()
        .map(|&c| {
            let mut bits = vec![false; k_len];
            let mut scratch = Vec::with_capacity(net.num_findings());
            (c * CHUNK..((c + 1) * CHUNK).min(total))
                .map(|mask| {
                    fill_bits(&mut bits, mask);
                    log_joint(&bits, &mut scratch)
                })
                .collect()
        })
        .collect();
    let max = logs
        .iter()
        .flatten()
        .copied()
        .fold(S::neg_infinity(), S::max);
    if max == S::neg_infinity() {
        return Err(ExactError::ImpossibleEvidence);
    }

    let partials: Vec<(NeumaierSum<S>, Vec<NeumaierSum<S>>)> = chunks
        .par_iter()
        .zip(&logs)
        .map(|(&c, chunk_logs)| {
            let mut z = NeumaierSum::default();
            let mut per_k = vec![NeumaierSum::default(); k_len];
            for (offset, &l) in chunk_logs.iter().enumerate() {
                let w = (l - max).exp();
                if w == S::zero() {
                    continue;
                }
                let mask = c * CHUNK + offset as u64;
                z.add(w);
                for (k, acc) in per_k.iter_mut().enumerate() {
                    if mask >> k & 1 == 1 {
                        acc.add(w);
                    }
                }
            }
            (z, per_k)
        })
        .collect();
    let mut z = NeumaierSum::default();
    let mut per_k = vec![NeumaierSum::default(); k_len];
    for (pz, pk) in &partials {
        z.merge(pz);
        for (acc, p) in per_k.iter_mut().zip(pk) {
            acc.merge(p);
        }
    }
    let z = z.total();
    Ok(ExactPosterior {
        marginals: per_k
            .iter()
            .map(|acc| (acc.total() / z).min(S::one()).max(S::zero()))
            .collect(),
        log_evidence: max + z.ln(),
    })
}

/// Quickscore for the unaugmented network:
///
/// `P(F+, F-) = Σ_{F' ⊆ F+} (-1)^{|F'|} Π_{i ∈ F' ∪ F-} (1 - q_i0)
///              Π_k [P(d_k=0) + P(d_k=1) Π_{i ∈ F' ∪ F-, k ∈ pa(i)} (1 - q_ik)]`
///
/// and the same sum with the k-th bracket replaced by its `d_k = 1` half for
/// the joint `P(d_k = 1, F+, F-)`. The alternating sum cancels heavily once
/// `|F+|` grows, so every term is a double-double product of complements
/// (no exp or log) and the sums are double-double too. The leak factor of
/// the negative findings is common to all terms and kept aside in log form.
/// A non-positive total is reported.
pub fn quickscore<S: Scalar>(
    net: &Bn2oNetwork<S>,
    pos: &[usize],
    neg: &[usize],
    cap: usize,
) -> Result<ExactPosterior<S>, ExactError> {
    check_findings(net, pos, neg)?;
    let n = pos.len();
    if n > cap || n >= 63 {
        return Err(ExactError::TooManyPositives { positives: n, cap });
    }
    let k_len = net.num_diseases();
    let one = TwoFloat::from(1.0);
    let complement = |x: S| one - TwoFloat::from(x.as_f64());
    let on: Vec<TwoFloat> = net.prior().iter().map(|p| TwoFloat::from(p.as_f64())).collect();
    let off: Vec<TwoFloat> = net.prior().iter().map(|&p| complement(p)).collect();

    let mut base = vec![one; k_len];
    let mut ln_leak = 0.0;
    for &j in neg {
        ln_leak += (-net.leak()[j].as_f64()).ln_1p();
        let f = net.finding(j);
        for (&k, &q) in f.parents.iter().zip(&f.q) {
            base[k] *= complement(q);
        }
    }
    let positives: Vec<(TwoFloat, Vec<(usize, TwoFloat)>)> = pos
        .iter()
        .map(|&i| {
            let f = net.finding(i);
            let parents = f.parents.iter().zip(&f.q).map(|(&k, &q)| (k, complement(q))).collect();
            (complement(net.leak()[i]), parents)
        })
        .collect();

    let zero = TwoFloat::from(0.0);
    let total = 1u64 << n;
    let chunks: Vec<u64> = (0..total.div_ceil(CHUNK)).collect();
    let partials: Vec<(TwoFloat, Vec<TwoFloat>)> = chunks
        .par_iter()
        .map(|&c| {
            let mut prod = vec![one; k_len];
            let mut bracket = vec![one; k_len];
            let mut suffix = vec![one; k_len + 1];
            let mut z = zero;
            let mut per_k = vec![zero; k_len];
            for mask in c * CHUNK..((c + 1) * CHUNK).min(total) {
                prod.copy_from_slice(&base);
                let mut leak = one;
                for (bit, (leak_i, parents)) in positives.iter().enumerate() {
                    if mask >> bit & 1 == 1 {
                        leak *= *leak_i;
                        for &(k, c) in parents {
                            prod[k] *= c;
                        }
                    }
                }
                for k in 0..k_len {
                    prod[k] = on[k] * prod[k];
                    bracket[k] = off[k] + prod[k];
                }
                for k in (0..k_len).rev() {
                    suffix[k] = suffix[k + 1] * bracket[k];
                }
                let negative = mask.count_ones() % 2 == 1;
                let signed = |x: TwoFloat| if negative { -x } else { x };
                z += signed(leak * suffix[0]);
                let mut prefix = signed(leak);
                for k in 0..k_len {
                    per_k[k] += prefix * prod[k] * suffix[k + 1];
                    prefix *= bracket[k];
                }
            }
            (z, per_k)
        })
        .collect();

    let mut z = zero;
    let mut per_k = vec![zero; k_len];
    for (pz, pk) in &partials {
        z += *pz;
        for (acc, &p) in per_k.iter_mut().zip(pk) {
            *acc += p;
        }
    }
    let z_f = f64::from(z);
    if !(z_f > 0.0) {
        return Err(ExactError::Cancellation { total: z_f });
    }
    Ok(ExactPosterior {
        marginals: per_k
            .iter()
            .map(|&acc| S::of(f64::from(acc / z).clamp(0.0, 1.0)))
            .collect(),
        log_evidence: S::of(ln_leak + z_f.ln()),
    })
}
