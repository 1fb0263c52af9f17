//! D-lists and cumulative ratio curves.
//!
//! A method's factorized posterior `z` is turned into its `N` most probable
//! diagnoses by best-first search. Each diagnosis is then scored by its joint
//! probability with the observations under the benchmark's own observation
//! model, and the running sum of those scores, normalized per case, gives the
//! cumulative ratio curve `C(r)`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Bn2oNetwork, DiseaseVector, ModelError, ObservationModel, ObservationVector};
use crate::scalar::Scalar;

/// Marginals are clipped to `[Z_CLIP, 1 - Z_CLIP]` before ranking.
pub const Z_CLIP: f64 = 1e-9;
pub const DEFAULT_LIST_LEN: usize = 100;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("list length must be at least 1")]
    EmptyList,
    #[error("marginal {index} is {value}")]
    BadMarginal { index: usize, value: f64 },
    #[error("case {0}: every diagnosis has zero joint probability")]
    Unusable(u64),
    #[error("case {case}: expected {expected} methods, found {found}")]
    MethodCount { case: u64, expected: usize, found: usize },
    #[error("no usable cases to average")]
    NoCases,
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnosis {
    pub d: DiseaseVector,
    /// `ln Q(d)` under the factorized posterior that produced the list.
    pub log_q: f64,
    /// `ln P(d, o)`; `None` until scored.
    pub log_joint: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DList {
    pub method: String,
    pub case_id: u64,
    pub entries: Vec<Diagnosis>,
}

impl DList {
    pub fn from_marginals(method: impl Into<String>, case_id: u64, z: &[f64], n: usize) -> Result<Self, EvalError> {
        let entries = top_n(z, n)?
            .into_iter()
            .map(|(d, log_q)| Diagnosis { d, log_q, log_joint: None })
            .collect();
        Ok(Self {
            method: method.into(),
            case_id,
            entries,
        })
    }
}

#[derive(PartialEq)]
struct State {
    cost: f64,
    flips: Vec<usize>,
}

impl Eq for State {}

impl Ord for State {
    // BinaryHeap is a max-heap: the cheapest, then lexicographically smallest,
    // flip-set must compare greatest.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.flips.cmp(&self.flips))
    }
}

impl PartialOrd for State {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// The `n` most probable configurations of `Q(d) = Π_k z_k^{d_k} (1-z_k)^{1-d_k}`
/// in order, with `ln Q`. Returns the whole support when `n > 2^K`.
///
/// Starting from the mode, every configuration is a set of flipped positions
/// in ascending flip-cost order. Each set has at most two children (append
/// the next position, or move the last one up by one) and a child never costs
/// less than its parent, so a priority queue yields sets in cost order.
pub fn top_n(z: &[f64], n: usize) -> Result<Vec<(DiseaseVector, f64)>, EvalError> {
    if n == 0 {
        return Err(EvalError::EmptyList);
    }
    if let Some(index) = z.iter().position(|v| !(0.0..=1.0).contains(v)) {
        return Err(EvalError::BadMarginal { index, value: z[index] });
    }
    let k_len = z.len();
    let z: Vec<f64> = z.iter().map(|v| v.clamp(Z_CLIP, 1.0 - Z_CLIP)).collect();
    let mode: Vec<bool> = z.iter().map(|&v| v > 0.5).collect();
    let log_mode: f64 = z.iter().map(|&v| v.max(1.0 - v).ln()).sum();
    let mut order: Vec<usize> = (0..k_len).collect();
    let cost_of = |k: usize| (z[k].ln() - (-z[k]).ln_1p()).abs();
    order.sort_by(|&a, &b| cost_of(a).total_cmp(&cost_of(b)).then(a.cmp(&b)));
    let costs: Vec<f64> = order.iter().map(|&k| cost_of(k)).collect();
    let cost = |flips: &[usize]| flips.iter().map(|&j| costs[j]).sum::<f64>();

    let limit = if k_len >= usize::BITS as usize - 1 { n } else { n.min(1 << k_len) };
    let mut out = Vec::with_capacity(limit);
    let mut heap = BinaryHeap::new();
    heap.push(State { cost: 0.0, flips: vec![] });
    while let Some(State { cost: c, flips }) = heap.pop() {
        let mut bits = mode.clone();
        for &j in &flips {
            bits[order[j]] ^= true;
        }
        out.push((DiseaseVector::from_bits(bits), log_mode - c));
        if out.len() == limit {
            break;
        }
        let next = flips.last().map_or(0, |&j| j + 1);
        if next < k_len {
            let mut extend = flips.clone();
            extend.push(next);
            heap.push(State { cost: cost(&extend), flips: extend });
            if let Some(last) = flips.len().checked_sub(1) {
                let mut replace = flips;
                replace[last] = next;
                heap.push(State { cost: cost(&replace), flips: replace });
            }
        }
    }
    Ok(out)
}

/// Attaches `ln P(d, o)` under the generative observation model `obs` to every
/// diagnosis.
pub fn score_dlist<S: Scalar>(
    net: &Bn2oNetwork<S>,
    obs: &ObservationModel<S>,
    list: &mut DList,
    o: &ObservationVector,
) -> Result<(), EvalError> {
    net.check_observations(o)?;
    let mut scratch = Vec::with_capacity(net.num_findings());
    for entry in &mut list.entries {
        net.check_diseases(&entry.d)?;
        entry.log_joint = Some(net.log_joint_bits(obs, entry.d.bits(), o, &mut scratch).as_f64());
    }
    Ok(())
}

/// Curves of all methods for one case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseCurves {
    pub case_id: u64,
    /// `ln Z`, the larger of the best listed joint and the reference joint.
    pub log_z: f64,
    pub reference_log_joint: f64,
    /// Best top-1 joint across methods.
    pub top1_log_joint: f64,
    /// `curves[m][r - 1] = C(r)` for method `m`.
    pub curves: Vec<Vec<f64>>,
}

/// `C(r) = Σ_{m ≤ r} P(d^m, o) / Z` for every list, with `Z` shared by all of
/// them. Unscored entries count as zero probability.
pub fn cumulative_curve(lists: &[&DList], reference_log_joint: f64) -> Result<CaseCurves, EvalError> {
    let case_id = lists.first().map_or(0, |l| l.case_id);
    let score = |e: &Diagnosis| e.log_joint.unwrap_or(f64::NEG_INFINITY);
    let top1 = lists
        .iter()
        .filter_map(|l| l.entries.first().map(score))
        .fold(f64::NEG_INFINITY, f64::max);
    let best = lists
        .iter()
        .flat_map(|l| l.entries.iter().map(score))
        .fold(f64::NEG_INFINITY, f64::max);
    let log_z = best.max(reference_log_joint);
    if log_z == f64::NEG_INFINITY || log_z.is_nan() {
        return Err(EvalError::Unusable(case_id));
    }
    let curves = lists
        .iter()
        .map(|l| {
            let mut acc = 0.0;
            l.entries
                .iter()
                .map(|e| {
                    acc += (score(e) - log_z).exp();
                    acc
                })
                .collect()
        })
        .collect();
    Ok(CaseCurves {
        case_id,
        log_z,
        reference_log_joint,
        top1_log_joint: top1,
        curves,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveTable {
    pub methods: Vec<String>,
    /// `mean[m][r - 1]`
    pub mean: Vec<Vec<f64>>,
    pub log_z: Vec<f64>,
    pub n_cases: usize,
}

impl CurveTable {
    pub fn ranks(&self) -> usize {
        self.mean.first().map_or(0, Vec::len)
    }

    pub fn method_index(&self, method: &str) -> Option<usize> {
        self.methods.iter().position(|m| m == method)
    }

    /// `C̄(r)` for `method`, if both exist.
    pub fn value(&self, method: &str, rank: usize) -> Option<f64> {
        let m = self.method_index(method)?;
        rank.checked_sub(1).and_then(|r| self.mean[m].get(r).copied())
    }
}

/// Per-rank mean over cases, in case order. A list shorter than `n` (the
/// support was smaller) keeps its final value for the remaining ranks.
pub fn average_curves(methods: &[String], cases: &[CaseCurves], n: usize) -> Result<CurveTable, EvalError> {
    if cases.is_empty() {
        return Err(EvalError::NoCases);
    }
    let mut mean = vec![vec![0.0; n]; methods.len()];
    for case in cases {
        if case.curves.len() != methods.len() {
            return Err(EvalError::MethodCount {
                case: case.case_id,
                expected: methods.len(),
                found: case.curves.len(),
            });
        }
        for (row, curve) in mean.iter_mut().zip(&case.curves) {
            let last = curve.last().copied().unwrap_or(0.0);
            for (r, slot) in row.iter_mut().enumerate() {
                *slot += curve.get(r).copied().unwrap_or(last);
            }
        }
    }
    let count = cases.len() as f64;
    mean.iter_mut().flatten().for_each(|v| *v /= count);
    Ok(CurveTable {
        methods: methods.to_vec(),
        mean,
        log_z: cases.iter().map(|c| c.log_z).collect(),
        n_cases: cases.len(),
    })
}
