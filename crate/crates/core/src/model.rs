//! Binary two-layer noisy-OR networks and their observation-augmented form.
//!
//! A [`Bn2oNetwork`] holds independent disease priors and, for every finding,
//! a leak probability plus sparse noisy-OR edges from its parent diseases.
//! Edge strengths are kept both as probabilities `q` and in the log domain as
//! `theta = -ln(1 - q)`; `theta` is what every evaluation uses.
//!
//! The observation layer ([`ObservationModel`]) hides a positive finding with
//! probability `p_plus` and a negative finding with probability `p_minus`.
//! All joint probabilities are returned as natural logs; impossible events are
//! `-inf`, which is absorbing under addition.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::ln_one_minus_exp;
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("{what} index {index} out of range (len {len})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },
    #[error("{what}: expected length {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("finding {0} listed as both positive and negative")]
    ConflictingEvidence(usize),
    #[error("finding {0} listed twice in the same evidence set")]
    DuplicateEvidence(usize),
    #[error("observation model needs p_plus and p_minus in [0,1], got ({p_plus}, {p_minus})")]
    InvalidObservationModel { p_plus: f64, p_minus: f64 },
    #[error("invalid network: {0}")]
    Invalid(ValidationReport),
}

/// State of one observation node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Obs {
    Pos,
    Neg,
    Unk,
}

/// Observation-layer CPT shared by every finding:
/// `P(o = ? | f = +) = p_plus`, `P(o = ? | f = -) = p_minus`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationModel<S> {
    p_plus: S,
    p_minus: S,
}

impl<S: Scalar> ObservationModel<S> {
    pub fn new(p_plus: S, p_minus: S) -> Result<Self, ModelError> {
        let ok = p_plus >= S::zero()
            && p_plus <= S::one()
            && p_minus >= S::zero()
            && p_minus <= S::one();
        if !ok {
            return Err(ModelError::InvalidObservationModel {
                p_plus: p_plus.as_f64(),
                p_minus: p_minus.as_f64(),
            });
        }
        Ok(Self { p_plus, p_minus })
    }

    pub fn p_plus(&self) -> S {
        self.p_plus
    }

    pub fn p_minus(&self) -> S {
        self.p_minus
    }

    /// `p_plus / p_minus`, the only functional of the observation model that
    /// reaches the posterior over diseases. `None` when `p_minus = 0`.
    pub fn bias_ratio(&self) -> Option<S> {
        (self.p_minus > S::zero()).then(|| self.p_plus / self.p_minus)
    }

    /// `ln P(o_i | d)` given `ln P(f_i = - | d)`.
    #[inline]
    pub fn log_p_obs(&self, o: Obs, log_neg: S) -> S {
        match o {
            Obs::Pos => (S::one() - self.p_plus).ln() + ln_one_minus_exp(log_neg),
            Obs::Neg => (S::one() - self.p_minus).ln() + log_neg,
            Obs::Unk => {
                let p_neg = log_neg.exp();
                let p_pos = -log_neg.exp_m1();
                (self.p_plus * p_pos + self.p_minus * p_neg).ln()
            }
        }
    }
}

/// Dense disease configuration `d`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DiseaseVector {
    bits: Vec<bool>,
}

impl DiseaseVector {
    pub fn zeros(len: usize) -> Self {
        Self {
            bits: vec![false; len],
        }
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    /// Builds a vector of length `len` with the listed diseases switched on.
    pub fn from_active(len: usize, active: &[usize]) -> Result<Self, ModelError> {
        let mut d = Self::zeros(len);
        for &k in active {
            if k >= len {
                return Err(ModelError::IndexOutOfRange {
                    what: "disease",
                    index: k,
                    len,
                });
            }
            d.bits[k] = true;
        }
        Ok(d)
    }

    /// Low `len` bits of `mask`, bit `k` giving disease `k`.
    pub fn from_mask(len: usize, mask: u64) -> Self {
        debug_assert!(len <= 64);
        Self {
            bits: (0..len).map(|k| mask >> k & 1 == 1).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    #[inline]
    pub fn get(&self, k: usize) -> bool {
        self.bits[k]
    }

    pub fn set(&mut self, k: usize, on: bool) {
        self.bits[k] = on;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn active(&self) -> Vec<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(k, &b)| b.then_some(k))
            .collect()
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// Observation vector `o` with cached positive/negative index sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservationVector {
    entries: Vec<Obs>,
    pos: Vec<usize>,
    neg: Vec<usize>,
}

impl ObservationVector {
    pub fn all_unknown(len: usize) -> Self {
        Self {
            entries: vec![Obs::Unk; len],
            pos: Vec::new(),
            neg: Vec::new(),
        }
    }

    pub fn from_entries(entries: Vec<Obs>) -> Self {
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for (i, o) in entries.iter().enumerate() {
            match o {
                Obs::Pos => pos.push(i),
                Obs::Neg => neg.push(i),
                Obs::Unk => {}
            }
        }
        Self { entries, pos, neg }
    }

    /// Builds `o` from the index sets `F+` and `F-`; everything else is `?`.
    pub fn from_sets(len: usize, pos: &[usize], neg: &[usize]) -> Result<Self, ModelError> {
        let mut entries = vec![Obs::Unk; len];
        for (set, value) in [(pos, Obs::Pos), (neg, Obs::Neg)] {
            for &i in set {
                if i >= len {
                    return Err(ModelError::IndexOutOfRange {
                        what: "finding",
                        index: i,
                        len,
                    });
                }
                match entries[i] {
                    Obs::Unk => entries[i] = value,
                    prev if prev == value => return Err(ModelError::DuplicateEvidence(i)),
                    _ => return Err(ModelError::ConflictingEvidence(i)),
                }
            }
        }
        Ok(Self::from_entries(entries))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, i: usize) -> Obs {
        self.entries[i]
    }

    pub fn entries(&self) -> &[Obs] {
        &self.entries
    }

    /// `F+`, ascending.
    pub fn pos(&self) -> &[usize] {
        &self.pos
    }

    /// `F-`, ascending.
    pub fn neg(&self) -> &[usize] {
        &self.neg
    }
}

/// Noisy-OR parameters of one finding.
#[derive(Debug, Clone, PartialEq)]
pub struct Finding<S> {
    pub parents: Vec<usize>,
    pub q: Vec<S>,
    pub theta: Vec<S>,
}

impl<S: Scalar> Finding<S> {
    /// Edges given as `(disease, q)`; theta is derived.
    pub fn from_strengths(parents: Vec<usize>, q: Vec<S>) -> Self {
        let theta = q.iter().map(|&q| theta_of(q)).collect();
        Self { parents, q, theta }
    }
}

/// `-ln(1 - q)`.
#[inline]
pub fn theta_of<S: Scalar>(q: S) -> S {
    -(-q).ln_1p()
}

/// Provenance stored alongside a network.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct NetMeta {
    pub seed: Option<u64>,
    pub generator: String,
}

/// One invariant violation found by [`Bn2oNetwork::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    SizeMismatch {
        field: &'static str,
        expected: usize,
        found: usize,
    },
    PriorOutOfRange { disease: usize, value: f64 },
    LeakOutOfRange { finding: usize, value: f64 },
    EdgeArity { finding: usize },
    ParentOutOfRange { finding: usize, disease: usize },
    DuplicateEdge { finding: usize, disease: usize },
    StrengthOutOfRange { finding: usize, disease: usize, q: f64 },
    NegativeTheta {
        finding: usize,
        disease: Option<usize>,
        theta: f64,
    },
    ThetaMismatch {
        finding: usize,
        disease: Option<usize>,
        q: f64,
        theta: f64,
    },
    Parentless { finding: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let edge = |d: &Option<usize>| match d {
            Some(k) => format!("edge ({k})"),
            None => "leak".to_string(),
        };
        match self {
            Violation::SizeMismatch {
                field,
                expected,
                found,
            } => write!(f, "{field} has length {found}, expected {expected}"),
            Violation::PriorOutOfRange { disease, value } => {
                write!(f, "prior of disease {disease} is {value}, outside (0, 1)")
            }
            Violation::LeakOutOfRange { finding, value } => {
                write!(f, "leak of finding {finding} is {value}, outside [0, 1)")
            }
            Violation::EdgeArity { finding } => {
                write!(f, "finding {finding} has mismatched parent/q/theta lengths")
            }
            Violation::ParentOutOfRange { finding, disease } => {
                write!(f, "edge ({finding}, {disease}) names a missing disease")
            }
            Violation::DuplicateEdge { finding, disease } => {
                write!(f, "duplicate edge ({finding}, {disease})")
            }
            Violation::StrengthOutOfRange { finding, disease, q } => {
                write!(f, "edge ({finding}, {disease}) has q = {q}, outside (0, 1)")
            }
            Violation::NegativeTheta {
                finding,
                disease,
                theta,
            } => write!(f, "finding {finding} {} has theta = {theta} < 0", edge(disease)),
            Violation::ThetaMismatch {
                finding,
                disease,
                q,
                theta,
            } => write!(
                f,
                "finding {finding} {}: theta = {theta} disagrees with q = {q}",
                edge(disease)
            ),
            Violation::Parentless { finding } => write!(f, "finding {finding} has no parents"),
        }
    }
}

/// Result of [`Bn2oNetwork::validate`]; empty means valid.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", parts.join("; "))
    }
}

/// Binary two-layer noisy-OR network.
#[derive(Debug, Clone, PartialEq)]
pub struct Bn2oNetwork<S> {
    prior: Vec<S>,
    leak: Vec<S>,
    theta0: Vec<S>,
    findings: Vec<Finding<S>>,
    /// Per disease: `(finding, theta)` for every outgoing edge.
    children: Vec<Vec<(usize, S)>>,
    meta: NetMeta,
}

impl<S: Scalar> Bn2oNetwork<S> {
    /// Builds and validates a network from priors, leaks and `(parents, q)`
    /// edge lists. Theta is derived from q.
    pub fn new(
        prior: Vec<S>,
        leak: Vec<S>,
        findings: Vec<(Vec<usize>, Vec<S>)>,
        meta: NetMeta,
    ) -> Result<Self, ModelError> {
        let theta0 = leak.iter().map(|&q| theta_of(q)).collect();
        let findings = findings
            .into_iter()
            .map(|(parents, q)| Finding::from_strengths(parents, q))
            .collect();
        let net = Self::from_raw(prior, leak, theta0, findings, meta);
        let report = net.validate();
        if report.is_valid() {
            Ok(net)
        } else {
            Err(ModelError::Invalid(report))
        }
    }

    /// Assembles a network without checking any invariant. Use
    /// [`validate`](Self::validate) before trusting the result.
    pub fn from_raw(
        prior: Vec<S>,
        leak: Vec<S>,
        theta0: Vec<S>,
        findings: Vec<Finding<S>>,
        meta: NetMeta,
    ) -> Self {
        let mut children = vec![Vec::new(); prior.len()];
        for (i, f) in findings.iter().enumerate() {
            for (&k, &t) in f.parents.iter().zip(&f.theta) {
                if let Some(list) = children.get_mut(k) {
                    list.push((i, t));
                }
            }
        }
        Self {
            prior,
            leak,
            theta0,
            findings,
            children,
            meta,
        }
    }

    /// K
    pub fn num_diseases(&self) -> usize {
        self.prior.len()
    }

    /// I
    pub fn num_findings(&self) -> usize {
        self.findings.len()
    }

    pub fn prior(&self) -> &[S] {
        &self.prior
    }

    pub fn leak(&self) -> &[S] {
        &self.leak
    }

    pub fn theta0(&self) -> &[S] {
        &self.theta0
    }

    pub fn findings(&self) -> &[Finding<S>] {
        &self.findings
    }

    pub fn finding(&self, i: usize) -> &Finding<S> {
        &self.findings[i]
    }

    /// Outgoing edges of disease `k` as `(finding, theta)`.
    pub fn children(&self, k: usize) -> &[(usize, S)] {
        &self.children[k]
    }

    pub fn meta(&self) -> &NetMeta {
        &self.meta
    }

    pub fn num_edges(&self) -> usize {
        self.findings.iter().map(|f| f.parents.len()).sum()
    }

    fn check_finding(&self, i: usize) -> Result<(), ModelError> {
        if i >= self.num_findings() {
            return Err(ModelError::IndexOutOfRange {
                what: "finding",
                index: i,
                len: self.num_findings(),
            });
        }
        Ok(())
    }

    pub(crate) fn check_diseases(&self, d: &DiseaseVector) -> Result<(), ModelError> {
        if d.len() != self.num_diseases() {
            return Err(ModelError::DimensionMismatch {
                what: "disease vector",
                expected: self.num_diseases(),
                found: d.len(),
            });
        }
        Ok(())
    }

    /// `ln P(f_i = - | d) = -theta_i0 - Σ_k theta_ik d_k`.
    pub fn log_p_finding_neg(&self, i: usize, d: &DiseaseVector) -> Result<S, ModelError> {
        self.check_finding(i)?;
        self.check_diseases(d)?;
        Ok(self.log_p_finding_neg_unchecked(i, d))
    }

    #[inline]
    pub(crate) fn log_p_finding_neg_unchecked(&self, i: usize, d: &DiseaseVector) -> S {
        let f = &self.findings[i];
        let mut acc = self.theta0[i];
        for (&k, &t) in f.parents.iter().zip(&f.theta) {
            if d.get(k) {
                acc += t;
            }
        }
        -acc
    }

    /// `ln P(f_i = - | d)` for every finding at once, visiting only the edges
    /// of active diseases.
    pub fn log_p_neg_all(&self, d: &DiseaseVector) -> Result<Vec<S>, ModelError> {
        self.check_diseases(d)?;
        let mut out = Vec::with_capacity(self.num_findings());
        self.fill_log_p_neg(d.bits(), &mut out);
        Ok(out)
    }

    pub(crate) fn fill_log_p_neg(&self, bits: &[bool], out: &mut Vec<S>) {
        out.clear();
        out.extend(self.theta0.iter().map(|&t| -t));
        for (k, &on) in bits.iter().enumerate() {
            if on {
                for &(i, t) in &self.children[k] {
                    out[i] -= t;
                }
            }
        }
    }

    /// `Σ_k ln P(d_k)`.
    pub fn log_prior(&self, d: &DiseaseVector) -> Result<S, ModelError> {
        self.check_diseases(d)?;
        Ok(self.log_prior_bits(d.bits()))
    }

    pub(crate) fn log_prior_bits(&self, bits: &[bool]) -> S {
        self.prior
            .iter()
            .zip(bits)
            .map(|(&p, &on)| if on { p.ln() } else { (-p).ln_1p() })
            .sum()
    }

    /// `ln P(o_i | d)` in the augmented network.
    pub fn log_p_obs_given_d(
        &self,
        obs: &ObservationModel<S>,
        i: usize,
        o_i: Obs,
        d: &DiseaseVector,
    ) -> Result<S, ModelError> {
        self.check_finding(i)?;
        self.check_diseases(d)?;
        Ok(obs.log_p_obs(o_i, self.log_p_finding_neg_unchecked(i, d)))
    }

    /// `ln P(d, o)` in the augmented network.
    pub fn log_joint(
        &self,
        obs: &ObservationModel<S>,
        d: &DiseaseVector,
        o: &ObservationVector,
    ) -> Result<S, ModelError> {
        self.check_diseases(d)?;
        self.check_observations(o)?;
        let mut scratch = Vec::with_capacity(self.num_findings());
        Ok(self.log_joint_bits(obs, d.bits(), o, &mut scratch))
    }

    pub(crate) fn check_observations(&self, o: &ObservationVector) -> Result<(), ModelError> {
        if o.len() != self.num_findings() {
            return Err(ModelError::DimensionMismatch {
                what: "observation vector",
                expected: self.num_findings(),
                found: o.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn log_joint_bits(
        &self,
        obs: &ObservationModel<S>,
        bits: &[bool],
        o: &ObservationVector,
        scratch: &mut Vec<S>,
    ) -> S {
        self.fill_log_p_neg(bits, scratch);
        let mut total = self.log_prior_bits(bits);
        for (&lneg, &oi) in scratch.iter().zip(o.entries()) {
            total += obs.log_p_obs(oi, lneg);
        }
        total
    }

    /// `ln P(d, F+, F-)` in the unaugmented network: unobserved findings are
    /// marginalized out and contribute nothing.
    pub(crate) fn log_joint_findings_bits(
        &self,
        bits: &[bool],
        pos: &[usize],
        neg: &[usize],
        scratch: &mut Vec<S>,
    ) -> S {
        self.fill_log_p_neg(bits, scratch);
        let mut total = self.log_prior_bits(bits);
        for &i in pos {
            total += ln_one_minus_exp(scratch[i]);
        }
        for &j in neg {
            total += scratch[j];
        }
        total
    }

    /// Checks every structural and numerical invariant.
    pub fn validate(&self) -> ValidationReport {
        let mut v = Vec::new();
        let k_len = self.num_diseases();
        let i_len = self.num_findings();
        for (field, found) in [("leak", self.leak.len()), ("theta0", self.theta0.len())] {
            if found != i_len {
                v.push(Violation::SizeMismatch {
                    field,
                    expected: i_len,
                    found,
                });
            }
        }
        for (k, &p) in self.prior.iter().enumerate() {
            if !(p > S::zero() && p < S::one()) {
                v.push(Violation::PriorOutOfRange {
                    disease: k,
                    value: p.as_f64(),
                });
            }
        }
        let check_theta = |v: &mut Vec<Violation>, i: usize, k: Option<usize>, q: S, t: S| {
            if !(t >= S::zero()) {
                v.push(Violation::NegativeTheta {
                    finding: i,
                    disease: k,
                    theta: t.as_f64(),
                });
            }
            let expect = theta_of(q);
            let tol = S::of(1e-12).max(S::epsilon() * S::of(4.0) * (S::one() + expect.abs()));
            if !((t - expect).abs() <= tol) {
                v.push(Violation::ThetaMismatch {
                    finding: i,
                    disease: k,
                    q: q.as_f64(),
                    theta: t.as_f64(),
                });
            }
        };
        for (i, f) in self.findings.iter().enumerate() {
            if let (Some(&q0), Some(&t0)) = (self.leak.get(i), self.theta0.get(i)) {
                if !(q0 >= S::zero() && q0 < S::one()) {
                    v.push(Violation::LeakOutOfRange {
                        finding: i,
                        value: q0.as_f64(),
                    });
                }
                check_theta(&mut v, i, None, q0, t0);
            }
            if f.parents.len() != f.q.len() || f.parents.len() != f.theta.len() {
                v.push(Violation::EdgeArity { finding: i });
                continue;
            }
            if f.parents.is_empty() {
                v.push(Violation::Parentless { finding: i });
            }
            let mut seen = std::collections::BTreeSet::new();
            for ((&k, &q), &t) in f.parents.iter().zip(&f.q).zip(&f.theta) {
                if k >= k_len {
                    v.push(Violation::ParentOutOfRange {
                        finding: i,
                        disease: k,
                    });
                }
                if !seen.insert(k) {
                    v.push(Violation::DuplicateEdge {
                        finding: i,
                        disease: k,
                    });
                }
                if !(q > S::zero() && q < S::one()) {
                    v.push(Violation::StrengthOutOfRange {
                        finding: i,
                        disease: k,
                        q: q.as_f64(),
                    });
                }
                check_theta(&mut v, i, Some(k), q, t);
            }
        }
        ValidationReport { violations: v }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    fn one_edge(leak: f64, q: f64) -> Bn2oNetwork<f64> {
        Bn2oNetwork::new(vec![0.5], vec![leak], vec![(vec![0], vec![q])], NetMeta::default()).unwrap()
    }

    fn random_net(rng: &mut impl Rng, k: usize, i: usize, max_parents: usize) -> Bn2oNetwork<f64> {
        let prior = (0..k).map(|_| rng.gen_range(0.01..0.6)).collect();
        let leak = (0..i).map(|_| rng.gen_range(0.0..0.2)).collect();
        let findings = (0..i)
            .map(|_| {
                let n = rng.gen_range(1..=max_parents.min(k));
                let parents = rand::seq::index::sample(rng, k, n).into_vec();
                let q = (0..n).map(|_| rng.gen_range(0.02..0.98)).collect();
                (parents, q)
            })
            .collect();
        Bn2oNetwork::new(prior, leak, findings, NetMeta::default()).unwrap()
    }

    #[test]
    fn single_active_parent_with_leak() {
        let net = one_edge(0.1, 0.5);
        let d = DiseaseVector::from_active(1, &[0]).unwrap();
        assert_relative_eq!(net.log_p_finding_neg(0, &d).unwrap(), 0.45f64.ln(), max_relative = 1e-14);
    }

    #[test]
    fn no_causes_no_leak_is_certainly_negative() {
        let net = one_edge(0.0, 0.5);
        assert_eq!(net.log_p_finding_neg(0, &DiseaseVector::zeros(1)).unwrap(), 0.0);
    }

    #[test]
    fn log_domain_matches_product_form() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let prior = vec![0.1; 8];
        let parents = vec![0, 2, 3, 5, 7];
        let q: Vec<f64> = (0..5).map(|_| rng.gen_range(0.01..0.99)).collect();
        let net = Bn2oNetwork::new(prior, vec![0.03], vec![(parents.clone(), q.clone())], NetMeta::default())
            .unwrap();
        for _ in 0..50 {
            let d = DiseaseVector::from_bits((0..8).map(|_| rng.gen_bool(0.5)).collect());
            let mut product = 1.0 - 0.03;
            for (&k, &qk) in parents.iter().zip(&q) {
                if d.get(k) {
                    product *= 1.0 - qk;
                }
            }
            let got = net.log_p_finding_neg(0, &d).unwrap();
            assert!((got - product.ln()).abs() <= 1e-12);
            assert!(got <= 0.0);
        }
    }

    #[test]
    fn out_of_range_indices_error() {
        let net = one_edge(0.1, 0.5);
        assert!(matches!(
            net.log_p_finding_neg(1, &DiseaseVector::zeros(1)),
            Err(ModelError::IndexOutOfRange { .. })
        ));
        assert!(matches!(
            net.log_p_finding_neg(0, &DiseaseVector::zeros(2)),
            Err(ModelError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn unobserved_probability_mixes_both_states() {
        // P(f=+|d) = 0.3 via leak only.
        let net = Bn2oNetwork::new(vec![0.5], vec![0.3], vec![(vec![0], vec![0.5])], NetMeta::default())
            .unwrap();
        let obs = ObservationModel::new(0.5, 1.0).unwrap();
        let d = DiseaseVector::zeros(1);
        let got = net.log_p_obs_given_d(&obs, 0, Obs::Unk, &d).unwrap();
        assert_relative_eq!(got, 0.85f64.ln(), max_relative = 1e-14);
        assert_eq!(
            net.log_p_obs_given_d(&obs, 0, Obs::Neg, &d).unwrap(),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn observation_rows_normalize() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let net = random_net(&mut rng, 6, 10, 4);
        for (pp, pm) in [(0.5, 0.5), (0.0, 1.0), (0.9, 0.5), (0.25, 0.75)] {
            let obs = ObservationModel::new(pp, pm).unwrap();
            for mask in 0..64u64 {
                let d = DiseaseVector::from_mask(6, mask);
                for i in 0..10 {
                    let s: f64 = [Obs::Pos, Obs::Neg, Obs::Unk]
                        .iter()
                        .map(|&o| net.log_p_obs_given_d(&obs, i, o, &d).unwrap().exp())
                        .sum();
                    assert!((s - 1.0).abs() <= 1e-12, "sum {s}");
                    let lneg = net.log_p_finding_neg(i, &d).unwrap();
                    let total = lneg.exp() + ln_one_minus_exp(lneg).exp();
                    assert!((total - 1.0).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn two_node_chain_joint() {
        let net = one_edge(0.0, 0.5);
        let obs = ObservationModel::new(0.0, 0.0).unwrap();
        let d = DiseaseVector::from_active(1, &[0]).unwrap();
        let o = ObservationVector::from_sets(1, &[0], &[]).unwrap();
        let got = net.log_joint(&obs, &d, &o).unwrap();
        assert_relative_eq!(got, (0.5f64 * 0.5).ln(), max_relative = 1e-12);
    }

    #[test]
    fn unit_bias_ratio_leaves_prior_untouched() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let net = random_net(&mut rng, 5, 9, 3);
        let obs = ObservationModel::new(0.6, 0.6).unwrap();
        let o = ObservationVector::all_unknown(9);
        let d1 = DiseaseVector::from_active(5, &[0, 3]).unwrap();
        let d2 = DiseaseVector::from_active(5, &[1]).unwrap();
        let lhs = net.log_joint(&obs, &d1, &o).unwrap() - net.log_joint(&obs, &d2, &o).unwrap();
        let rhs = net.log_prior(&d1).unwrap() - net.log_prior(&d2).unwrap();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn joint_sums_to_evidence_by_enumeration() {
        // Independent oracle: probability-domain enumeration over d and, for
        // each finding, over its latent state f.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let net = random_net(&mut rng, 8, 12, 4);
        let obs = ObservationModel::new(0.7, 0.4).unwrap();
        let entries: Vec<Obs> = (0..12)
            .map(|i| [Obs::Pos, Obs::Neg, Obs::Unk][i % 3])
            .collect();
        let o = ObservationVector::from_entries(entries.clone());
        let mut brute = 0.0;
        let mut via_joint = 0.0;
        for mask in 0..256u64 {
            let d = DiseaseVector::from_mask(8, mask);
            let mut p = 1.0;
            for k in 0..8 {
                p *= if d.get(k) { net.prior()[k] } else { 1.0 - net.prior()[k] };
            }
            for (i, f) in net.findings().iter().enumerate() {
                let mut p_neg = 1.0 - net.leak()[i];
                for (&k, &q) in f.parents.iter().zip(&f.q) {
                    if d.get(k) {
                        p_neg *= 1.0 - q;
                    }
                }
                let p_pos = 1.0 - p_neg;
                p *= match entries[i] {
                    Obs::Pos => p_pos * (1.0 - 0.7),
                    Obs::Neg => p_neg * (1.0 - 0.4),
                    Obs::Unk => p_pos * 0.7 + p_neg * 0.4,
                };
            }
            brute += p;
            via_joint += net.log_joint(&obs, &d, &o).unwrap().exp();
        }
        assert!((brute - via_joint).abs() <= 1e-10 * brute.max(1e-300), "{brute} vs {via_joint}");
    }

    #[test]
    fn turning_a_disease_on_never_raises_negative_probability() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let net = random_net(&mut rng, 7, 15, 5);
        for mask in 0..128u64 {
            let d = DiseaseVector::from_mask(7, mask);
            for k in 0..7 {
                if d.get(k) {
                    continue;
                }
                let mut up = d.clone();
                up.set(k, true);
                for i in 0..15 {
                    assert!(net.log_p_finding_neg(i, &up).unwrap() <= net.log_p_finding_neg(i, &d).unwrap());
                }
            }
        }
    }

    #[test]
    fn neg_infinity_is_absorbing() {
        let net = one_edge(0.1, 0.5);
        let obs = ObservationModel::new(0.5, 1.0).unwrap();
        let o = ObservationVector::from_sets(1, &[], &[0]).unwrap();
        for d in [DiseaseVector::zeros(1), DiseaseVector::from_active(1, &[0]).unwrap()] {
            assert_eq!(net.log_joint(&obs, &d, &o).unwrap(), f64::NEG_INFINITY);
        }
    }

    #[test]
    fn validate_accepts_valid_and_flags_duplicates() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let net = random_net(&mut rng, 6, 10, 3);
        assert!(net.validate().is_valid());

        let mut findings = net.findings().to_vec();
        let f = &mut findings[4];
        f.parents.push(f.parents[0]);
        f.q.push(f.q[0]);
        f.theta.push(f.theta[0]);
        let dup = Bn2oNetwork::from_raw(
            net.prior().to_vec(),
            net.leak().to_vec(),
            net.theta0().to_vec(),
            findings,
            NetMeta::default(),
        );
        let report = dup.validate();
        let k = net.finding(4).parents[0];
        assert_eq!(
            report.violations,
            vec![Violation::DuplicateEdge {
                finding: 4,
                disease: k
            }]
        );
        assert!(report.to_string().contains(&format!("(4, {k})")));
    }

    #[test]
    fn validate_detects_small_theta_perturbations() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let net = random_net(&mut rng, 6, 10, 3);
        for (i, delta) in [(0usize, 1e-6), (3, -1e-6), (9, 1e-9)] {
            let mut findings = net.findings().to_vec();
            findings[i].theta[0] += delta;
            let bad = Bn2oNetwork::from_raw(
                net.prior().to_vec(),
                net.leak().to_vec(),
                net.theta0().to_vec(),
                findings,
                NetMeta::default(),
            );
            let report = bad.validate();
            assert_eq!(report.violations.len(), 1, "{report}");
            assert!(matches!(report.violations[0], Violation::ThetaMismatch { finding, .. } if finding == i));
        }
        let mut theta0 = net.theta0().to_vec();
        theta0[2] += 1e-6;
        let bad = Bn2oNetwork::from_raw(
            net.prior().to_vec(),
            net.leak().to_vec(),
            theta0,
            net.findings().to_vec(),
            NetMeta::default(),
        );
        assert!(matches!(
            bad.validate().violations[..],
            [Violation::ThetaMismatch { finding: 2, disease: None, .. }]
        ));
    }

    #[test]
    fn validate_rejects_parentless_and_bad_ranges() {
        let err = Bn2oNetwork::new(
            vec![0.5, 1.0],
            vec![0.0, 1.0],
            vec![(vec![], vec![]), (vec![2], vec![0.5])],
            NetMeta::default(),
        )
        .unwrap_err();
        let ModelError::Invalid(report) = err else {
            panic!("expected invalid network")
        };
        let v = &report.violations;
        assert!(v.contains(&Violation::Parentless { finding: 0 }));
        assert!(v.contains(&Violation::PriorOutOfRange {
            disease: 1,
            value: 1.0
        }));
        assert!(v.iter().any(|x| matches!(x, Violation::LeakOutOfRange { finding: 1, .. })));
        assert!(v.contains(&Violation::ParentOutOfRange {
            finding: 1,
            disease: 2
        }));
    }

    #[test]
    fn observation_sets_are_checked() {
        assert!(matches!(
            ObservationVector::from_sets(4, &[1], &[1]),
            Err(ModelError::ConflictingEvidence(1))
        ));
        assert!(matches!(
            ObservationVector::from_sets(4, &[4], &[]),
            Err(ModelError::IndexOutOfRange { .. })
        ));
        let o = ObservationVector::from_sets(5, &[3, 1], &[0]).unwrap();
        assert_eq!(o.pos(), &[1, 3]);
        assert_eq!(o.neg(), &[0]);
        assert_eq!(o.get(2), Obs::Unk);
        assert!(ObservationModel::new(0.5, 1.5).is_err());
        assert_eq!(ObservationModel::new(0.5, 0.0).unwrap().bias_ratio(), None);
        assert!(ObservationModel::new(-0.1, 1.0).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let net = Bn2oNetwork::<f32>::new(vec![0.5], vec![0.1], vec![(vec![0], vec![0.5])], NetMeta::default())
            .unwrap();
        assert!(net.validate().is_valid());
        let d = DiseaseVector::from_active(1, &[0]).unwrap();
        assert!((net.log_p_finding_neg(0, &d).unwrap() - 0.45f32.ln()).abs() < 1e-6);
    }
}
