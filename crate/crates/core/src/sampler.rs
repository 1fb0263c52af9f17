//! Forward sampling from the augmented network and benchmark generation.
//!
//! Benchmark cases condition the disease prior on an exact number of active
//! diseases. That conditional is sampled exactly with a Poisson-binomial
//! dynamic program over suffix tails, `T(k, s) = P(Σ_{j>=k} d_j = s)`, kept in
//! the log domain.

use rand::Rng as _;
use rayon::prelude::*;
use thiserror::Error;

use crate::model::{Bn2oNetwork, DiseaseVector, ModelError, Obs, ObservationModel, ObservationVector};
use crate::numeric::log_add_exp;
use crate::rng::{self, stream, Rng};
use crate::scalar::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum SamplerError {
    #[error("cannot condition on {count} active diseases out of {diseases}")]
    CountOutOfRange { count: usize, diseases: usize },
    #[error("conditioning event Σd = {0} has probability zero")]
    ImpossibleCount(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// One benchmark case: reference diagnosis and the observation vector it produced.
#[derive(Debug, Clone, PartialEq)]
pub struct TestCase {
    pub id: u64,
    pub diagnosis: DiseaseVector,
    pub observations: ObservationVector,
    pub p_plus: f64,
    pub p_minus: f64,
    /// Seed of the case's own random stream.
    pub seed: u64,
}

/// A set of cases sharing one network and one generative observation model.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkSet {
    pub cases: Vec<TestCase>,
    pub p_plus: f64,
    pub p_minus: f64,
    pub network_hash: String,
}

/// Draws `d` from the prior and `f` given `d`. `true` in the finding vector
/// means positive.
pub fn sample_prior<S: Scalar>(net: &Bn2oNetwork<S>, rng: &mut Rng) -> (DiseaseVector, Vec<bool>) {
    let d = sample_diseases(net, rng);
    let mut log_neg = Vec::with_capacity(net.num_findings());
    net.fill_log_p_neg(d.bits(), &mut log_neg);
    let f = log_neg
        .iter()
        .map(|&l| rng.gen::<f64>() >= l.as_f64().exp())
        .collect();
    (d, f)
}

fn sample_diseases<S: Scalar>(net: &Bn2oNetwork<S>, rng: &mut Rng) -> DiseaseVector {
    DiseaseVector::from_bits(
        net.prior()
            .iter()
            .map(|&p| rng.gen::<f64>() < p.as_f64())
            .collect(),
    )
}

/// Log suffix tails `ln T(k, s)` for `k in 0..=K`, `s in 0..=m`, stored
/// row-major with row length `m + 1`.
pub(crate) fn log_suffix_tails<S: Scalar>(prior: &[S], m: usize) -> Vec<f64> {
    let k_len = prior.len();
    let w = m + 1;
    let mut t = vec![f64::NEG_INFINITY; (k_len + 1) * w];
    t[k_len * w] = 0.0;
    for k in (0..k_len).rev() {
        let p = prior[k].as_f64();
        let (lp, lq) = (p.ln(), (-p).ln_1p());
        for s in 0..=m {
            let off = lq + t[(k + 1) * w + s];
            let on = if s > 0 {
                lp + t[(k + 1) * w + s - 1]
            } else {
                f64::NEG_INFINITY
            };
            t[k * w + s] = log_add_exp(off, on);
        }
    }
    t
}

/// Exact draw from `P(d | Σ_k d_k = m)`.
pub fn sample_d_given_count<S: Scalar>(
    net: &Bn2oNetwork<S>,
    m: usize,
    rng: &mut Rng,
) -> Result<DiseaseVector, SamplerError> {
    let k_len = net.num_diseases();
    if m > k_len {
        return Err(SamplerError::CountOutOfRange {
            count: m,
            diseases: k_len,
        });
    }
    let t = log_suffix_tails(net.prior(), m);
    let w = m + 1;
    if t[m] == f64::NEG_INFINITY {
        return Err(SamplerError::ImpossibleCount(m));
    }
    let mut d = DiseaseVector::zeros(k_len);
    let mut remaining = m;
    for k in 0..k_len {
        if remaining == 0 {
            break;
        }
        let lp = net.prior()[k].as_f64().ln();
        let p_on = (lp + t[(k + 1) * w + remaining - 1] - t[k * w + remaining]).exp();
        if rng.gen::<f64>() < p_on {
            d.set(k, true);
            remaining -= 1;
        }
    }
    debug_assert_eq!(remaining, 0);
    Ok(d)
}

/// Clamps the diseases to `d` and forward-samples findings, then observation
/// nodes. The latent findings are dropped.
pub fn sample_observation<S: Scalar>(
    net: &Bn2oNetwork<S>,
    obs: &ObservationModel<S>,
    d: &DiseaseVector,
    rng: &mut Rng,
) -> Result<ObservationVector, SamplerError> {
    let log_neg = net.log_p_neg_all(d)?;
    let (pp, pm) = (obs.p_plus().as_f64(), obs.p_minus().as_f64());
    let entries = log_neg
        .iter()
        .map(|&l| {
            let positive = rng.gen::<f64>() >= l.as_f64().exp();
            let hide = rng.gen::<f64>();
            match (positive, hide < if positive { pp } else { pm }) {
                (_, true) => Obs::Unk,
                (true, false) => Obs::Pos,
                (false, false) => Obs::Neg,
            }
        })
        .collect();
    Ok(ObservationVector::from_entries(entries))
}

/// Draws one `(d, o)` pair from the augmented network with `d` from the
/// unconditioned prior. This is the training distribution of the recognition
/// networks.
pub fn sample_augmented<S: Scalar>(
    net: &Bn2oNetwork<S>,
    obs: &ObservationModel<S>,
    rng: &mut Rng,
) -> (DiseaseVector, ObservationVector) {
    let d = sample_diseases(net, rng);
    let o = sample_observation(net, obs, &d, rng).expect("sampled d has network dimensions");
    (d, o)
}

/// Generates `n_cases` cases, each with exactly `disease_count` active
/// diseases. Case `n` uses the substream `hash(seed, n)`, so the output is
/// identical regardless of thread count.
pub fn gen_benchmark<S: Scalar>(
    net: &Bn2oNetwork<S>,
    obs: &ObservationModel<S>,
    n_cases: usize,
    disease_count: usize,
    seed: u64,
    network_hash: impl Into<String>,
) -> Result<BenchmarkSet, SamplerError> {
    let cases = (0..n_cases as u64)
        .into_par_iter()
        .map(|id| {
            let case_seed = rng::derive_seed(seed, stream::BENCHMARK, id);
            let mut rng = <Rng as rand::SeedableRng>::seed_from_u64(case_seed);
            let diagnosis = sample_d_given_count(net, disease_count, &mut rng)?;
            let observations = sample_observation(net, obs, &diagnosis, &mut rng)?;
            Ok(TestCase {
                id,
                diagnosis,
                observations,
                p_plus: obs.p_plus().as_f64(),
                p_minus: obs.p_minus().as_f64(),
                seed: case_seed,
            })
        })
        .collect::<Result<Vec<_>, SamplerError>>()?;
    Ok(BenchmarkSet {
        cases,
        p_plus: obs.p_plus().as_f64(),
        p_minus: obs.p_minus().as_f64(),
        network_hash: network_hash.into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::NetMeta;
    use crate::netgen::{generate, NetGenConfig};
    use rand::SeedableRng;
    use std::collections::HashMap;

    fn small_net(prior: Vec<f64>) -> Bn2oNetwork<f64> {
        let k = prior.len();
        let findings = (0..6)
            .map(|i| {
                let parents: Vec<usize> = (0..k).filter(|&kk| (kk + i) % 3 != 0).collect();
                let q = parents.iter().map(|&kk| 0.1 + 0.08 * ((kk + i) % 10) as f64).collect();
                (parents, q)
            })
            .collect();
        Bn2oNetwork::new(prior, vec![0.05, 0.0, 0.1, 0.01, 0.2, 0.0], findings, NetMeta::default())
            .unwrap()
    }

    fn rng(seed: u64) -> Rng {
        Rng::seed_from_u64(seed)
    }

    #[test]
    fn zero_prior_never_fires() {
        // priors must lie in (0,1) for a valid network, so build it raw
        let net = Bn2oNetwork::<f64>::from_raw(
            vec![0.0; 3],
            vec![0.0; 2],
            vec![0.0; 2],
            vec![
                crate::model::Finding::from_strengths(vec![0, 1], vec![0.5, 0.5]),
                crate::model::Finding::from_strengths(vec![2], vec![0.9]),
            ],
            NetMeta::default(),
        );
        let mut r = rng(1);
        for _ in 0..1000 {
            let (d, f) = sample_prior(&net, &mut r);
            assert_eq!(d.count(), 0);
            assert!(f.iter().all(|&x| !x), "no leak, no cause => negative");
        }
    }

    #[test]
    fn finding_frequencies_match_enumeration() {
        let net = small_net(vec![0.3, 0.1, 0.5, 0.05]);
        let n = 100_000;
        let mut counts = [0usize; 6];
        let mut r = rng(2);
        for _ in 0..n {
            let (_, f) = sample_prior(&net, &mut r);
            for (c, &x) in counts.iter_mut().zip(&f) {
                *c += x as usize;
            }
        }
        for i in 0..6 {
            let mut p = 0.0;
            for mask in 0..16u64 {
                let d = DiseaseVector::from_mask(4, mask);
                let lp = net.log_prior(&d).unwrap().exp();
                p += lp * (1.0 - net.log_p_finding_neg(i, &d).unwrap().exp());
            }
            let se = (p * (1.0 - p) / n as f64).sqrt();
            let emp = counts[i] as f64 / n as f64;
            assert!((emp - p).abs() <= 3.0 * se + 1e-12, "finding {i}: {emp} vs {p}");
        }
    }

    #[test]
    fn count_zero_is_the_empty_diagnosis() {
        let net = small_net(vec![0.3, 0.1, 0.5, 0.05]);
        let mut r = rng(3);
        assert_eq!(sample_d_given_count(&net, 0, &mut r).unwrap(), DiseaseVector::zeros(4));
    }

    #[test]
    fn impossible_counts_error() {
        let net = small_net(vec![0.3, 0.1, 0.5, 0.05]);
        let mut r = rng(3);
        assert_eq!(
            sample_d_given_count(&net, 5, &mut r),
            Err(SamplerError::CountOutOfRange { count: 5, diseases: 4 })
        );
        let net = Bn2oNetwork::<f64>::from_raw(
            vec![0.5, 0.0],
            vec![0.0],
            vec![0.0],
            vec![crate::model::Finding::from_strengths(vec![0], vec![0.5])],
            NetMeta::default(),
        );
        assert_eq!(sample_d_given_count(&net, 2, &mut r), Err(SamplerError::ImpossibleCount(2)));
    }

    #[test]
    fn equal_priors_give_uniform_pairs() {
        let net = small_net(vec![0.2; 4]);
        let n = 100_000;
        let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
        let mut r = rng(4);
        for _ in 0..n {
            let d = sample_d_given_count(&net, 2, &mut r).unwrap();
            assert_eq!(d.count(), 2);
            *counts.entry(d.active()).or_default() += 1;
        }
        assert_eq!(counts.len(), 6);
        let p = 1.0 / 6.0;
        let sd = (n as f64 * p * (1.0 - p)).sqrt();
        for (pair, &c) in &counts {
            assert!((c as f64 - n as f64 * p).abs() <= 3.0 * sd, "{pair:?}: {c}");
        }
    }

    #[test]
    fn conditioned_sampler_matches_enumerated_conditional() {
        let prior = vec![0.01, 0.3, 0.05, 0.2, 0.5, 0.02, 0.15, 0.4, 0.08, 0.25];
        let findings = vec![(vec![0], vec![0.5])];
        let net = Bn2oNetwork::new(prior.clone(), vec![0.0], findings, NetMeta::default()).unwrap();
        // enumeration of P(d | Σd = 3)
        let mut exact: HashMap<u64, f64> = HashMap::new();
        let mut z = 0.0;
        for mask in 0u64..1024 {
            if mask.count_ones() != 3 {
                continue;
            }
            let p: f64 = (0..10)
                .map(|k| if mask >> k & 1 == 1 { prior[k] } else { 1.0 - prior[k] })
                .product();
            exact.insert(mask, p);
            z += p;
        }
        assert_eq!(exact.len(), 120);
        let n = 100_000;
        let mut counts: HashMap<u64, usize> = HashMap::new();
        let mut r = rng(5);
        for _ in 0..n {
            let d = sample_d_given_count(&net, 3, &mut r).unwrap();
            let mask = d.active().iter().fold(0u64, |m, &k| m | 1 << k);
            *counts.entry(mask).or_default() += 1;
        }
        let tv: f64 = exact
            .iter()
            .map(|(mask, p)| (p / z - *counts.get(mask).unwrap_or(&0) as f64 / n as f64).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv <= 0.02, "total variation {tv}");
    }

    #[test]
    fn suffix_tails_match_brute_force() {
        let prior = [0.1, 0.7, 0.25, 0.4, 0.05];
        let t = log_suffix_tails(&prior, 3);
        for k in 0..=5 {
            for s in 0..=3 {
                let tail = &prior[k..];
                let mut p = 0.0;
                for mask in 0u64..(1 << tail.len()) {
                    if mask.count_ones() as usize == s {
                        p += (0..tail.len())
                            .map(|j| if mask >> j & 1 == 1 { tail[j] } else { 1.0 - tail[j] })
                            .product::<f64>();
                    }
                }
                assert!((t[k * 4 + s].exp() - p).abs() < 1e-14, "T({k},{s})");
            }
        }
    }

    #[test]
    fn fully_observed_and_fully_hidden_negatives() {
        let net = small_net(vec![0.3, 0.1, 0.5, 0.05]);
        let d = DiseaseVector::from_active(4, &[0, 2]).unwrap();
        let mut r = rng(6);
        let visible = ObservationModel::new(0.0, 0.0).unwrap();
        let hidden_neg = ObservationModel::new(0.3, 1.0).unwrap();
        for _ in 0..500 {
            let o = sample_observation(&net, &visible, &d, &mut r).unwrap();
            assert!(o.entries().iter().all(|&x| x != Obs::Unk));
            let o = sample_observation(&net, &hidden_neg, &d, &mut r).unwrap();
            assert!(o.neg().is_empty());
        }
    }

    #[test]
    fn benchmark_cases_have_exact_counts_and_are_reproducible() {
        let net: Bn2oNetwork<f64> = generate(&NetGenConfig::desk().with_seed(3)).unwrap();
        let obs = ObservationModel::new(0.5, 1.0).unwrap();
        let a = gen_benchmark(&net, &obs, 50, 5, 17, "h").unwrap();
        assert_eq!(a.cases.len(), 50);
        assert!(a.cases.iter().all(|c| c.diagnosis.count() == 5));
        assert!(a.cases.iter().all(|c| c.observations.neg().is_empty()));
        let b = gen_benchmark(&net, &obs, 50, 5, 17, "h").unwrap();
        assert_eq!(a, b);
        // case n depends only on (seed, n)
        let c = gen_benchmark(&net, &obs, 20, 5, 17, "h").unwrap();
        assert_eq!(&a.cases[..20], &c.cases[..]);
        let empty = gen_benchmark(&net, &obs, 0, 5, 17, "h").unwrap();
        assert!(empty.cases.is_empty());
    }

    #[test]
    fn default_network_case_sizes() {
        let net: Bn2oNetwork<f64> = generate(&NetGenConfig::default().with_seed(1)).unwrap();
        let all_pos = ObservationModel::new(0.0, 1.0).unwrap();
        let bench = gen_benchmark(&net, &all_pos, 1000, 5, 2, "h").unwrap();
        assert!(bench.cases.iter().all(|c| c.diagnosis.count() == 5));
        let mean_pos = bench
            .cases
            .iter()
            .map(|c| c.observations.pos().len() as f64)
            .sum::<f64>()
            / 1000.0;
        // Five diseases at ~35 positives each plus leaks puts the mean near 210,
        // so check against the model's own expectation Σ_i P(f_i=+|d).
        let expected = bench
            .cases
            .iter()
            .map(|c| {
                net.log_p_neg_all(&c.diagnosis)
                    .unwrap()
                    .iter()
                    .map(|l| -l.exp_m1())
                    .sum::<f64>()
            })
            .sum::<f64>()
            / 1000.0;
        assert!((mean_pos - expected).abs() <= 0.03 * expected, "mean |F+| = {mean_pos}, expected {expected}");
        assert!(mean_pos < 300.0, "a few hundred or less: {mean_pos}");

        let half_neg = ObservationModel::new(0.5, 0.5).unwrap();
        let bench = gen_benchmark(&net, &half_neg, 200, 5, 3, "h").unwrap();
        let mean_neg = bench
            .cases
            .iter()
            .map(|c| c.observations.neg().len() as f64)
            .sum::<f64>()
            / 200.0;
        assert!(mean_neg > 1800.0 && mean_neg < 2000.0, "mean |F-| = {mean_neg}");
    }
}
