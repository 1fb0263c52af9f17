//! Synthetic QMR-DT-like network generation.
//!
//! Only ranges and a mean degree are published for the real network, so the
//! sampling laws here are choices: log-uniform priors and leaks, a uniform
//! integer disease degree around the mean, uniform strengths from the
//! five-value set, and partners drawn without replacement.

use std::collections::BTreeMap;

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Bn2oNetwork, ModelError, NetMeta};
use crate::rng::{self, stream};
use crate::scalar::Scalar;

pub const GENERATOR: &str = concat!("bn2o-netgen/", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Error)]
pub enum NetGenError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("disease degree {degree} exceeds the number of findings {findings}")]
    DegreeTooLarge { degree: usize, findings: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Parameters of the synthetic network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetGenConfig {
    pub num_diseases: usize,
    pub num_findings: usize,
    pub prior_range: (f64, f64),
    pub leak_range: (f64, f64),
    pub strengths: Vec<f64>,
    pub mean_degree: usize,
    pub degree_half_width: usize,
    pub seed: u64,
}

impl Default for NetGenConfig {
    fn default() -> Self {
        Self {
            num_diseases: 600,
            num_findings: 4000,
            prior_range: (2e-5, 2e-2),
            leak_range: (5.8e-8, 0.153),
            strengths: vec![0.025, 0.2, 0.5, 0.8, 0.985],
            mean_degree: 70,
            degree_half_width: 35,
            seed: 0,
        }
    }
}

impl NetGenConfig {
    /// K=60, I=400 with the full-size statistics otherwise.
    pub fn desk() -> Self {
        Self {
            num_diseases: 60,
            num_findings: 400,
            ..Self::default()
        }
    }

    /// K=10, I=40, small enough for exhaustive enumeration.
    pub fn tiny() -> Self {
        Self {
            num_diseases: 10,
            num_findings: 40,
            prior_range: (1e-2, 1e-1),
            mean_degree: 8,
            degree_half_width: 4,
            ..Self::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), NetGenError> {
        let bad = |m: String| Err(NetGenError::InvalidConfig(m));
        if self.num_diseases == 0 || self.num_findings == 0 {
            return bad("K and I must be at least 1".into());
        }
        let (plo, phi) = self.prior_range;
        if !(plo > 0.0 && plo <= phi && phi < 1.0) {
            return bad(format!("prior range ({plo}, {phi}) must satisfy 0 < lo <= hi < 1"));
        }
        let (llo, lhi) = self.leak_range;
        if !(llo > 0.0 && llo <= lhi && lhi < 1.0) {
            return bad(format!("leak range ({llo}, {lhi}) must satisfy 0 < lo <= hi < 1"));
        }
        if self.strengths.is_empty() || self.strengths.iter().any(|&q| !(q > 0.0 && q < 1.0)) {
            return bad("strengths must be a nonempty set inside (0, 1)".into());
        }
        if self.degree_half_width >= self.mean_degree {
            return bad(format!(
                "degree range {}±{} must stay >= 1",
                self.mean_degree, self.degree_half_width
            ));
        }
        let max_degree = self.mean_degree + self.degree_half_width;
        if max_degree > self.num_findings {
            return Err(NetGenError::DegreeTooLarge {
                degree: max_degree,
                findings: self.num_findings,
            });
        }
        Ok(())
    }
}

fn log_uniform(rng: &mut rng::Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        return lo;
    }
    let u: f64 = rng.gen();
    (lo.ln() + u * (hi.ln() - lo.ln())).exp()
}

/// Generates a network. Deterministic in `cfg` (including its seed).
pub fn generate<S: Scalar>(cfg: &NetGenConfig) -> Result<Bn2oNetwork<S>, NetGenError> {
    cfg.validate()?;
    let mut rng = rng::substream(cfg.seed, stream::NETWORK, 0);
    let k_len = cfg.num_diseases;
    let i_len = cfg.num_findings;

    let prior: Vec<f64> = (0..k_len).map(|_| log_uniform(&mut rng, cfg.prior_range)).collect();
    let leak: Vec<f64> = (0..i_len).map(|_| log_uniform(&mut rng, cfg.leak_range)).collect();

    let mut edges: Vec<(Vec<usize>, Vec<S>)> = vec![(Vec::new(), Vec::new()); i_len];
    let lo = cfg.mean_degree - cfg.degree_half_width;
    let hi = cfg.mean_degree + cfg.degree_half_width;
    for k in 0..k_len {
        let degree = rng.gen_range(lo..=hi);
        let mut partners = rand::seq::index::sample(&mut rng, i_len, degree).into_vec();
        partners.sort_unstable();
        for i in partners {
            let q = cfg.strengths[rng.gen_range(0..cfg.strengths.len())];
            edges[i].0.push(k);
            edges[i].1.push(S::of(q));
        }
    }
    // Repair pass: attach parentless findings to one random disease.
    for (parents, q) in edges.iter_mut() {
        if parents.is_empty() {
            parents.push(rng.gen_range(0..k_len));
            q.push(S::of(cfg.strengths[rng.gen_range(0..cfg.strengths.len())]));
        }
    }

    let meta = NetMeta {
        seed: Some(cfg.seed),
        generator: GENERATOR.to_string(),
    };
    Ok(Bn2oNetwork::new(
        prior.into_iter().map(S::of).collect(),
        leak.into_iter().map(S::of).collect(),
        edges,
        meta,
    )?)
}

/// Decade-binned histogram keyed by `floor(log10 x)`.
fn decade_histogram(values: impl Iterator<Item = f64>) -> BTreeMap<i32, usize> {
    let mut h = BTreeMap::new();
    for v in values {
        *h.entry(v.log10().floor() as i32).or_insert(0) += 1;
    }
    h
}

/// Summary statistics of a network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetStats {
    pub num_diseases: usize,
    pub num_findings: usize,
    pub num_edges: usize,
    pub mean_disease_degree: f64,
    pub mean_finding_degree: f64,
    /// degree -> number of diseases with that many findings
    pub disease_degree_histogram: BTreeMap<usize, usize>,
    /// degree -> number of findings with that many parents
    pub finding_degree_histogram: BTreeMap<usize, usize>,
    /// floor(log10 prior) -> count
    pub prior_decades: BTreeMap<i32, usize>,
    /// floor(log10 leak) -> count; zero leaks are counted separately
    pub leak_decades: BTreeMap<i32, usize>,
    pub zero_leaks: usize,
    /// strength (formatted) -> edge count
    pub strength_counts: BTreeMap<String, usize>,
    pub parentless_findings: usize,
    /// Σ_i q_ik averaged over diseases: positives caused by one active disease.
    pub mean_positives_per_disease: f64,
}

pub fn stats<S: Scalar>(net: &Bn2oNetwork<S>) -> NetStats {
    let k_len = net.num_diseases();
    let i_len = net.num_findings();
    let mut disease_degree = vec![0usize; k_len];
    let mut q_sum = vec![0.0f64; k_len];
    let mut finding_hist = BTreeMap::new();
    let mut strength_counts = BTreeMap::new();
    let mut parentless = 0;
    for f in net.findings() {
        *finding_hist.entry(f.parents.len()).or_insert(0) += 1;
        if f.parents.is_empty() {
            parentless += 1;
        }
        for (&k, &q) in f.parents.iter().zip(&f.q) {
            if k < k_len {
                disease_degree[k] += 1;
                q_sum[k] += q.as_f64();
            }
            *strength_counts.entry(format!("{}", q.as_f64())).or_insert(0) += 1;
        }
    }
    let mut disease_hist = BTreeMap::new();
    for &deg in &disease_degree {
        *disease_hist.entry(deg).or_insert(0) += 1;
    }
    let num_edges = net.num_edges();
    let leaks: Vec<f64> = net.leak().iter().map(|q| q.as_f64()).collect();
    let mean = |x: f64, n: usize| if n == 0 { 0.0 } else { x / n as f64 };
    NetStats {
        num_diseases: k_len,
        num_findings: i_len,
        num_edges,
        mean_disease_degree: mean(num_edges as f64, k_len),
        mean_finding_degree: mean(num_edges as f64, i_len),
        disease_degree_histogram: disease_hist,
        finding_degree_histogram: finding_hist,
        prior_decades: decade_histogram(net.prior().iter().map(|p| p.as_f64())),
        leak_decades: decade_histogram(leaks.iter().copied().filter(|&q| q > 0.0)),
        zero_leaks: leaks.iter().filter(|&&q| q == 0.0).count(),
        strength_counts,
        parentless_findings: parentless,
        mean_positives_per_disease: mean(q_sum.iter().sum(), k_len),
    }
}
