//! File formats: network JSON, benchmark JSONL, marginals JSONL, model JSON,
//! curve CSV and per-case JSONL, plus run manifests.
//!
//! Every writer produces bytes that the matching reader turns back into an
//! equal value, and writing that value again gives the same bytes.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::eval::{CaseCurves, CurveTable};
use crate::model::{Bn2oNetwork, DiseaseVector, ModelError, NetMeta, ObservationVector};
use crate::recog::{Kind, Params, RecogError, RecognitionModel, TrainReport, TrainerConfig};
use crate::sampler::{BenchmarkSet, TestCase};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Format(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Recog(#[from] RecogError),
}

fn json_err(line: usize) -> impl Fn(serde_json::Error) -> IoError {
    move |source| IoError::Json { line, source }
}

/// Writes via a temporary file in the target directory and a rename, so
/// readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let err = |source| IoError::File {
        path: path.display().to_string(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(err)?;
    tmp.write_all(bytes).map_err(err)?;
    tmp.as_file().sync_all().map_err(err)?;
    tmp.persist(path).map_err(|e| err(e.error))?;
    Ok(())
}

pub fn read_file(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })
}

/// Lower-case hex SHA-256.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

// ---- networks ----

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FindingRecord {
    parents: Vec<usize>,
    q: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkRecord {
    #[serde(rename = "K")]
    k: usize,
    #[serde(rename = "I")]
    i: usize,
    prior: Vec<f64>,
    leak: Vec<f64>,
    findings: Vec<FindingRecord>,
    meta: NetMeta,
}

pub fn network_to_json<S: Scalar>(net: &Bn2oNetwork<S>) -> String {
    let f64s = |v: &[S]| v.iter().map(|x| x.as_f64()).collect::<Vec<_>>();
    let rec = NetworkRecord {
        k: net.num_diseases(),
        i: net.num_findings(),
        prior: f64s(net.prior()),
        leak: f64s(net.leak()),
        findings: net
            .findings()
            .iter()
            .map(|f| FindingRecord {
                parents: f.parents.clone(),
                q: f64s(&f.q),
            })
            .collect(),
        meta: net.meta().clone(),
    };
    let mut s = serde_json::to_string(&rec).expect("network serializes");
    s.push('\n');
    s
}

/// Parses and validates a network; θ is recomputed from q.
pub fn network_from_json<S: Scalar>(text: &str) -> Result<Bn2oNetwork<S>, IoError> {
    let rec: NetworkRecord = serde_json::from_str(text).map_err(json_err(1))?;
    if rec.prior.len() != rec.k || rec.leak.len() != rec.i || rec.findings.len() != rec.i {
        return Err(IoError::Format(format!(
            "declared K={} I={} but found {} priors, {} leaks, {} findings",
            rec.k,
            rec.i,
            rec.prior.len(),
            rec.leak.len(),
            rec.findings.len()
        )));
    }
    let s = |v: Vec<f64>| v.into_iter().map(S::of).collect::<Vec<S>>();
    let findings = rec.findings.into_iter().map(|f| (f.parents, s(f.q))).collect();
    Ok(Bn2oNetwork::new(s(rec.prior), s(rec.leak), findings, rec.meta)?)
}

pub fn save_network<S: Scalar>(path: &Path, net: &Bn2oNetwork<S>) -> Result<(), IoError> {
    write_atomic(path, network_to_json(net).as_bytes())
}

/// The network and the SHA-256 of the file it came from.
pub fn load_network<S: Scalar>(path: &Path) -> Result<(Bn2oNetwork<S>, String), IoError> {
    let text = read_file(path)?;
    Ok((network_from_json(&text)?, sha256_hex(text.as_bytes())))
}

// ---- benchmarks ----

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CaseRecord {
    id: u64,
    d: Vec<usize>,
    pos: Vec<usize>,
    neg: Vec<usize>,
    p_plus: f64,
    p_minus: f64,
    seed: u64,
}

pub fn bench_to_jsonl(set: &BenchmarkSet) -> String {
    let mut out = String::new();
    for c in &set.cases {
        let rec = CaseRecord {
            id: c.id,
            d: c.diagnosis.active(),
            pos: c.observations.pos().to_vec(),
            neg: c.observations.neg().to_vec(),
            p_plus: c.p_plus,
            p_minus: c.p_minus,
            seed: c.seed,
        };
        out.push_str(&serde_json::to_string(&rec).expect("case serializes"));
        out.push('\n');
    }
    out
}

/// Reads cases for a network with `diseases` diseases and `findings`
/// findings. Every case must share one observation model.
pub fn bench_from_jsonl(text: &str, diseases: usize, findings: usize, network_hash: &str) -> Result<BenchmarkSet, IoError> {
    let mut cases = Vec::new();
    for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let rec: CaseRecord = serde_json::from_str(line).map_err(json_err(n + 1))?;
        cases.push(TestCase {
            id: rec.id,
            diagnosis: DiseaseVector::from_active(diseases, &rec.d)?,
            observations: ObservationVector::from_sets(findings, &rec.pos, &rec.neg)?,
            p_plus: rec.p_plus,
            p_minus: rec.p_minus,
            seed: rec.seed,
        });
    }
    let (p_plus, p_minus) = cases.first().map_or((0.0, 0.0), |c| (c.p_plus, c.p_minus));
    if cases.iter().any(|c| c.p_plus != p_plus || c.p_minus != p_minus) {
        return Err(IoError::Format("cases disagree on the observation model".into()));
    }
    Ok(BenchmarkSet {
        cases,
        p_plus,
        p_minus,
        network_hash: network_hash.to_string(),
    })
}

// ---- marginals ----

/// One method's output for one case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarginalRecord {
    pub id: u64,
    pub method: String,
    pub z: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ess: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_sum_w: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_evidence: Option<f64>,
}

impl MarginalRecord {
    pub fn new(id: u64, method: impl Into<String>, z: Vec<f64>) -> Self {
        Self {
            id,
            method: method.into(),
            z,
            bound: None,
            iterations: None,
            converged: None,
            ess: None,
            log_sum_w: None,
            log_evidence: None,
        }
    }
}

pub fn marginals_to_jsonl(records: &[MarginalRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    out
}

pub fn marginals_from_jsonl(text: &str) -> Result<Vec<MarginalRecord>, IoError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| serde_json::from_str(l).map_err(json_err(n + 1)))
        .collect()
}

// ---- recognition models ----

/// What the model was trained with, echoed into the model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingEcho {
    pub config: TrainerConfig,
    pub batches: usize,
    pub samples: usize,
    pub final_loss: Option<f64>,
    pub final_eta: f64,
    pub network_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_from: Option<String>,
}

impl TrainingEcho {
    pub fn new(config: TrainerConfig, report: &TrainReport, network_hash: &str) -> Self {
        Self {
            config,
            batches: report.batches,
            samples: report.samples,
            final_loss: report.loss_trace.last().copied(),
            final_eta: report.final_eta,
            network_hash: network_hash.to_string(),
            init_from: None,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelRecord {
    kind: Kind,
    #[serde(rename = "I")]
    i: usize,
    #[serde(rename = "K")]
    k: usize,
    #[serde(rename = "H")]
    h: usize,
    #[serde(rename = "frozen_W")]
    frozen_w: bool,
    dtype: String,
    training: Option<TrainingEcho>,
    /// Little-endian hex, row-major.
    weights: BTreeMap<String, String>,
}

/// A recognition model in either precision.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyModel {
    F32(RecognitionModel<f32>),
    F64(RecognitionModel<f64>),
}

impl AnyModel {
    /// `z` as `f64`, whatever the stored precision.
    pub fn predict(&self, o: &ObservationVector) -> Result<Vec<f64>, RecogError> {
        match self {
            AnyModel::F32(m) => Ok(m.predict_case(o)?.into_iter().map(f64::from).collect()),
            AnyModel::F64(m) => m.predict_case(o),
        }
    }

    pub fn kind(&self) -> Kind {
        match self {
            AnyModel::F32(m) => m.kind(),
            AnyModel::F64(m) => m.kind(),
        }
    }

    pub fn to_f64(&self) -> RecognitionModel<f64> {
        match self {
            AnyModel::F64(m) => m.clone(),
            AnyModel::F32(m) => {
                let p = m.params();
                let up = |v: &[f32]| v.iter().map(|&x| f64::from(x)).collect();
                let params = Params {
                    w: up(&p.w),
                    a: up(&p.a),
                    v: up(&p.v),
                    b: up(&p.b),
                    u: up(&p.u),
                };
                RecognitionModel::from_params(m.kind(), m.inputs(), m.outputs(), m.hidden(), params, m.frozen_w())
                    .expect("widening keeps sizes and finiteness")
            }
        }
    }
}

pub fn model_to_json<S: Scalar>(model: &RecognitionModel<S>, training: Option<&TrainingEcho>) -> String {
    let weights = model
        .params()
        .groups()
        .into_iter()
        .map(|(name, values, _)| {
            let mut bytes = Vec::with_capacity(values.len() * S::BYTES);
            for v in values {
                v.write_le(&mut bytes);
            }
            (name.to_string(), hex::encode(bytes))
        })
        .collect();
    let rec = ModelRecord {
        kind: model.kind(),
        i: model.inputs(),
        k: model.outputs(),
        h: model.hidden(),
        frozen_w: model.frozen_w(),
        dtype: S::NAME.to_string(),
        training: training.cloned(),
        weights,
    };
    let mut s = serde_json::to_string_pretty(&rec).expect("model serializes");
    s.push('\n');
    s
}

fn decode_model<S: Scalar>(rec: &ModelRecord) -> Result<RecognitionModel<S>, IoError> {
    let group = |name: &str| -> Result<Vec<S>, IoError> {
        let hexed = rec
            .weights
            .get(name)
            .ok_or_else(|| IoError::Format(format!("missing weight array {name}")))?;
        let bytes = hex::decode(hexed).map_err(|e| IoError::Format(format!("weight array {name}: {e}")))?;
        if bytes.len() % S::BYTES != 0 {
            return Err(IoError::Format(format!("weight array {name} is not a whole number of {}", S::NAME)));
        }
        Ok(bytes.chunks_exact(S::BYTES).map(S::read_le).collect())
    };
    let params = Params {
        w: group("W")?,
        a: group("a")?,
        v: group("V")?,
        b: group("b")?,
        u: group("U")?,
    };
    Ok(RecognitionModel::from_params(rec.kind, rec.i, rec.k, rec.h, params, rec.frozen_w)?)
}

pub fn model_from_json(text: &str) -> Result<(AnyModel, Option<TrainingEcho>), IoError> {
    let rec: ModelRecord = serde_json::from_str(text).map_err(json_err(1))?;
    let model = match rec.dtype.as_str() {
        "f32" => AnyModel::F32(decode_model(&rec)?),
        "f64" => AnyModel::F64(decode_model(&rec)?),
        other => return Err(IoError::Format(format!("unknown dtype {other}"))),
    };
    Ok((model, rec.training))
}

// ---- curves ----

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct CurveRow {
    rank: usize,
    method: String,
    mean_cumulative_ratio: f64,
    n_cases: usize,
}

pub fn curves_to_csv(table: &CurveTable) -> Result<String, IoError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for (m, method) in table.methods.iter().enumerate() {
        for (r, &v) in table.mean[m].iter().enumerate() {
            w.serialize(CurveRow {
                rank: r + 1,
                method: method.clone(),
                mean_cumulative_ratio: v,
                n_cases: table.n_cases,
            })?;
        }
    }
    let bytes = w.into_inner().map_err(|e| IoError::Format(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Reads a curve CSV back into `(methods, mean, n_cases)`; per-case
/// normalizers live in the companion JSONL and come back empty.
pub fn curves_from_csv(text: &str) -> Result<CurveTable, IoError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let mut methods: Vec<String> = Vec::new();
    let mut mean: Vec<Vec<f64>> = Vec::new();
    let mut n_cases = 0;
    for row in r.deserialize() {
        let row: CurveRow = row?;
        let m = match methods.iter().position(|x| *x == row.method) {
            Some(m) => m,
            None => {
                methods.push(row.method.clone());
                mean.push(Vec::new());
                methods.len() - 1
            }
        };
        if row.rank != mean[m].len() + 1 {
            return Err(IoError::Format(format!("{}: rank {} out of order", row.method, row.rank)));
        }
        mean[m].push(row.mean_cumulative_ratio);
        n_cases = row.n_cases;
    }
    Ok(CurveTable {
        methods,
        mean,
        log_z: Vec::new(),
        n_cases,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseSummary {
    pub id: u64,
    /// `None` stands for `ln 0`.
    pub log_z: Option<f64>,
    pub top1_log_joint: Option<f64>,
    pub reference_log_joint: Option<f64>,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

pub fn case_summaries_to_jsonl(cases: &[CaseCurves]) -> String {
    let mut out = String::new();
    for c in cases {
        let rec = CaseSummary {
            id: c.case_id,
            log_z: finite(c.log_z),
            top1_log_joint: finite(c.top1_log_joint),
            reference_log_joint: finite(c.reference_log_joint),
        };
        out.push_str(&serde_json::to_string(&rec).expect("summary serializes"));
        out.push('\n');
    }
    out
}

// ---- manifests ----

/// Written next to every output as `<output>.manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub tool_version: String,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    /// Input path to SHA-256.
    pub inputs: BTreeMap<String, String>,
    /// Output path to SHA-256.
    pub outputs: BTreeMap<String, String>,
    pub duration_secs: f64,
}

pub fn manifest_path(output: &Path) -> std::path::PathBuf {
    let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    output.with_file_name(name)
}

pub fn save_manifest(output: &Path, manifest: &RunManifest) -> Result<(), IoError> {
    let mut s = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    s.push('\n');
    write_atomic(&manifest_path(output), s.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{average_curves, cumulative_curve, DList};
    use crate::model::ObservationModel;
    use crate::netgen::{generate, NetGenConfig};
    use crate::rng::Rng;
    use crate::sampler::gen_benchmark;
    use rand::SeedableRng;

    #[test]
    fn network_round_trip_is_byte_identical() {
        let net: Bn2oNetwork<f64> = generate(&NetGenConfig::tiny().with_seed(2)).unwrap();
        let text = network_to_json(&net);
        let back: Bn2oNetwork<f64> = network_from_json(&text).unwrap();
        assert_eq!(back, net);
        assert_eq!(network_to_json(&back), text);
        assert!(!text.contains("theta"));
        let single: Bn2oNetwork<f32> = network_from_json(&text).unwrap();
        assert_eq!(network_to_json(&network_from_json::<f32>(&network_to_json(&single)).unwrap()), network_to_json(&single));
    }

    #[test]
    fn network_errors() {
        assert!(matches!(network_from_json::<f64>("{"), Err(IoError::Json { .. })));
        let bad = r#"{"K":1,"I":1,"prior":[0.1],"leak":[0.1],"findings":[{"parents":[3],"q":[0.5]}],"meta":{"seed":null,"generator":""}}"#;
        assert!(matches!(network_from_json::<f64>(bad), Err(IoError::Model(_))));
        let short = r#"{"K":2,"I":1,"prior":[0.1],"leak":[0.1],"findings":[{"parents":[0],"q":[0.5]}],"meta":{"seed":null,"generator":""}}"#;
        assert!(matches!(network_from_json::<f64>(short), Err(IoError::Format(_))));
    }

    #[test]
    fn bench_round_trip() {
        let net: Bn2oNetwork<f64> = generate(&NetGenConfig::tiny().with_seed(2)).unwrap();
        let obs = ObservationModel::new(0.5, 1.0).unwrap();
        let set = gen_benchmark(&net, &obs, 20, 2, 9, "h").unwrap();
        let text = bench_to_jsonl(&set);
        let back = bench_from_jsonl(&text, net.num_diseases(), net.num_findings(), "h").unwrap();
        assert_eq!(back, set);
        assert_eq!(bench_to_jsonl(&back), text);
        assert!(text.lines().next().unwrap().starts_with(r#"{"id":0,"d":["#));
    }

    #[test]
    fn marginals_round_trip() {
        let mut r = MarginalRecord::new(3, "jj99", vec![0.25, 1e-300, 0.1]);
        r.bound = Some(-12.5);
        r.iterations = Some(17);
        let recs = vec![r, MarginalRecord::new(4, "lr", vec![0.5])];
        let text = marginals_to_jsonl(&recs);
        assert!(!text.contains("ess"));
        let back = marginals_from_jsonl(&text).unwrap();
        assert_eq!(back, recs);
        assert_eq!(marginals_to_jsonl(&back), text);
    }

    #[test]
    fn model_round_trip_in_both_widths() {
        let net: Bn2oNetwork<f64> = generate(&NetGenConfig::tiny().with_seed(2)).unwrap();
        let lr = RecognitionModel::lr_from_prior(&net);
        let mut rng = Rng::seed_from_u64(1);
        let mlp = RecognitionModel::mlp_from_lr(&lr, 5, 0.01, &mut rng);
        let echo = TrainingEcho::new(
            TrainerConfig::default(),
            &TrainReport { loss_trace: vec![0.5], final_eta: 0.01, batches: 1, samples: 100 },
            "abc",
        );
        let text = model_to_json(&mlp, Some(&echo));
        let (back, t) = model_from_json(&text).unwrap();
        assert_eq!(back, AnyModel::F64(mlp.clone()));
        assert_eq!(t, Some(echo.clone()));
        assert_eq!(model_to_json(&back.to_f64(), t.as_ref()), text);

        let p = mlp.params();
        let down = |v: &[f64]| v.iter().map(|&x| x as f32).collect::<Vec<f32>>();
        let small = RecognitionModel::<f32>::from_params(
            Kind::Mlp,
            mlp.inputs(),
            mlp.outputs(),
            5,
            Params { w: down(&p.w), a: down(&p.a), v: down(&p.v), b: down(&p.b), u: down(&p.u) },
            true,
        )
        .unwrap();
        let text = model_to_json(&small, None);
        assert!(text.contains("\"dtype\": \"f32\""));
        let (back, _) = model_from_json(&text).unwrap();
        assert_eq!(back, AnyModel::F32(small.clone()));
        let o = ObservationVector::from_sets(net.num_findings(), &[1, 2], &[]).unwrap();
        let z32 = back.predict(&o).unwrap();
        let z64 = mlp.predict_case(&o).unwrap();
        for (a, b) in z32.iter().zip(&z64) {
            assert!((a - b).abs() < 1e-5);
        }
    }

    #[test]
    fn model_errors() {
        let net: Bn2oNetwork<f64> = generate(&NetGenConfig::tiny().with_seed(2)).unwrap();
        let text = model_to_json(&RecognitionModel::lr_from_prior(&net), None);
        assert!(matches!(model_from_json(&text.replace("\"f64\"", "\"f16\"")), Err(IoError::Format(_))));
        let truncated = text.replacen("\"a\": \"", "\"a\": \"00", 1);
        assert!(matches!(model_from_json(&truncated), Err(IoError::Format(_)) | Err(IoError::Recog(_))));
    }

    #[test]
    fn curves_round_trip() {
        let mk = |m: &str, j: &[f64]| DList {
            method: m.into(),
            case_id: 0,
            entries: j
                .iter()
                .enumerate()
                .map(|(i, &x)| crate::eval::Diagnosis { d: DiseaseVector::from_mask(3, i as u64), log_q: 0.0, log_joint: Some(x) })
                .collect(),
        };
        let (a, b) = (mk("a", &[-1.0, -2.0]), mk("b", &[-3.0, -1.5]));
        let c = cumulative_curve(&[&a, &b], -4.0).unwrap();
        let t = average_curves(&["a".into(), "b".into()], std::slice::from_ref(&c), 2).unwrap();
        let text = curves_to_csv(&t).unwrap();
        assert!(text.starts_with("rank,method,mean_cumulative_ratio,n_cases\n1,a,1.0,1\n"));
        let back = curves_from_csv(&text).unwrap();
        assert_eq!((back.methods.clone(), back.mean.clone(), back.n_cases), (t.methods.clone(), t.mean.clone(), 1));
        assert_eq!(curves_to_csv(&back).unwrap(), text);
        let summary = case_summaries_to_jsonl(&[c]);
        assert_eq!(summary, "{\"id\":0,\"log_z\":-1.0,\"top1_log_joint\":-1.0,\"reference_log_joint\":-4.0}\n");
    }

    #[test]
    fn atomic_write_and_manifest_path() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.csv");
        write_atomic(&p, b"x").unwrap();
        write_atomic(&p, b"yz").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"yz");
        assert_eq!(manifest_path(&p), dir.path().join("out.csv.manifest.json"));
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
