use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::time::Instant;

use bn2o::aisbn::{self, AisbnConfig, AisbnError};
use bn2o::eval::{average_curves, cumulative_curve, score_dlist, CaseCurves, CurveTable, DList, EvalError};
use bn2o::exact::{self, ExactError, DEFAULT_ENUMERATION_CAP, DEFAULT_QUICKSCORE_CAP};
use bn2o::io::{self, AnyModel, IoError, MarginalRecord, RunManifest, TrainingEcho};
use bn2o::jj99::{self, Jj99Error};
use bn2o::model::ModelError;
use bn2o::netgen::{self, NetGenConfig, NetGenError};
use bn2o::recog::{Kind, RecogError, RecognitionModel, TrainError, TrainerConfig};
use bn2o::rng::{stream, substream};
use bn2o::sampler::{gen_benchmark, BenchmarkSet, SamplerError};
use bn2o::{Bn2oNetwork, Network, ObservationModel, Scalar};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::{Dtype, EvalArgs, GenBenchArgs, GenNetArgs, InferArgs, MethodName, ModelKind, OracleArgs, OracleMode, Preset, TrainArgs};

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flag combination; exits with status 2.
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    NetGen(#[from] NetGenError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Recog(#[from] RecogError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn case_err(id: u64, e: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("case {id}: {e}"))
}

/// Collects input and output hashes for the manifests of one command.
pub struct Run {
    started: Instant,
    manifest: RunManifest,
    written: Vec<PathBuf>,
}

impl Run {
    pub fn new(subcommand: &str, seed: Option<u64>, config: &impl Serialize) -> Self {
        Self {
            started: Instant::now(),
            manifest: RunManifest {
                subcommand: subcommand.to_string(),
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                seed,
                config: serde_json::to_value(config).expect("arguments serialize"),
                inputs: BTreeMap::new(),
                outputs: BTreeMap::new(),
                duration_secs: 0.0,
            },
            written: Vec::new(),
        }
    }

    pub fn load_net(&mut self, path: &Path) -> Result<Network, CliError> {
        let (net, hash) = io::load_network::<f64>(path)?;
        self.manifest.inputs.insert(path.display().to_string(), hash);
        Ok(net)
    }

    pub fn read(&mut self, path: &Path) -> Result<String, CliError> {
        let text = io::read_file(path)?;
        self.manifest
            .inputs
            .insert(path.display().to_string(), io::sha256_hex(text.as_bytes()));
        Ok(text)
    }

    pub fn load_bench(&mut self, path: &Path, net: &Network) -> Result<BenchmarkSet, CliError> {
        let text = self.read(path)?;
        let hash = self.manifest.inputs[&path.display().to_string()].clone();
        Ok(io::bench_from_jsonl(&text, net.num_diseases(), net.num_findings(), &hash)?)
    }

    pub fn write(&mut self, path: &Path, bytes: &[u8]) -> Result<(), CliError> {
        io::write_atomic(path, bytes)?;
        self.manifest
            .outputs
            .insert(path.display().to_string(), io::sha256_hex(bytes));
        self.written.push(path.to_path_buf());
        Ok(())
    }

    /// Writes one manifest beside every output.
    pub fn finish(mut self) -> Result<(), CliError> {
        self.manifest.duration_secs = self.started.elapsed().as_secs_f64();
        for path in &self.written {
            io::save_manifest(path, &self.manifest)?;
        }
        Ok(())
    }
}

// ---- gen-net ----

pub fn preset_config(preset: Preset) -> NetGenConfig {
    match preset {
        Preset::Tiny => NetGenConfig::tiny(),
        Preset::Desk => NetGenConfig::desk(),
        Preset::Paper => NetGenConfig::default(),
    }
}

pub fn gen_net(args: &GenNetArgs) -> Result<(), CliError> {
    let mut run = Run::new("gen-net", Some(args.seed), args);
    let cfg = match &args.config {
        Some(path) => {
            let text = run.read(path)?;
            serde_json::from_str::<NetGenConfig>(&text)
                .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?
        }
        None => preset_config(args.preset),
    }
    .with_seed(args.seed);
    let net: Network = netgen::generate(&cfg)?;
    run.write(&args.out, io::network_to_json(&net).as_bytes())?;
    run.finish()?;
    let stats = serde_json::to_string_pretty(&netgen::stats(&net)).expect("stats serialize");
    print_stdout(&format!("{stats}\n"));
    Ok(())
}

/// A closed stdout (`| head`) is not an error worth dying over.
pub fn print_stdout(text: &str) {
    use std::io::Write;
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

// ---- gen-bench ----

pub fn gen_bench(args: &GenBenchArgs) -> Result<(), CliError> {
    let mut run = Run::new("gen-bench", Some(args.seed), args);
    let net = run.load_net(&args.net)?;
    let obs = ObservationModel::new(args.p_plus, args.p_minus)?;
    let hash = run.manifest.inputs[&args.net.display().to_string()].clone();
    let set = gen_benchmark(&net, &obs, args.cases, args.diseases, args.seed, hash)?;
    run.write(&args.out, io::bench_to_jsonl(&set).as_bytes())?;
    run.finish()
}

// ---- train ----

pub fn trainer_config(args: &TrainArgs) -> TrainerConfig {
    TrainerConfig {
        eta0: args.eta0,
        batch_size: args.batch_size,
        samples: args.samples,
        p_plus: args.p_plus,
        p_minus: args.p_minus,
        seed: args.seed,
        ..TrainerConfig::default()
    }
}

/// Trains a fresh LR model, or an MLP staged from `init`.
pub fn fit<S: Scalar>(
    net: &Bn2oNetwork<S>,
    cfg: &TrainerConfig,
    init: Option<&RecognitionModel<S>>,
    hidden: usize,
    init_scale: f64,
) -> Result<(RecognitionModel<S>, bn2o::recog::TrainReport), CliError> {
    let mut model = match init {
        None => RecognitionModel::lr_from_prior(net),
        Some(lr) => {
            let mut rng = substream(cfg.seed, stream::INIT, 0);
            RecognitionModel::mlp_from_lr(lr, hidden, init_scale, &mut rng)
        }
    };
    let report = bn2o::recog::train_on_network(&mut model, net, cfg)?;
    Ok((model, report))
}

fn train_typed<S: Scalar>(
    run: &mut Run,
    args: &TrainArgs,
    init: Option<(RecognitionModel<S>, String)>,
) -> Result<String, CliError> {
    let (net, hash) = io::load_network::<S>(&args.net)?;
    run.manifest.inputs.insert(args.net.display().to_string(), hash.clone());
    let cfg = trainer_config(args);
    let (model, report) = fit(&net, &cfg, init.as_ref().map(|(m, _)| m), args.hidden, args.init_scale)?;
    let mut echo = TrainingEcho::new(cfg, &report, &hash);
    echo.init_from = init.map(|(_, h)| h);
    Ok(io::model_to_json(&model, Some(&echo)))
}

pub fn train(args: &TrainArgs) -> Result<(), CliError> {
    let mut run = Run::new("train", Some(args.seed), args);
    let init = match (args.kind, &args.init_from) {
        (ModelKind::Lr, None) => None,
        (ModelKind::Lr, Some(_)) => return Err(CliError::Usage("--init-from only applies to --kind mlp".into())),
        (ModelKind::Mlp, None) => return Err(CliError::Usage("--kind mlp needs --init-from <lr model>".into())),
        (ModelKind::Mlp, Some(path)) => {
            let text = run.read(path)?;
            let hash = io::sha256_hex(text.as_bytes());
            let (model, _) = io::model_from_json(&text)?;
            if model.kind() != Kind::Lr {
                return Err(CliError::Data(format!("{}: expected an lr model", path.display())));
            }
            Some((model, hash))
        }
    };
    let text = match (args.dtype, init) {
        (Dtype::F64, None) => train_typed::<f64>(&mut run, args, None)?,
        (Dtype::F32, None) => train_typed::<f32>(&mut run, args, None)?,
        (Dtype::F64, Some((AnyModel::F64(m), h))) => train_typed(&mut run, args, Some((m, h)))?,
        (Dtype::F32, Some((AnyModel::F32(m), h))) => train_typed(&mut run, args, Some((m, h)))?,
        (_, Some(_)) => return Err(CliError::Data("--init-from model has a different --dtype".into())),
    };
    run.write(&args.out, text.as_bytes())?;
    run.finish()
}

// ---- infer ----

pub enum Method<'a> {
    Jj99 { tol: f64, max_iters: u64 },
    Aisbn(AisbnConfig),
    Model(&'a AnyModel),
    Prior,
}

/// Marginals of every case, in case order.
pub fn infer_set(net: &Network, set: &BenchmarkSet, method: &Method, label: &str) -> Result<Vec<MarginalRecord>, CliError> {
    set.cases
        .par_iter()
        .map(|case| {
            let (pos, neg) = (case.observations.pos(), case.observations.neg());
            let rec = match method {
                Method::Jj99 { tol, max_iters } => {
                    let state = match jj99::optimize(net, pos, neg, *tol, *max_iters) {
                        Ok(s) => s,
                        Err(Jj99Error::NotConverged(s)) => *s,
                        Err(e) => return Err(case_err(case.id, e)),
                    };
                    MarginalRecord {
                        bound: Some(state.bound),
                        iterations: Some(state.iterations),
                        converged: Some(state.converged),
                        ..MarginalRecord::new(case.id, label, state.marginals())
                    }
                }
                Method::Aisbn(cfg) => {
                    let r = aisbn::run(net, pos, neg, cfg, case.id).map_err(|e: AisbnError| case_err(case.id, e))?;
                    MarginalRecord {
                        ess: Some(r.ess),
                        log_sum_w: Some(r.log_sum_w),
                        log_evidence: Some(r.log_evidence),
                        ..MarginalRecord::new(case.id, label, r.marginals)
                    }
                }
                Method::Model(m) => {
                    let z = m.predict(&case.observations).map_err(|e| case_err(case.id, e))?;
                    MarginalRecord::new(case.id, label, z)
                }
                Method::Prior => MarginalRecord::new(case.id, label, net.prior().to_vec()),
            };
            Ok(rec)
        })
        .collect()
}

pub fn infer(args: &InferArgs) -> Result<(), CliError> {
    let mut run = Run::new("infer", args.seed, args);
    let net = run.load_net(&args.net)?;
    let set = run.load_bench(&args.cases, &net)?;
    let model = match (args.method, &args.model) {
        (MethodName::Lr | MethodName::Mlp, None) => {
            return Err(CliError::Usage("--method lr|mlp needs --model <file>".into()));
        }
        (MethodName::Lr | MethodName::Mlp, Some(path)) => {
            let (m, _) = io::model_from_json(&run.read(path)?)?;
            let want = if args.method == MethodName::Lr { Kind::Lr } else { Kind::Mlp };
            if m.kind() != want {
                return Err(CliError::Data(format!("{}: model kind does not match --method", path.display())));
            }
            Some(m)
        }
        (_, Some(_)) => return Err(CliError::Usage("--model only applies to --method lr|mlp".into())),
        (_, None) => None,
    };
    let method = match args.method {
        MethodName::Jj99 => Method::Jj99 { tol: args.tol, max_iters: args.max_iters },
        MethodName::Aisbn => {
            let cfg = AisbnConfig {
                phase1_samples: args.phase1,
                phase2_samples: args.phase2,
                block_size: args.block_size,
                seed: args.seed.expect("clap requires --seed for aisbn"),
                ..AisbnConfig::default()
            };
            cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            Method::Aisbn(cfg)
        }
        MethodName::Lr | MethodName::Mlp => Method::Model(model.as_ref().expect("checked above")),
        MethodName::Prior => Method::Prior,
    };
    let label = args.label.clone().unwrap_or_else(|| method_label(args.method).to_string());
    let records = infer_set(&net, &set, &method, &label)?;
    let stalled = records.iter().filter(|r| r.converged == Some(false)).count();
    if stalled > 0 {
        eprintln!("warning: {stalled} case(s) stopped at the iteration limit");
    }
    run.write(&args.out, io::marginals_to_jsonl(&records).as_bytes())?;
    run.finish()
}

fn method_label(m: MethodName) -> &'static str {
    match m {
        MethodName::Jj99 => "jj99",
        MethodName::Aisbn => "aisbn",
        MethodName::Lr => "lr",
        MethodName::Mlp => "mlp",
        MethodName::Prior => "prior",
    }
}

// ---- oracle ----

pub fn oracle_set(net: &Network, set: &BenchmarkSet, mode: OracleMode, cap: Option<usize>) -> Result<Vec<MarginalRecord>, CliError> {
    set.cases
        .par_iter()
        .map(|case| {
            let post = match mode {
                OracleMode::Enum => {
                    let obs = ObservationModel::new(case.p_plus, case.p_minus)?;
                    exact::enumerate_posterior(net, &obs, &case.observations, cap.unwrap_or(DEFAULT_ENUMERATION_CAP))
                }
                OracleMode::Quickscore => exact::quickscore(
                    net,
                    case.observations.pos(),
                    case.observations.neg(),
                    cap.unwrap_or(DEFAULT_QUICKSCORE_CAP),
                ),
            }
            .map_err(|e: ExactError| case_err(case.id, e))?;
            let label = if mode == OracleMode::Enum { "exact" } else { "quickscore" };
            Ok(MarginalRecord {
                log_evidence: Some(post.log_evidence),
                ..MarginalRecord::new(case.id, label, post.marginals)
            })
        })
        .collect()
}

pub fn oracle(args: &OracleArgs) -> Result<(), CliError> {
    let mut run = Run::new("oracle", None, args);
    let net = run.load_net(&args.net)?;
    let set = run.load_bench(&args.case_file, &net)?;
    let records = oracle_set(&net, &set, args.mode, args.cap)?;
    run.write(&args.out, io::marginals_to_jsonl(&records).as_bytes())?;
    run.finish()
}

// ---- eval ----

/// Builds length-`n` D-lists from each method's marginals, scores them under
/// the cases' own observation model and averages the cumulative curves.
pub fn evaluate(
    net: &Network,
    set: &BenchmarkSet,
    methods: &[(String, Vec<MarginalRecord>)],
    n: usize,
) -> Result<(CurveTable, Vec<CaseCurves>), CliError> {
    let by_id: Vec<HashMap<u64, &MarginalRecord>> = methods
        .iter()
        .map(|(_, recs)| recs.iter().map(|r| (r.id, r)).collect())
        .collect();
    let cases = set
        .cases
        .par_iter()
        .map(|case| {
            let obs = ObservationModel::new(case.p_plus, case.p_minus)?;
            let mut lists = Vec::with_capacity(methods.len());
            for ((name, _), index) in methods.iter().zip(&by_id) {
                let rec = index
                    .get(&case.id)
                    .ok_or_else(|| case_err(case.id, format!("no marginals from {name}")))?;
                let mut list = DList::from_marginals(name.clone(), case.id, &rec.z, n).map_err(|e| case_err(case.id, e))?;
                score_dlist(net, &obs, &mut list, &case.observations).map_err(|e| case_err(case.id, e))?;
                lists.push(list);
            }
            let reference = net.log_joint(&obs, &case.diagnosis, &case.observations)?;
            let refs: Vec<&DList> = lists.iter().collect();
            cumulative_curve(&refs, reference).map_err(|e| case_err(case.id, e))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let names: Vec<String> = methods.iter().map(|(m, _)| m.clone()).collect();
    let table = average_curves(&names, &cases, n)?;
    Ok((table, cases))
}

pub fn per_case_path(csv: &Path) -> PathBuf {
    csv.with_extension("cases.jsonl")
}

pub fn eval(args: &EvalArgs) -> Result<(), CliError> {
    if args.n == 0 {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    let mut run = Run::new("eval", None, args);
    let net = run.load_net(&args.net)?;
    let set = run.load_bench(&args.cases, &net)?;
    let mut methods: Vec<(String, Vec<MarginalRecord>)> = Vec::new();
    for path in &args.marginals {
        let recs = io::marginals_from_jsonl(&run.read(path)?)?;
        let name = recs
            .first()
            .map(|r| r.method.clone())
            .ok_or_else(|| CliError::Data(format!("{}: no records", path.display())))?;
        if recs.iter().any(|r| r.method != name) {
            return Err(CliError::Data(format!("{}: mixes several methods", path.display())));
        }
        if methods.iter().any(|(m, _)| *m == name) {
            return Err(CliError::Data(format!("{}: method {name} given twice", path.display())));
        }
        methods.push((name, recs));
    }
    let (table, cases) = evaluate(&net, &set, &methods, args.n)?;
    let per_case = args.per_case.clone().unwrap_or_else(|| per_case_path(&args.out));
    run.write(&args.out, io::curves_to_csv(&table)?.as_bytes())?;
    run.write(&per_case, io::case_summaries_to_jsonl(&cases).as_bytes())?;
    run.finish()
}
