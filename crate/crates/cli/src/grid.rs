//! The eight-benchmark grid: one network, recognition nets trained at each
//! p+, and every method evaluated on benchmarks over p+ × p-.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use bn2o::aisbn::AisbnConfig;
use bn2o::io::{self, AnyModel, MarginalRecord, TrainingEcho};
use bn2o::netgen::{self, NetGenConfig};
use bn2o::recog::{RecognitionModel, TrainerConfig};
use bn2o::rng::{derive_seed, stream};
use bn2o::sampler::gen_benchmark;
use bn2o::{Network, ObservationModel};
use rayon::prelude::*;
use serde::Serialize;

use crate::commands::{evaluate, fit, infer_set, print_stdout, CliError, Method, Run};
use crate::{GridArgs, Scale};

pub const P_PLUS: [f64; 4] = [0.0, 0.5, 0.75, 0.9];
pub const P_MINUS: [f64; 2] = [0.5, 1.0];
/// Observation model of the general-purpose recognition nets.
const BASE_P_PLUS: f64 = 0.5;
const TRAIN_P_MINUS: f64 = 1.0;
const HIDDEN: usize = 20;
const INIT_SCALE: f64 = 0.01;
const LIST_LEN: usize = 100;
const JJ99_TOL: f64 = 1e-8;
const JJ99_MAX_ITERS: u64 = 1000;
/// Rank at which the summary reports the average curve.
const SUMMARY_RANK: usize = 10;

pub const METHODS: [&str; 7] = ["jj99", "aisbn", "lr", "mlp", "lr_matched", "lr_p0", "prior"];

#[derive(Debug, Clone, Serialize)]
pub struct Plan {
    pub scale: Scale,
    pub seed: u64,
    pub network: NetGenConfig,
    pub cases: usize,
    pub diseases: usize,
    pub train_samples: usize,
    pub hidden: usize,
    pub aisbn_phase1: usize,
    pub aisbn_phase2: usize,
    pub list_len: usize,
    pub cells: Vec<(f64, f64)>,
    pub methods: Vec<&'static str>,
}

impl Plan {
    pub fn new(args: &GridArgs) -> Self {
        let (network, cases, train_samples) = match args.scale {
            Scale::Desk => (NetGenConfig::desk(), 100, 100_000),
            Scale::Paper => (NetGenConfig::default(), 1000, 10_000_000),
        };
        let cells = if args.cells.is_empty() {
            P_PLUS.iter().flat_map(|&pp| P_MINUS.iter().map(move |&pm| (pp, pm))).collect()
        } else {
            args.cells.clone()
        };
        let aisbn = AisbnConfig::default();
        Self {
            scale: args.scale,
            seed: args.seed,
            network: network.with_seed(args.seed),
            cases: args.cases.unwrap_or(cases),
            diseases: 5,
            train_samples: args.train_samples.unwrap_or(train_samples),
            hidden: HIDDEN,
            aisbn_phase1: args.phase1.unwrap_or(aisbn.phase1_samples),
            aisbn_phase2: args.phase2.unwrap_or(aisbn.phase2_samples),
            list_len: LIST_LEN,
            cells,
            methods: METHODS.to_vec(),
        }
    }

    /// p+ values that need their own LR model.
    fn train_p_plus(&self) -> Vec<f64> {
        let mut v = vec![0.0, BASE_P_PLUS];
        v.extend(self.cells.iter().map(|c| c.0));
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }
}

fn cell_name((pp, pm): (f64, f64)) -> String {
    format!("pp{pp}_pm{pm}")
}

fn lr_name(pp: f64) -> String {
    format!("lr_pp{pp}")
}

struct Progress(Instant);

impl Progress {
    fn note(&self, msg: &str) {
        eprintln!("[{:>8.1}s] {msg}", self.0.elapsed().as_secs_f64());
    }
}

pub fn run(args: &GridArgs) -> Result<(), CliError> {
    let plan = Plan::new(args);
    if matches!(plan.scale, Scale::Paper) && !args.confirm_long {
        let echo = serde_json::to_string_pretty(&plan).expect("plan serializes");
        print_stdout(&format!("{echo}\n"));
        eprintln!("paper scale takes many CPU-hours; pass --confirm-long to run it");
        return Ok(());
    }
    let progress = Progress(Instant::now());
    let dir = &args.out_dir;
    std::fs::create_dir_all(dir.join("models")).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
    let mut run = Run::new("bias-grid", Some(plan.seed), &plan);

    let net: Network = netgen::generate(&plan.network)?;
    let net_json = io::network_to_json(&net);
    let net_hash = io::sha256_hex(net_json.as_bytes());
    run.write(&dir.join("net.json"), net_json.as_bytes())?;
    progress.note(&format!("network K={} I={}", net.num_diseases(), net.num_findings()));

    let models = train_models(&net, &plan, &net_hash, dir, &mut run)?;
    progress.note("recognition nets trained");

    let mut summary = Vec::new();
    for (index, &cell) in plan.cells.iter().enumerate() {
        let values = run_cell(&net, &plan, index as u64, cell, &models, dir, &mut run)?;
        progress.note(&format!("cell {} done", cell_name(cell)));
        summary.push(CellSummary {
            p_plus: cell.0,
            p_minus: cell.1,
            rank: SUMMARY_RANK,
            mean_cumulative_ratio: values,
        });
    }
    let mut text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    text.push('\n');
    run.write(&dir.join("summary.json"), text.as_bytes())?;
    print_stdout(&text);
    run.finish()
}

#[derive(Serialize)]
struct CellSummary {
    p_plus: f64,
    p_minus: f64,
    rank: usize,
    mean_cumulative_ratio: BTreeMap<String, f64>,
}

struct Models {
    /// LR model per training p+, keyed by its bit pattern.
    lr: BTreeMap<u64, AnyModel>,
    mlp: AnyModel,
}

impl Models {
    fn lr(&self, pp: f64) -> &AnyModel {
        &self.lr[&pp.to_bits()]
    }
}

fn train_models(net: &Network, plan: &Plan, net_hash: &str, dir: &Path, run: &mut Run) -> Result<Models, CliError> {
    let config = |pp: f64, tag: u64| TrainerConfig {
        samples: plan.train_samples,
        p_plus: pp,
        p_minus: TRAIN_P_MINUS,
        seed: derive_seed(plan.seed, stream::TRAINING, tag),
        ..TrainerConfig::default()
    };
    let targets = plan.train_p_plus();
    let trained = targets
        .par_iter()
        .enumerate()
        .map(|(n, &pp)| {
            let cfg = config(pp, n as u64);
            let (model, report) = fit(net, &cfg, None, 0, 0.0)?;
            Ok((pp, model, TrainingEcho::new(cfg, &report, net_hash)))
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let mut lr = BTreeMap::new();
    let mut base: Option<(RecognitionModel<f64>, String)> = None;
    for (pp, model, echo) in trained {
        let text = io::model_to_json(&model, Some(&echo));
        run.write(&model_path(dir, &lr_name(pp)), text.as_bytes())?;
        if pp == BASE_P_PLUS {
            base = Some((model.clone(), io::sha256_hex(text.as_bytes())));
        }
        lr.insert(pp.to_bits(), AnyModel::F64(model));
    }
    let (base, base_hash) = base.expect("base p+ is always trained");
    let cfg = config(BASE_P_PLUS, targets.len() as u64);
    let (mlp, report) = fit(net, &cfg, Some(&base), plan.hidden, INIT_SCALE)?;
    let mut echo = TrainingEcho::new(cfg, &report, net_hash);
    echo.init_from = Some(base_hash);
    run.write(&model_path(dir, "mlp"), io::model_to_json(&mlp, Some(&echo)).as_bytes())?;
    Ok(Models { lr, mlp: AnyModel::F64(mlp) })
}

fn model_path(dir: &Path, name: &str) -> PathBuf {
    dir.join("models").join(format!("{name}.json"))
}

fn run_cell(
    net: &Network,
    plan: &Plan,
    index: u64,
    cell: (f64, f64),
    models: &Models,
    dir: &Path,
    run: &mut Run,
) -> Result<BTreeMap<String, f64>, CliError> {
    let name = cell_name(cell);
    let cell_dir = dir.join(&name);
    std::fs::create_dir_all(&cell_dir).map_err(|e| CliError::Data(format!("{}: {e}", cell_dir.display())))?;
    let obs = ObservationModel::new(cell.0, cell.1)?;
    let set = gen_benchmark(
        net,
        &obs,
        plan.cases,
        plan.diseases,
        derive_seed(plan.seed, stream::BENCHMARK, index),
        "",
    )?;
    run.write(&cell_dir.join("bench.jsonl"), io::bench_to_jsonl(&set).as_bytes())?;

    let aisbn = AisbnConfig {
        phase1_samples: plan.aisbn_phase1,
        phase2_samples: plan.aisbn_phase2,
        seed: derive_seed(plan.seed, stream::AISBN_ESTIMATE, index),
        ..AisbnConfig::default()
    };
    let mut outputs: Vec<(String, Vec<MarginalRecord>)> = Vec::new();
    for &method in METHODS.iter() {
        let m = match method {
            "jj99" => Method::Jj99 { tol: JJ99_TOL, max_iters: JJ99_MAX_ITERS },
            "aisbn" => Method::Aisbn(aisbn.clone()),
            "lr" => Method::Model(models.lr(BASE_P_PLUS)),
            "mlp" => Method::Model(&models.mlp),
            "lr_matched" => Method::Model(models.lr(cell.0)),
            "lr_p0" => Method::Model(models.lr(0.0)),
            _ => Method::Prior,
        };
        let records = infer_set(net, &set, &m, method)?;
        run.write(&cell_dir.join(format!("{method}.jsonl")), io::marginals_to_jsonl(&records).as_bytes())?;
        outputs.push((method.to_string(), records));
    }

    let (table, cases) = evaluate(net, &set, &outputs, plan.list_len)?;
    let csv = dir.join(format!("curves_{name}.csv"));
    run.write(&csv, io::curves_to_csv(&table)?.as_bytes())?;
    run.write(&crate::commands::per_case_path(&csv), io::case_summaries_to_jsonl(&cases).as_bytes())?;
    let rank = SUMMARY_RANK.min(table.ranks());
    Ok(METHODS
        .iter()
        .filter_map(|m| table.value(m, rank).map(|v| (m.to_string(), v)))
        .collect())
}
