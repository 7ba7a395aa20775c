//! Commands behind the `flexdiff` binary. Each command reads its inputs,
//! writes its outputs into one run directory and returns the in-memory result.
//!
//! Every run directory holds `config.json` (the effective settings), the
//! result files and `log.txt`. Nothing in those files depends on wall time, so
//! reruns with the same inputs and seed are byte-identical.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use flexdiff_core::homophily::{metrics, HomophilyReport};
use flexdiff_core::rewire::{rewire, RewireReport};
use flexdiff_core::spectral::{eig_sym, SolverMode};
use flexdiff_core::stats::{mean_std, spearman};
use flexdiff_core::synth::{generate_with_log, Dataset, SynthConfig};
use flexdiff_core::verify::{default_gamma_grid, verify_all, VerifyOptions, VerifyReport};
use flexdiff_core::{EdgeFeatureTable, Error, Graph, LaplacianParams, Result};
use flexdiff_nn::{train, Arch, ModelConfig, TrainReport};

/// Flags shared by every command.
#[derive(Debug, Clone)]
pub struct Globals {
    /// Overrides the seed in config files.
    pub seed: Option<u64>,
    pub out_dir: PathBuf,
    /// Worker threads for the sweep; `None` uses every core.
    pub threads: Option<usize>,
}

impl Globals {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        Globals {
            seed: None,
            out_dir: out_dir.into(),
            threads: None,
        }
    }
}

struct RunDir {
    path: PathBuf,
    log: String,
}

impl RunDir {
    fn create(path: &Path) -> Result<Self> {
        fs::create_dir_all(path).map_err(|e| Error::io(path, e))?;
        Ok(RunDir {
            path: path.to_path_buf(),
            log: String::new(),
        })
    }

    fn write(&self, name: &str, body: impl AsRef<[u8]>) -> Result<()> {
        let p = self.path.join(name);
        fs::write(&p, body).map_err(|e| Error::io(p, e))
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::data(e.to_string()))?;
        text.push('\n');
        self.write(name, text)
    }

    fn log(&mut self, line: impl AsRef<str>) {
        self.log.push_str(line.as_ref());
        self.log.push('\n');
    }

    fn finish(self) -> Result<()> {
        self.write("log.txt", &self.log)
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn read_graph(path: &Path) -> Result<Graph> {
    Graph::parse_edge_list(&read_text(path)?)
}

/// Parses a JSON config. A missing required field is a usage error; any
/// other malformed content is a data error.
pub fn parse_config<T: DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| {
        let msg = e.to_string();
        if msg.starts_with("missing field") {
            Error::usage(msg)
        } else {
            Error::data(msg)
        }
    })
}

fn as_data_error(e: Error) -> Error {
    match e {
        Error::Param(msg) => Error::Data(msg),
        other => other,
    }
}

/// Generates a synthetic dataset bundle into the run directory.
pub fn cmd_gen(config: &Path, globals: &Globals) -> Result<Dataset> {
    let mut cfg: SynthConfig = parse_config(&read_text(config)?)?;
    if let Some(seed) = globals.seed {
        cfg.seed = seed;
    }
    cfg.validate().map_err(as_data_error)?;
    let (data, lines) = generate_with_log(&cfg)?;
    let mut run = RunDir::create(&globals.out_dir)?;
    run.json("config.json", &cfg)?;
    data.write_bundle(&globals.out_dir)?;
    run.log(format!("nodes {} edges {}", data.graph.node_count(), data.graph.edge_count()));
    for l in lines {
        run.log(l);
    }
    run.finish()?;
    Ok(data)
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralOptions {
    pub alpha: f64,
    pub gamma: f64,
    /// Number of non-trivial pairs for the iterative solver.
    pub k: Option<usize>,
    pub mode: SolverMode,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralSummary {
    pub nodes: usize,
    pub edges: usize,
    pub options: SpectralOptions,
    pub eigenvalues: Vec<f64>,
    pub degenerate: bool,
}

/// Eigenpairs of `L(alpha, gamma)` and the edge features from the first
/// non-trivial eigenvector.
///
/// Writes `eigenvalues.csv` (`index,lambda`), `eigenvectors.csv`
/// (`node,phi_0,..`), `edge_features.csv` and `spectral.json`.
pub fn cmd_spectral(graph: &Path, opts: &SpectralOptions, globals: &Globals) -> Result<SpectralSummary> {
    let g = read_graph(graph)?;
    let p = LaplacianParams::new(opts.alpha, opts.gamma)?;
    let k = match opts.mode {
        SolverMode::Dense => 0,
        SolverMode::Iterative => opts
            .k
            .ok_or_else(|| Error::usage("the iterative solver needs --k"))?,
    };
    let dec = eig_sym::<f64>(&g, opts.gamma, k, opts.mode)?;
    let view = dec.eigvec_view(opts.alpha)?;
    let mut run = RunDir::create(&globals.out_dir)?;
    run.json("config.json", opts)?;

    let mut values = String::from("index,lambda\n");
    for (i, l) in view.eigenvalues().iter().enumerate() {
        writeln!(values, "{i},{l}").expect("string write");
    }
    run.write("eigenvalues.csv", values)?;
    let vecs = view.vectors();
    let mut vec_csv = String::from("node");
    for c in 0..vecs.cols() {
        write!(vec_csv, ",phi_{c}").expect("string write");
    }
    vec_csv.push('\n');
    for i in 0..vecs.rows() {
        let row: Vec<String> = vecs.row(i).iter().map(|v| v.to_string()).collect();
        writeln!(vec_csv, "{i},{}", row.join(",")).expect("string write");
    }
    run.write("eigenvectors.csv", vec_csv)?;
    let table = EdgeFeatureTable::from_field(&g, &view.fiedler()?, p)?;
    run.write("edge_features.csv", table.to_csv())?;

    let summary = SpectralSummary {
        nodes: g.node_count(),
        edges: g.edge_count(),
        options: opts.clone(),
        eigenvalues: view.eigenvalues().to_vec(),
        degenerate: view.is_degenerate(),
    };
    run.json("spectral.json", &summary)?;
    if summary.degenerate {
        run.log("warning: first non-trivial eigenvalue is repeated; eigenvector choice is arbitrary");
    }
    run.finish()?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct DistanceOptions {
    pub alpha: f64,
    pub gamma: f64,
    pub pairs: Vec<(usize, usize)>,
    pub times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceRow {
    pub i: usize,
    pub j: usize,
    pub spectral: f64,
    pub degenerate: bool,
    /// Diffusion distance at each requested time.
    pub diffusion: Vec<f64>,
}

/// Diffusion and spectral distances for node pairs, from the full dense
/// decomposition. Writes `distances.csv` and `distances.json`.
pub fn cmd_distances(graph: &Path, opts: &DistanceOptions, globals: &Globals) -> Result<Vec<DistanceRow>> {
    let g = read_graph(graph)?;
    let p = LaplacianParams::new(opts.alpha, opts.gamma)?;
    let n = g.node_count();
    if let Some(&(i, j)) = opts.pairs.iter().find(|&&(i, j)| i >= n || j >= n) {
        return Err(Error::usage(format!("pair ({i}, {j}) outside a graph with {n} nodes")));
    }
    let dec = eig_sym::<f64>(&g, p.gamma(), 0, SolverMode::Dense)?;
    let view = dec.eigvec_view(p.alpha())?;
    let mut rows = Vec::with_capacity(opts.pairs.len());
    for &(i, j) in &opts.pairs {
        let s = view.spectral_distance(i, j)?;
        let diffusion = opts
            .times
            .iter()
            .map(|&t| view.diffusion_distance(i, j, t))
            .collect::<Result<Vec<_>>>()?;
        rows.push(DistanceRow {
            i,
            j,
            spectral: s.value,
            degenerate: s.degenerate,
            diffusion,
        });
    }
    let mut run = RunDir::create(&globals.out_dir)?;
    run.json("config.json", opts)?;
    let mut csv = String::from("i,j,kind,t,value\n");
    for r in &rows {
        writeln!(csv, "{},{},spectral,,{}", r.i, r.j, r.spectral).expect("string write");
        for (t, d) in opts.times.iter().zip(&r.diffusion) {
            writeln!(csv, "{},{},diffusion,{t},{d}", r.i, r.j).expect("string write");
        }
    }
    run.write("distances.csv", csv)?;
    run.json("distances.json", &rows)?;
    if view.is_degenerate() {
        run.log("warning: first non-trivial eigenvalue is repeated; spectral distances are basis dependent");
    }
    run.finish()?;
    Ok(rows)
}

#[derive(Debug, Clone, Serialize)]
struct VerifyEcho<'a> {
    graph: &'a Path,
    alphas: &'a [f64],
    gammas: &'a [f64],
    triples: usize,
    seed: u64,
}

/// Runs the entry, monotonicity and order-preservation checks. Writes
/// `verify.json`; the caller decides the exit code from `pass`.
pub fn cmd_verify(graph: &Path, opts: &VerifyOptions, globals: &Globals) -> Result<VerifyReport> {
    let g = read_graph(graph)?;
    let seed = globals.seed.unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let report = verify_all(&g, opts, &mut rng)?;
    let mut run = RunDir::create(&globals.out_dir)?;
    run.json(
        "config.json",
        &VerifyEcho {
            graph,
            alphas: &opts.alphas,
            gammas: &opts.gammas,
            triples: opts.triples,
            seed,
        },
    )?;
    run.json("verify.json", &report)?;
    run.log(format!(
        "entries {} monotonicity {} order {}",
        verdict(report.entries.pass),
        verdict(report.monotonicity.pass),
        verdict(report.order.iter().all(|o| o.pass))
    ));
    run.finish()?;
    Ok(report)
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}

/// Homophily metrics of a dataset bundle. Writes `metrics.json`.
pub fn cmd_metrics(dataset: &Path, globals: &Globals) -> Result<HomophilyReport> {
    let data = Dataset::read_bundle(dataset)?;
    let report = metrics(&data.graph, &data.labels, data.num_classes)?;
    let mut run = RunDir::create(&globals.out_dir)?;
    run.json("config.json", &serde_json::json!({ "dataset": dataset }))?;
    run.json("metrics.json", &report)?;
    if report.flags.isolated_nodes > 0 {
        run.log(format!("{} isolated nodes skipped in h_node", report.flags.isolated_nodes));
    }
    if report.flags.degenerate_class_distribution {
        run.log("degenerate class distribution; h_adj and LI are undefined");
    }
    run.finish()?;
    Ok(report)
}

/// Rewires a graph. Writes `rewired.edges` and `rewire.json`.
pub fn cmd_rewire(graph: &Path, p: LaplacianParams, globals: &Globals) -> Result<(Graph, RewireReport)> {
    let g = read_graph(graph)?;
    let (out, report) = rewire(&g, p)?;
    let mut run = RunDir::create(&globals.out_dir)?;
    run.json("config.json", &serde_json::json!({ "graph": graph, "params": p }))?;
    run.write("rewired.edges", out.to_edge_list())?;
    run.json("rewire.json", &report)?;
    run.log(format!(
        "gradient node {}, {} edges added",
        report.gradient_node,
        report.added_edges.len()
    ));
    run.finish()?;
    Ok((out, report))
}

/// A single training run on a bundle on disk or on freshly generated data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default)]
    pub dataset: Option<PathBuf>,
    #[serde(default)]
    pub synth: Option<SynthConfig>,
    pub model: ModelConfig,
}

/// Trains one model. Writes `report.json`, `curves.csv` and, when the
/// config asks for rewiring, `rewire.json`.
pub fn cmd_train(config: &Path, globals: &Globals) -> Result<TrainReport> {
    let mut cfg: TrainConfig = parse_config(&read_text(config)?)?;
    if let Some(seed) = globals.seed {
        cfg.model.seed = seed;
        if let Some(s) = cfg.synth.as_mut() {
            s.seed = seed;
        }
    }
    cfg.model.validate().map_err(as_data_error)?;
    let data = match (&cfg.dataset, &cfg.synth) {
        (Some(dir), None) => Dataset::read_bundle(dir)?,
        (None, Some(s)) => {
            s.validate().map_err(as_data_error)?;
            generate_with_log(s)?.0
        }
        _ => return Err(Error::usage("exactly one of dataset and synth must be given")),
    };
    let (model, report) = train(&cfg.model, &data)?;
    let mut run = RunDir::create(&globals.out_dir)?;
    run.json("config.json", &cfg)?;
    run.json("report.json", &report)?;
    run.write("curves.csv", report.curves_csv())?;
    if let Some(r) = model.rewire_report() {
        run.json("rewire.json", r)?;
    }
    run.log(format!(
        "best epoch {} val {} test {}",
        report.best_epoch, report.best_val, report.test_at_best
    ));
    run.finish()?;
    Ok(report)
}

/// Grid experiment: PD-GCN (or any configured architecture) over a
/// `mu x gamma x seed` grid, plus baselines trained once per `(mu, seed)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepProtocol {
    #[serde(default = "sweep_defaults::n")]
    pub n: usize,
    #[serde(default = "sweep_defaults::c")]
    pub c: usize,
    #[serde(default = "sweep_defaults::m")]
    pub m: usize,
    #[serde(default = "sweep_defaults::feature_dim")]
    pub feature_dim: usize,
    #[serde(default = "sweep_defaults::mus")]
    pub mus: Vec<f64>,
    #[serde(default = "default_gamma_grid")]
    pub gammas: Vec<f64>,
    #[serde(default = "sweep_defaults::alpha")]
    pub alpha: f64,
    /// Seeds `seed, seed + 1, ..` drive both data generation and training.
    #[serde(default = "sweep_defaults::seeds")]
    pub seeds: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "sweep_defaults::model")]
    pub model: ModelConfig,
    #[serde(default = "sweep_defaults::baselines")]
    pub baselines: Vec<Arch>,
}

mod sweep_defaults {
    use super::*;

    pub fn n() -> usize {
        600
    }
    pub fn c() -> usize {
        5
    }
    pub fn m() -> usize {
        2
    }
    pub fn feature_dim() -> usize {
        2
    }
    pub fn mus() -> Vec<f64> {
        vec![0.1, 0.3, 0.5, 0.7, 0.9]
    }
    pub fn alpha() -> f64 {
        1.0
    }
    pub fn seeds() -> usize {
        3
    }
    pub fn model() -> ModelConfig {
        ModelConfig::new(Arch::PdGcn)
    }
    pub fn baselines() -> Vec<Arch> {
        vec![Arch::Gcn]
    }
}

impl Default for SweepProtocol {
    fn default() -> Self {
        parse_config("{}").expect("every protocol field has a default")
    }
}

impl SweepProtocol {
    pub fn validate(&self) -> Result<()> {
        if self.mus.is_empty() || self.gammas.is_empty() || self.seeds == 0 {
            return Err(Error::data("mus, gammas and seeds must be non-empty"));
        }
        for &mu in &self.mus {
            SynthConfig {
                mu,
                ..self.synth_config(mu, self.seed)
            }
            .validate()
            .map_err(as_data_error)?;
        }
        for &g in &self.gammas {
            LaplacianParams::new(self.alpha, g).map_err(as_data_error)?;
        }
        self.model.validate().map_err(as_data_error)
    }

    fn synth_config(&self, mu: f64, seed: u64) -> SynthConfig {
        SynthConfig {
            n: self.n,
            c: self.c,
            mu,
            m: self.m,
            feature_dim: self.feature_dim,
            seed,
        }
    }

    pub fn seed_list(&self) -> Vec<u64> {
        (0..self.seeds as u64).map(|k| self.seed + k).collect()
    }
}

/// One trained cell. `gamma` is `None` for baselines.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub mu: f64,
    pub gamma: Option<f64>,
    pub arch: Arch,
    pub seed: u64,
    /// Test metric at the best validation epoch; NaN when the cell failed.
    pub test_metric: f64,
    pub best_epoch: Option<usize>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub mu: f64,
    pub gamma: Option<f64>,
    pub arch: Arch,
    pub mean: f64,
    pub std: f64,
    pub completed: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimalGamma {
    pub mu: f64,
    pub gamma: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaTrend {
    pub gamma: f64,
    /// Spearman correlation between `mu` and the mean metric at this gamma.
    pub spearman: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub protocol: SweepProtocol,
    /// Grid order: `mu`, then gamma, then seed; baselines after the grid.
    pub rows: Vec<SweepRow>,
    pub cells: Vec<CellSummary>,
    pub baselines: Vec<CellSummary>,
    /// Argmax of the mean per `mu`, smaller gamma on ties.
    pub optimal_gamma: Vec<OptimalGamma>,
    pub spearman_mu_optimal_gamma: f64,
    pub gamma_trends: Vec<GammaTrend>,
    pub failed_cells: usize,
}

impl SweepResult {
    pub fn cell(&self, mu: f64, gamma: f64) -> Option<&CellSummary> {
        self.cells.iter().find(|c| c.mu == mu && c.gamma == Some(gamma))
    }

    pub fn baseline(&self, mu: f64, arch: Arch) -> Option<&CellSummary> {
        self.baselines.iter().find(|c| c.mu == mu && c.arch == arch)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("mu,gamma,arch,seed,test_metric,best_epoch,status\n");
        for r in &self.rows {
            let arch = serde_json::to_value(r.arch).expect("arch serializes");
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.mu,
                r.gamma.map(|g| g.to_string()).unwrap_or_default(),
                arch.as_str().unwrap_or_default(),
                r.seed,
                r.test_metric,
                r.best_epoch.map(|e| e.to_string()).unwrap_or_default(),
                if r.error.is_some() { "failed" } else { "ok" }
            )
            .expect("string write");
        }
        out
    }
}

fn summarize(rows: &[&SweepRow]) -> (f64, f64, usize, usize) {
    let ok: Vec<f64> = rows.iter().filter(|r| r.error.is_none()).map(|r| r.test_metric).collect();
    let failed = rows.len() - ok.len();
    if ok.is_empty() {
        return (f64::NAN, f64::NAN, 0, failed);
    }
    let (mean, std) = mean_std(&ok);
    (mean, std, ok.len(), failed)
}

#[derive(Debug, Clone, Copy)]
struct Job {
    mu_idx: usize,
    seed_idx: usize,
    gamma: Option<f64>,
    arch: Arch,
}

/// Runs the sweep on a worker pool. Cells are assembled in grid order, so the
/// output does not depend on scheduling. Writes `sweep.csv` and `summary.json`.
pub fn cmd_sweep(config: Option<&Path>, globals: &Globals) -> Result<SweepResult> {
    let mut protocol: SweepProtocol = match config {
        Some(p) => parse_config(&read_text(p)?)?,
        None => SweepProtocol::default(),
    };
    if let Some(seed) = globals.seed {
        protocol.seed = seed;
    }
    let result = run_sweep(&protocol, globals.threads)?;
    let mut run = RunDir::create(&globals.out_dir)?;
    run.json("config.json", &protocol)?;
    run.write("sweep.csv", result.to_csv())?;
    run.json("summary.json", &result)?;
    for r in result.rows.iter().filter(|r| r.error.is_some()) {
        run.log(format!(
            "failed: mu {} gamma {:?} seed {}: {}",
            r.mu,
            r.gamma,
            r.seed,
            r.error.as_deref().unwrap_or_default()
        ));
    }
    for o in &result.optimal_gamma {
        run.log(format!("mu {} optimal gamma {} mean {}", o.mu, o.gamma, o.mean));
    }
    run.finish()?;
    Ok(result)
}

/// The sweep without any file output.
pub fn run_sweep(protocol: &SweepProtocol, threads: Option<usize>) -> Result<SweepResult> {
    protocol.validate()?;
    let seeds = protocol.seed_list();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::usage(format!("thread pool: {e}")))?;

    let mut jobs = Vec::new();
    for mu_idx in 0..protocol.mus.len() {
        for &gamma in &protocol.gammas {
            for seed_idx in 0..seeds.len() {
                jobs.push(Job {
                    mu_idx,
                    seed_idx,
                    gamma: Some(gamma),
                    arch: protocol.model.arch,
                });
            }
        }
    }
    for mu_idx in 0..protocol.mus.len() {
        for &arch in &protocol.baselines {
            for seed_idx in 0..seeds.len() {
                jobs.push(Job {
                    mu_idx,
                    seed_idx,
                    gamma: None,
                    arch,
                });
            }
        }
    }

    let (datasets, rows) = pool.install(|| {
        let data_jobs: Vec<(usize, usize)> = (0..protocol.mus.len())
            .flat_map(|m| (0..seeds.len()).map(move |s| (m, s)))
            .collect();
        let datasets: Vec<Result<Dataset>> = data_jobs
            .par_iter()
            .map(|&(m, s)| Ok(generate_with_log(&protocol.synth_config(protocol.mus[m], seeds[s]))?.0))
            .collect();
        let rows: Vec<SweepRow> = jobs
            .par_iter()
            .map(|job| {
                let data = &datasets[job.mu_idx * seeds.len() + job.seed_idx];
                let mut cfg = ModelConfig {
                    arch: job.arch,
                    seed: seeds[job.seed_idx],
                    ..protocol.model.clone()
                };
                if let Some(g) = job.gamma {
                    cfg.params = LaplacianParams::new(protocol.alpha, g).expect("validated grid");
                }
                let outcome = match data {
                    Ok(d) => train(&cfg, d).map(|(_, r)| r),
                    Err(e) => Err(Error::data(format!("dataset generation failed: {e}"))),
                };
                let (test_metric, best_epoch, error) = match outcome {
                    Ok(r) => (r.test_at_best, Some(r.best_epoch), None),
                    Err(e) => (f64::NAN, None, Some(e.to_string())),
                };
                SweepRow {
                    mu: protocol.mus[job.mu_idx],
                    gamma: job.gamma,
                    arch: job.arch,
                    seed: seeds[job.seed_idx],
                    test_metric,
                    best_epoch,
                    error,
                }
            })
            .collect();
        (datasets, rows)
    });
    drop(datasets);

    let per_cell = seeds.len();
    let grid_len = protocol.mus.len() * protocol.gammas.len() * per_cell;
    let (grid_rows, base_rows) = rows.split_at(grid_len);
    let cells: Vec<CellSummary> = grid_rows
        .chunks(per_cell)
        .map(|chunk| {
            let refs: Vec<&SweepRow> = chunk.iter().collect();
            let (mean, std, completed, failed) = summarize(&refs);
            CellSummary {
                mu: chunk[0].mu,
                gamma: chunk[0].gamma,
                arch: chunk[0].arch,
                mean,
                std,
                completed,
                failed,
            }
        })
        .collect();
    let baselines: Vec<CellSummary> = base_rows
        .chunks(per_cell)
        .map(|chunk| {
            let refs: Vec<&SweepRow> = chunk.iter().collect();
            let (mean, std, completed, failed) = summarize(&refs);
            CellSummary {
                mu: chunk[0].mu,
                gamma: None,
                arch: chunk[0].arch,
                mean,
                std,
                completed,
                failed,
            }
        })
        .collect();

    let mut optimal_gamma = Vec::with_capacity(protocol.mus.len());
    for (m, &mu) in protocol.mus.iter().enumerate() {
        let row = &cells[m * protocol.gammas.len()..(m + 1) * protocol.gammas.len()];
        let mut best: Option<&CellSummary> = None;
        for c in row.iter().filter(|c| c.mean.is_finite()) {
            let better = match best {
                None => true,
                Some(b) => c.mean > b.mean || (c.mean == b.mean && c.gamma < b.gamma),
            };
            if better {
                best = Some(c);
            }
        }
        if let Some(b) = best {
            optimal_gamma.push(OptimalGamma {
                mu,
                gamma: b.gamma.expect("grid cell"),
                mean: b.mean,
            });
        }
    }
    let spearman_mu_optimal_gamma = spearman(
        &optimal_gamma.iter().map(|o| o.mu).collect::<Vec<_>>(),
        &optimal_gamma.iter().map(|o| o.gamma).collect::<Vec<_>>(),
    );
    let gamma_trends = protocol
        .gammas
        .iter()
        .enumerate()
        .map(|(k, &gamma)| {
            let means: Vec<f64> = (0..protocol.mus.len())
                .map(|m| cells[m * protocol.gammas.len() + k].mean)
                .collect();
            GammaTrend {
                gamma,
                spearman: spearman(&protocol.mus, &means),
            }
        })
        .collect();
    let failed_cells = rows.iter().filter(|r| r.error.is_some()).count();
    Ok(SweepResult {
        protocol: protocol.clone(),
        rows,
        cells,
        baselines,
        optimal_gamma,
        spearman_mu_optimal_gamma,
        gamma_trends,
        failed_cells,
    })
}
