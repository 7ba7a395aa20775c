//! Synthetic homophily graphs by class-aware preferential attachment, with
//! class-conditional Gaussian features and random 60/20/20 splits.
//!
//! Random streams derived from `seed`: 0 drives the graph and labels,
//! 1 the features, 2 the splits.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::graph::Graph;

const GRAPH_STREAM: u64 = 0;
const FEATURE_STREAM: u64 = 1;
const SPLIT_STREAM: u64 = 2;

pub const TRAIN_FRACTION: f64 = 0.6;
pub const VAL_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n: usize,
    pub c: usize,
    pub mu: f64,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_feature_dim")]
    pub feature_dim: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_m() -> usize {
    2
}

fn default_feature_dim() -> usize {
    2
}

impl SynthConfig {
    pub fn new(n: usize, c: usize, mu: f64, seed: u64) -> Self {
        SynthConfig {
            n,
            c,
            mu,
            m: default_m(),
            feature_dim: default_feature_dim(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.c < 2 {
            return Err(Error::param(format!("need at least 2 classes, got {}", self.c)));
        }
        if self.m == 0 {
            return Err(Error::param("m must be positive"));
        }
        if self.n < self.m + 1 {
            return Err(Error::param(format!("n = {} must be at least m + 1 = {}", self.n, self.m + 1)));
        }
        if !(0.0..=1.0).contains(&self.mu) {
            return Err(Error::param(format!("mu = {} outside [0, 1]", self.mu)));
        }
        if self.feature_dim == 0 {
            return Err(Error::param("feature_dim must be positive"));
        }
        Ok(())
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Circular distance between two distinct classes.
pub fn class_distance(c: usize, z1: usize, z2: usize) -> Result<usize> {
    if z1 >= c || z2 >= c {
        return Err(Error::usage(format!("classes must lie in [0, {c})")));
    }
    if z1 == z2 {
        return Err(Error::usage("class distance is only defined for distinct classes"));
    }
    let d = z1.abs_diff(z2);
    Ok(d.min(c - d))
}

/// Inter-class weights `w_d` for `d = 1..=c/2`, proportional to `exp(-d)` and
/// summing to one. Index 0 is unused.
pub fn distance_weights(c: usize) -> Vec<f64> {
    let dmax = c / 2;
    let raw: Vec<f64> = (0..=dmax)
        .map(|d| if d == 0 { 0.0 } else { (-(d as f64)).exp() })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Splits {
    /// Uniformly random split with `round(0.6 n)` train and `round(0.2 n)`
    /// validation nodes; the rest is test. Index lists are sorted.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Splits {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(rng);
        let n_train = (TRAIN_FRACTION * n as f64).round() as usize;
        let n_val = ((VAL_FRACTION * n as f64).round() as usize).min(n - n_train);
        let mut train = perm[..n_train].to_vec();
        let mut val = perm[n_train..n_train + n_val].to_vec();
        let mut test = perm[n_train + n_val..].to_vec();
        train.sort_unstable();
        val.sort_unstable();
        test.sort_unstable();
        Splits { train, val, test }
    }

    /// Checks the three sets are disjoint and cover `0..n`.
    pub fn validate(&self, n: usize) -> Result<()> {
        let mut seen = vec![false; n];
        for &i in self.train.iter().chain(&self.val).chain(&self.test) {
            if i >= n {
                return Err(Error::data(format!("split index {i} out of range")));
            }
            if seen[i] {
                return Err(Error::data(format!("node {i} appears in more than one split")));
            }
            seen[i] = true;
        }
        if let Some(i) = seen.iter().position(|&s| !s) {
            return Err(Error::data(format!("node {i} belongs to no split")));
        }
        Ok(())
    }

    pub fn mask(indices: &[usize], n: usize) -> Vec<bool> {
        let mut m = vec![false; n];
        for &i in indices {
            m[i] = true;
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub graph: Graph,
    pub features: DenseMatrix<f64>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
    pub splits: Splits,
    /// Generator settings, when the dataset is synthetic.
    pub config: Option<SynthConfig>,
}

impl Dataset {
    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn train_mask(&self) -> Vec<bool> {
        Splits::mask(&self.splits.train, self.node_count())
    }

    pub fn val_mask(&self) -> Vec<bool> {
        Splits::mask(&self.splits.val, self.node_count())
    }

    pub fn test_mask(&self) -> Vec<bool> {
        Splits::mask(&self.splits.test, self.node_count())
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.labels.len();
        if self.graph.node_count() != n || self.features.rows() != n {
            return Err(Error::data(format!(
                "size mismatch: {} labels, {} graph nodes, {} feature rows",
                n,
                self.graph.node_count(),
                self.features.rows()
            )));
        }
        if let Some(&bad) = self.labels.iter().find(|&&z| z >= self.num_classes) {
            return Err(Error::data(format!("label {bad} outside [0, {})", self.num_classes)));
        }
        self.splits.validate(n)
    }

    /// Writes `graph.edges`, `features.csv`, `labels.txt`, `splits.json` and,
    /// for synthetic data, `meta.json`.
    pub fn write_bundle(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let put = |name: &str, body: String| {
            let p = dir.join(name);
            fs::write(&p, body).map_err(|e| Error::io(p, e))
        };
        put("graph.edges", self.graph.to_edge_list())?;
        let mut feats = String::new();
        for i in 0..self.features.rows() {
            let row: Vec<String> = self.features.row(i).iter().map(|v| v.to_string()).collect();
            writeln!(feats, "{}", row.join(",")).expect("string write");
        }
        put("features.csv", feats)?;
        let mut labels = String::new();
        for z in &self.labels {
            writeln!(labels, "{z}").expect("string write");
        }
        put("labels.txt", labels)?;
        put("splits.json", to_json(&self.splits)?)?;
        let meta = Meta {
            num_classes: self.num_classes,
            config: self.config.clone(),
        };
        put("meta.json", to_json(&meta)?)?;
        Ok(())
    }

    pub fn read_bundle(dir: &Path) -> Result<Dataset> {
        let get = |name: &str| {
            let p = dir.join(name);
            fs::read_to_string(&p).map_err(|e| Error::io(p, e))
        };
        let labels: Vec<usize> = get("labels.txt")?
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(k, l)| {
                l.trim().parse().map_err(|_| Error::Parse {
                    line: k + 1,
                    msg: format!("labels.txt: bad label {l:?}"),
                })
            })
            .collect::<Result<_>>()?;
        let n = labels.len();
        let graph = Graph::parse_edge_list_with_nodes(&get("graph.edges")?, n)?;
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
        for (k, line) in get("features.csv")?.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse {
                    line: k + 1,
                    msg: format!("features.csv: {e}"),
                })?;
            rows.push(row);
        }
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::data("features.csv rows have unequal length"));
        }
        let features = DenseMatrix::from_fn(rows.len(), dim, |i, j| rows[i][j]);
        let splits: Splits = from_json(&get("splits.json")?, "splits.json")?;
        let meta: Meta = match get("meta.json") {
            Ok(text) => from_json(&text, "meta.json")?,
            Err(_) => Meta {
                num_classes: labels.iter().max().map_or(0, |&z| z + 1),
                config: None,
            },
        };
        let ds = Dataset {
            graph,
            features,
            labels,
            num_classes: meta.num_classes,
            splits,
            config: meta.config,
        };
        ds.validate()?;
        Ok(ds)
    }
}

#[derive(Serialize, Deserialize)]
struct Meta {
    num_classes: usize,
    config: Option<SynthConfig>,
}

fn to_json<S: Serialize>(v: &S) -> Result<String> {
    serde_json::to_string_pretty(v).map_err(|e| Error::data(e.to_string()))
}

fn from_json<D: for<'de> Deserialize<'de>>(text: &str, what: &str) -> Result<D> {
    serde_json::from_str(text).map_err(|e| Error::data(format!("{what}: {e}")))
}

/// Graph and labels from the growth process, plus log lines for nodes whose
/// attachment weights all vanished.
pub fn generate_graph(cfg: &SynthConfig) -> Result<(Graph, Vec<usize>, Vec<String>)> {
    cfg.validate()?;
    let mut rng = stream(cfg.seed, GRAPH_STREAM);
    let w = distance_weights(cfg.c);
    let seed_size = cfg.m + 1;
    let mut labels: Vec<usize> = Vec::with_capacity(cfg.n);
    let mut degree = vec![0usize; cfg.n];
    let mut edges = Vec::with_capacity(seed_size * cfg.m + (cfg.n - seed_size) * cfg.m);
    let mut log = Vec::new();

    for i in 0..seed_size {
        labels.push(rng.random_range(0..cfg.c));
        for j in 0..i {
            edges.push((j, i));
            degree[i] += 1;
            degree[j] += 1;
        }
    }

    let mut weights = Vec::with_capacity(cfg.n);
    for i in seed_size..cfg.n {
        let zi = rng.random_range(0..cfg.c);
        labels.push(zi);
        weights.clear();
        weights.extend((0..i).map(|j| {
            let d = degree[j] as f64;
            if labels[j] == zi {
                d * cfg.mu
            } else {
                let dist = class_distance(cfg.c, zi, labels[j]).expect("distinct classes");
                d * (1.0 - cfg.mu) * w[dist]
            }
        }));
        let mut chosen = Vec::with_capacity(cfg.m);
        for _ in 0..cfg.m {
            let total: f64 = weights.iter().sum();
            let j = if total > 0.0 {
                let mut u = rng.random::<f64>() * total;
                let mut pick = None;
                for (j, &wj) in weights.iter().enumerate() {
                    if wj > 0.0 {
                        pick = Some(j);
                        if u < wj {
                            break;
                        }
                        u -= wj;
                    }
                }
                pick.expect("positive mass")
            } else {
                let open: Vec<usize> = (0..i).filter(|j| !chosen.contains(j)).collect();
                log.push(format!(
                    "node {i} (class {zi}): attachment weights all zero, drawing uniformly"
                ));
                open[rng.random_range(0..open.len())]
            };
            weights[j] = 0.0;
            chosen.push(j);
        }
        for &j in &chosen {
            edges.push((j, i));
            degree[i] += 1;
            degree[j] += 1;
        }
    }
    let graph = Graph::from_edges(cfg.n, edges)?;
    Ok((graph, labels, log))
}

/// Class mean: `(cos 2 pi z / c, sin 2 pi z / c, 0, ...)` truncated to `dim`.
pub fn class_mean(z: usize, c: usize, dim: usize) -> Vec<f64> {
    let angle = std::f64::consts::TAU * z as f64 / c as f64;
    (0..dim)
        .map(|k| match k {
            0 => angle.cos(),
            1 => angle.sin(),
            _ => 0.0,
        })
        .collect()
}

/// Row `i` drawn from `N(class_mean(labels[i]), I)`.
pub fn sample_features(labels: &[usize], cfg: &SynthConfig) -> DenseMatrix<f64> {
    let mut rng = stream(cfg.seed, FEATURE_STREAM);
    let mut x = DenseMatrix::zeros(labels.len(), cfg.feature_dim);
    for (i, &z) in labels.iter().enumerate() {
        let mean = class_mean(z, cfg.c, cfg.feature_dim);
        for (k, mk) in mean.into_iter().enumerate() {
            let e: f64 = rng.sample(StandardNormal);
            x[(i, k)] = mk + e;
        }
    }
    x
}

/// Full dataset with its generation log.
pub fn generate_with_log(cfg: &SynthConfig) -> Result<(Dataset, Vec<String>)> {
    let (graph, labels, log) = generate_graph(cfg)?;
    let features = sample_features(&labels, cfg);
    let splits = Splits::random(cfg.n, &mut stream(cfg.seed, SPLIT_STREAM));
    Ok((
        Dataset {
            graph,
            features,
            labels,
            num_classes: cfg.c,
            splits,
            config: Some(cfg.clone()),
        },
        log,
    ))
}

pub fn generate(cfg: &SynthConfig) -> Result<Dataset> {
    generate_with_log(cfg).map(|(d, _)| d)
}
