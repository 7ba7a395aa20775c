//! Model configuration, parameter layout and the forward pass of the five
//! architectures (MLP, GCN, GAT, PD-GCN, PD-GAT).

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use flexdiff_core::rewire::{rewire, RewireReport};
use flexdiff_core::{edge_features, Error, Graph, LaplacianParams, Result};

use crate::layers::{
    attention_head, gcn_operator, pd_operator, propagate_layer, Activation, AttentionGraph, HeadVars,
};
use crate::tape::{SparseOp, Tape, Var};
use crate::tensor::Tensor;

pub const INIT_STREAM: u64 = 0;
pub const DROPOUT_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Arch {
    Mlp,
    Gcn,
    Gat,
    PdGcn,
    PdGat,
}

impl Arch {
    pub fn is_attention(self) -> bool {
        matches!(self, Arch::Gat | Arch::PdGat)
    }

    pub fn is_parameterized(self) -> bool {
        matches!(self, Arch::PdGcn | Arch::PdGat)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Accuracy,
    RocAuc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub arch: Arch,
    #[serde(default = "defaults::layers")]
    pub layers: usize,
    #[serde(default = "defaults::hidden")]
    pub hidden: usize,
    #[serde(default = "defaults::heads")]
    pub heads: usize,
    /// Laplacian member used by the parameterized architectures.
    #[serde(default = "defaults::params")]
    pub params: LaplacianParams,
    #[serde(default)]
    pub sep: bool,
    #[serde(default)]
    pub residual: bool,
    #[serde(default = "defaults::dropout")]
    pub dropout: f64,
    #[serde(default = "defaults::lr")]
    pub lr: f64,
    #[serde(default = "defaults::weight_decay")]
    pub weight_decay: f64,
    #[serde(default = "defaults::epochs")]
    pub epochs: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "defaults::leaky_slope")]
    pub leaky_slope: f64,
    /// Rewire the input graph with this member before building the model.
    #[serde(default)]
    pub rewire: Option<LaplacianParams>,
    #[serde(default = "defaults::metric")]
    pub metric: Metric,
}

mod defaults {
    use super::*;

    pub fn layers() -> usize {
        2
    }
    pub fn hidden() -> usize {
        64
    }
    pub fn heads() -> usize {
        8
    }
    pub fn params() -> LaplacianParams {
        LaplacianParams::RANDOM_WALK
    }
    pub fn dropout() -> f64 {
        0.1
    }
    pub fn lr() -> f64 {
        0.01
    }
    pub fn weight_decay() -> f64 {
        0.001
    }
    pub fn epochs() -> usize {
        300
    }
    pub fn leaky_slope() -> f64 {
        0.2
    }
    pub fn metric() -> Metric {
        Metric::Accuracy
    }
}

impl ModelConfig {
    pub fn new(arch: Arch) -> Self {
        ModelConfig {
            arch,
            layers: defaults::layers(),
            hidden: defaults::hidden(),
            heads: defaults::heads(),
            params: defaults::params(),
            sep: false,
            residual: false,
            dropout: defaults::dropout(),
            lr: defaults::lr(),
            weight_decay: defaults::weight_decay(),
            epochs: defaults::epochs(),
            seed: 0,
            leaky_slope: defaults::leaky_slope(),
            rewire: None,
            metric: defaults::metric(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.hidden == 0 {
            return Err(Error::param("layers and hidden must be positive"));
        }
        if self.arch.is_attention() && (self.heads == 0 || self.hidden % self.heads != 0) {
            return Err(Error::param(format!(
                "hidden = {} must be divisible by heads = {}",
                self.hidden, self.heads
            )));
        }
        if self.sep && !self.arch.is_attention() {
            return Err(Error::param("sep applies to attention architectures only"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::param(format!("dropout = {} outside [0, 1)", self.dropout)));
        }
        if self.epochs == 0 {
            return Err(Error::param("epochs must be positive"));
        }
        if !(self.lr >= 0.0 && self.weight_decay >= 0.0) {
            return Err(Error::param("lr and weight_decay must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct HeadIdx {
    w: usize,
    a_src: usize,
    a_dst: usize,
    edge: Option<(usize, usize)>,
}

#[derive(Debug, Clone)]
enum Layer {
    Dense { w: usize },
    Attention {
        heads: Vec<HeadIdx>,
        ego: Option<usize>,
        trailing: usize,
    },
}

#[derive(Debug, Clone)]
enum Structure {
    None,
    Propagate(Arc<SparseOp>),
    Attention(AttentionGraph),
}

/// A model bound to one graph: structure, parameter layout and parameters.
#[derive(Debug, Clone)]
pub struct Model {
    cfg: ModelConfig,
    graph: Graph,
    structure: Structure,
    layers: Vec<Layer>,
    dims: Vec<(usize, usize)>,
    params: Vec<Tensor>,
    rewire_report: Option<RewireReport>,
}

fn dropout_mask<R: Rng + ?Sized>(rows: usize, cols: usize, p: f64, rng: &mut R) -> Arc<Tensor> {
    let keep = 1.0 / (1.0 - p);
    Arc::new(Tensor::from_fn(rows, cols, |_, _| if rng.random::<f64>() < p { 0.0 } else { keep }))
}

impl Model {
    pub fn new(cfg: &ModelConfig, graph: &Graph, in_dim: usize, classes: usize) -> Result<Model> {
        cfg.validate()?;
        let (graph, rewire_report) = match cfg.rewire {
            Some(p) => {
                let (g, r) = rewire(graph, p)?;
                (g, Some(r))
            }
            None => (graph.clone(), None),
        };
        let structure = match cfg.arch {
            Arch::Mlp => Structure::None,
            Arch::Gcn => Structure::Propagate(Arc::new(SparseOp::new(gcn_operator(&graph)))),
            Arch::PdGcn => Structure::Propagate(Arc::new(SparseOp::new(pd_operator(&graph, cfg.params)?))),
            Arch::Gat => Structure::Attention(AttentionGraph::new(&graph, !cfg.sep, None)?),
            Arch::PdGat => {
                let table = edge_features::<f64>(&graph, cfg.params)?;
                Structure::Attention(AttentionGraph::new(&graph, !cfg.sep, Some(&table))?)
            }
        };

        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(INIT_STREAM);
        let mut params = Vec::new();
        let mut add = |t: Tensor| {
            params.push(t);
            params.len() - 1
        };
        let mut layers = Vec::with_capacity(cfg.layers);
        let mut dims = Vec::with_capacity(cfg.layers);
        for l in 0..cfg.layers {
            let d_in = if l == 0 { in_dim } else { cfg.hidden };
            let d_out = if l + 1 == cfg.layers { classes } else { cfg.hidden };
            dims.push((d_in, d_out));
            if !cfg.arch.is_attention() {
                layers.push(Layer::Dense {
                    w: add(Tensor::glorot(d_in, d_out, &mut rng)),
                });
                continue;
            }
            let d_head = cfg.hidden / cfg.heads;
            let mut heads = Vec::with_capacity(cfg.heads);
            for _ in 0..cfg.heads {
                let w = add(Tensor::glorot(d_in, d_head, &mut rng));
                let a_src = add(Tensor::glorot(d_head, 1, &mut rng));
                let a_dst = add(Tensor::glorot(d_head, 1, &mut rng));
                let edge = (cfg.arch == Arch::PdGat).then(|| {
                    let w_e = add(Tensor::glorot(2, d_head, &mut rng));
                    let a_e = add(Tensor::glorot(d_head, 1, &mut rng));
                    (w_e, a_e)
                });
                heads.push(HeadIdx { w, a_src, a_dst, edge });
            }
            let ego = cfg.sep.then(|| add(Tensor::glorot(d_in, cfg.hidden, &mut rng)));
            let concat = if cfg.sep { 2 * cfg.hidden } else { cfg.hidden };
            let trailing = add(Tensor::glorot(concat, d_out, &mut rng));
            layers.push(Layer::Attention { heads, ego, trailing });
        }
        Ok(Model {
            cfg: cfg.clone(),
            graph,
            structure,
            layers,
            dims,
            params,
            rewire_report,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    /// The graph the model aggregates over (rewired when configured).
    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn rewire_report(&self) -> Option<&RewireReport> {
        self.rewire_report.as_ref()
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Vec<Tensor> {
        &mut self.params
    }

    /// Parameter indices of attention layer `layer`: `(w, a_src, a_dst)` per
    /// head, the edge blocks per head, and the trailing projection.
    pub fn attention_layer_params(&self, layer: usize) -> Option<(Vec<[usize; 3]>, Vec<Option<(usize, usize)>>, usize)> {
        match &self.layers[layer] {
            Layer::Attention { heads, trailing, .. } => Some((
                heads.iter().map(|h| [h.w, h.a_src, h.a_dst]).collect(),
                heads.iter().map(|h| h.edge).collect(),
                *trailing,
            )),
            Layer::Dense { .. } => None,
        }
    }

    /// Records the forward pass on `tape`. `param_vars` must be the leaves for
    /// [`Model::params`] in order; `dropout` draws masks when training.
    pub fn forward(
        &self,
        tape: &mut Tape,
        param_vars: &[Var],
        x: Var,
        mut dropout: Option<&mut ChaCha8Rng>,
    ) -> Result<Var> {
        let n = self.graph.node_count();
        if tape.value(x).rows() != n {
            return Err(Error::usage(format!(
                "feature matrix has {} rows, graph has {n} nodes",
                tape.value(x).rows()
            )));
        }
        if tape.value(x).cols() != self.dims[0].0 {
            return Err(Error::usage(format!(
                "feature width {} differs from model input {}",
                tape.value(x).cols(),
                self.dims[0].0
            )));
        }
        let p = self.cfg.dropout;
        let mut h = x;
        for (l, layer) in self.layers.iter().enumerate() {
            let last = l + 1 == self.layers.len();
            let input = h;
            let mut hin = h;
            if let Some(rng) = dropout.as_deref_mut() {
                if p > 0.0 {
                    let (r, c) = tape.value(h).shape();
                    let m = dropout_mask(r, c, p, rng);
                    hin = tape.mask(h, m);
                }
            }
            let act = if last { Activation::Identity } else { Activation::Relu };
            let mut out = match (layer, &self.structure) {
                (Layer::Dense { w }, Structure::None) => {
                    let z = tape.matmul(hin, param_vars[*w]);
                    if last {
                        z
                    } else {
                        tape.relu(z)
                    }
                }
                (Layer::Dense { w }, Structure::Propagate(s)) => propagate_layer(tape, s, hin, param_vars[*w], act),
                (Layer::Attention { heads, ego, trailing }, Structure::Attention(ag)) => {
                    let mut parts = Vec::with_capacity(heads.len() + 1);
                    if let Some(e) = ego {
                        let z = tape.matmul(hin, param_vars[*e]);
                        parts.push(tape.relu(z));
                    }
                    for head in heads {
                        let vars = HeadVars {
                            w: param_vars[head.w],
                            a_src: param_vars[head.a_src],
                            a_dst: param_vars[head.a_dst],
                            edge: head.edge.map(|(a, b)| (param_vars[a], param_vars[b])),
                        };
                        let coef_mask = match dropout.as_deref_mut() {
                            Some(rng) if p > 0.0 => Some(dropout_mask(ag.pairs.len(), 1, p, rng)),
                            _ => None,
                        };
                        parts.push(attention_head(
                            tape,
                            ag,
                            hin,
                            &vars,
                            self.cfg.leaky_slope,
                            coef_mask,
                            Activation::Relu,
                        ));
                    }
                    let cat = if parts.len() == 1 { parts[0] } else { tape.concat_cols(&parts) };
                    tape.matmul(cat, param_vars[*trailing])
                }
                _ => unreachable!("layer kind always matches the structure"),
            };
            if self.cfg.residual && tape.value(input).shape() == tape.value(out).shape() {
                out = tape.add(out, input);
            }
            h = out;
        }
        Ok(h)
    }

    /// Registers the parameters on `tape` as leaves.
    pub fn param_leaves(&self, tape: &mut Tape, params: &[Tensor]) -> Vec<Var> {
        params.iter().map(|t| tape.leaf(t.clone())).collect()
    }

    /// Class probabilities without dropout.
    pub fn predict(&self, x: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let vars = self.param_leaves(&mut tape, &self.params);
        let xv = tape.leaf(x.clone());
        let logits = self.forward(&mut tape, &vars, xv, None)?;
        let probs = tape.softmax_rows(logits);
        Ok(tape.value(probs).clone())
    }

    /// Training loss over `rows` and its gradient with respect to `params`.
    pub fn loss_and_grad(
        &self,
        params: &[Tensor],
        x: &Tensor,
        labels: &Arc<Vec<usize>>,
        rows: &Arc<Vec<usize>>,
        dropout: Option<&mut ChaCha8Rng>,
    ) -> Result<(f64, Vec<Tensor>)> {
        if rows.is_empty() {
            return Err(Error::usage("loss over an empty mask"));
        }
        let mut tape = Tape::new();
        let vars = self.param_leaves(&mut tape, params);
        let xv = tape.leaf(x.clone());
        let logits = self.forward(&mut tape, &vars, xv, dropout)?;
        let probs = tape.softmax_rows(logits);
        let loss = tape.cross_entropy(probs, labels.clone(), rows.clone());
        let mut grads = tape.backward(loss);
        let g = vars
            .iter()
            .zip(params)
            .map(|(&v, t)| grads.take(v, t.shape()))
            .collect();
        Ok((tape.value(loss).get(0, 0), g))
    }
}
