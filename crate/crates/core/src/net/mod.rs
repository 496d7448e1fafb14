//! Compiles an [`ArchitectureGraph`] into a trainable network.
//!
//! Every node becomes a stem or a residual block; every edge becomes an
//! optional spatial max pool plus an optional 1x1 channel adapter, followed by
//! a learnable sigmoid gate. Level-4 outputs feed the classification sink.

mod baseline;

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use baseline::{build_baseline, default_stride, BaselineName, BASELINES};

use crate::error::{Error, Result};
use crate::graph::params::{BLOCK_TEMPORAL_TAPS, SPATIAL_KERNEL, STEM_KERNEL, STEM_TEMPORAL_TAPS};
use crate::graph::{validate_graph, ArchitectureGraph, BlockNode, NodeId, NodeKind, ParameterBreakdown, MAX_LEVEL};
use crate::schedule::{HeadSpec, LayerSchedule, SinkCombine, TemporalPool};
use crate::tensor::{softmax_rows, BatchStats, NormMode, Tape, Tensor, Var};

/// Everything besides the graph that determines a compiled network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetConfig {
    pub schedule: LayerSchedule,
    pub head: HeadSpec,
    /// Running-statistics momentum of every batch norm.
    pub bn_momentum: f64,
    /// Seed of the weight initialisation.
    pub init_seed: u64,
}

impl NetConfig {
    pub fn new(schedule: LayerSchedule, num_classes: usize) -> Self {
        NetConfig { schedule, head: HeadSpec::new(num_classes), bn_momentum: 0.99, init_seed: 0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamKind {
    ConvWeight,
    NormScale,
    NormShift,
    EdgeLogit,
    FcWeight,
    FcBias,
}

impl ParamKind {
    /// Parameters that weight decay applies to.
    pub fn decays(self) -> bool {
        matches!(self, ParamKind::ConvWeight | ParamKind::FcWeight)
    }
}

/// Which accounting bucket a parameter belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Bucket {
    StemConv,
    StemNorm,
    BlockConv,
    BlockNorm,
    Adapter,
    Gate,
    Sink,
}

#[derive(Clone, Debug)]
pub struct Param {
    pub kind: ParamKind,
    pub value: Tensor,
    bucket: Bucket,
}

#[derive(Clone, Copy, Debug)]
enum ConvOp {
    Spatial { stride: usize },
    Pointwise { groups: usize },
    Temporal { dilation: usize, groups: usize },
}

/// conv -> batch norm -> optional ReLU.
#[derive(Clone, Debug)]
struct ConvUnit {
    op: ConvOp,
    weight: usize,
    scale: usize,
    shift: usize,
    stats: usize,
    relu: bool,
}

#[derive(Clone, Debug)]
struct Module {
    main: Vec<ConvUnit>,
    shortcut: Option<ConvUnit>,
}

#[derive(Clone, Debug)]
enum Body {
    Stem { modality: NodeKind, units: Vec<ConvUnit> },
    Block { modules: Vec<Module> },
}

#[derive(Clone, Debug)]
struct Incoming {
    src: NodeId,
    adapter: Option<ConvUnit>,
    logit: usize,
}

#[derive(Clone, Debug)]
struct NodePlan {
    id: NodeId,
    inputs: Vec<Incoming>,
    body: Body,
}

/// Input clips: appearance `[B,T,Y,X,Ca]`, motion `[B,T,Y,X,Cm]`.
#[derive(Clone, Copy, Debug)]
pub struct Batch<'a> {
    pub appearance: &'a Tensor,
    pub motion: &'a Tensor,
}

/// Result of a forward pass recorded on a tape.
pub struct Forward {
    /// Pre-softmax class scores `[B, K]`.
    pub logits: Var,
    /// Tape handle of every parameter, indexed like [`ExecutableNetwork::params`].
    pub params: Vec<Var>,
    /// Batch statistics of every norm (training mode only).
    pub batch_stats: Vec<Option<BatchStats>>,
}

/// A compiled network: a topological layer plan plus its parameter store.
#[derive(Clone, Debug)]
pub struct ExecutableNetwork {
    graph: ArchitectureGraph,
    config: NetConfig,
    plan: Vec<NodePlan>,
    sink_nodes: Vec<NodeId>,
    fc_weight: usize,
    fc_bias: usize,
    params: Vec<Param>,
    running: Vec<BatchStats>,
    edge_params: BTreeMap<(NodeId, NodeId), usize>,
}

struct Builder {
    rng: ChaCha8Rng,
    params: Vec<Param>,
    running: Vec<BatchStats>,
}

impl Builder {
    fn param(&mut self, kind: ParamKind, bucket: Bucket, value: Tensor) -> usize {
        self.params.push(Param { kind, value, bucket });
        self.params.len() - 1
    }

    fn conv_weight(&mut self, shape: &[usize], fan_in: usize, bucket: Bucket) -> usize {
        let std = (2.0 / fan_in.max(1) as f64).sqrt();
        let w = Tensor::randn(shape, std, &mut self.rng);
        self.param(ParamKind::ConvWeight, bucket, w)
    }

    fn unit(&mut self, op: ConvOp, shape: &[usize], fan_in: usize, cout: usize, relu: bool, conv: Bucket, norm: Bucket) -> ConvUnit {
        let weight = self.conv_weight(shape, fan_in, conv);
        let scale = self.param(ParamKind::NormScale, norm, Tensor::full(&[cout], 1.0));
        let shift = self.param(ParamKind::NormShift, norm, Tensor::zeros(&[cout]));
        self.running.push(BatchStats::identity(cout));
        ConvUnit { op, weight, scale, shift, stats: self.running.len() - 1, relu }
    }

    fn stem(&mut self, node: &BlockNode, schedule: &LayerSchedule) -> Body {
        let s = node.channels as usize;
        let input = match node.kind {
            NodeKind::AppearanceStem => schedule.appearance_channels,
            _ => schedule.motion_channels,
        };
        let (c, n) = (Bucket::StemConv, Bucket::StemNorm);
        let k = STEM_KERNEL;
        let mut units = vec![self.unit(ConvOp::Spatial { stride: 2 }, &[k, k, input, s], k * k * input, s, true, c, n)];
        if node.kind == NodeKind::AppearanceStem {
            let op = ConvOp::Temporal { dilation: node.resolution as usize, groups: 1 };
            units.push(self.unit(op, &[STEM_TEMPORAL_TAPS, s, s], STEM_TEMPORAL_TAPS * s, s, true, c, n));
        }
        Body::Stem { modality: node.kind, units }
    }

    fn block(&mut self, node: &BlockNode, schedule: &LayerSchedule) -> Result<Body> {
        let c = node.channels as usize;
        let e = schedule.expansion;
        let d = schedule.d_for(node.level)?;
        let input = schedule.input_width_for(node.level)?;
        let (bc, bn) = (Bucket::BlockConv, Bucket::BlockNorm);
        let k = SPATIAL_KERNEL;
        let mut modules = Vec::new();
        for m in 0..schedule.modules(node.level)? {
            let stride = if m == 0 { node.stride as usize } else { 1 };
            let entry = match m {
                0 => self.unit(ConvOp::Pointwise { groups: 1 }, &[input, c], input, c, true, bc, bn),
                m if m % 2 == 0 => self.unit(ConvOp::Pointwise { groups: c }, &[e, c], e, c, true, bc, bn),
                _ => {
                    let op = ConvOp::Temporal { dilation: node.resolution as usize, groups: c };
                    self.unit(op, &[BLOCK_TEMPORAL_TAPS, e, c], BLOCK_TEMPORAL_TAPS * e, c, true, bc, bn)
                }
            };
            let spatial = self.unit(ConvOp::Spatial { stride }, &[k, k, c, d], k * k * c, d, true, bc, bn);
            let exit = self.unit(ConvOp::Pointwise { groups: 1 }, &[d, e * c], d, e * c, false, bc, bn);
            let shortcut = (m == 0).then(|| self.unit(ConvOp::Spatial { stride }, &[1, 1, input, e * c], input, e * c, false, bc, bn));
            modules.push(Module { main: vec![entry, spatial, exit], shortcut });
        }
        Ok(Body::Block { modules })
    }
}

/// Width of the tensor a node emits.
fn node_width(node: &BlockNode, schedule: &LayerSchedule) -> usize {
    crate::graph::params::output_width(node, schedule)
}

/// Builds the executable network for `g`. The graph must validate.
pub fn compile(g: &ArchitectureGraph, config: &NetConfig) -> Result<ExecutableNetwork> {
    let report = validate_graph(g);
    if !report.is_ok() {
        return Err(Error::InvalidGraph(report.to_string()));
    }
    config.schedule.validate()?;
    if config.head.num_classes == 0 {
        return Err(Error::Config("num_classes must be positive".into()));
    }
    let schedule = &config.schedule;
    let mut b = Builder { rng: ChaCha8Rng::seed_from_u64(config.init_seed), params: Vec::new(), running: Vec::new() };
    let mut plan = Vec::new();
    let mut edge_params = BTreeMap::new();
    for id in g.topological_order() {
        let node = g.node(id).expect("node from topological order");
        let mut inputs = Vec::new();
        if !node.is_stem() {
            let target = schedule.input_width_for(node.level)?;
            for src in g.inputs_of(id) {
                let width = node_width(g.node(src).expect("validated edge"), schedule);
                let adapter = (width != target).then(|| {
                    b.unit(ConvOp::Pointwise { groups: 1 }, &[width, target], width, target, false, Bucket::Adapter, Bucket::Adapter)
                });
                let logit = b.param(ParamKind::EdgeLogit, Bucket::Gate, Tensor::scalar(g.logit(src, id).unwrap_or(0.0)));
                edge_params.insert((src, id), logit);
                inputs.push(Incoming { src, adapter, logit });
            }
        }
        let body = if node.is_stem() { b.stem(node, schedule) } else { b.block(node, schedule)? };
        plan.push(NodePlan { id, inputs, body });
    }
    let sink_nodes = g.nodes_at_level(MAX_LEVEL);
    let widths: Vec<usize> = sink_nodes.iter().map(|id| node_width(g.node(*id).unwrap(), schedule)).collect();
    let features = match config.head.combine {
        SinkCombine::Concat => widths.iter().sum(),
        SinkCombine::Average => widths.iter().copied().max().unwrap_or(0),
    };
    let k = config.head.num_classes;
    let w = Tensor::randn(&[features, k], (1.0 / features as f64).sqrt(), &mut b.rng);
    let fc_weight = b.param(ParamKind::FcWeight, Bucket::Sink, w);
    let fc_bias = b.param(ParamKind::FcBias, Bucket::Sink, Tensor::zeros(&[k]));
    Ok(ExecutableNetwork {
        graph: g.clone(),
        config: config.clone(),
        plan,
        sink_nodes,
        fc_weight,
        fc_bias,
        params: b.params,
        running: b.running,
        edge_params,
    })
}

impl ExecutableNetwork {
    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn graph(&self) -> &ArchitectureGraph {
        &self.graph
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param] {
        &mut self.params
    }

    pub fn running_stats(&self) -> &[BatchStats] {
        &self.running
    }

    pub fn set_running_stats(&mut self, stats: Vec<BatchStats>) {
        assert_eq!(stats.len(), self.running.len(), "one statistic per norm");
        self.running = stats;
    }

    /// Folds training-mode batch statistics into the running averages.
    pub fn update_running_stats(&mut self, batch: &[Option<BatchStats>]) {
        let momentum = self.config.bn_momentum;
        for (r, b) in self.running.iter_mut().zip(batch) {
            if let Some(b) = b {
                r.update(b, momentum);
            }
        }
    }

    pub fn num_params(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Allocated parameter sizes grouped like [`crate::graph::parameter_count`].
    pub fn breakdown(&self) -> ParameterBreakdown {
        let mut p = ParameterBreakdown::default();
        for param in &self.params {
            let n = param.value.len();
            match param.bucket {
                Bucket::StemConv => p.stem_conv += n,
                Bucket::StemNorm => p.stem_norm += n,
                Bucket::BlockConv => p.block_conv += n,
                Bucket::BlockNorm => p.block_norm += n,
                Bucket::Adapter => p.adapters += n,
                Bucket::Gate => p.gates += n,
                Bucket::Sink => p.sink += n,
            }
        }
        p
    }

    /// Current gate logit of every edge.
    pub fn edge_logits(&self) -> BTreeMap<(NodeId, NodeId), f64> {
        self.edge_params.iter().map(|(&k, &i)| (k, self.params[i].value.data()[0])).collect()
    }

    /// The source graph with every edge logit replaced by its trained value.
    pub fn annotated_graph(&self) -> ArchitectureGraph {
        let mut g = self.graph.clone();
        for ((s, d), w) in self.edge_logits() {
            g.set_logit(s, d, w);
        }
        g
    }

    /// Records a forward pass. `train` selects batch statistics over running ones.
    pub fn forward(&self, tape: &mut Tape, batch: Batch<'_>, train: bool) -> Result<Forward> {
        let params: Vec<Var> = self.params.iter().map(|p| tape.leaf(p.value.clone(), train)).collect();
        let mut stats: Vec<Option<BatchStats>> = vec![None; self.running.len()];
        let mut outputs: BTreeMap<NodeId, Var> = BTreeMap::new();
        let mut cx = Ctx { tape, params: &params, stats: &mut stats, running: &self.running, train };
        for node in &self.plan {
            let out = match &node.body {
                Body::Stem { modality, units } => {
                    let x = match modality {
                        NodeKind::AppearanceStem => batch.appearance,
                        _ => batch.motion,
                    };
                    let mut h = cx.tape.constant(x.clone());
                    for u in units {
                        h = cx.unit(u, h)?;
                    }
                    cx.tape.max_pool_spatial(h, 3, 2)?
                }
                Body::Block { modules } => {
                    let x = cx.aggregate(node, &outputs)?;
                    let mut h = x;
                    for m in modules {
                        let mut y = h;
                        for u in &m.main {
                            y = cx.unit(u, y)?;
                        }
                        let skip = match &m.shortcut {
                            Some(u) => cx.unit(u, h)?,
                            None => h,
                        };
                        let sum = cx.tape.add(&[y, skip])?;
                        h = cx.tape.relu(sum)?;
                    }
                    h
                }
            };
            outputs.insert(node.id, out);
        }
        let logits = self.sink(cx.tape, &params, &outputs)?;
        Ok(Forward { logits, params, batch_stats: stats })
    }

    fn sink(&self, tape: &mut Tape, params: &[Var], outputs: &BTreeMap<NodeId, Var>) -> Result<Var> {
        if self.sink_nodes.is_empty() {
            return Err(Error::InvalidGraph("no level-4 node feeds the sink".into()));
        }
        let mut pooled = Vec::new();
        for id in &self.sink_nodes {
            pooled.push(tape.avg_pool(outputs[id], &[2, 3])?);
        }
        let merged = match self.config.head.combine {
            SinkCombine::Concat => tape.concat_channels(&pooled)?,
            SinkCombine::Average => {
                let widest = pooled.iter().map(|v| *tape.value(*v).shape().last().unwrap()).max().unwrap();
                let mut padded = Vec::new();
                for v in pooled {
                    padded.push(tape.pad_channels(v, widest)?);
                }
                let n = padded.len() as f64;
                let sum = tape.add(&padded)?;
                tape.scale(sum, 1.0 / n)?
            }
        };
        let features = match self.config.head.temporal_pool {
            TemporalPool::Avg => tape.avg_pool(merged, &[1])?,
            TemporalPool::Max => tape.max_pool_axis(merged, 1)?,
        };
        tape.linear(features, params[self.fc_weight], params[self.fc_bias])
    }

    /// Class probabilities `[B, K]` with running statistics.
    pub fn predict(&self, batch: Batch<'_>) -> Result<Tensor> {
        let mut tape = Tape::new();
        let f = self.forward(&mut tape, batch, false)?;
        Ok(softmax_rows(tape.value(f.logits)))
    }
}

struct Ctx<'a, 't> {
    tape: &'t mut Tape,
    params: &'a [Var],
    stats: &'a mut Vec<Option<BatchStats>>,
    running: &'a [BatchStats],
    train: bool,
}

impl Ctx<'_, '_> {
    fn unit(&mut self, u: &ConvUnit, x: Var) -> Result<Var> {
        let w = self.params[u.weight];
        let y = match u.op {
            ConvOp::Spatial { stride } => self.tape.conv2d(x, w, stride)?,
            ConvOp::Pointwise { groups } => self.tape.conv1x1(x, w, groups)?,
            ConvOp::Temporal { dilation, groups } => self.tape.temporal_conv(x, w, dilation, groups)?,
        };
        let mode = if self.train { NormMode::Train } else { NormMode::Eval(&self.running[u.stats]) };
        let (y, batch) = self.tape.batch_norm(y, self.params[u.scale], self.params[u.shift], mode)?;
        self.stats[u.stats] = batch;
        if u.relu {
            self.tape.relu(y)
        } else {
            Ok(y)
        }
    }

    /// Pools every incoming tensor to the smallest incoming spatial size, adapts
    /// its width, then takes the gated sum.
    fn aggregate(&mut self, node: &NodePlan, outputs: &BTreeMap<NodeId, Var>) -> Result<Var> {
        let size = |tape: &Tape, v: Var| {
            let s = tape.value(v).shape();
            (s[2], s[3])
        };
        let (ty, tx) = node
            .inputs
            .iter()
            .map(|i| size(self.tape, outputs[&i.src]))
            .fold((usize::MAX, usize::MAX), |a, b| (a.0.min(b.0), a.1.min(b.1)));
        let mut adapted = Vec::new();
        let mut logits = Vec::new();
        for inc in &node.inputs {
            let mut v = outputs[&inc.src];
            let (sy, sx) = size(self.tape, v);
            if (sy, sx) != (ty, tx) {
                let ratio = sy / ty;
                if sy % ty != 0 || sx % tx != 0 || sx / tx != ratio || !ratio.is_power_of_two() {
                    return Err(Error::ShapeInference {
                        node: node.id,
                        detail: format!("input {} is {sy}x{sx}, cannot pool to {ty}x{tx}", inc.src),
                    });
                }
                v = self.tape.max_pool_spatial(v, ratio, ratio)?;
            }
            if let Some(a) = &inc.adapter {
                v = self.unit(a, v)?;
            }
            adapted.push(v);
            logits.push(self.params[inc.logit]);
        }
        self.tape.gated_weighted_sum(&adapted, &logits)
    }
}

/// Checks that `g` compiles and runs on a `spatial x spatial`, `frames`-long
/// input, reporting the first failing node.
pub fn infer_shapes(g: &ArchitectureGraph, spatial: usize, frames: usize) -> Result<BTreeMap<NodeId, [usize; 3]>> {
    let mut sizes: BTreeMap<NodeId, [usize; 3]> = BTreeMap::new();
    for id in g.topological_order() {
        let n = g.node(id).expect("node from topological order");
        let input = if n.is_stem() {
            spatial
        } else {
            let srcs: Vec<usize> = g.inputs_of(id).iter().map(|s| sizes[s][1]).collect();
            let min = *srcs.iter().min().ok_or_else(|| Error::ShapeInference { node: id, detail: "no inputs".into() })?;
            for s in srcs {
                if s % min != 0 || !(s / min).is_power_of_two() {
                    return Err(Error::ShapeInference { node: id, detail: format!("cannot pool {s} to {min}") });
                }
            }
            min
        };
        let out = if n.is_stem() { input.div_ceil(2).div_ceil(2) } else { input.div_ceil(n.stride as usize) };
        sizes.insert(id, [frames, out, out]);
    }
    Ok(sizes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{decode_table, parameter_count, ChannelBudget, TABLE5};

    pub(crate) fn chain(budget: ChannelBudget) -> ArchitectureGraph {
        let mut g = ArchitectureGraph::new(budget);
        let mut prev = g.add_stem(NodeKind::AppearanceStem, 8, 1);
        for level in 1..=4 {
            let n = g.add_block(level, budget.level(level), 1, if level == 1 { 1 } else { 2 });
            g.add_edge(prev, n, 0.0);
            prev = n;
        }
        g
    }

    fn batch(b: usize, t: usize, s: usize) -> (Tensor, Tensor) {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        (Tensor::randn(&[b, t, s, s, 3], 1.0, &mut rng), Tensor::randn(&[b, t, s, s, 2], 1.0, &mut rng))
    }

    #[test]
    fn chain_param_count_matches_accounting() {
        let g = chain(ChannelBudget::DESK);
        let cfg = NetConfig::new(LayerSchedule::desk(), 10);
        let net = compile(&g, &cfg).unwrap();
        let expected = parameter_count(&g, &cfg.schedule, &cfg.head).unwrap();
        assert_eq!(net.breakdown(), expected);
        assert_eq!(net.num_params(), expected.total());
    }

    #[test]
    fn chain_forward_gives_probabilities() {
        let g = chain(ChannelBudget::DESK);
        let net = compile(&g, &NetConfig::new(LayerSchedule::desk(), 10)).unwrap();
        let (a, m) = batch(8, 4, 16);
        let p = net.predict(Batch { appearance: &a, motion: &m }).unwrap();
        assert_eq!(p.shape(), &[8, 10]);
        for row in p.data().chunks(10) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn table5_compiles_at_desk_scale() {
        let g = decode_table(TABLE5).unwrap();
        let cfg = NetConfig::new(LayerSchedule::desk(), 12);
        let net = compile(&g, &cfg).unwrap();
        assert_eq!(net.num_params(), parameter_count(&g, &cfg.schedule, &cfg.head).unwrap().total());
        assert_eq!(infer_shapes(&g, 16, 16).unwrap()[&NodeId(14)], [16, 1, 1]);
    }

    #[test]
    fn invalid_graph_does_not_compile() {
        let mut g = chain(ChannelBudget::DESK);
        g.add_block(2, 4, 1, 1);
        assert!(matches!(compile(&g, &NetConfig::new(LayerSchedule::desk(), 10)), Err(Error::InvalidGraph(_))));
    }

    #[test]
    fn motion_stem_has_no_temporal_conv() {
        let mut g = ArchitectureGraph::new(ChannelBudget::DESK);
        g.add_stem(NodeKind::MotionStem, 8, 1);
        let mut b = Builder { rng: ChaCha8Rng::seed_from_u64(0), params: Vec::new(), running: Vec::new() };
        let node = g.node(NodeId(0)).unwrap().clone();
        let Body::Stem { units, .. } = b.stem(&node, &LayerSchedule::desk()) else { panic!() };
        assert_eq!(units.len(), 1);
        assert!(matches!(units[0].op, ConvOp::Spatial { stride: 2 }));
    }

    #[test]
    fn block_temporal_layers_carry_node_dilation() {
        let mut s = LayerSchedule::desk();
        s.m[1] = 2.0;
        let mut g = ArchitectureGraph::new(ChannelBudget::DESK);
        let id = g.add_block(2, 8, 4, 2);
        let mut b = Builder { rng: ChaCha8Rng::seed_from_u64(0), params: Vec::new(), running: Vec::new() };
        let Body::Block { modules } = b.block(g.node(id).unwrap(), &s).unwrap() else { panic!() };
        assert_eq!(modules.len(), 4);
        let dilations: Vec<usize> = modules
            .iter()
            .flat_map(|m| &m.main)
            .filter_map(|u| match u.op {
                ConvOp::Temporal { dilation, .. } => Some(dilation),
                _ => None,
            })
            .collect();
        assert_eq!(dilations, vec![4, 4]);
    }

    #[test]
    fn stem_reduces_spatial_size_by_four() {
        let mut g = ArchitectureGraph::new(ChannelBudget([8, 0, 0, 0]));
        g.add_stem(NodeKind::AppearanceStem, 32, 1);
        assert_eq!(infer_shapes(&g, 16, 1).unwrap()[&NodeId(0)], [1, 4, 4]);
    }

    #[test]
    fn annotated_graph_reads_back_logits() {
        let mut g = chain(ChannelBudget::DESK);
        g.set_logit(NodeId(0), NodeId(1), 1.5);
        let mut net = compile(&g, &NetConfig::new(LayerSchedule::desk(), 10)).unwrap();
        assert_eq!(net.edge_logits()[&(NodeId(0), NodeId(1))], 1.5);
        let idx = net.edge_params[&(NodeId(1), NodeId(2))];
        net.params_mut()[idx].value.data_mut()[0] = -2.0;
        assert_eq!(net.annotated_graph().logit(NodeId(1), NodeId(2)), Some(-2.0));
    }
}
