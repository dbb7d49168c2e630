//! Static timing analysis and near-critical path enumeration.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap};

use thiserror::Error;

use crate::netlist::{CycleError, GateId, GateKind, NetId, Netlist};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StaError {
    #[error("bad timing parameters: {0}")]
    BadParams(String),
    #[error(transparent)]
    Cycle(#[from] CycleError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DelayModel {
    /// Delay per gate kind, indexed by `GateKind::index`.
    pub delays: [f64; 11],
    pub scale: f64,
}

impl Default for DelayModel {
    fn default() -> Self {
        DelayModel::uniform(1.0)
    }
}

impl DelayModel {
    /// Every logic gate costs `d`; constants cost nothing.
    pub fn uniform(d: f64) -> Self {
        let mut delays = [d; 11];
        delays[GateKind::Const0.index()] = 0.0;
        delays[GateKind::Const1.index()] = 0.0;
        DelayModel { delays, scale: 1.0 }
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn set(&mut self, kind: GateKind, delay: f64) {
        self.delays[kind.index()] = delay;
    }

    pub fn delay(&self, kind: GateKind) -> f64 {
        self.delays[kind.index()] * self.scale
    }

    pub fn validate(&self) -> Result<(), StaError> {
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(StaError::BadParams(format!("scale {} must be positive", self.scale)));
        }
        if self.delays.iter().any(|d| !(*d >= 0.0 && d.is_finite())) {
            return Err(StaError::BadParams("gate delays must be finite and non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingReport {
    pub clock: f64,
    pub arrival: Vec<f64>,
    /// `f64::INFINITY` for nets that reach no primary output.
    pub required: Vec<f64>,
    pub slack: Vec<f64>,
    pub critical_delay: f64,
}

impl TimingReport {
    pub fn min_slack(&self) -> f64 {
        self.slack.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn meets_timing(&self) -> bool {
        self.min_slack() >= -EPS
    }
}

const EPS: f64 = 1e-9;

pub fn sta(netlist: &Netlist, model: &DelayModel, clock: f64) -> Result<TimingReport, StaError> {
    model.validate()?;
    if !(clock > 0.0) {
        return Err(StaError::BadParams(format!("clock {clock} must be positive")));
    }
    let order = netlist.topo_order()?;
    let n = netlist.num_nets();
    let mut arrival = vec![0.0f64; n];
    for &gid in order {
        let g = netlist.gate(gid);
        let a = g.inputs.iter().map(|i| arrival[i.index()]).fold(0.0, f64::max);
        arrival[g.output.index()] = a + model.delay(g.kind);
    }
    let mut required = vec![f64::INFINITY; n];
    for &o in netlist.outputs() {
        required[o.index()] = clock;
    }
    for &gid in order.iter().rev() {
        let g = netlist.gate(gid);
        let r = required[g.output.index()] - model.delay(g.kind);
        for i in &g.inputs {
            required[i.index()] = required[i.index()].min(r);
        }
    }
    let slack = (0..n).map(|i| required[i] - arrival[i]).collect();
    let critical_delay = netlist.outputs().iter().map(|o| arrival[o.index()]).fold(0.0, f64::max);
    Ok(TimingReport { clock, arrival, required, slack, critical_delay })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingPath {
    /// Primary input first, primary output last.
    pub nets: Vec<NetId>,
    pub gates: Vec<GateId>,
    pub delay: f64,
    pub slack: f64,
    /// Distinct instance tags in traversal order.
    pub tags: Vec<String>,
}

/// Longest delay from each net to any primary output (`-inf` if none).
fn tails(netlist: &Netlist, model: &DelayModel, order: &[GateId]) -> Vec<f64> {
    let mut tail = vec![f64::NEG_INFINITY; netlist.num_nets()];
    for &o in netlist.outputs() {
        tail[o.index()] = 0.0;
    }
    for &gid in order.iter().rev() {
        let g = netlist.gate(gid);
        let t = tail[g.output.index()] + model.delay(g.kind);
        for i in &g.inputs {
            tail[i.index()] = tail[i.index()].max(t);
        }
    }
    tail
}

/// Bounds are compared after quantization so that sums taken in different
/// orders still tie.
fn quant(x: f64) -> i64 {
    (x * 1e9).round() as i64
}

#[derive(Debug, PartialEq, Eq)]
struct Entry {
    bound: i64,
    seq: Reverse<Vec<u32>>,
    node: usize,
    done: bool,
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.bound, &self.seq, !self.done).cmp(&(other.bound, &other.seq, !other.done))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Cap on search-heap pops; only reached when most long paths violate the clock.
pub const MAX_POPS: usize = 2_000_000;

/// Up to `n` input-to-output paths with `0 <= slack <= window`, by ascending
/// slack, ties broken by lexicographic net-id sequence.
pub fn near_critical_paths(
    netlist: &Netlist,
    model: &DelayModel,
    clock: f64,
    n: usize,
    window: f64,
) -> Result<Vec<TimingPath>, StaError> {
    model.validate()?;
    if n == 0 {
        return Err(StaError::BadParams("path count must be positive".into()));
    }
    if !(window >= 0.0) {
        return Err(StaError::BadParams(format!("window {window} must be non-negative")));
    }
    let order = netlist.topo_order()?;
    let tail = tails(netlist, model, order);
    // arena of (net, gate into it, parent, prefix delay)
    let mut arena: Vec<(NetId, Option<GateId>, usize, f64)> = Vec::new();
    let mut heap = BinaryHeap::new();
    let lo = quant(clock - window);
    let hi = quant(clock);
    for &pi in netlist.inputs() {
        if tail[pi.index()].is_finite() {
            arena.push((pi, None, usize::MAX, 0.0));
            heap.push(Entry { bound: quant(tail[pi.index()]), seq: Reverse(vec![pi.0]), node: arena.len() - 1, done: false });
        }
    }
    let mut out = Vec::new();
    let mut pops = 0;
    while let Some(e) = heap.pop() {
        pops += 1;
        if e.bound < lo || out.len() >= n || pops > MAX_POPS {
            break;
        }
        let (net, _, _, prefix) = arena[e.node];
        if e.done {
            if e.bound <= hi {
                out.push(build_path(netlist, &arena, e.node, clock));
            }
            continue;
        }
        if netlist.is_output(net) {
            heap.push(Entry { bound: quant(prefix), seq: e.seq.clone(), node: e.node, done: true });
        }
        for &gid in netlist.sinks(net) {
            let g = netlist.gate(gid);
            let t = tail[g.output.index()];
            if !t.is_finite() {
                continue;
            }
            let d = prefix + model.delay(g.kind);
            let bound = quant(d + t);
            if bound < lo {
                continue;
            }
            arena.push((g.output, Some(gid), e.node, d));
            let mut seq = e.seq.0.clone();
            seq.push(g.output.0);
            heap.push(Entry { bound, seq: Reverse(seq), node: arena.len() - 1, done: false });
        }
    }
    Ok(out)
}

fn build_path(netlist: &Netlist, arena: &[(NetId, Option<GateId>, usize, f64)], node: usize, clock: f64) -> TimingPath {
    let delay = arena[node].3;
    let mut nets = Vec::new();
    let mut gates = Vec::new();
    let mut cur = node;
    while cur != usize::MAX {
        let (net, gate, parent, _) = arena[cur];
        nets.push(net);
        gates.extend(gate);
        cur = parent;
    }
    nets.reverse();
    gates.reverse();
    let mut tags: Vec<String> = Vec::new();
    for g in &gates {
        let t = &netlist.gate(*g).tag;
        if !tags.contains(t) {
            tags.push(t.clone());
        }
    }
    TimingPath { nets, gates, delay, slack: clock - delay, tags }
}

/// Instance tags touched by the paths with the number of paths touching each,
/// by descending hit count then tag.
pub fn paths_to_instances(paths: &[TimingPath]) -> Vec<(String, usize)> {
    let mut hits: BTreeMap<&str, usize> = BTreeMap::new();
    for p in paths {
        for t in &p.tags {
            *hits.entry(t).or_default() += 1;
        }
    }
    let mut v: Vec<(String, usize)> = hits.into_iter().map(|(t, h)| (t.to_string(), h)).collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    v
}

/// Recomputes a path's delay from its gates.
pub fn path_delay(netlist: &Netlist, model: &DelayModel, path: &TimingPath) -> f64 {
    path.gates.iter().map(|&g| model.delay(netlist.gate(g).kind)).sum()
}
