//! Bit-parallel logic simulation.
//!
//! Vectors are packed 64 per machine word: lane `t % 64` of block `t / 64`
//! holds vector `t`. A scalar evaluator is kept alongside as the reference
//! the packed path is checked against.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::netlist::{CycleError, GateId, GateKind, NetId, Netlist, Word};

pub mod profile;

pub use profile::{
    activity_profile, error_metrics, error_profile, power_proxy, rare_nets, ActivityReport, ErrorReport,
    PowerProxy, Reference,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("stream does not match the netlist inputs: {0}")]
    StreamMismatch(String),
    #[error("rare-net threshold {0} outside (0, 0.5)")]
    BadThreshold(f64),
    #[error(transparent)]
    Cycle(#[from] CycleError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StreamMode {
    Uniform,
    /// Each bit repeats its previous value with probability `rho`, otherwise
    /// it is resampled uniformly.
    Correlated { rho: f64 },
}

impl StreamMode {
    pub fn label(&self) -> String {
        match self {
            StreamMode::Uniform => "uniform".into(),
            StreamMode::Correlated { rho } => format!("correlated({rho})"),
        }
    }
}

/// How a stream was produced; used to check that profiles are comparable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamSpec {
    pub n_vectors: usize,
    pub seed: u64,
    pub mode: StreamMode,
}

impl StreamSpec {
    pub fn new(n_vectors: usize, seed: u64, mode: StreamMode) -> Self {
        StreamSpec { n_vectors, seed, mode }
    }
}

/// Input vectors, stored word by word.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorStream {
    pub words: Vec<(String, usize)>,
    /// `values[w][t]` is the value of word `w` in vector `t`.
    pub values: Vec<Vec<u64>>,
    pub spec: Option<StreamSpec>,
}

fn mask(width: usize) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

pub fn word_shape(words: &[Word]) -> Vec<(String, usize)> {
    words.iter().map(|w| (w.name.clone(), w.width())).collect()
}

impl VectorStream {
    pub fn generate(words: &[(String, usize)], spec: StreamSpec) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let mut values: Vec<Vec<u64>> = words.iter().map(|_| Vec::with_capacity(spec.n_vectors)).collect();
        for t in 0..spec.n_vectors {
            for (w, (_, width)) in words.iter().enumerate() {
                let m = mask(*width);
                let v = match spec.mode {
                    StreamMode::Correlated { rho } if t > 0 => {
                        let prev = values[w][t - 1];
                        let mut v = 0u64;
                        for bit in 0..*width {
                            let b = if rng.gen_bool(rho) { (prev >> bit) & 1 } else { rng.gen::<bool>() as u64 };
                            v |= b << bit;
                        }
                        v
                    }
                    _ => rng.gen::<u64>() & m,
                };
                values[w].push(v);
            }
        }
        VectorStream { words: words.to_vec(), values, spec: Some(spec) }
    }

    pub fn for_netlist(n: &Netlist, spec: StreamSpec) -> Self {
        Self::generate(&word_shape(&n.input_words()), spec)
    }

    /// Every combination of word values; word 0 varies fastest. At most 2^24 vectors.
    pub fn exhaustive(words: &[(String, usize)]) -> Self {
        let total_bits: usize = words.iter().map(|(_, w)| w).sum();
        assert!(total_bits <= 24, "exhaustive stream over {total_bits} bits");
        let n = 1usize << total_bits;
        let mut values = vec![Vec::with_capacity(n); words.len()];
        for t in 0..n as u64 {
            let mut shift = 0;
            for (w, (_, width)) in words.iter().enumerate() {
                values[w].push((t >> shift) & mask(*width));
                shift += width;
            }
        }
        VectorStream { words: words.to_vec(), values, spec: None }
    }

    pub fn from_values(words: &[(String, usize)], values: Vec<Vec<u64>>) -> Self {
        assert_eq!(words.len(), values.len());
        VectorStream { words: words.to_vec(), values, spec: None }
    }

    /// Builds a stream from whole vectors (one value per word each).
    pub fn from_vectors(words: &[(String, usize)], vectors: &[Vec<u64>]) -> Self {
        let mut values = vec![Vec::with_capacity(vectors.len()); words.len()];
        for v in vectors {
            for (w, x) in v.iter().enumerate() {
                values[w].push(*x);
            }
        }
        Self::from_values(words, values)
    }

    pub fn len(&self) -> usize {
        self.values.first().map_or(0, |v| v.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn vector(&self, t: usize) -> Vec<u64> {
        self.values.iter().map(|v| v[t]).collect()
    }

    pub fn concat(&self, other: &VectorStream) -> VectorStream {
        assert_eq!(self.words, other.words);
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.iter().chain(b).copied().collect())
            .collect();
        VectorStream { words: self.words.clone(), values, spec: None }
    }
}

#[derive(Debug, Clone, Copy)]
struct CompiledGate {
    kind: GateKind,
    first_input: u32,
    n_inputs: u32,
    output: u32,
}

/// Gate list flattened into topological order for fast repeated evaluation.
#[derive(Debug, Clone)]
pub struct Simulator<'a> {
    netlist: &'a Netlist,
    gates: Vec<CompiledGate>,
    pins: Vec<u32>,
    input_words: Vec<Word>,
}

impl<'a> Simulator<'a> {
    pub fn new(netlist: &'a Netlist) -> Result<Self, CycleError> {
        let order = netlist.topo_order()?;
        let mut gates = Vec::with_capacity(order.len());
        let mut pins = Vec::new();
        for &gid in order {
            let g = netlist.gate(gid);
            gates.push(CompiledGate {
                kind: g.kind,
                first_input: pins.len() as u32,
                n_inputs: g.inputs.len() as u32,
                output: g.output.0,
            });
            pins.extend(g.inputs.iter().map(|n| n.0));
        }
        Ok(Simulator { netlist, gates, pins, input_words: netlist.input_words() })
    }

    pub fn netlist(&self) -> &Netlist {
        self.netlist
    }

    /// Maps each netlist input word to its column in `stream`.
    pub fn bind(&self, stream: &VectorStream) -> Result<Vec<usize>, SimError> {
        let by_name: HashMap<&str, (usize, usize)> =
            stream.words.iter().enumerate().map(|(i, (n, w))| (n.as_str(), (i, *w))).collect();
        if by_name.len() != self.input_words.len() {
            return Err(SimError::StreamMismatch(format!(
                "stream has {} words, netlist has {}",
                stream.words.len(),
                self.input_words.len()
            )));
        }
        self.input_words
            .iter()
            .map(|w| match by_name.get(w.name.as_str()) {
                Some(&(col, width)) if width == w.width() => Ok(col),
                Some(&(_, width)) => Err(SimError::StreamMismatch(format!(
                    "word {} has width {} in the netlist, {width} in the stream",
                    w.name,
                    w.width()
                ))),
                None => Err(SimError::StreamMismatch(format!("stream lacks word {}", w.name))),
            })
            .collect()
    }

    /// Loads vectors `[start, start + 64)` into the input lanes of `values`.
    fn load_block(&self, stream: &VectorStream, cols: &[usize], start: usize, values: &mut [u64]) {
        let end = (start + 64).min(stream.len());
        for (w, &col) in self.input_words.iter().zip(cols) {
            let src = &stream.values[col][start..end];
            for (bit, &net) in w.bits.iter().enumerate() {
                let mut lanes = 0u64;
                for (lane, &v) in src.iter().enumerate() {
                    lanes |= ((v >> bit) & 1) << lane;
                }
                values[net.index()] = lanes;
            }
        }
    }

    /// Evaluates every gate once over the 64 lanes held in `values`.
    pub fn eval_block(&self, values: &mut [u64]) {
        for g in &self.gates {
            let ins = &self.pins[g.first_input as usize..(g.first_input + g.n_inputs) as usize];
            let v = |i: usize| values[ins[i] as usize];
            let out = match g.kind {
                GateKind::And => ins.iter().fold(u64::MAX, |acc, &i| acc & values[i as usize]),
                GateKind::Nand => !ins.iter().fold(u64::MAX, |acc, &i| acc & values[i as usize]),
                GateKind::Or => ins.iter().fold(0, |acc, &i| acc | values[i as usize]),
                GateKind::Nor => !ins.iter().fold(0, |acc, &i| acc | values[i as usize]),
                GateKind::Xor => ins.iter().fold(0, |acc, &i| acc ^ values[i as usize]),
                GateKind::Xnor => !ins.iter().fold(0, |acc, &i| acc ^ values[i as usize]),
                GateKind::Not => !v(0),
                GateKind::Buf => v(0),
                GateKind::Mux2 => (!v(0) & v(1)) | (v(0) & v(2)),
                GateKind::Const0 => 0,
                GateKind::Const1 => u64::MAX,
            };
            values[g.output as usize] = out;
        }
    }

    /// Streams the simulation block by block. `visit` receives the block
    /// index, the number of valid lanes and the value of every net.
    pub fn run_blocks<F>(&self, stream: &VectorStream, mut visit: F) -> Result<(), SimError>
    where
        F: FnMut(usize, usize, &[u64]),
    {
        let cols = self.bind(stream)?;
        let mut values = vec![0u64; self.netlist.num_nets()];
        let n = stream.len();
        for (blk, start) in (0..n).step_by(64).enumerate() {
            self.load_block(stream, &cols, start, &mut values);
            self.eval_block(&mut values);
            visit(blk, (n - start).min(64), &values);
        }
        Ok(())
    }

    pub fn simulate(&self, stream: &VectorStream) -> Result<SimResult, SimError> {
        let n = stream.len();
        let blocks = n.div_ceil(64);
        let nn = self.netlist.num_nets();
        let mut traces = vec![0u64; nn * blocks];
        self.run_blocks(stream, |blk, lanes, values| {
            let m = mask(lanes);
            for (net, &v) in values.iter().enumerate() {
                traces[net * blocks + blk] = v & m;
            }
        })?;
        let out_words = self.netlist.output_words();
        let outputs = out_words
            .iter()
            .map(|w| {
                (0..n)
                    .map(|t| {
                        w.bits.iter().enumerate().fold(0u64, |acc, (i, b)| {
                            acc | (((traces[b.index() * blocks + t / 64] >> (t % 64)) & 1) << i)
                        })
                    })
                    .collect()
            })
            .collect();
        Ok(SimResult { n_vectors: n, blocks, traces, outputs })
    }

    /// Output word values only, without keeping per-net traces.
    pub fn outputs(&self, stream: &VectorStream) -> Result<Vec<Vec<u64>>, SimError> {
        let out_words = self.netlist.output_words();
        let n = stream.len();
        let mut outputs: Vec<Vec<u64>> = out_words.iter().map(|_| Vec::with_capacity(n)).collect();
        self.run_blocks(stream, |_, lanes, values| {
            for (w, out) in out_words.iter().zip(outputs.iter_mut()) {
                for lane in 0..lanes {
                    let v = w
                        .bits
                        .iter()
                        .enumerate()
                        .fold(0u64, |acc, (i, b)| acc | (((values[b.index()] >> lane) & 1) << i));
                    out.push(v);
                }
            }
        })?;
        Ok(outputs)
    }
}

/// Full simulation result: per-net traces and output word values.
#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub n_vectors: usize,
    blocks: usize,
    traces: Vec<u64>,
    /// `outputs[w][t]`: value of output word `w` for vector `t`.
    pub outputs: Vec<Vec<u64>>,
}

impl SimResult {
    /// Packed trace of one net; lanes past `n_vectors` are zero.
    pub fn trace(&self, net: NetId) -> &[u64] {
        &self.traces[net.index() * self.blocks..(net.index() + 1) * self.blocks]
    }

    pub fn bit(&self, net: NetId, t: usize) -> bool {
        (self.trace(net)[t / 64] >> (t % 64)) & 1 == 1
    }

    pub fn num_nets(&self) -> usize {
        self.traces.len() / self.blocks.max(1)
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }
}

pub fn simulate(netlist: &Netlist, stream: &VectorStream) -> Result<SimResult, SimError> {
    Simulator::new(netlist)?.simulate(stream)
}

/// One-vector-at-a-time evaluation; `inputs` is indexed like `netlist.inputs()`.
pub fn eval_scalar(netlist: &Netlist, inputs: &[bool]) -> Result<Vec<bool>, CycleError> {
    let mut v = vec![false; netlist.num_nets()];
    for (&net, &x) in netlist.inputs().iter().zip(inputs) {
        v[net.index()] = x;
    }
    for &gid in netlist.topo_order()? {
        let g = netlist.gate(gid);
        let ins: Vec<bool> = g.inputs.iter().map(|i| v[i.index()]).collect();
        v[g.output.index()] = eval_gate_scalar(g.kind, &ins);
    }
    Ok(v)
}

pub fn eval_gate_scalar(kind: GateKind, ins: &[bool]) -> bool {
    match kind {
        GateKind::And => ins.iter().all(|&x| x),
        GateKind::Nand => !ins.iter().all(|&x| x),
        GateKind::Or => ins.iter().any(|&x| x),
        GateKind::Nor => !ins.iter().any(|&x| x),
        GateKind::Xor => ins.iter().filter(|&&x| x).count() % 2 == 1,
        GateKind::Xnor => ins.iter().filter(|&&x| x).count() % 2 == 0,
        GateKind::Not => !ins[0],
        GateKind::Buf => ins[0],
        GateKind::Mux2 => {
            if ins[0] {
                ins[2]
            } else {
                ins[1]
            }
        }
        GateKind::Const0 => false,
        GateKind::Const1 => true,
    }
}

/// Scalar evaluation on word values ordered like `netlist.input_words()`;
/// returns the output word values. Panics on cyclic netlists.
pub fn eval_words_scalar(netlist: &Netlist, words: &[u64]) -> Vec<u64> {
    let mut inputs = vec![false; netlist.num_nets()];
    for (w, &x) in netlist.input_words().iter().zip(words) {
        for (i, b) in w.bits.iter().enumerate() {
            inputs[b.index()] = (x >> i) & 1 == 1;
        }
    }
    let pi: Vec<bool> = netlist.inputs().iter().map(|n| inputs[n.index()]).collect();
    let v = eval_scalar(netlist, &pi).expect("acyclic netlist");
    netlist
        .output_words()
        .iter()
        .map(|w| w.bits.iter().enumerate().fold(0u64, |acc, (i, b)| acc | ((v[b.index()] as u64) << i)))
        .collect()
}

/// Gate driving each net in topological position, used by analyses that
/// need the evaluation order without simulating.
pub fn gate_order(netlist: &Netlist) -> Result<Vec<GateId>, CycleError> {
    Ok(netlist.topo_order()?.to_vec())
}

/// Nets whose value does not depend on any primary input, found by
/// three-valued propagation with every input unknown.
pub fn structural_constants(netlist: &Netlist) -> Result<Vec<Option<bool>>, CycleError> {
    let mut v: Vec<Option<bool>> = vec![None; netlist.num_nets()];
    for &gid in netlist.topo_order()? {
        let g = netlist.gate(gid);
        let ins: Vec<Option<bool>> = g.inputs.iter().map(|i| v[i.index()]).collect();
        let known = || ins.iter().copied().collect::<Option<Vec<bool>>>();
        let and = |ins: &[Option<bool>]| {
            if ins.contains(&Some(false)) {
                Some(false)
            } else if ins.iter().all(|x| *x == Some(true)) {
                Some(true)
            } else {
                None
            }
        };
        let or = |ins: &[Option<bool>]| {
            if ins.contains(&Some(true)) {
                Some(true)
            } else if ins.iter().all(|x| *x == Some(false)) {
                Some(false)
            } else {
                None
            }
        };
        v[g.output.index()] = match g.kind {
            GateKind::And => and(&ins),
            GateKind::Nand => and(&ins).map(|x| !x),
            GateKind::Or => or(&ins),
            GateKind::Nor => or(&ins).map(|x| !x),
            GateKind::Mux2 => match ins[0] {
                Some(s) => ins[if s { 2 } else { 1 }],
                None if ins[1] == ins[2] => ins[1],
                None => None,
            },
            kind => known().map(|k| eval_gate_scalar(kind, &k)),
        };
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_propagate() {
        let n = crate::netlist::parse_netlist(
            "input a\ngate g0 CONST0 z\ngate g1 AND p a z\ngate g2 OR q a p\ngate g3 NOT r p\ngate g4 MUX2 y a r r\noutput q\noutput y\n",
        )
        .unwrap();
        let c = structural_constants(&n).unwrap();
        let at = |s: &str| c[n.find_net(s).unwrap().index()];
        assert_eq!((at("a"), at("p"), at("q"), at("r"), at("y")), (None, Some(false), None, Some(true), Some(true)));
    }
    use crate::arith::{exact_oracle, gen_adder, ArchParams, OpType};
    use crate::netlist::parse_netlist;

    #[test]
    fn xor_truth_table() {
        let n = parse_netlist("input a\ninput b\ngate g0 XOR y a b\noutput y\n").unwrap();
        let words = word_shape(&n.input_words());
        let s = VectorStream::from_vectors(&words, &[vec![0, 0], vec![0, 1], vec![1, 1]]);
        let r = simulate(&n, &s).unwrap();
        assert_eq!(r.outputs[0], vec![0, 1, 0]);
    }

    #[test]
    fn const1_trace_is_all_ones() {
        let n = parse_netlist("input a\ngate g0 CONST1 y\ngate g1 AND z a y\noutput z\n").unwrap();
        let s = VectorStream::for_netlist(&n, StreamSpec::new(100, 1, StreamMode::Uniform));
        let r = simulate(&n, &s).unwrap();
        let y = n.find_net("y").unwrap();
        assert!((0..100).all(|t| r.bit(y, t)));
        assert_eq!(r.trace(y)[1], (1u64 << 36) - 1);
    }

    #[test]
    fn exact_adder_matches_oracle_on_uniform_stream() {
        let n = gen_adder(&ArchParams::exact(OpType::Add, 4)).unwrap();
        let s = VectorStream::for_netlist(&n, StreamSpec::new(1000, 7, StreamMode::Uniform));
        let r = simulate(&n, &s).unwrap();
        for t in 0..1000 {
            assert_eq!(r.outputs[0][t], exact_oracle(OpType::Add, s.values[0][t], s.values[1][t], 4));
        }
    }

    #[test]
    fn mismatched_stream_rejected() {
        let n = gen_adder(&ArchParams::exact(OpType::Add, 4)).unwrap();
        let s = VectorStream::generate(&[("a".into(), 4), ("b".into(), 3)], StreamSpec::new(4, 0, StreamMode::Uniform));
        assert!(matches!(simulate(&n, &s), Err(SimError::StreamMismatch(_))));
        let s = VectorStream::generate(&[("a".into(), 4)], StreamSpec::new(4, 0, StreamMode::Uniform));
        assert!(matches!(simulate(&n, &s), Err(SimError::StreamMismatch(_))));
    }

    #[test]
    fn streams_are_deterministic() {
        let w = vec![("x".to_string(), 8), ("y".to_string(), 5)];
        for mode in [StreamMode::Uniform, StreamMode::Correlated { rho: 0.7 }] {
            let a = VectorStream::generate(&w, StreamSpec::new(500, 42, mode));
            let b = VectorStream::generate(&w, StreamSpec::new(500, 42, mode));
            assert_eq!(a, b);
            assert!(a.values[0].iter().all(|&v| v < 256) && a.values[1].iter().all(|&v| v < 32));
        }
    }

    #[test]
    fn rho_one_is_constant_after_first_vector() {
        let w = vec![("x".to_string(), 16)];
        let s = VectorStream::generate(&w, StreamSpec::new(300, 3, StreamMode::Correlated { rho: 1.0 }));
        assert!(s.values[0].iter().all(|&v| v == s.values[0][0]));
    }

    #[test]
    fn exhaustive_covers_everything() {
        let s = VectorStream::exhaustive(&[("a".into(), 2), ("b".into(), 3)]);
        assert_eq!(s.len(), 32);
        let mut seen: Vec<(u64, u64)> = (0..32).map(|t| (s.values[0][t], s.values[1][t])).collect();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 32);
    }
}
