//! Flat combinational gate-level netlists.
//!
//! Nets are single bits addressed by dense [`NetId`]s. Every net has exactly
//! one driver: a primary input or the output of a gate (constants are
//! zero-input gates). Word structure only exists as named groupings of
//! primary inputs and outputs, LSB first.
//!
//! A [`Netlist`] is immutable once built. Edits go through
//! [`Netlist::to_builder`], which hands back a private copy.

use std::collections::{BTreeMap, BinaryHeap, HashMap, HashSet};
use std::cmp::Reverse;
use std::fmt;
use std::sync::OnceLock;

use thiserror::Error;

pub mod flatten;
pub mod text;

pub use flatten::{flatten, Bit, Composite, Design, Instance, ModuleDef};
pub use text::{parse_netlist, serialize_netlist};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NetId(pub u32);

impl NetId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GateId(pub u32);

impl GateId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GateKind {
    And,
    Or,
    Nand,
    Nor,
    Xor,
    Xnor,
    Not,
    Buf,
    /// Inputs are `(select, a, b)`; the output is `a` when select is 0, `b` otherwise.
    Mux2,
    Const0,
    Const1,
}

impl GateKind {
    pub const ALL: [GateKind; 11] = [
        GateKind::And,
        GateKind::Or,
        GateKind::Nand,
        GateKind::Nor,
        GateKind::Xor,
        GateKind::Xnor,
        GateKind::Not,
        GateKind::Buf,
        GateKind::Mux2,
        GateKind::Const0,
        GateKind::Const1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GateKind::And => "AND",
            GateKind::Or => "OR",
            GateKind::Nand => "NAND",
            GateKind::Nor => "NOR",
            GateKind::Xor => "XOR",
            GateKind::Xnor => "XNOR",
            GateKind::Not => "NOT",
            GateKind::Buf => "BUF",
            GateKind::Mux2 => "MUX2",
            GateKind::Const0 => "CONST0",
            GateKind::Const1 => "CONST1",
        }
    }

    pub fn from_name(name: &str) -> Option<GateKind> {
        GateKind::ALL.into_iter().find(|k| k.name() == name)
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn arity_ok(self, n: usize) -> bool {
        match self {
            GateKind::Not | GateKind::Buf => n == 1,
            GateKind::Mux2 => n == 3,
            GateKind::Const0 | GateKind::Const1 => n == 0,
            _ => n >= 2,
        }
    }

    pub fn is_const(self) -> bool {
        matches!(self, GateKind::Const0 | GateKind::Const1)
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gate {
    pub name: String,
    pub kind: GateKind,
    pub inputs: Vec<NetId>,
    pub output: NetId,
    /// Hierarchical path of the module instance this gate came from, e.g. `top.mul3`.
    pub tag: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Word {
    pub name: String,
    /// LSB first.
    pub bits: Vec<NetId>,
}

impl Word {
    pub fn width(&self) -> usize {
        self.bits.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum InstanceKind {
    Approximate,
    Deterministic,
}

impl InstanceKind {
    pub fn label(self) -> &'static str {
        match self {
            InstanceKind::Approximate => "approximate",
            InstanceKind::Deterministic => "deterministic",
        }
    }

    pub fn from_label(s: &str) -> Option<InstanceKind> {
        match s {
            "approximate" => Some(InstanceKind::Approximate),
            "deterministic" => Some(InstanceKind::Deterministic),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceInfo {
    pub kind: InstanceKind,
    pub op_type: String,
    pub arch_id: String,
}

impl InstanceInfo {
    pub fn new(kind: InstanceKind, op_type: impl Into<String>, arch_id: impl Into<String>) -> Self {
        InstanceInfo { kind, op_type: op_type.into(), arch_id: arch_id.into() }
    }

    /// Entry used for gates that carry no explicit tag.
    pub fn glue() -> Self {
        InstanceInfo::new(InstanceKind::Deterministic, "glue", "none")
    }

    pub fn is_glue(&self) -> bool {
        self.op_type == "glue"
    }
}

pub const DEFAULT_TAG: &str = "top";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Driver {
    Input,
    Gate(GateId),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("combinational cycle through nets {nets:?}")]
pub struct CycleError {
    pub nets: Vec<NetId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetlistError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("{0}")]
    Semantic(String),
    #[error("gate {gate}: {kind} cannot take {got} inputs")]
    BadArity { gate: String, kind: GateKind, got: usize },
    #[error(transparent)]
    Cycle(#[from] CycleError),
    #[error("port mismatch on {instance}.{port}: {msg}")]
    PortMismatch { instance: String, port: String, msg: String },
    #[error("unknown module {0}")]
    UnknownModule(String),
}

#[derive(Debug, Clone)]
pub struct Netlist {
    net_names: Vec<String>,
    gates: Vec<Gate>,
    inputs: Vec<NetId>,
    outputs: Vec<NetId>,
    input_words: Vec<Word>,
    output_words: Vec<Word>,
    instances: BTreeMap<String, InstanceInfo>,
    drivers: Vec<Driver>,
    sinks: Vec<Vec<GateId>>,
    is_output: Vec<bool>,
    order: OnceLock<Result<Vec<GateId>, CycleError>>,
}

impl Netlist {
    pub fn num_nets(&self) -> usize {
        self.net_names.len()
    }

    pub fn num_gates(&self) -> usize {
        self.gates.len()
    }

    pub fn net_name(&self, net: NetId) -> &str {
        &self.net_names[net.index()]
    }

    pub fn net_names(&self) -> &[String] {
        &self.net_names
    }

    pub fn find_net(&self, name: &str) -> Option<NetId> {
        self.net_names.iter().position(|n| n == name).map(|i| NetId(i as u32))
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn gate(&self, id: GateId) -> &Gate {
        &self.gates[id.index()]
    }

    pub fn inputs(&self) -> &[NetId] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[NetId] {
        &self.outputs
    }

    /// Declared input words only.
    pub fn declared_input_words(&self) -> &[Word] {
        &self.input_words
    }

    pub fn declared_output_words(&self) -> &[Word] {
        &self.output_words
    }

    /// Declared input words followed by a one-bit word for every primary
    /// input not covered by a declaration.
    pub fn input_words(&self) -> Vec<Word> {
        effective_words(&self.input_words, &self.inputs, &self.net_names)
    }

    pub fn output_words(&self) -> Vec<Word> {
        effective_words(&self.output_words, &self.outputs, &self.net_names)
    }

    pub fn instances(&self) -> &BTreeMap<String, InstanceInfo> {
        &self.instances
    }

    pub fn driver(&self, net: NetId) -> Driver {
        self.drivers[net.index()]
    }

    pub fn driving_gate(&self, net: NetId) -> Option<GateId> {
        match self.drivers[net.index()] {
            Driver::Gate(g) => Some(g),
            Driver::Input => None,
        }
    }

    /// Gates reading `net`, one entry per distinct gate.
    pub fn sinks(&self, net: NetId) -> &[GateId] {
        &self.sinks[net.index()]
    }

    /// Number of gate input pins driven by `net`.
    pub fn fanout(&self, net: NetId) -> usize {
        self.sinks[net.index()]
            .iter()
            .map(|g| self.gates[g.index()].inputs.iter().filter(|&&n| n == net).count())
            .sum()
    }

    pub fn is_output(&self, net: NetId) -> bool {
        self.is_output[net.index()]
    }

    pub fn is_input(&self, net: NetId) -> bool {
        matches!(self.drivers[net.index()], Driver::Input)
    }

    pub fn net_tag(&self, net: NetId) -> Option<&str> {
        self.driving_gate(net).map(|g| self.gates[g.index()].tag.as_str())
    }

    /// Gate ids ordered so that every gate follows the gates driving its
    /// inputs. Ties are broken by ascending gate id.
    pub fn topo_order(&self) -> Result<&[GateId], CycleError> {
        self.order
            .get_or_init(|| compute_topo_order(self))
            .as_ref()
            .map(|v| v.as_slice())
            .map_err(Clone::clone)
    }

    /// The shortest hierarchical prefix of `tag` that names a non-glue
    /// instance, or `tag` itself. Groups sub-instance tags under the
    /// module instance that contains them.
    pub fn module_of<'a>(&self, tag: &'a str) -> &'a str {
        let mut end = 0;
        loop {
            let next = tag[end..].find('.').map(|p| end + p);
            let prefix = match next {
                Some(p) => &tag[..p],
                None => tag,
            };
            if let Some(info) = self.instances.get(prefix) {
                if !info.is_glue() {
                    return prefix;
                }
            }
            match next {
                Some(p) => end = p + 1,
                None => return tag,
            }
        }
    }

    /// Distinct module instances (see [`Netlist::module_of`]) in sorted order.
    pub fn modules(&self) -> Vec<String> {
        let mut out: Vec<String> =
            self.gates.iter().map(|g| self.module_of(&g.tag).to_string()).collect();
        out.sort();
        out.dedup();
        out
    }

    pub fn to_builder(&self) -> NetlistBuilder {
        let name_index = self
            .net_names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), NetId(i as u32)))
            .collect();
        NetlistBuilder {
            net_names: self.net_names.clone(),
            name_index,
            gates: self.gates.clone(),
            inputs: self.inputs.clone(),
            outputs: self.outputs.clone(),
            input_words: self.input_words.clone(),
            output_words: self.output_words.clone(),
            instances: self.instances.clone(),
            fresh_counter: self.net_names.len(),
            gate_names: self.gates.iter().map(|g| g.name.clone()).collect(),
        }
    }
}

/// Structural equality by names: two netlists are equal when they declare
/// the same ports, words, gates (name, kind, connectivity, tag) and
/// instance table, regardless of internal net numbering.
impl PartialEq for Netlist {
    fn eq(&self, other: &Self) -> bool {
        let names = |n: &Netlist, ids: &[NetId]| -> Vec<String> {
            ids.iter().map(|&i| n.net_name(i).to_string()).collect()
        };
        let words = |n: &Netlist, ws: &[Word]| -> Vec<(String, Vec<String>)> {
            ws.iter().map(|w| (w.name.clone(), names(n, &w.bits))).collect()
        };
        if names(self, &self.inputs) != names(other, &other.inputs)
            || names(self, &self.outputs) != names(other, &other.outputs)
            || words(self, &self.input_words) != words(other, &other.input_words)
            || words(self, &self.output_words) != words(other, &other.output_words)
            || self.instances != other.instances
            || self.gates.len() != other.gates.len()
        {
            return false;
        }
        self.gates.iter().zip(&other.gates).all(|(a, b)| {
            a.name == b.name
                && a.kind == b.kind
                && a.tag == b.tag
                && self.net_name(a.output) == other.net_name(b.output)
                && names(self, &a.inputs) == names(other, &b.inputs)
        })
    }
}

fn effective_words(declared: &[Word], ports: &[NetId], names: &[String]) -> Vec<Word> {
    let mut covered = vec![false; names.len()];
    for w in declared {
        for b in &w.bits {
            covered[b.index()] = true;
        }
    }
    let mut out = declared.to_vec();
    for &p in ports {
        if !covered[p.index()] {
            covered[p.index()] = true;
            out.push(Word { name: names[p.index()].clone(), bits: vec![p] });
        }
    }
    out
}

fn compute_topo_order(n: &Netlist) -> Result<Vec<GateId>, CycleError> {
    let ng = n.gates.len();
    let mut indeg = vec![0usize; ng];
    for (gi, g) in n.gates.iter().enumerate() {
        for &i in &g.inputs {
            if let Driver::Gate(_) = n.drivers[i.index()] {
                indeg[gi] += 1;
            }
        }
    }
    let mut ready: BinaryHeap<Reverse<u32>> = indeg
        .iter()
        .enumerate()
        .filter(|(_, &d)| d == 0)
        .map(|(i, _)| Reverse(i as u32))
        .collect();
    let mut order = Vec::with_capacity(ng);
    while let Some(Reverse(gi)) = ready.pop() {
        order.push(GateId(gi));
        let out = n.gates[gi as usize].output;
        for &s in &n.sinks[out.index()] {
            let pins = n.gates[s.index()].inputs.iter().filter(|&&x| x == out).count();
            indeg[s.index()] -= pins;
            if indeg[s.index()] == 0 {
                ready.push(Reverse(s.0));
            }
        }
    }
    if order.len() == ng {
        return Ok(order);
    }
    // Walk back through unresolved drivers until a gate repeats.
    let start = indeg.iter().position(|&d| d > 0).expect("unresolved gate");
    let mut seen: HashMap<usize, usize> = HashMap::new();
    let mut path: Vec<usize> = Vec::new();
    let mut cur = start;
    loop {
        if let Some(&pos) = seen.get(&cur) {
            let mut nets: Vec<NetId> = path[pos..].iter().map(|&g| n.gates[g].output).collect();
            nets.reverse();
            return Err(CycleError { nets });
        }
        seen.insert(cur, path.len());
        path.push(cur);
        cur = n.gates[cur]
            .inputs
            .iter()
            .filter_map(|&i| match n.drivers[i.index()] {
                Driver::Gate(g) if indeg[g.index()] > 0 => Some(g.index()),
                _ => None,
            })
            .next()
            .expect("unresolved gate has an unresolved driver");
    }
}

/// Incremental constructor for [`Netlist`].
#[derive(Debug, Clone, Default)]
pub struct NetlistBuilder {
    net_names: Vec<String>,
    name_index: HashMap<String, NetId>,
    gates: Vec<Gate>,
    inputs: Vec<NetId>,
    outputs: Vec<NetId>,
    input_words: Vec<Word>,
    output_words: Vec<Word>,
    instances: BTreeMap<String, InstanceInfo>,
    fresh_counter: usize,
    gate_names: HashSet<String>,
}

impl NetlistBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the net called `name`, creating it if needed.
    pub fn net(&mut self, name: &str) -> NetId {
        if let Some(&id) = self.name_index.get(name) {
            return id;
        }
        let id = NetId(self.net_names.len() as u32);
        self.net_names.push(name.to_string());
        self.name_index.insert(name.to_string(), id);
        id
    }

    pub fn has_net(&self, name: &str) -> bool {
        self.name_index.contains_key(name)
    }

    /// Creates a net with a name derived from `hint` that is not yet in use.
    pub fn fresh_net(&mut self, hint: &str) -> NetId {
        if !self.name_index.contains_key(hint) {
            return self.net(hint);
        }
        loop {
            let name = format!("{hint}_{}", self.fresh_counter);
            self.fresh_counter += 1;
            if !self.name_index.contains_key(&name) {
                return self.net(&name);
            }
        }
    }

    pub fn num_nets(&self) -> usize {
        self.net_names.len()
    }

    pub fn num_gates(&self) -> usize {
        self.gates.len()
    }

    pub fn net_name(&self, id: NetId) -> &str {
        &self.net_names[id.index()]
    }

    pub fn add_input(&mut self, name: &str) -> NetId {
        let id = self.net(name);
        self.inputs.push(id);
        id
    }

    pub fn add_output(&mut self, net: NetId) {
        self.outputs.push(net);
    }

    pub fn add_input_word(&mut self, name: &str, bits: Vec<NetId>) {
        self.input_words.push(Word { name: name.to_string(), bits });
    }

    pub fn add_output_word(&mut self, name: &str, bits: Vec<NetId>) {
        self.output_words.push(Word { name: name.to_string(), bits });
    }

    /// Declares `width` primary inputs `name[0]..name[width-1]` grouped as a word.
    pub fn input_word(&mut self, name: &str, width: usize) -> Vec<NetId> {
        let bits: Vec<NetId> = (0..width).map(|i| self.add_input(&format!("{name}[{i}]"))).collect();
        self.add_input_word(name, bits.clone());
        bits
    }

    /// Marks `bits` as primary outputs grouped under `name`.
    pub fn output_word(&mut self, name: &str, bits: Vec<NetId>) {
        for &b in &bits {
            self.outputs.push(b);
        }
        self.add_output_word(name, bits);
    }

    pub fn add_gate_named(
        &mut self,
        name: &str,
        kind: GateKind,
        inputs: Vec<NetId>,
        output: NetId,
        tag: &str,
    ) -> GateId {
        let id = GateId(self.gates.len() as u32);
        self.gate_names.insert(name.to_string());
        self.gates.push(Gate {
            name: name.to_string(),
            kind,
            inputs,
            output,
            tag: tag.to_string(),
        });
        id
    }

    pub fn add_gate(&mut self, kind: GateKind, inputs: Vec<NetId>, output: NetId, tag: &str) -> GateId {
        let name = self.fresh_gate_name();
        self.add_gate_named(&name, kind, inputs, output, tag)
    }

    /// Adds a gate driving a freshly created net and returns that net.
    pub fn gate(&mut self, kind: GateKind, inputs: Vec<NetId>, tag: &str) -> NetId {
        let out = self.fresh_net(&format!("n{}", self.net_names.len()));
        self.add_gate(kind, inputs, out, tag);
        out
    }

    fn fresh_gate_name(&self) -> String {
        let mut i = self.gates.len();
        loop {
            let name = format!("g{i}");
            if !self.gate_names.contains(&name) {
                return name;
            }
            i += 1;
        }
    }

    /// Makes `new` the primary output in place of `old`, including in words.
    pub fn replace_output(&mut self, old: NetId, new: NetId) {
        for o in self.outputs.iter_mut().filter(|o| **o == old) {
            *o = new;
        }
        for w in &mut self.output_words {
            for b in w.bits.iter_mut().filter(|b| **b == old) {
                *b = new;
            }
        }
    }

    /// Exchanges the names of two nets.
    pub fn swap_names(&mut self, a: NetId, b: NetId) {
        self.net_names.swap(a.index(), b.index());
        self.name_index.insert(self.net_names[a.index()].clone(), a);
        self.name_index.insert(self.net_names[b.index()].clone(), b);
    }

    pub fn set_instance(&mut self, tag: &str, info: InstanceInfo) {
        self.instances.insert(tag.to_string(), info);
    }

    pub fn instance(&self, tag: &str) -> Option<&InstanceInfo> {
        self.instances.get(tag)
    }

    pub fn finish(self) -> Result<Netlist, NetlistError> {
        let nn = self.net_names.len();
        let mut drivers: Vec<Option<Driver>> = vec![None; nn];
        for &i in &self.inputs {
            if drivers[i.index()].is_some() {
                return Err(NetlistError::Semantic(format!(
                    "net {} declared as input twice",
                    self.net_names[i.index()]
                )));
            }
            drivers[i.index()] = Some(Driver::Input);
        }
        let mut gate_names = HashMap::new();
        for (gi, g) in self.gates.iter().enumerate() {
            if !g.kind.arity_ok(g.inputs.len()) {
                return Err(NetlistError::BadArity { gate: g.name.clone(), kind: g.kind, got: g.inputs.len() });
            }
            if gate_names.insert(g.name.as_str(), gi).is_some() {
                return Err(NetlistError::Semantic(format!("duplicate gate id {}", g.name)));
            }
            let slot = &mut drivers[g.output.index()];
            if slot.is_some() {
                return Err(NetlistError::Semantic(format!(
                    "net {} has multiple drivers",
                    self.net_names[g.output.index()]
                )));
            }
            *slot = Some(Driver::Gate(GateId(gi as u32)));
            if !self.instances.contains_key(&g.tag) {
                return Err(NetlistError::Semantic(format!(
                    "gate {} has tag {} missing from the instance table",
                    g.name, g.tag
                )));
            }
        }
        let drivers: Vec<Driver> = drivers
            .into_iter()
            .enumerate()
            .map(|(i, d)| {
                d.ok_or_else(|| NetlistError::Semantic(format!("net {} is undriven", self.net_names[i])))
            })
            .collect::<Result<_, _>>()?;

        let mut is_output = vec![false; nn];
        for &o in &self.outputs {
            if is_output[o.index()] {
                return Err(NetlistError::Semantic(format!(
                    "net {} declared as output twice",
                    self.net_names[o.index()]
                )));
            }
            is_output[o.index()] = true;
        }
        for w in &self.input_words {
            if w.bits.is_empty() || w.bits.iter().any(|b| drivers[b.index()] != Driver::Input) {
                return Err(NetlistError::Semantic(format!("input word {} has non-input bits", w.name)));
            }
        }
        for w in &self.output_words {
            if w.bits.is_empty() || w.bits.iter().any(|b| !is_output[b.index()]) {
                return Err(NetlistError::Semantic(format!("output word {} has non-output bits", w.name)));
            }
        }

        let mut sinks: Vec<Vec<GateId>> = vec![Vec::new(); nn];
        for (gi, g) in self.gates.iter().enumerate() {
            for &i in &g.inputs {
                let s = &mut sinks[i.index()];
                if s.last() != Some(&GateId(gi as u32)) {
                    s.push(GateId(gi as u32));
                }
            }
        }
        Ok(Netlist {
            net_names: self.net_names,
            gates: self.gates,
            inputs: self.inputs,
            outputs: self.outputs,
            input_words: self.input_words,
            output_words: self.output_words,
            instances: self.instances,
            drivers,
            sinks,
            is_output,
            order: OnceLock::new(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tagged() -> NetlistBuilder {
        let mut b = NetlistBuilder::new();
        b.set_instance(DEFAULT_TAG, InstanceInfo::glue());
        b
    }

    #[test]
    fn single_and_gate_order() {
        let mut b = tagged();
        let a = b.add_input("a");
        let c = b.add_input("b");
        let y = b.gate(GateKind::And, vec![a, c], DEFAULT_TAG);
        b.add_output(y);
        let n = b.finish().unwrap();
        assert_eq!(n.topo_order().unwrap(), &[GateId(0)]);
    }

    #[test]
    fn not_loop_is_a_cycle() {
        let mut b = tagged();
        let x = b.net("x");
        let y = b.net("y");
        b.add_gate(GateKind::Not, vec![y], x, DEFAULT_TAG);
        b.add_gate(GateKind::Not, vec![x], y, DEFAULT_TAG);
        let n = b.finish().unwrap();
        let err = n.topo_order().unwrap_err();
        let mut nets = err.nets.clone();
        nets.sort();
        assert_eq!(nets, vec![x, y]);
    }

    #[test]
    fn chain_order_follows_dependencies() {
        // Gates are declared out of order so the sort has to reorder them.
        let mut b = tagged();
        let a = b.add_input("a");
        let n1 = b.net("n1");
        let n2 = b.net("n2");
        let n3 = b.net("n3");
        b.add_gate(GateKind::Buf, vec![n2], n3, DEFAULT_TAG);
        b.add_gate(GateKind::Not, vec![n1], n2, DEFAULT_TAG);
        b.add_gate(GateKind::Buf, vec![a], n1, DEFAULT_TAG);
        b.add_output(n3);
        let n = b.finish().unwrap();
        assert_eq!(n.topo_order().unwrap(), &[GateId(2), GateId(1), GateId(0)]);
    }

    #[test]
    fn arity_is_checked() {
        let mut b = tagged();
        let a = b.add_input("a");
        b.gate(GateKind::And, vec![a], DEFAULT_TAG);
        assert!(matches!(b.finish(), Err(NetlistError::BadArity { .. })));
    }

    #[test]
    fn double_driver_rejected() {
        let mut b = tagged();
        let a = b.add_input("a");
        b.add_gate(GateKind::Not, vec![a], a, DEFAULT_TAG);
        assert!(matches!(b.finish(), Err(NetlistError::Semantic(_))));
    }

    #[test]
    fn undriven_net_rejected() {
        let mut b = tagged();
        let a = b.add_input("a");
        let floating = b.net("floating");
        b.gate(GateKind::And, vec![a, floating], DEFAULT_TAG);
        let err = b.finish().unwrap_err();
        assert!(err.to_string().contains("floating"));
    }

    #[test]
    fn module_grouping_skips_glue() {
        let mut b = tagged();
        b.set_instance("top.mul2", InstanceInfo::new(InstanceKind::Approximate, "mul", "exact"));
        b.set_instance("top.mul2.aux", InstanceInfo::new(InstanceKind::Approximate, "mul", "exact"));
        let a = b.add_input("a");
        let x = b.gate(GateKind::Not, vec![a], "top.mul2.aux");
        let y = b.gate(GateKind::Not, vec![x], "top.mul2");
        let z = b.gate(GateKind::Buf, vec![y], "top");
        b.add_output(z);
        let n = b.finish().unwrap();
        assert_eq!(n.module_of("top.mul2.aux"), "top.mul2");
        assert_eq!(n.module_of("top"), "top");
        assert_eq!(n.modules(), vec!["top".to_string(), "top.mul2".to_string()]);
        assert_eq!(n.fanout(a), 1);
        assert_eq!(n.fanout(z), 0);
    }
}
