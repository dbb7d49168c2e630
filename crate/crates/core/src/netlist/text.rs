//! Line-oriented text format.
//!
//! ```text
//! input <name>
//! output <name>
//! word <name> <bit0> <bit1> ...        # LSB first
//! gate <id> <KIND> <out_net> <in_net>...
//! tag <gate_id> <instance_tag>
//! inst <tag> <approximate|deterministic> <op_type> <arch_id>
//! ```
//!
//! Gates without a `tag` line belong to the `top` glue instance.

use std::collections::HashMap;
use std::fmt::Write;

use super::{
    GateKind, InstanceInfo, InstanceKind, Netlist, NetlistBuilder, NetlistError, DEFAULT_TAG,
};

pub fn parse_netlist(text: &str) -> Result<Netlist, NetlistError> {
    let mut b = NetlistBuilder::new();
    let mut gate_lines: HashMap<String, usize> = HashMap::new();
    let mut tags: Vec<(usize, String, String)> = Vec::new();
    let mut words: Vec<(usize, String, Vec<String>)> = Vec::new();
    let mut outputs: Vec<(usize, String)> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        let toks: Vec<&str> = content.split_whitespace().collect();
        let Some((&kw, rest)) = toks.split_first() else { continue };
        let syntax = |msg: &str| NetlistError::Syntax { line, msg: msg.to_string() };
        match kw {
            "input" => {
                let [name] = rest else { return Err(syntax("expected `input <name>`")) };
                b.add_input(name);
            }
            "output" => {
                let [name] = rest else { return Err(syntax("expected `output <name>`")) };
                outputs.push((line, name.to_string()));
            }
            "word" => {
                if rest.len() < 2 {
                    return Err(syntax("expected `word <name> <bit0> ...`"));
                }
                words.push((line, rest[0].to_string(), rest[1..].iter().map(|s| s.to_string()).collect()));
            }
            "gate" => {
                if rest.len() < 3 {
                    return Err(syntax("expected `gate <id> <KIND> <out> <in>...`"));
                }
                let kind = GateKind::from_name(rest[1])
                    .ok_or_else(|| syntax(&format!("unknown gate kind {}", rest[1])))?;
                let out = b.net(rest[2]);
                let ins = rest[3..].iter().map(|n| b.net(n)).collect();
                if gate_lines.insert(rest[0].to_string(), b.num_gates()).is_some() {
                    return Err(NetlistError::Semantic(format!("line {line}: duplicate gate id {}", rest[0])));
                }
                b.add_gate_named(rest[0], kind, ins, out, DEFAULT_TAG);
            }
            "tag" => {
                let [gate, tag] = rest else { return Err(syntax("expected `tag <gate_id> <instance_tag>`")) };
                tags.push((line, gate.to_string(), tag.to_string()));
            }
            "inst" => {
                let [tag, kind, op, arch] = rest else {
                    return Err(syntax("expected `inst <tag> <kind> <op_type> <arch_id>`"));
                };
                let kind = InstanceKind::from_label(kind)
                    .ok_or_else(|| syntax(&format!("unknown instance kind {kind}")))?;
                b.set_instance(tag, InstanceInfo::new(kind, *op, *arch));
            }
            other => return Err(syntax(&format!("unknown statement {other}"))),
        }
    }

    let mut gates_tagged = b.gate_tags();
    for (line, gate, tag) in tags {
        let gi = *gate_lines
            .get(&gate)
            .ok_or_else(|| NetlistError::Semantic(format!("line {line}: tag for unknown gate {gate}")))?;
        gates_tagged[gi] = tag;
    }
    b.set_gate_tags(gates_tagged);
    if b.gate_tags().iter().any(|t| t == DEFAULT_TAG) && b.instance(DEFAULT_TAG).is_none() {
        b.set_instance(DEFAULT_TAG, InstanceInfo::glue());
    }

    for (line, name) in outputs {
        if !b.has_net(&name) {
            return Err(NetlistError::Semantic(format!("line {line}: output {name} is undriven")));
        }
        let id = b.net(&name);
        b.add_output(id);
    }

    // A word made entirely of primary inputs groups inputs; otherwise it groups outputs.
    let input_set: std::collections::HashSet<_> = b.input_ids().iter().copied().collect();
    for (line, name, bits) in words {
        if let Some(missing) = bits.iter().find(|n| !b.has_net(n)) {
            return Err(NetlistError::Semantic(format!("line {line}: word {name} names unknown net {missing}")));
        }
        let ids: Vec<_> = bits.iter().map(|n| b.net(n)).collect();
        if ids.iter().all(|i| input_set.contains(i)) {
            b.add_input_word(&name, ids);
        } else {
            b.add_output_word(&name, ids);
        }
    }
    b.finish()
}

pub fn serialize_netlist(n: &Netlist) -> String {
    let mut s = String::new();
    for &i in n.inputs() {
        writeln!(s, "input {}", n.net_name(i)).unwrap();
    }
    for &o in n.outputs() {
        writeln!(s, "output {}", n.net_name(o)).unwrap();
    }
    for w in n.declared_input_words().iter().chain(n.declared_output_words()) {
        write!(s, "word {}", w.name).unwrap();
        for &b in &w.bits {
            write!(s, " {}", n.net_name(b)).unwrap();
        }
        s.push('\n');
    }
    for g in n.gates() {
        write!(s, "gate {} {} {}", g.name, g.kind, n.net_name(g.output)).unwrap();
        for &i in &g.inputs {
            write!(s, " {}", n.net_name(i)).unwrap();
        }
        s.push('\n');
    }
    for g in n.gates() {
        writeln!(s, "tag {} {}", g.name, g.tag).unwrap();
    }
    for (tag, info) in n.instances() {
        writeln!(s, "inst {} {} {} {}", tag, info.kind.label(), info.op_type, info.arch_id).unwrap();
    }
    s
}

impl NetlistBuilder {
    fn gate_tags(&self) -> Vec<String> {
        self.gates.iter().map(|g| g.tag.clone()).collect()
    }

    fn set_gate_tags(&mut self, tags: Vec<String>) {
        for (g, t) in self.gates.iter_mut().zip(tags) {
            g.tag = t;
        }
    }

    fn input_ids(&self) -> &[super::NetId] {
        &self.inputs
    }
}
