//! Hierarchical composition of netlists and flattening into a single [`Netlist`].

use std::collections::{BTreeMap, HashMap};

use super::{
    GateKind, InstanceInfo, InstanceKind, NetId, Netlist, NetlistBuilder, NetlistError,
};

/// One bit of a connection inside a [`Composite`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Bit {
    /// Bit `i` of an input port of the enclosing composite.
    Port(String, usize),
    /// Bit `i` of output word `port` of child instance `inst`.
    Inst { inst: String, port: String, bit: usize },
    Const(bool),
}

impl Bit {
    pub fn port(name: &str, bit: usize) -> Bit {
        Bit::Port(name.to_string(), bit)
    }

    pub fn inst(inst: &str, port: &str, bit: usize) -> Bit {
        Bit::Inst { inst: inst.to_string(), port: port.to_string(), bit }
    }

    pub fn word(port: &str, width: usize) -> Vec<Bit> {
        (0..width).map(|i| Bit::port(port, i)).collect()
    }

    pub fn inst_word(inst: &str, port: &str, width: usize) -> Vec<Bit> {
        (0..width).map(|i| Bit::inst(inst, port, i)).collect()
    }
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub name: String,
    pub module: String,
    /// Connection of each child input word.
    pub inputs: BTreeMap<String, Vec<Bit>>,
}

#[derive(Debug, Clone, Default)]
pub struct Composite {
    pub inputs: Vec<(String, usize)>,
    pub outputs: Vec<(String, Vec<Bit>)>,
    pub instances: Vec<Instance>,
}

#[derive(Debug, Clone)]
pub enum ModuleDef {
    Leaf(Netlist),
    Composite(Composite),
}

#[derive(Debug, Clone)]
pub struct Design {
    /// Name of the top module; also the root of every hierarchical tag.
    pub top: String,
    pub modules: BTreeMap<String, ModuleDef>,
}

impl Design {
    pub fn new(top: &str) -> Self {
        Design { top: top.to_string(), modules: BTreeMap::new() }
    }

    pub fn add(&mut self, name: &str, def: ModuleDef) {
        self.modules.insert(name.to_string(), def);
    }
}

/// Elaborates `design` into one flat netlist whose gate tags are hierarchical
/// instance paths rooted at the top module name.
pub fn flatten(design: &Design) -> Result<Netlist, NetlistError> {
    let top = design
        .modules
        .get(&design.top)
        .ok_or_else(|| NetlistError::UnknownModule(design.top.clone()))?;
    let mut b = NetlistBuilder::new();
    let mut ports = HashMap::new();
    let top_inputs: Vec<(String, usize)> = match top {
        ModuleDef::Composite(c) => c.inputs.clone(),
        ModuleDef::Leaf(n) => n.input_words().iter().map(|w| (w.name.clone(), w.width())).collect(),
    };
    for (name, width) in &top_inputs {
        let bits = b.input_word(name, *width);
        ports.insert(name.clone(), bits);
    }
    let outs = elaborate(design, &design.top, &design.top, &ports, &mut b, 0)?;
    let mut used = vec![false; b.num_nets()];
    for (name, bits) in outs {
        let mut word = Vec::with_capacity(bits.len());
        for net in bits {
            // A primary output must be a distinct, gate-driven net.
            let net = if used[net.index()] || b.is_input_net(net) {
                let buf = b.fresh_net(&format!("{name}_buf"));
                used.resize(b.num_nets(), false);
                b.set_instance(&design.top, InstanceInfo::glue());
                b.add_gate(GateKind::Buf, vec![net], buf, &design.top);
                buf
            } else {
                net
            };
            used[net.index()] = true;
            word.push(net);
        }
        b.output_word(&name, word);
    }
    b.finish()
}

const MAX_DEPTH: usize = 64;

fn elaborate(
    design: &Design,
    module: &str,
    path: &str,
    ports: &HashMap<String, Vec<NetId>>,
    b: &mut NetlistBuilder,
    depth: usize,
) -> Result<Vec<(String, Vec<NetId>)>, NetlistError> {
    if depth > MAX_DEPTH {
        return Err(NetlistError::Semantic(format!("instance nesting too deep at {path}")));
    }
    let def = design.modules.get(module).ok_or_else(|| NetlistError::UnknownModule(module.to_string()))?;
    match def {
        ModuleDef::Leaf(n) => elaborate_leaf(n, path, ports, b),
        ModuleDef::Composite(c) => elaborate_composite(design, c, path, ports, b, depth),
    }
}

fn elaborate_leaf(
    n: &Netlist,
    path: &str,
    ports: &HashMap<String, Vec<NetId>>,
    b: &mut NetlistBuilder,
) -> Result<Vec<(String, Vec<NetId>)>, NetlistError> {
    let mut map: Vec<Option<NetId>> = vec![None; n.num_nets()];
    for w in n.input_words() {
        let bits = ports.get(&w.name).ok_or_else(|| NetlistError::PortMismatch {
            instance: path.to_string(),
            port: w.name.clone(),
            msg: "input port left unconnected".into(),
        })?;
        for (&child, &parent) in w.bits.iter().zip(bits) {
            map[child.index()] = Some(parent);
        }
    }
    let single_tag = n.instances().len() <= 1;
    let retag = |t: &str| if single_tag { path.to_string() } else { format!("{path}.{t}") };
    for (tag, info) in n.instances() {
        b.set_instance(&retag(tag), info.clone());
    }
    if n.instances().is_empty() && n.num_gates() > 0 {
        b.set_instance(path, InstanceInfo::glue());
    }
    for id in 0..n.num_nets() {
        if map[id].is_none() {
            let name = format!("{path}/{}", n.net_names()[id]);
            map[id] = Some(b.fresh_net(&name));
        }
    }
    for g in n.gates() {
        let ins = g.inputs.iter().map(|i| map[i.index()].unwrap()).collect();
        let name = format!("{path}/{}", g.name);
        b.add_gate_named(&name, g.kind, ins, map[g.output.index()].unwrap(), &retag(&g.tag));
    }
    Ok(n
        .output_words()
        .into_iter()
        .map(|w| (w.name, w.bits.iter().map(|i| map[i.index()].unwrap()).collect()))
        .collect())
}

fn elaborate_composite(
    design: &Design,
    c: &Composite,
    path: &str,
    ports: &HashMap<String, Vec<NetId>>,
    b: &mut NetlistBuilder,
    depth: usize,
) -> Result<Vec<(String, Vec<NetId>)>, NetlistError> {
    for (name, width) in &c.inputs {
        let got = ports.get(name).map(|v| v.len());
        if got != Some(*width) {
            return Err(NetlistError::PortMismatch {
                instance: path.to_string(),
                port: name.clone(),
                msg: format!("expected width {width}, got {got:?}"),
            });
        }
    }
    let mut consts: [Option<NetId>; 2] = [None, None];
    let mut inst_outputs: HashMap<String, HashMap<String, Vec<NetId>>> = HashMap::new();
    let mut pending: Vec<&Instance> = c.instances.iter().collect();

    while !pending.is_empty() {
        let before = pending.len();
        let mut still = Vec::new();
        for inst in pending {
            let ready = inst.inputs.values().flatten().all(|bit| match bit {
                Bit::Inst { inst: src, .. } => inst_outputs.contains_key(src),
                _ => true,
            });
            if !ready {
                still.push(inst);
                continue;
            }
            let child_path = format!("{path}.{}", inst.name);
            let expected = child_input_widths(design, &inst.module)?;
            let mut child_ports = HashMap::new();
            for (port, width) in &expected {
                let bits = inst.inputs.get(port).ok_or_else(|| NetlistError::PortMismatch {
                    instance: child_path.clone(),
                    port: port.clone(),
                    msg: "input port left unconnected".into(),
                })?;
                if bits.len() != *width {
                    return Err(NetlistError::PortMismatch {
                        instance: child_path.clone(),
                        port: port.clone(),
                        msg: format!("expected width {width}, got {}", bits.len()),
                    });
                }
                let nets = bits
                    .iter()
                    .map(|bit| resolve(bit, path, ports, &inst_outputs, &mut consts, b))
                    .collect::<Result<Vec<_>, _>>()?;
                child_ports.insert(port.clone(), nets);
            }
            if let Some(extra) = inst.inputs.keys().find(|k| !expected.iter().any(|(p, _)| p == *k)) {
                return Err(NetlistError::PortMismatch {
                    instance: child_path,
                    port: extra.clone(),
                    msg: "no such input port".into(),
                });
            }
            let outs = elaborate(design, &inst.module, &child_path, &child_ports, b, depth + 1)?;
            inst_outputs.insert(inst.name.clone(), outs.into_iter().collect());
        }
        if still.len() == before {
            return Err(NetlistError::Semantic(format!(
                "instances in {path} form a loop or reference unknown instances: {}",
                still.iter().map(|i| i.name.as_str()).collect::<Vec<_>>().join(", ")
            )));
        }
        pending = still;
    }

    c.outputs
        .iter()
        .map(|(name, bits)| {
            let nets = bits
                .iter()
                .map(|bit| resolve(bit, path, ports, &inst_outputs, &mut consts, b))
                .collect::<Result<Vec<_>, _>>()?;
            Ok((name.clone(), nets))
        })
        .collect()
}

fn child_input_widths(design: &Design, module: &str) -> Result<Vec<(String, usize)>, NetlistError> {
    match design.modules.get(module) {
        Some(ModuleDef::Leaf(n)) => Ok(n.input_words().iter().map(|w| (w.name.clone(), w.width())).collect()),
        Some(ModuleDef::Composite(c)) => Ok(c.inputs.clone()),
        None => Err(NetlistError::UnknownModule(module.to_string())),
    }
}

fn resolve(
    bit: &Bit,
    path: &str,
    ports: &HashMap<String, Vec<NetId>>,
    inst_outputs: &HashMap<String, HashMap<String, Vec<NetId>>>,
    consts: &mut [Option<NetId>; 2],
    b: &mut NetlistBuilder,
) -> Result<NetId, NetlistError> {
    let mismatch = |port: &str, msg: String| NetlistError::PortMismatch {
        instance: path.to_string(),
        port: port.to_string(),
        msg,
    };
    match bit {
        Bit::Port(name, i) => ports
            .get(name)
            .and_then(|v| v.get(*i).copied())
            .ok_or_else(|| mismatch(name, format!("no bit {i}"))),
        Bit::Inst { inst, port, bit } => inst_outputs
            .get(inst)
            .and_then(|o| o.get(port))
            .and_then(|v| v.get(*bit).copied())
            .ok_or_else(|| mismatch(&format!("{inst}.{port}"), format!("no output bit {bit}"))),
        Bit::Const(v) => {
            let slot = &mut consts[*v as usize];
            if let Some(n) = *slot {
                return Ok(n);
            }
            if b.instance(path).is_none() {
                b.set_instance(path, InstanceInfo::new(InstanceKind::Deterministic, "glue", "const"));
            }
            let kind = if *v { GateKind::Const1 } else { GateKind::Const0 };
            let net = b.fresh_net(&format!("{path}/const{}", *v as u8));
            b.add_gate(kind, vec![], net, path);
            *slot = Some(net);
            Ok(net)
        }
    }
}

impl NetlistBuilder {
    fn is_input_net(&self, net: NetId) -> bool {
        self.inputs.contains(&net)
    }
}
