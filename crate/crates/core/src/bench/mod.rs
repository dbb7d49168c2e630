//! Benchmark designs and the end-to-end experiment driver.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::arith::{gen_module, ArchId, ArchParams, ArithError, OpType};
use crate::netlist::{
    flatten, Bit, Composite, Design, GateKind, Instance, InstanceInfo, InstanceKind, ModuleDef, NetId, Netlist,
    NetlistBuilder, NetlistError,
};

pub mod experiment;
pub mod variants;

pub use experiment::{run_experiment, ExperimentConfig, ExperimentOutcome};
pub use variants::{characterize_library, generate_variants, CharLibrary, Library, Variant};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("bad design parameters: {0}")]
    BadParams(String),
    #[error("no architecture assignment satisfies the budget")]
    BudgetInfeasible,
    #[error(transparent)]
    Arith(#[from] ArithError),
    #[error(transparent)]
    Netlist(#[from] NetlistError),
    #[error(transparent)]
    Attack(#[from] crate::attack::AttackError),
    #[error(transparent)]
    Sim(#[from] crate::sim::SimError),
    #[error(transparent)]
    Detect(#[from] crate::detect::DetectError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Csv(#[from] csv::Error),
}

/// Architecture chosen for one operator type, independent of width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ArchChoice {
    pub arch_id: ArchId,
    pub k: usize,
    pub loa_and_carry: bool,
}

impl ArchChoice {
    pub const EXACT: ArchChoice = ArchChoice { arch_id: ArchId::Exact, k: 0, loa_and_carry: false };

    pub fn new(arch_id: ArchId, k: usize) -> Self {
        ArchChoice { arch_id, k, loa_and_carry: false }
    }

    pub fn params(&self, op: OpType, width: usize) -> ArchParams {
        ArchParams { op_type: op, arch_id: self.arch_id, width, k: self.k, loa_and_carry: self.loa_and_carry }
    }

    pub fn label(&self) -> String {
        self.params(OpType::Add, 2).label()
    }
}

impl fmt::Display for ArchChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for ArchChoice {
    type Err = ArithError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let p = ArchParams::from_label(OpType::Add, s, 2)?;
        Ok(ArchChoice { arch_id: p.arch_id, k: p.k, loa_and_carry: p.loa_and_carry })
    }
}

/// Architecture per operator type; subtractors follow the adder choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Assignment {
    pub mul: ArchChoice,
    pub add: ArchChoice,
}

impl Assignment {
    pub const EXACT: Assignment = Assignment { mul: ArchChoice::EXACT, add: ArchChoice::EXACT };

    pub fn for_op(&self, op: OpType) -> ArchChoice {
        match op {
            OpType::Mul => self.mul,
            OpType::Add | OpType::Sub => self.add,
        }
    }

    pub fn label(&self) -> String {
        format!("mul={};add={}", self.mul, self.add)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DesignKind {
    Fir { taps: usize, coeffs: Vec<u64>, width: usize },
    FftBfly { width: usize, twiddle: u64 },
}

impl DesignKind {
    pub fn fir_default() -> Self {
        DesignKind::Fir { taps: 4, coeffs: vec![45, 113, 171, 29], width: 8 }
    }

    pub fn fft_default() -> Self {
        DesignKind::FftBfly { width: 8, twiddle: 181 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DesignKind::Fir { .. } => "fir",
            DesignKind::FftBfly { .. } => "fft",
        }
    }

    pub fn width(&self) -> usize {
        match self {
            DesignKind::Fir { width, .. } | DesignKind::FftBfly { width, .. } => *width,
        }
    }

    /// Constant words of the design, in instance order.
    pub fn constants(&self) -> Vec<u64> {
        match self {
            DesignKind::Fir { coeffs, .. } => coeffs.clone(),
            DesignKind::FftBfly { twiddle, .. } => vec![*twiddle],
        }
    }

    /// Module tags holding the constant words, matching [`DesignKind::constants`].
    pub fn constant_tags(&self) -> Vec<String> {
        match self {
            DesignKind::Fir { taps, .. } => (0..*taps).map(|i| format!("top.coeff{i}")).collect(),
            DesignKind::FftBfly { .. } => vec!["top.tw".to_string()],
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::BadParams(m));
        let w = self.width();
        if !(2..=16).contains(&w) {
            return bad(format!("width {w} outside 2..=16"));
        }
        match self {
            DesignKind::Fir { taps, coeffs, .. } => {
                if *taps == 0 || *taps > 16 {
                    return bad(format!("tap count {taps} outside 1..=16"));
                }
                if coeffs.len() != *taps {
                    return bad(format!("{} coefficients for {taps} taps", coeffs.len()));
                }
                if let Some(c) = coeffs.iter().find(|&&c| c >> w != 0) {
                    return bad(format!("coefficient {c} does not fit in {w} bits"));
                }
            }
            DesignKind::FftBfly { twiddle, .. } => {
                if twiddle >> w != 0 {
                    return bad(format!("twiddle {twiddle} does not fit in {w} bits"));
                }
            }
        }
        Ok(())
    }

    /// Integer reference: output words for input words ordered as the
    /// flattened netlist's `input_words()`.
    pub fn reference(&self, inputs: &[u64]) -> Vec<u64> {
        match self {
            DesignKind::Fir { coeffs, .. } => vec![inputs.iter().zip(coeffs).map(|(x, c)| x * c).sum()],
            DesignKind::FftBfly { width, twiddle } => {
                let (a, b) = (inputs[0], inputs[1]);
                let p = (b * twiddle) & ((1u64 << width) - 1);
                let m = (1u64 << (width + 1)) - 1;
                vec![a + p, a.wrapping_sub(p) & m]
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DesignConfig {
    pub design: DesignKind,
    pub assignment: Assignment,
}

/// A leaf that drives the constant `value` on output word `c`.
pub fn constant_leaf(value: u64, width: usize) -> Netlist {
    let mut b = NetlistBuilder::new();
    let bits: Vec<NetId> = (0..width)
        .map(|i| {
            let net = b.net(&format!("c[{i}]"));
            let kind = if (value >> i) & 1 == 1 { GateKind::Const1 } else { GateKind::Const0 };
            b.add_gate_named(&format!("k{i}"), kind, vec![], net, "coeff");
            net
        })
        .collect();
    b.output_word("c", bits);
    b.set_instance("coeff", InstanceInfo::new(InstanceKind::Deterministic, "const", format!("c{value}")));
    b.finish().expect("constant leaf is well formed")
}

struct DesignBuilder {
    design: Design,
    top: Composite,
    assignment: Assignment,
    ops: Vec<Operator>,
}

/// One arithmetic instance of a design.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Operator {
    /// Instance tag in the flattened netlist, e.g. `top.mul0`.
    pub tag: String,
    pub op: OpType,
    pub width: usize,
}

impl DesignBuilder {
    fn new(assignment: Assignment, inputs: Vec<(String, usize)>) -> Self {
        DesignBuilder {
            design: Design::new("top"),
            top: Composite { inputs, ..Composite::default() },
            assignment,
            ops: Vec::new(),
        }
    }

    /// Adds an arithmetic instance and returns its output word.
    fn arith(&mut self, name: &str, op: OpType, width: usize, a: Vec<Bit>, b: Vec<Bit>) -> Result<Vec<Bit>, BenchError> {
        let p = self.assignment.for_op(op).params(op, width);
        let module = format!("{}{}_{}", op.name(), width, p.label());
        if !self.design.modules.contains_key(&module) {
            self.design.add(&module, ModuleDef::Leaf(gen_module(&p)?));
        }
        let inputs = BTreeMap::from([("a".to_string(), a), ("b".to_string(), b)]);
        self.top.instances.push(Instance { name: name.to_string(), module, inputs });
        self.ops.push(Operator { tag: format!("top.{name}"), op, width });
        Ok(Bit::inst_word(name, op.output_name(), op.output_width(width)))
    }

    fn constant(&mut self, name: &str, value: u64, width: usize) -> Vec<Bit> {
        let module = format!("const{width}_{value}");
        if !self.design.modules.contains_key(&module) {
            self.design.add(&module, ModuleDef::Leaf(constant_leaf(value, width)));
        }
        self.top.instances.push(Instance { name: name.to_string(), module, inputs: BTreeMap::new() });
        Bit::inst_word(name, "c", width)
    }

    fn finish(mut self, outputs: Vec<(String, Vec<Bit>)>) -> (Design, Vec<Operator>) {
        self.top.outputs = outputs;
        self.design.add("top", ModuleDef::Composite(self.top));
        (self.design, self.ops)
    }
}

fn pad(mut v: Vec<Bit>, width: usize) -> Vec<Bit> {
    v.resize(width, Bit::Const(false));
    v
}

pub fn gen_design(config: &DesignConfig) -> Result<Design, BenchError> {
    Ok(gen_design_ops(config)?.0)
}

/// Arithmetic instances of `design` in creation order.
pub fn operators(design: &DesignKind) -> Result<Vec<Operator>, BenchError> {
    let config = DesignConfig { design: design.clone(), assignment: Assignment::EXACT };
    Ok(gen_design_ops(&config)?.1)
}

fn gen_design_ops(config: &DesignConfig) -> Result<(Design, Vec<Operator>), BenchError> {
    config.design.validate()?;
    match &config.design {
        DesignKind::Fir { taps, coeffs, width } => {
            let w = *width;
            let inputs = (0..*taps).map(|i| (format!("x{i}"), w)).collect();
            let mut d = DesignBuilder::new(config.assignment, inputs);
            let mut level = Vec::new();
            for (i, &c) in coeffs.iter().enumerate() {
                let cw = d.constant(&format!("coeff{i}"), c, w);
                level.push(d.arith(&format!("mul{i}"), OpType::Mul, w, Bit::word(&format!("x{i}"), w), cw)?);
            }
            let mut n_add = 0;
            while level.len() > 1 {
                let mut next = Vec::new();
                let mut it = level.into_iter();
                while let Some(a) = it.next() {
                    match it.next() {
                        Some(b) => {
                            let aw = a.len().max(b.len());
                            let s = d.arith(&format!("add{n_add}"), OpType::Add, aw, pad(a, aw), pad(b, aw))?;
                            n_add += 1;
                            next.push(s);
                        }
                        None => next.push(a),
                    }
                }
                level = next;
            }
            let y = level.pop().expect("at least one tap");
            Ok(d.finish(vec![("y".to_string(), y)]))
        }
        DesignKind::FftBfly { width, twiddle } => {
            let w = *width;
            let mut d = DesignBuilder::new(config.assignment, vec![("a".into(), w), ("b".into(), w)]);
            let tw = d.constant("tw", *twiddle, w);
            let mut p = d.arith("mul0", OpType::Mul, w, Bit::word("b", w), tw)?;
            p.truncate(w);
            let x = d.arith("add0", OpType::Add, w, Bit::word("a", w), p.clone())?;
            let y = d.arith("sub0", OpType::Sub, w, Bit::word("a", w), p)?;
            Ok(d.finish(vec![("X".to_string(), x), ("Y".to_string(), y)]))
        }
    }
}

pub fn build_netlist(config: &DesignConfig) -> Result<Netlist, BenchError> {
    Ok(flatten(&gen_design(config)?)?)
}

/// Nets carrying the design's constant words, LSB first, in instance order.
pub fn constant_nets(netlist: &Netlist, design: &DesignKind) -> Vec<Vec<NetId>> {
    let w = design.width();
    design
        .constant_tags()
        .iter()
        .map(|tag| {
            (0..w)
                .map(|i| netlist.find_net(&format!("{tag}/c[{i}]")).expect("constant net present"))
                .collect()
        })
        .collect()
}

/// Parallel tap inputs for a sample sequence: `x_i(t) = s(t - i)`, zero before the start.
pub fn delay_line(samples: &[u64], taps: usize) -> Vec<Vec<u64>> {
    (0..taps)
        .map(|i| (0..samples.len()).map(|t| if t >= i { samples[t - i] } else { 0 }).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::eval_words_scalar;

    fn exact_fir(coeffs: Vec<u64>, width: usize) -> Netlist {
        let design = DesignKind::Fir { taps: coeffs.len(), coeffs, width };
        build_netlist(&DesignConfig { design, assignment: Assignment::EXACT }).unwrap()
    }

    #[test]
    fn fir_dot_product() {
        let n = exact_fir(vec![1, 2, 3, 4], 8);
        assert_eq!(eval_words_scalar(&n, &[1, 1, 1, 1]), vec![10]);
        assert_eq!(n.output_words()[0].width(), 18);
    }

    #[test]
    fn fir_zero_coefficient_gives_zero_product() {
        let n = exact_fir(vec![0, 5, 0], 4);
        for x in 0..16 {
            assert_eq!(eval_words_scalar(&n, &[x, 0, 15]), vec![0]);
            assert_eq!(eval_words_scalar(&n, &[0, x, 0]), vec![5 * x]);
        }
    }

    #[test]
    fn fft_twiddle_one() {
        let design = DesignKind::FftBfly { width: 4, twiddle: 1 };
        let n = build_netlist(&DesignConfig { design: design.clone(), assignment: Assignment::EXACT }).unwrap();
        for a in 0..16 {
            for b in 0..16 {
                assert_eq!(eval_words_scalar(&n, &[a, b]), vec![a + b, a.wrapping_sub(b) & 31]);
                assert_eq!(design.reference(&[a, b]), vec![a + b, a.wrapping_sub(b) & 31]);
            }
        }
    }

    #[test]
    fn instance_table_labels() {
        let n = exact_fir(vec![45, 113, 171, 29], 8);
        let inst = n.instances();
        assert_eq!(inst["top.coeff2"].kind, InstanceKind::Deterministic);
        assert_eq!(inst["top.mul3"].kind, InstanceKind::Approximate);
        assert_eq!(inst["top.add2"].op_type, "add");
        let mods = n.modules();
        assert_eq!(mods.len(), 11, "{mods:?}");
        let c = constant_nets(&n, &DesignKind::fir_default());
        assert_eq!(c.len(), 4);
    }

    #[test]
    fn bad_designs() {
        let bad = DesignKind::Fir { taps: 3, coeffs: vec![1, 2], width: 8 };
        assert!(bad.validate().is_err());
        let bad = DesignKind::Fir { taps: 1, coeffs: vec![300], width: 8 };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn delay_line_shifts() {
        assert_eq!(delay_line(&[1, 2, 3], 2), vec![vec![1, 2, 3], vec![0, 1, 2]]);
    }
}
