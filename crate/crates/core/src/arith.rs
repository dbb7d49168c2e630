//! Exact and approximate adder, subtractor and multiplier generators.
//!
//! All generators emit a netlist with input words `a` and `b` (LSB first)
//! and a single output word, every gate tagged with the operation name.
//! The architectures:
//!
//! * `exact`: ripple-carry adder/subtractor, array multiplier.
//! * `loa-kK`: lower-part OR adder. The low `k` sum bits are `a[i] | b[i]`,
//!   the upper part is an exact ripple adder whose carry-in is 0, or
//!   `a[k-1] & b[k-1]` with the `-c` variant.
//! * `trunc-kK`: adders drive the low `k` sum bits with constant 0 and add
//!   the upper part with carry-in 0; multipliers drop every partial product
//!   `a[i] & b[j]` with `i + j < k`.
//! * `block22-kK`: multiplier composed of 2x2 blocks. Blocks at bit offset
//!   below `k` use the approximate block that maps 3x3 to 7.
//!
//! Internally signals are folded through constants, so truncated logic
//! really disappears instead of being fed zeros.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::netlist::{GateKind, InstanceInfo, InstanceKind, NetId, Netlist, NetlistBuilder};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ArithError {
    #[error("bad module parameters: {0}")]
    BadParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum OpType {
    Add,
    /// `a - b` modulo `2^(width+1)`; only used inside benchmark designs.
    Sub,
    Mul,
}

impl OpType {
    pub fn name(self) -> &'static str {
        match self {
            OpType::Add => "add",
            OpType::Sub => "sub",
            OpType::Mul => "mul",
        }
    }

    pub fn output_width(self, width: usize) -> usize {
        match self {
            OpType::Add | OpType::Sub => width + 1,
            OpType::Mul => 2 * width,
        }
    }

    pub fn output_name(self) -> &'static str {
        match self {
            OpType::Add => "s",
            OpType::Sub => "d",
            OpType::Mul => "p",
        }
    }
}

impl FromStr for OpType {
    type Err = ArithError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "add" => Ok(OpType::Add),
            "sub" => Ok(OpType::Sub),
            "mul" => Ok(OpType::Mul),
            _ => Err(ArithError::BadParams(format!("unknown op {s}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ArchId {
    Exact,
    Loa,
    Trunc,
    Block22,
}

impl ArchId {
    pub fn name(self) -> &'static str {
        match self {
            ArchId::Exact => "exact",
            ArchId::Loa => "loa",
            ArchId::Trunc => "trunc",
            ArchId::Block22 => "block22",
        }
    }
}

impl FromStr for ArchId {
    type Err = ArithError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact" => Ok(ArchId::Exact),
            "loa" => Ok(ArchId::Loa),
            "trunc" => Ok(ArchId::Trunc),
            "block22" => Ok(ArchId::Block22),
            _ => Err(ArithError::BadParams(format!("unknown architecture {s}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ArchParams {
    pub op_type: OpType,
    pub arch_id: ArchId,
    pub width: usize,
    pub k: usize,
    pub loa_and_carry: bool,
}

pub const MAX_WIDTH: usize = 32;

impl ArchParams {
    pub fn new(op_type: OpType, arch_id: ArchId, width: usize, k: usize) -> Self {
        ArchParams { op_type, arch_id, width, k, loa_and_carry: false }
    }

    pub fn exact(op_type: OpType, width: usize) -> Self {
        Self::new(op_type, ArchId::Exact, width, 0)
    }

    /// Architecture label used in instance tables, e.g. `loa-k4-c`.
    pub fn label(&self) -> String {
        match self.arch_id {
            ArchId::Exact => "exact".to_string(),
            ArchId::Loa if self.loa_and_carry => format!("loa-k{}-c", self.k),
            a => format!("{}-k{}", a.name(), self.k),
        }
    }

    /// Inverse of [`ArchParams::label`].
    pub fn from_label(op_type: OpType, label: &str, width: usize) -> Result<Self, ArithError> {
        let bad = || ArithError::BadParams(format!("bad architecture label {label}"));
        let mut parts = label.split('-');
        let arch: ArchId = parts.next().ok_or_else(bad)?.parse()?;
        let mut p = ArchParams::new(op_type, arch, width, 0);
        if arch != ArchId::Exact {
            let k = parts.next().and_then(|s| s.strip_prefix('k')).ok_or_else(bad)?;
            p.k = k.parse().map_err(|_| bad())?;
            match parts.next() {
                Some("c") if arch == ArchId::Loa => p.loa_and_carry = true,
                Some(_) => return Err(bad()),
                None => {}
            }
        }
        if parts.next().is_some() {
            return Err(bad());
        }
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ArithError> {
        let bad = |m: String| Err(ArithError::BadParams(m));
        if self.width < 2 || self.width > MAX_WIDTH {
            return bad(format!("width {} outside 2..={MAX_WIDTH}", self.width));
        }
        if self.k >= self.width {
            return bad(format!("k = {} must be below width {}", self.k, self.width));
        }
        match (self.op_type, self.arch_id) {
            (_, ArchId::Exact) if self.k != 0 => bad("exact architecture takes k = 0".into()),
            (OpType::Mul, ArchId::Loa) => bad("loa is an adder architecture".into()),
            (OpType::Add | OpType::Sub, ArchId::Block22) => bad("block22 is a multiplier architecture".into()),
            (OpType::Mul, ArchId::Block22) if self.width % 2 != 0 => {
                bad("block22 needs an even width".into())
            }
            _ if self.loa_and_carry && self.arch_id != ArchId::Loa => {
                bad("loa_and_carry only applies to loa".into())
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for ArchParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/w{}", self.op_type.name(), self.label(), self.width)
    }
}

/// Reference value: `a + b`, `a - b mod 2^(width+1)` or `a * b`.
pub fn exact_oracle(op: OpType, a: u64, b: u64, width: usize) -> u64 {
    debug_assert!(width <= MAX_WIDTH);
    match op {
        OpType::Add => a + b,
        OpType::Sub => a.wrapping_sub(b) & ((1u64 << (width + 1)) - 1),
        OpType::Mul => a * b,
    }
}

pub fn gen_module(p: &ArchParams) -> Result<Netlist, ArithError> {
    match p.op_type {
        OpType::Add => gen_adder(p),
        OpType::Sub => gen_subtractor(p),
        OpType::Mul => gen_multiplier(p),
    }
}

pub fn gen_adder(p: &ArchParams) -> Result<Netlist, ArithError> {
    if p.op_type != OpType::Add {
        return Err(ArithError::BadParams("gen_adder needs op add".into()));
    }
    p.validate()?;
    let mut g = Gen::new(p);
    let (a, b) = g.operands();
    let k = p.k;
    let mut sum: Vec<Sig> = (0..k)
        .map(|i| match p.arch_id {
            ArchId::Loa => g.or2(a[i], b[i]),
            _ => Sig::Zero,
        })
        .collect();
    let cin = if p.arch_id == ArchId::Loa && p.loa_and_carry && k > 0 {
        g.and2(a[k - 1], b[k - 1])
    } else {
        Sig::Zero
    };
    sum.extend(g.ripple(&a[k..], &b[k..], cin));
    Ok(g.finish(sum))
}

pub fn gen_subtractor(p: &ArchParams) -> Result<Netlist, ArithError> {
    if p.op_type != OpType::Sub {
        return Err(ArithError::BadParams("gen_subtractor needs op sub".into()));
    }
    p.validate()?;
    let mut g = Gen::new(p);
    let (a, b) = g.operands();
    let nb: Vec<Sig> = b.iter().map(|&x| g.not(x)).collect();
    let k = p.k;
    let mut diff: Vec<Sig> = (0..k)
        .map(|i| match p.arch_id {
            ArchId::Loa => g.or2(a[i], nb[i]),
            _ => Sig::Zero,
        })
        .collect();
    // Upper part: a_hi + !b_hi + 1 over (width - k + 1) bits.
    let mut ah = a[k..].to_vec();
    ah.push(Sig::Zero);
    let mut bh = nb[k..].to_vec();
    bh.push(Sig::One);
    let mut upper = g.ripple(&ah, &bh, Sig::One);
    upper.truncate(p.width - k + 1);
    diff.extend(upper);
    Ok(g.finish(diff))
}

pub fn gen_multiplier(p: &ArchParams) -> Result<Netlist, ArithError> {
    if p.op_type != OpType::Mul {
        return Err(ArithError::BadParams("gen_multiplier needs op mul".into()));
    }
    p.validate()?;
    let mut g = Gen::new(p);
    let (a, b) = g.operands();
    let w = p.width;
    let product = match p.arch_id {
        ArchId::Exact | ArchId::Trunc => {
            let keep = |i: usize, j: usize| p.arch_id == ArchId::Exact || i + j >= p.k;
            let row = |g: &mut Gen, j: usize| -> Vec<Sig> {
                (0..w).map(|i| if keep(i, j) { g.and2(a[i], b[j]) } else { Sig::Zero }).collect()
            };
            let mut acc = row(&mut g, 0);
            let mut out = Vec::with_capacity(2 * w);
            for j in 1..w {
                out.push(acc[0]);
                let r = row(&mut g, j);
                acc = g.ripple(&acc[1..], &r, Sig::Zero);
            }
            out.extend(acc);
            out
        }
        ArchId::Block22 => {
            let mut acc = vec![Sig::Zero; 2 * w];
            for j in 0..w / 2 {
                for i in 0..w / 2 {
                    let offset = 2 * (i + j);
                    let blk = g.block22(
                        [a[2 * i], a[2 * i + 1]],
                        [b[2 * j], b[2 * j + 1]],
                        offset < p.k,
                    );
                    let mut shifted = vec![Sig::Zero; offset];
                    shifted.extend(blk);
                    shifted.resize(2 * w, Sig::Zero);
                    acc = g.ripple(&acc, &shifted, Sig::Zero);
                    acc.truncate(2 * w);
                }
            }
            acc
        }
        ArchId::Loa => unreachable!("rejected by validate"),
    };
    let mut product = product;
    product.resize(2 * w, Sig::Zero);
    Ok(g.finish(product))
}

/// Signal during generation: a known constant or a net.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Sig {
    Zero,
    One,
    Net(NetId),
}

struct Gen {
    b: NetlistBuilder,
    tag: String,
    params: ArchParams,
    primary: HashSet<NetId>,
}

impl Gen {
    fn new(p: &ArchParams) -> Self {
        let mut b = NetlistBuilder::new();
        let tag = p.op_type.name().to_string();
        b.set_instance(&tag, InstanceInfo::new(InstanceKind::Approximate, p.op_type.name(), p.label()));
        Gen { b, tag, params: *p, primary: HashSet::new() }
    }

    fn operands(&mut self) -> (Vec<Sig>, Vec<Sig>) {
        let w = self.params.width;
        let a = self.b.input_word("a", w);
        let b = self.b.input_word("b", w);
        self.primary.extend(a.iter().chain(&b).copied());
        (a.into_iter().map(Sig::Net).collect(), b.into_iter().map(Sig::Net).collect())
    }

    fn emit(&mut self, kind: GateKind, ins: &[NetId]) -> Sig {
        let tag = self.tag.clone();
        Sig::Net(self.b.gate(kind, ins.to_vec(), &tag))
    }

    fn not(&mut self, x: Sig) -> Sig {
        match x {
            Sig::Zero => Sig::One,
            Sig::One => Sig::Zero,
            Sig::Net(n) => self.emit(GateKind::Not, &[n]),
        }
    }

    fn and2(&mut self, x: Sig, y: Sig) -> Sig {
        match (x, y) {
            (Sig::Zero, _) | (_, Sig::Zero) => Sig::Zero,
            (Sig::One, o) | (o, Sig::One) => o,
            (Sig::Net(a), Sig::Net(b)) => self.emit(GateKind::And, &[a, b]),
        }
    }

    fn or2(&mut self, x: Sig, y: Sig) -> Sig {
        match (x, y) {
            (Sig::One, _) | (_, Sig::One) => Sig::One,
            (Sig::Zero, o) | (o, Sig::Zero) => o,
            (Sig::Net(a), Sig::Net(b)) => self.emit(GateKind::Or, &[a, b]),
        }
    }

    fn xor2(&mut self, x: Sig, y: Sig) -> Sig {
        match (x, y) {
            (Sig::Zero, o) | (o, Sig::Zero) => o,
            (Sig::One, o) | (o, Sig::One) => self.not(o),
            (Sig::Net(a), Sig::Net(b)) => self.emit(GateKind::Xor, &[a, b]),
        }
    }

    fn xnor2(&mut self, x: Sig, y: Sig) -> Sig {
        match (x, y) {
            (Sig::Net(a), Sig::Net(b)) => self.emit(GateKind::Xnor, &[a, b]),
            _ => {
                let t = self.xor2(x, y);
                self.not(t)
            }
        }
    }

    /// Full adder with constant folding; returns (sum, carry).
    fn fa(&mut self, x: Sig, y: Sig, z: Sig) -> (Sig, Sig) {
        let ones = [x, y, z].iter().filter(|s| **s == Sig::One).count();
        let vars: Vec<Sig> = [x, y, z].into_iter().filter(|s| matches!(s, Sig::Net(_))).collect();
        let bit = |v: bool| if v { Sig::One } else { Sig::Zero };
        match (vars.as_slice(), ones) {
            ([], n) => (bit(n & 1 == 1), bit(n >= 2)),
            ([v], 0) => (*v, Sig::Zero),
            ([v], 1) => (self.not(*v), *v),
            ([v], _) => (*v, Sig::One),
            ([p, q], 0) => (self.xor2(*p, *q), self.and2(*p, *q)),
            ([p, q], _) => (self.xnor2(*p, *q), self.or2(*p, *q)),
            ([p, q, r], _) => {
                let t = self.xor2(*p, *q);
                let s = self.xor2(t, *r);
                let g = self.and2(*p, *q);
                let h = self.and2(t, *r);
                (s, self.or2(g, h))
            }
            _ => unreachable!(),
        }
    }

    /// Ripple-carry sum of two LSB-first vectors; result has `max(len) + 1` bits.
    fn ripple(&mut self, x: &[Sig], y: &[Sig], cin: Sig) -> Vec<Sig> {
        let n = x.len().max(y.len());
        let mut carry = cin;
        let mut out = Vec::with_capacity(n + 1);
        for i in 0..n {
            let xi = x.get(i).copied().unwrap_or(Sig::Zero);
            let yi = y.get(i).copied().unwrap_or(Sig::Zero);
            let (s, c) = self.fa(xi, yi, carry);
            out.push(s);
            carry = c;
        }
        out.push(carry);
        out
    }

    /// 2x2 product block; the approximate block is exact except 3x3 = 7.
    fn block22(&mut self, a: [Sig; 2], b: [Sig; 2], approximate: bool) -> Vec<Sig> {
        let p00 = self.and2(a[0], b[0]);
        let p10 = self.and2(a[1], b[0]);
        let p01 = self.and2(a[0], b[1]);
        let p11 = self.and2(a[1], b[1]);
        if approximate {
            let mid = self.or2(p10, p01);
            vec![p00, mid, p11]
        } else {
            let mid = self.xor2(p10, p01);
            let c = self.and2(p10, p01);
            let hi = self.xor2(p11, c);
            let top = self.and2(p11, c);
            vec![p00, mid, hi, top]
        }
    }

    /// Materializes output signals as distinct gate-driven nets.
    fn finish(mut self, bits: Vec<Sig>) -> Netlist {
        let tag = self.tag.clone();
        let mut used = HashSet::new();
        let mut nets = Vec::with_capacity(bits.len());
        for s in bits {
            let n = match s {
                Sig::Zero => self.b.gate(GateKind::Const0, vec![], &tag),
                Sig::One => self.b.gate(GateKind::Const1, vec![], &tag),
                Sig::Net(n) if used.contains(&n) || self.primary.contains(&n) => {
                    self.b.gate(GateKind::Buf, vec![n], &tag)
                }
                Sig::Net(n) => n,
            };
            used.insert(n);
            nets.push(n);
        }
        self.b.output_word(self.params.op_type.output_name(), nets);
        self.b.finish().expect("generated netlist is well formed")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::eval_words_scalar;

    fn eval(n: &Netlist, a: u64, b: u64) -> u64 {
        eval_words_scalar(n, &[a, b])[0]
    }

    #[test]
    fn exact_adder_exhaustive_w4() {
        let n = gen_adder(&ArchParams::exact(OpType::Add, 4)).unwrap();
        for a in 0..16 {
            for b in 0..16 {
                assert_eq!(eval(&n, a, b), a + b);
            }
        }
        assert_eq!(eval(&n, 5, 7), 12);
    }

    #[test]
    fn loa_example() {
        let n = gen_adder(&ArchParams::new(OpType::Add, ArchId::Loa, 4, 2)).unwrap();
        assert_eq!(eval(&n, 3, 1), 3);
    }

    #[test]
    fn trunc_adder_drops_low_bits_and_carry() {
        // Low two bits are forced to zero and no carry enters bit 2.
        let n = gen_adder(&ArchParams::new(OpType::Add, ArchId::Trunc, 4, 2)).unwrap();
        assert_eq!(eval(&n, 3, 3), 0);
        assert_eq!(eval(&n, 7, 5), 8);
    }

    #[test]
    fn block22_w2_only_three_by_three_errs() {
        let n = gen_multiplier(&ArchParams::new(OpType::Mul, ArchId::Block22, 2, 1)).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                let want = if a == 3 && b == 3 { 7 } else { a * b };
                assert_eq!(eval(&n, a, b), want, "{a}x{b}");
            }
        }
    }

    #[test]
    fn trunc_mul_example() {
        let n = gen_multiplier(&ArchParams::new(OpType::Mul, ArchId::Trunc, 4, 2)).unwrap();
        // Only a1*b1 (weight 4) survives for 3x3.
        assert_eq!(eval(&n, 3, 3), 4);
    }

    #[test]
    fn subtractor_exact() {
        let n = gen_subtractor(&ArchParams::exact(OpType::Sub, 4)).unwrap();
        for a in 0..16 {
            for b in 0..16 {
                assert_eq!(eval(&n, a, b), exact_oracle(OpType::Sub, a, b, 4));
            }
        }
    }

    #[test]
    fn oracle_examples() {
        assert_eq!(exact_oracle(OpType::Add, 0, 0, 4), 0);
        assert_eq!(exact_oracle(OpType::Add, 15, 15, 4), 30);
        for x in 0..256 {
            assert_eq!(exact_oracle(OpType::Mul, 1, x, 8), x);
        }
    }

    #[test]
    fn bad_params() {
        let e = |p: ArchParams| gen_module(&p).unwrap_err();
        e(ArchParams::new(OpType::Add, ArchId::Loa, 4, 4));
        e(ArchParams::exact(OpType::Add, 1));
        e(ArchParams::new(OpType::Mul, ArchId::Block22, 5, 1));
        e(ArchParams::new(OpType::Mul, ArchId::Loa, 4, 1));
        e(ArchParams::new(OpType::Add, ArchId::Exact, 4, 1));
    }

    #[test]
    fn labels_round_trip() {
        let mut p = ArchParams::new(OpType::Add, ArchId::Loa, 8, 3);
        p.loa_and_carry = true;
        for q in [p, ArchParams::exact(OpType::Mul, 8), ArchParams::new(OpType::Mul, ArchId::Block22, 8, 4)] {
            assert_eq!(ArchParams::from_label(q.op_type, &q.label(), q.width).unwrap(), q);
        }
        assert!(ArchParams::from_label(OpType::Add, "loa-x", 8).is_err());
    }

    #[test]
    fn single_tag_per_module() {
        let n = gen_multiplier(&ArchParams::new(OpType::Mul, ArchId::Trunc, 6, 3)).unwrap();
        assert_eq!(n.instances().len(), 1);
        assert!(n.gates().iter().all(|g| g.tag == "mul"));
        assert_eq!(n.instances()["mul"].arch_id, "trunc-k3");
    }
}
