//! Finding input vectors that drive nets to given values.
//!
//! Realizations are partial input assignments that force a net to a value
//! regardless of the unassigned bits. They come from three sources: a
//! primary input bit itself, a simulated cycle restricted to the net's input
//! word support, and structural decomposition through the driving gate for
//! values never seen in simulation. A conjunction whose parts cannot be
//! merged falls back to grouping its literals by shared input words and
//! taking each group from one simulated cycle.

use std::collections::HashMap;

use rand::Rng;

use crate::netlist::{GateKind, NetId, Netlist};
use crate::sim::{SimError, SimResult, Simulator, VectorStream};

/// Bitset of the input words (by index into `input_words()`) feeding each net.
pub fn word_supports(netlist: &Netlist) -> Result<Vec<u64>, SimError> {
    let words = netlist.input_words();
    assert!(words.len() <= 64, "at most 64 input words supported");
    let mut sup = vec![0u64; netlist.num_nets()];
    for (w, word) in words.iter().enumerate() {
        for b in &word.bits {
            sup[b.index()] |= 1 << w;
        }
    }
    for &g in netlist.topo_order()? {
        let g = netlist.gate(g);
        sup[g.output.index()] = g.inputs.iter().fold(0, |acc, i| acc | sup[i.index()]);
    }
    Ok(sup)
}

/// A partial assignment of input word bits.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Assign {
    pub mask: Vec<u64>,
    pub value: Vec<u64>,
}

impl Assign {
    pub fn empty(n_words: usize) -> Self {
        Assign { mask: vec![0; n_words], value: vec![0; n_words] }
    }

    pub fn merge(&self, other: &Assign) -> Option<Assign> {
        let mut out = self.clone();
        for w in 0..self.mask.len() {
            let both = self.mask[w] & other.mask[w];
            if (self.value[w] ^ other.value[w]) & both != 0 {
                return None;
            }
            out.mask[w] |= other.mask[w];
            out.value[w] |= other.value[w] & other.mask[w];
        }
        Some(out)
    }

    /// Completes the assignment with random bits.
    pub fn fill<R: Rng>(&self, widths: &[usize], rng: &mut R) -> Vec<u64> {
        widths
            .iter()
            .enumerate()
            .map(|(w, &width)| {
                let m = if width >= 64 { u64::MAX } else { (1u64 << width) - 1 };
                (self.value[w] & self.mask[w]) | (rng.gen::<u64>() & !self.mask[w] & m)
            })
            .collect()
    }
}

/// Gate levels a conjunction is expanded through when grouping literals.
const FLATTEN_DEPTH: usize = 64;
const MAX_LEAVES: usize = 256;

#[derive(Debug, Clone, Copy)]
pub struct JustifyLimits {
    /// Realizations kept per (net, value).
    pub cap: usize,
    /// Gate levels decomposed below a never-observed net.
    pub max_depth: usize,
    /// Node visits per top-level request.
    pub max_steps: usize,
}

impl Default for JustifyLimits {
    fn default() -> Self {
        JustifyLimits { cap: 8, max_depth: 8, max_steps: 4000 }
    }
}

pub struct Justifier<'a> {
    netlist: &'a Netlist,
    sim: &'a SimResult,
    /// `inputs[w][t]`: value of input word `w` (netlist order) in cycle `t`.
    inputs: Vec<&'a [u64]>,
    widths: Vec<usize>,
    supports: Vec<u64>,
    input_bit: Vec<Option<(usize, usize)>>,
    limits: JustifyLimits,
    memo: HashMap<(NetId, bool), Vec<Assign>>,
    steps: usize,
}

impl<'a> Justifier<'a> {
    /// `sim` must come from simulating `stream` on `netlist`.
    pub fn new(
        netlist: &'a Netlist,
        stream: &'a VectorStream,
        sim: &'a SimResult,
        limits: JustifyLimits,
    ) -> Result<Self, SimError> {
        let cols = Simulator::new(netlist)?.bind(stream)?;
        let words = netlist.input_words();
        let mut input_bit = vec![None; netlist.num_nets()];
        for (w, word) in words.iter().enumerate() {
            for (i, b) in word.bits.iter().enumerate() {
                input_bit[b.index()] = Some((w, i));
            }
        }
        Ok(Justifier {
            netlist,
            sim,
            inputs: cols.iter().map(|&c| stream.values[c].as_slice()).collect(),
            widths: words.iter().map(|w| w.width()).collect(),
            supports: word_supports(netlist)?,
            input_bit,
            limits,
            memo: HashMap::new(),
            steps: 0,
        })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn support(&self, net: NetId) -> u64 {
        self.supports[net.index()]
    }

    /// Cycles in which `net` held `value`.
    pub fn observed_cycles(&self, net: NetId, value: bool) -> impl Iterator<Item = usize> + '_ {
        (0..self.sim.n_vectors).filter(move |&t| self.sim.bit(net, t) == value)
    }

    /// The vector of cycle `t` restricted to the words in `support`.
    pub fn cycle_assign(&self, t: usize, support: u64) -> Assign {
        let mut a = Assign::empty(self.widths.len());
        for w in 0..self.widths.len() {
            if support >> w & 1 == 1 {
                a.mask[w] = if self.widths[w] >= 64 { u64::MAX } else { (1u64 << self.widths[w]) - 1 };
                a.value[w] = self.inputs[w][t];
            }
        }
        a
    }

    pub fn cycle_vector(&self, t: usize) -> Vec<u64> {
        self.inputs.iter().map(|v| v[t]).collect()
    }

    /// Realizations of `net = value`.
    pub fn realize(&mut self, net: NetId, value: bool) -> Vec<Assign> {
        self.steps = 0;
        self.go(net, value, self.limits.max_depth)
    }

    /// Realizations of all literals at once.
    pub fn conjunction(&mut self, lits: &[(NetId, bool)]) -> Vec<Assign> {
        self.steps = 0;
        self.conj(lits, self.limits.max_depth)
    }

    fn conj(&mut self, lits: &[(NetId, bool)], depth: usize) -> Vec<Assign> {
        let mut lists = Vec::with_capacity(lits.len());
        for &(n, v) in lits {
            let r = self.go(n, v, depth);
            if r.is_empty() {
                break;
            }
            lists.push(r);
        }
        let out = if lists.len() == lits.len() { self.combine(lists) } else { Vec::new() };
        if out.is_empty() && lits.len() > 1 {
            self.grouped_cycles(lits)
        } else {
            out
        }
    }

    /// Expands a conjunction through gates whose value forces every input
    /// (AND at 1, OR at 0, inverters, buffers).
    fn flatten(&self, lits: &[(NetId, bool)]) -> Option<Vec<(NetId, bool)>> {
        let mut out = Vec::new();
        let mut stack: Vec<(NetId, bool, usize)> = lits.iter().map(|&(n, v)| (n, v, 0)).collect();
        while let Some((n, v, d)) = stack.pop() {
            let g = self.netlist.driving_gate(n).map(|g| self.netlist.gate(g));
            let next: Option<Vec<(NetId, bool)>> = match g {
                Some(g) if d < FLATTEN_DEPTH => match (g.kind, v) {
                    (GateKind::And, true) | (GateKind::Nor, true) => {
                        Some(g.inputs.iter().map(|&i| (i, g.kind == GateKind::And)).collect())
                    }
                    (GateKind::Or, false) | (GateKind::Nand, false) => {
                        Some(g.inputs.iter().map(|&i| (i, g.kind == GateKind::Nand)).collect())
                    }
                    (GateKind::Not, v) => Some(vec![(g.inputs[0], !v)]),
                    (GateKind::Buf, v) => Some(vec![(g.inputs[0], v)]),
                    (GateKind::Const0, v) | (GateKind::Const1, v) => {
                        if v != (g.kind == GateKind::Const1) {
                            return None;
                        }
                        Some(Vec::new())
                    }
                    _ => None,
                },
                _ => None,
            };
            match next {
                Some(ins) => stack.extend(ins.into_iter().map(|(i, x)| (i, x, d + 1))),
                None => {
                    if out.contains(&(n, !v)) {
                        return None;
                    }
                    if !out.contains(&(n, v)) {
                        out.push((n, v));
                    }
                }
            }
            if out.len() > MAX_LEAVES {
                return None;
            }
        }
        Some(out)
    }

    /// Splits the flattened conjunction into groups of literals linked by
    /// shared input words, then takes each group from a single simulated
    /// cycle in which all of its literals hold.
    fn grouped_cycles(&mut self, lits: &[(NetId, bool)]) -> Vec<Assign> {
        let Some(leaves) = self.flatten(lits) else { return Vec::new() };
        let mut groups: Vec<(u64, Vec<(NetId, bool)>)> = Vec::new();
        for (n, v) in leaves {
            let mut sup = self.supports[n.index()];
            let mut members = vec![(n, v)];
            let mut i = 0;
            while i < groups.len() {
                if groups[i].0 & sup != 0 {
                    let (s, m) = groups.swap_remove(i);
                    sup |= s;
                    members.extend(m);
                    i = 0;
                } else {
                    i += 1;
                }
            }
            groups.push((sup, members));
        }
        groups.sort();
        let mut lists = Vec::with_capacity(groups.len());
        for (sup, members) in &groups {
            let mut out: Vec<Assign> = Vec::new();
            for t in 0..self.sim.n_vectors {
                if members.iter().all(|&(n, v)| self.sim.bit(n, t) == v) {
                    let a = self.cycle_assign(t, *sup);
                    if !out.contains(&a) {
                        out.push(a);
                        if out.len() >= self.limits.cap {
                            break;
                        }
                    }
                }
            }
            if out.is_empty() {
                return Vec::new();
            }
            lists.push(out);
        }
        self.combine(lists)
    }

    fn go(&mut self, net: NetId, value: bool, depth: usize) -> Vec<Assign> {
        if let Some(r) = self.memo.get(&(net, value)) {
            return r.clone();
        }
        self.steps += 1;
        if let Some((w, i)) = self.input_bit[net.index()] {
            let mut a = Assign::empty(self.widths.len());
            a.mask[w] = 1 << i;
            a.value[w] = (value as u64) << i;
            return vec![a];
        }
        let mut out: Vec<Assign> = Vec::new();
        let sup = self.supports[net.index()];
        for t in self.observed_cycles(net, value) {
            let a = self.cycle_assign(t, sup);
            if !out.contains(&a) {
                out.push(a);
                if out.len() >= self.limits.cap {
                    break;
                }
            }
        }
        if out.is_empty() && depth > 0 && self.steps < self.limits.max_steps {
            out = self.decompose(net, value, depth - 1);
        }
        // failures cut short by depth or step limits are not cached
        if !out.is_empty() || (depth > 0 && self.steps < self.limits.max_steps) {
            self.memo.insert((net, value), out.clone());
        }
        out
    }

    fn decompose(&mut self, net: NetId, value: bool, depth: usize) -> Vec<Assign> {
        let Some(g) = self.netlist.driving_gate(net) else { return Vec::new() };
        let g = self.netlist.gate(g).clone();
        let ins = &g.inputs;
        let all = |v: bool| ins.iter().map(|&i| (i, v)).collect::<Vec<_>>();
        let any = |v: bool| ins.iter().map(|&i| vec![(i, v)]).collect::<Vec<_>>();
        // a disjunction of conjunctions of literals
        let options: Vec<Vec<(NetId, bool)>> = match (g.kind, value) {
            (GateKind::And, true) | (GateKind::Nand, false) => vec![all(true)],
            (GateKind::And, false) | (GateKind::Nand, true) => any(false),
            (GateKind::Or, false) | (GateKind::Nor, true) => vec![all(false)],
            (GateKind::Or, true) | (GateKind::Nor, false) => any(true),
            (GateKind::Not, v) => vec![vec![(ins[0], !v)]],
            (GateKind::Buf, v) => vec![vec![(ins[0], v)]],
            (GateKind::Mux2, v) => vec![vec![(ins[0], false), (ins[1], v)], vec![(ins[0], true), (ins[2], v)]],
            (GateKind::Xor | GateKind::Xnor, v) => {
                let parity = v ^ (g.kind == GateKind::Xnor);
                let n = ins.len().min(6);
                (0u32..1 << n)
                    .filter(|m| (m.count_ones() % 2 == 1) == parity)
                    .map(|m| ins[..n].iter().enumerate().map(|(i, &net)| (net, m >> i & 1 == 1)).collect())
                    .collect()
            }
            (GateKind::Const0, v) | (GateKind::Const1, v) => {
                return if v == (g.kind == GateKind::Const1) { vec![Assign::empty(self.widths.len())] } else { Vec::new() };
            }
        };
        let mut out = Vec::new();
        for lits in options {
            if self.steps >= self.limits.max_steps {
                break;
            }
            for a in self.conj(&lits, depth) {
                if !out.contains(&a) {
                    out.push(a);
                }
            }
            if out.len() >= self.limits.cap {
                out.truncate(self.limits.cap);
                break;
            }
        }
        out
    }

    /// Pairwise-compatible merges, one realization from each list.
    fn combine(&self, mut lists: Vec<Vec<Assign>>) -> Vec<Assign> {
        if lists.iter().any(|l| l.is_empty()) {
            return Vec::new();
        }
        lists.sort_by_key(|l| l.len());
        let mut out = Vec::new();
        let mut budget = self.limits.max_steps;
        let start = Assign::empty(self.widths.len());
        combine_rec(&lists, 0, start, &mut out, self.limits.cap, &mut budget);
        out
    }
}

fn combine_rec(lists: &[Vec<Assign>], i: usize, acc: Assign, out: &mut Vec<Assign>, cap: usize, budget: &mut usize) {
    if i == lists.len() {
        if !out.contains(&acc) {
            out.push(acc);
        }
        return;
    }
    for a in &lists[i] {
        if out.len() >= cap || *budget == 0 {
            return;
        }
        *budget -= 1;
        if let Some(m) = acc.merge(a) {
            combine_rec(lists, i + 1, m, out, cap, budget);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::parse_netlist;
    use crate::sim::{eval_words_scalar, simulate, word_shape, StreamMode, StreamSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const T: &str = "input a0\ninput a1\ninput b0\ninput b1\nword a a0 a1\nword b b0 b1\n\
                     gate g0 AND x a0 a1\ngate g1 AND y b0 b1\ngate g2 AND z x y\ngate g3 CONST0 k\n\
                     gate g4 AND u a0 k\ngate g5 OR o z u\noutput o\n";

    #[test]
    fn supports_follow_cones() {
        let n = parse_netlist(T).unwrap();
        let s = word_supports(&n).unwrap();
        assert_eq!(s[n.find_net("x").unwrap().index()], 0b01);
        assert_eq!(s[n.find_net("z").unwrap().index()], 0b11);
        assert_eq!(s[n.find_net("k").unwrap().index()], 0);
    }

    #[test]
    fn never_seen_net_is_justified_structurally() {
        let n = parse_netlist(T).unwrap();
        let words = word_shape(&n.input_words());
        // a and b are never 3 in the same cycle
        let s = VectorStream::from_vectors(&words, &[vec![3, 0], vec![0, 3], vec![1, 2]]);
        let sim = simulate(&n, &s).unwrap();
        let z = n.find_net("z").unwrap();
        assert!((0..3).all(|t| !sim.bit(z, t)));
        let mut j = Justifier::new(&n, &s, &sim, JustifyLimits::default()).unwrap();
        let r = j.realize(z, true);
        assert!(!r.is_empty());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for a in &r {
            let v = a.fill(j.widths(), &mut rng);
            assert_eq!(eval_words_scalar(&n, &v), vec![1]);
        }
        let u = n.find_net("u").unwrap();
        assert!(j.realize(u, true).is_empty());
    }

    #[test]
    fn conjunction_of_disjoint_rare_nets() {
        let n = parse_netlist(T).unwrap();
        let s = VectorStream::for_netlist(&n, StreamSpec::new(64, 9, StreamMode::Uniform));
        let sim = simulate(&n, &s).unwrap();
        let mut j = Justifier::new(&n, &s, &sim, JustifyLimits::default()).unwrap();
        let lits = [(n.find_net("x").unwrap(), true), (n.find_net("y").unwrap(), true)];
        let r = j.conjunction(&lits);
        assert!(!r.is_empty());
        assert_eq!(r[0].value, vec![3, 3]);
    }

    #[test]
    fn merge_detects_conflicts() {
        let a = Assign { mask: vec![0b11], value: vec![0b01] };
        let b = Assign { mask: vec![0b10], value: vec![0b10] };
        let c = Assign { mask: vec![0b100], value: vec![0b100] };
        assert!(a.merge(&b).is_none());
        assert_eq!(a.merge(&c).unwrap(), Assign { mask: vec![0b111], value: vec![0b101] });
    }
}
