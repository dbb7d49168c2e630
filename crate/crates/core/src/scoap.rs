//! Combinational SCOAP controllability and observability.

use crate::netlist::{CycleError, GateKind, NetId, Netlist};

/// Saturating stand-in for "cannot be controlled / observed".
pub const INF: u32 = 1 << 30;

fn sat(x: u64) -> u32 {
    x.min(INF as u64) as u32
}

fn add(xs: impl IntoIterator<Item = u32>) -> u32 {
    sat(xs.into_iter().map(u64::from).sum())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoapReport {
    pub cc0: Vec<u32>,
    pub cc1: Vec<u32>,
    pub co: Vec<u32>,
}

impl ScoapReport {
    pub fn cc(&self, net: NetId, value: bool) -> u32 {
        if value {
            self.cc1[net.index()]
        } else {
            self.cc0[net.index()]
        }
    }
}

/// Cheapest (even, odd) parity assignment over the given (cc0, cc1) pairs.
fn parity_costs(ins: &[(u32, u32)]) -> (u32, u32) {
    let mut even = 0u32;
    let mut odd = INF;
    for &(c0, c1) in ins {
        let e = add([even, c0]).min(add([odd, c1]));
        let o = add([even, c1]).min(add([odd, c0]));
        even = e;
        odd = o;
    }
    (even, odd)
}

/// Forward values for one gate from its input controllabilities.
fn controllability(kind: GateKind, ins: &[(u32, u32)]) -> (u32, u32) {
    let min0 = || ins.iter().map(|x| x.0).min().unwrap_or(INF);
    let min1 = || ins.iter().map(|x| x.1).min().unwrap_or(INF);
    let sum0 = || add(ins.iter().map(|x| x.0));
    let sum1 = || add(ins.iter().map(|x| x.1));
    let (c0, c1) = match kind {
        GateKind::And => (min0(), sum1()),
        GateKind::Nand => (sum1(), min0()),
        GateKind::Or => (sum0(), min1()),
        GateKind::Nor => (min1(), sum0()),
        GateKind::Xor => parity_costs(ins),
        GateKind::Xnor => {
            let (e, o) = parity_costs(ins);
            (o, e)
        }
        GateKind::Not => (ins[0].1, ins[0].0),
        GateKind::Buf => ins[0],
        GateKind::Const0 => return (1, INF),
        GateKind::Const1 => return (INF, 1),
        GateKind::Mux2 => {
            let [s, a, b] = [ins[0], ins[1], ins[2]];
            let ns = mux_not(s);
            let t1 = controllability(GateKind::And, &[ns, a]);
            let t2 = controllability(GateKind::And, &[s, b]);
            return controllability(GateKind::Or, &[t1, t2]);
        }
    };
    (add([c0, 1]), add([c1, 1]))
}

fn mux_not(s: (u32, u32)) -> (u32, u32) {
    controllability(GateKind::Not, &[s])
}

/// Observability of each input pin given the output's observability.
fn observability(kind: GateKind, ins: &[(u32, u32)], co_out: u32) -> Vec<u32> {
    let others = |i: usize, f: &dyn Fn((u32, u32)) -> u32| {
        add(ins.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &x)| f(x)).chain([co_out, 1]))
    };
    match kind {
        GateKind::And | GateKind::Nand => (0..ins.len()).map(|i| others(i, &|x| x.1)).collect(),
        GateKind::Or | GateKind::Nor => (0..ins.len()).map(|i| others(i, &|x| x.0)).collect(),
        GateKind::Xor | GateKind::Xnor => (0..ins.len()).map(|i| others(i, &|x| x.0.min(x.1))).collect(),
        GateKind::Not | GateKind::Buf => vec![add([co_out, 1])],
        GateKind::Const0 | GateKind::Const1 => vec![],
        GateKind::Mux2 => {
            let [s, a, b] = [ins[0], ins[1], ins[2]];
            let ns = mux_not(s);
            let t1 = controllability(GateKind::And, &[ns, a]);
            let t2 = controllability(GateKind::And, &[s, b]);
            let co_t = observability(GateKind::Or, &[t1, t2], co_out);
            let via1 = observability(GateKind::And, &[ns, a], co_t[0]);
            let via2 = observability(GateKind::And, &[s, b], co_t[1]);
            let co_ns = observability(GateKind::Not, &[s], via1[0])[0];
            vec![co_ns.min(via2[0]), via1[1], via2[1]]
        }
    }
}

pub fn scoap(netlist: &Netlist) -> Result<ScoapReport, CycleError> {
    let order = netlist.topo_order()?;
    let n = netlist.num_nets();
    let mut cc0 = vec![INF; n];
    let mut cc1 = vec![INF; n];
    for &i in netlist.inputs() {
        cc0[i.index()] = 1;
        cc1[i.index()] = 1;
    }
    let pairs = |cc0: &[u32], cc1: &[u32], ins: &[NetId]| -> Vec<(u32, u32)> {
        ins.iter().map(|i| (cc0[i.index()], cc1[i.index()])).collect()
    };
    for &gid in order {
        let g = netlist.gate(gid);
        let (c0, c1) = controllability(g.kind, &pairs(&cc0, &cc1, &g.inputs));
        cc0[g.output.index()] = c0;
        cc1[g.output.index()] = c1;
    }
    let mut co = vec![INF; n];
    for &o in netlist.outputs() {
        co[o.index()] = 0;
    }
    for &gid in order.iter().rev() {
        let g = netlist.gate(gid);
        let pins = observability(g.kind, &pairs(&cc0, &cc1, &g.inputs), co[g.output.index()]);
        for (net, v) in g.inputs.iter().zip(pins) {
            co[net.index()] = co[net.index()].min(v);
        }
    }
    Ok(ScoapReport { cc0, cc1, co })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::parse_netlist;

    fn report(t: &str) -> (Netlist, ScoapReport) {
        let n = parse_netlist(t).unwrap();
        let r = scoap(&n).unwrap();
        (n, r)
    }

    #[test]
    fn and2_forward_and_backward() {
        let (n, r) = report("input a\ninput b\ngate g0 AND y a b\noutput y\n");
        let [a, y] = ["a", "y"].map(|s| n.find_net(s).unwrap().index());
        assert_eq!((r.cc0[a], r.cc1[a]), (1, 1));
        assert_eq!((r.cc0[y], r.cc1[y]), (2, 3));
        assert_eq!(r.co[a], 2);
        assert_eq!(r.co[y], 0);
    }

    #[test]
    fn not_chain_closed_form() {
        let mut t = String::from("input n0\n");
        for i in 0..7 {
            t += &format!("gate g{i} NOT n{} n{i}\n", i + 1);
        }
        t += "output n7\n";
        let (n, r) = report(&t);
        let end = n.find_net("n7").unwrap().index();
        assert_eq!((r.cc0[end], r.cc1[end]), (8, 8));
        assert_eq!(r.co[n.find_net("n0").unwrap().index()], 7);
    }

    #[test]
    fn constants_saturate() {
        let (n, r) = report("input a\ngate g0 CONST0 z\ngate g1 AND y a z\noutput y\n");
        let [z, y, a] = ["z", "y", "a"].map(|s| n.find_net(s).unwrap().index());
        assert_eq!((r.cc0[z], r.cc1[z]), (1, INF));
        assert_eq!(r.cc1[y], INF);
        assert_eq!(r.co[a], INF);
    }

    #[test]
    fn xor3_parity() {
        let (n, r) = report("input a\ninput b\ninput c\ngate g0 XOR y a b c\noutput y\n");
        let y = n.find_net("y").unwrap().index();
        assert_eq!((r.cc0[y], r.cc1[y]), (4, 4));
        assert_eq!(r.co[n.find_net("a").unwrap().index()], 3);
    }

    #[test]
    fn mux_matches_decomposition() {
        let (n, r) = report("input s\ninput a\ninput b\ngate g0 MUX2 y s a b\noutput y\n");
        let (m, q) = report(
            "input s\ninput a\ninput b\ngate g0 NOT ns s\ngate g1 AND t1 ns a\ngate g2 AND t2 s b\ngate g3 OR y t1 t2\noutput y\n",
        );
        for name in ["s", "a", "b", "y"] {
            let i = n.find_net(name).unwrap().index();
            let j = m.find_net(name).unwrap().index();
            assert_eq!((r.cc0[i], r.cc1[i], r.co[i]), (q.cc0[j], q.cc1[j], q.co[j]), "{name}");
        }
    }
}
