#![allow(dead_code)]

use approxht::netlist::{GateKind, InstanceInfo, InstanceKind, NetId, Netlist, NetlistBuilder};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const KINDS: [GateKind; 11] = GateKind::ALL;

fn arity(kind: GateKind, rng: &mut ChaCha8Rng) -> usize {
    match kind {
        GateKind::Not | GateKind::Buf => 1,
        GateKind::Mux2 => 3,
        GateKind::Const0 | GateKind::Const1 => 0,
        _ => rng.gen_range(2..=3),
    }
}

/// Random combinational DAG. Every net without sinks becomes an output, so
/// nothing is dead.
pub fn random_dag(seed: u64, n_inputs: usize, n_gates: usize) -> Netlist {
    random_dag_with(seed, n_inputs, n_gates, &KINDS)
}

pub fn random_dag_with(seed: u64, n_inputs: usize, n_gates: usize, kinds: &[GateKind]) -> Netlist {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = NetlistBuilder::new();
    b.set_instance("top.a", InstanceInfo::new(InstanceKind::Approximate, "add", "exact"));
    b.set_instance("top.b", InstanceInfo::glue());
    let mut nets: Vec<NetId> = (0..n_inputs).map(|i| b.add_input(&format!("i{i}"))).collect();
    let mut used = vec![false; n_inputs];
    for g in 0..n_gates {
        let kind = kinds[rng.gen_range(0..kinds.len())];
        let k = arity(kind, &mut rng);
        // bias towards recent nets for depth
        let ins: Vec<NetId> = (0..k)
            .map(|_| {
                let lo = nets.len().saturating_sub(8);
                let j = if rng.gen_bool(0.6) { rng.gen_range(lo..nets.len()) } else { rng.gen_range(0..nets.len()) };
                used[j] = true;
                nets[j]
            })
            .collect();
        let tag = if g % 2 == 0 { "top.a" } else { "top.b" };
        nets.push(b.gate(kind, ins, tag));
        used.push(false);
    }
    for (j, &n) in nets.iter().enumerate().skip(n_inputs) {
        if !used[j] {
            b.add_output(n);
        }
    }
    b.finish().expect("well-formed random netlist")
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Scalar brute-force error metrics of a two-operand module against its
/// exact oracle over every operand pair: (er, med, mred, wce).
pub fn brute_error(n: &Netlist, op: approxht::arith::OpType, width: usize) -> (f64, f64, f64, u64) {
    let (mut errs, mut sum_d, mut sum_rel, mut wce) = (0u64, 0u64, 0f64, 0u64);
    let total = 1u64 << (2 * width);
    // word 0 varies fastest, like the exhaustive stream
    for b in 0..1u64 << width {
        for a in 0..1u64 << width {
            let got = approxht::sim::eval_words_scalar(n, &[a, b])[0];
            let want = approxht::arith::exact_oracle(op, a, b, width);
            let d = got.abs_diff(want);
            if d != 0 {
                errs += 1;
                sum_d += d;
                sum_rel += d as f64 / want.max(1) as f64;
                wce = wce.max(d);
            }
        }
    }
    (errs as f64 / total as f64, sum_d as f64 / total as f64, sum_rel / total as f64, wce)
}

/// Hand-worked SCOAP circuits: (name, netlist text, [(net, cc0, cc1, co)]).
pub fn scoap_hand_cases() -> Vec<(&'static str, &'static str, Vec<(&'static str, u32, u32, u32)>)> {
    vec![
        (
            "not chain",
            "input i\ngate g1 NOT n1 i\ngate g2 NOT n2 n1\ngate g3 NOT n3 n2\noutput n3\n",
            vec![("i", 1, 1, 3), ("n1", 2, 2, 2), ("n2", 3, 3, 1), ("n3", 4, 4, 0)],
        ),
        (
            "buf chain",
            "input i\ngate g1 BUF b1 i\ngate g2 BUF b2 b1\noutput b2\n",
            vec![("i", 1, 1, 2), ("b1", 2, 2, 1), ("b2", 3, 3, 0)],
        ),
        ("and2", "input a\ninput b\ngate g AND y a b\noutput y\n", vec![("a", 1, 1, 2), ("b", 1, 1, 2), ("y", 2, 3, 0)]),
        (
            "or3",
            "input a\ninput b\ninput c\ngate g OR y a b c\noutput y\n",
            vec![("a", 1, 1, 3), ("c", 1, 1, 3), ("y", 4, 2, 0)],
        ),
        (
            "and tree",
            "input a\ninput b\ninput c\ninput d\ngate g1 AND x a b\ngate g2 AND z c d\ngate g3 AND y x z\noutput y\n",
            vec![("a", 1, 1, 6), ("d", 1, 1, 6), ("x", 2, 3, 4), ("z", 2, 3, 4), ("y", 3, 7, 0)],
        ),
        (
            "and into or",
            "input a\ninput b\ninput c\ngate g1 AND x a b\ngate g2 OR y x c\noutput y\n",
            vec![("a", 1, 1, 4), ("b", 1, 1, 4), ("c", 1, 1, 3), ("x", 2, 3, 2), ("y", 4, 2, 0)],
        ),
        (
            "nand into nor",
            "input a\ninput b\ninput c\ngate g1 NAND x a b\ngate g2 NOR y x c\noutput y\n",
            vec![("a", 1, 1, 4), ("b", 1, 1, 4), ("c", 1, 1, 4), ("x", 3, 2, 2), ("y", 2, 5, 0)],
        ),
        ("xor2", "input a\ninput b\ngate g XOR y a b\noutput y\n", vec![("a", 1, 1, 2), ("b", 1, 1, 2), ("y", 3, 3, 0)]),
        (
            "fanout stem",
            "input a\ninput b\ngate g1 NOT n1 a\ngate g2 AND y a b\noutput n1\noutput y\n",
            vec![("a", 1, 1, 1), ("b", 1, 1, 2), ("n1", 2, 2, 0), ("y", 2, 3, 0)],
        ),
        (
            "2-bit ripple adder",
            "input a0\ninput a1\ninput b0\ninput b1\n\
             gate x0 XOR s0 a0 b0\ngate n0 AND c0 a0 b0\n\
             gate x1 XOR t a1 b1\ngate x2 XOR s1 t c0\n\
             gate n1 AND g a1 b1\ngate n2 AND p t c0\ngate o1 OR c1 g p\n\
             output s0\noutput s1\noutput c1\n",
            vec![
                ("a0", 1, 1, 2),
                ("b0", 1, 1, 2),
                ("a1", 1, 1, 5),
                ("b1", 1, 1, 5),
                ("s0", 3, 3, 0),
                ("c0", 2, 3, 4),
                ("t", 3, 3, 3),
                ("g", 2, 3, 4),
                ("p", 3, 7, 3),
                ("s1", 6, 6, 0),
                ("c1", 6, 4, 0),
            ],
        ),
    ]
}

/// Ten clean exact-architecture copies of the FIR (even seeds) or FFT
/// butterfly (odd seeds).
pub fn exact_clean_set(seed: u64) -> Vec<approxht::detect::Candidate> {
    use approxht::bench::{build_netlist, Assignment, DesignConfig, DesignKind};
    let design = if seed % 2 == 0 { DesignKind::fir_default() } else { DesignKind::fft_default() };
    let n = build_netlist(&DesignConfig { design, assignment: Assignment::EXACT }).expect("exact design");
    (0..10).map(|i| approxht::detect::Candidate { id: format!("c{i:02}"), netlist: n.clone() }).collect()
}
