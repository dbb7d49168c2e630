//! Error, activity and power profiles built on top of simulation results.

use crate::arith::{exact_oracle, ArchParams};
use crate::netlist::{Driver, NetId, Netlist};

use super::{SimError, SimResult, Simulator, VectorStream};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorReport {
    pub n_vectors: usize,
    pub er: f64,
    pub med: f64,
    pub mred: f64,
    pub wce: u64,
}

/// What the outputs are compared against.
#[derive(Debug, Clone)]
pub enum Reference<'a> {
    /// Single-operator module: inputs are words `a` and `b` in that order.
    Oracle(ArchParams),
    /// Precomputed reference outputs, indexed like `SimResult::outputs`.
    Words(&'a [Vec<u64>]),
}

/// Per-vector error distance summed over output words, and the matching
/// reference magnitude.
fn distances(outputs: &[Vec<u64>], reference: &[Vec<u64>], t: usize) -> (u64, u64) {
    outputs.iter().zip(reference).fold((0u64, 0u64), |(d, r), (o, e)| (d + o[t].abs_diff(e[t]), r + e[t]))
}

pub fn error_metrics(outputs: &[Vec<u64>], reference: &[Vec<u64>]) -> ErrorReport {
    assert_eq!(outputs.len(), reference.len(), "output word count differs from reference");
    let n = outputs.first().map_or(0, |o| o.len());
    if n == 0 {
        return ErrorReport::default();
    }
    let (mut errs, mut sum_d, mut sum_rel, mut wce) = (0usize, 0f64, 0f64, 0u64);
    for t in 0..n {
        let (d, r) = distances(outputs, reference, t);
        if d > 0 {
            errs += 1;
            sum_d += d as f64;
            sum_rel += d as f64 / r.max(1) as f64;
            wce = wce.max(d);
        }
    }
    ErrorReport {
        n_vectors: n,
        er: errs as f64 / n as f64,
        med: sum_d / n as f64,
        mred: sum_rel / n as f64,
        wce,
    }
}

pub fn oracle_outputs(params: &ArchParams, stream: &VectorStream) -> Result<Vec<Vec<u64>>, SimError> {
    let col = |name: &str| {
        stream
            .words
            .iter()
            .position(|(n, w)| n == name && *w == params.width)
            .ok_or_else(|| SimError::StreamMismatch(format!("stream lacks {}-bit word {name}", params.width)))
    };
    let (a, b) = (col("a")?, col("b")?);
    Ok(vec![(0..stream.len())
        .map(|t| exact_oracle(params.op_type, stream.values[a][t], stream.values[b][t], params.width))
        .collect()])
}

pub fn error_profile(netlist: &Netlist, reference: &Reference, stream: &VectorStream) -> Result<ErrorReport, SimError> {
    let outputs = Simulator::new(netlist)?.outputs(stream)?;
    let owned;
    let reference = match reference {
        Reference::Oracle(p) => {
            owned = oracle_outputs(p, stream)?;
            &owned[..]
        }
        Reference::Words(w) => *w,
    };
    if reference.len() != outputs.len() || reference.iter().any(|r| r.len() != stream.len()) {
        return Err(SimError::StreamMismatch("reference shape differs from netlist outputs".into()));
    }
    Ok(error_metrics(&outputs, reference))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActivityReport {
    pub total_cycles: usize,
    /// Number of cycles each net spent at 1.
    pub ones: Vec<u64>,
    pub toggles: Vec<u64>,
}

impl ActivityReport {
    pub fn p1(&self, net: NetId) -> f64 {
        if self.total_cycles == 0 {
            0.0
        } else {
            self.ones[net.index()] as f64 / self.total_cycles as f64
        }
    }

    pub fn num_nets(&self) -> usize {
        self.ones.len()
    }
}

pub fn activity_profile(sim: &SimResult) -> ActivityReport {
    let n = sim.n_vectors;
    let nets = sim.num_nets();
    let mut ones = Vec::with_capacity(nets);
    let mut toggles = Vec::with_capacity(nets);
    for net in 0..nets {
        let tr = sim.trace(NetId(net as u32));
        let mut o = 0u64;
        let mut tg = 0u64;
        let mut prev_last = 0u64;
        for (blk, &w) in tr.iter().enumerate() {
            let lanes = (n - blk * 64).min(64);
            o += w.count_ones() as u64;
            // bit t of `shifted` is the value at t-1
            let shifted = (w << 1) | prev_last;
            let mut diff = w ^ shifted;
            if blk == 0 {
                diff &= !1;
            }
            if lanes < 64 {
                diff &= (1u64 << lanes) - 1;
            }
            tg += diff.count_ones() as u64;
            prev_last = (w >> 63) & 1;
        }
        ones.push(o);
        toggles.push(tg);
    }
    ActivityReport { total_cycles: n, ones, toggles }
}

/// Nets that sit at one value in fewer than `theta` of the cycles, with that value.
pub fn rare_nets(report: &ActivityReport, theta: f64) -> Result<Vec<(NetId, bool)>, SimError> {
    if !(theta > 0.0 && theta < 0.5) {
        return Err(SimError::BadThreshold(theta));
    }
    let mut out = Vec::new();
    for i in 0..report.num_nets() {
        let net = NetId(i as u32);
        let p1 = report.p1(net);
        if p1 < theta {
            out.push((net, true));
        } else if 1.0 - p1 < theta {
            out.push((net, false));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerProxy {
    pub value: f64,
    /// `value / baseline.value` when a baseline was given.
    pub ratio: Option<f64>,
}

/// Switched-capacitance proxy over gate-driven nets.
pub fn power_proxy(netlist: &Netlist, report: &ActivityReport, baseline: Option<&PowerProxy>) -> PowerProxy {
    let value: f64 = (0..netlist.num_nets())
        .map(|i| NetId(i as u32))
        .filter(|&n| matches!(netlist.driver(n), Driver::Gate(_)))
        .map(|n| report.toggles[n.index()] as f64 * (1 + netlist.fanout(n)) as f64)
        .sum();
    let ratio = baseline.map(|b| if b.value == 0.0 { if value == 0.0 { 1.0 } else { f64::INFINITY } } else { value / b.value });
    PowerProxy { value, ratio }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{gen_module, ArchId, OpType};
    use crate::netlist::parse_netlist;
    use crate::sim::{simulate, word_shape, StreamMode, StreamSpec};

    fn exhaustive_for(n: &Netlist) -> VectorStream {
        VectorStream::exhaustive(&word_shape(&n.input_words()))
    }

    #[test]
    fn exact_adder_has_no_error() {
        let p = ArchParams::exact(OpType::Add, 6);
        let n = gen_module(&p).unwrap();
        let s = VectorStream::for_netlist(&n, StreamSpec::new(500, 3, StreamMode::Uniform));
        let r = error_profile(&n, &Reference::Oracle(p), &s).unwrap();
        assert_eq!((r.er, r.med, r.wce), (0.0, 0.0, 0));
    }

    #[test]
    fn block22_width2_exhaustive() {
        let p = ArchParams::new(OpType::Mul, ArchId::Block22, 2, 1);
        let n = gen_module(&p).unwrap();
        let r = error_profile(&n, &Reference::Oracle(p), &exhaustive_for(&n)).unwrap();
        assert_eq!(r.er, 1.0 / 16.0);
        assert_eq!(r.med, 0.125);
        assert_eq!(r.wce, 2);
        assert!((r.mred - 2.0 / 9.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn loa_matches_brute_force() {
        let p = ArchParams::new(OpType::Add, ArchId::Loa, 4, 2);
        let n = gen_module(&p).unwrap();
        let r = error_profile(&n, &Reference::Oracle(p), &exhaustive_for(&n)).unwrap();
        let (mut errs, mut dist) = (0, 0u64);
        for a in 0..16u64 {
            for b in 0..16u64 {
                let lo = (a | b) & 3;
                let hi = ((a >> 2) + (b >> 2)) << 2;
                let d = (hi | lo).abs_diff(a + b);
                errs += (d > 0) as usize;
                dist += d;
            }
        }
        assert_eq!(r.er, errs as f64 / 256.0);
        assert_eq!(r.med, dist as f64 / 256.0);
    }

    fn activity_of(text: &str, stream: &VectorStream) -> (Netlist, ActivityReport) {
        let n = parse_netlist(text).unwrap();
        let r = activity_profile(&simulate(&n, stream).unwrap());
        (n, r)
    }

    #[test]
    fn constant_and_alternating_nets() {
        let words = vec![("a".to_string(), 1)];
        let alt: Vec<u64> = (0..1000).map(|t| t % 2).collect();
        let s = VectorStream::from_values(&words, vec![alt]);
        let (n, r) = activity_of("input a\ngate g0 CONST0 z\ngate g1 BUF y a\noutput y\noutput z\n", &s);
        let z = n.find_net("z").unwrap();
        let y = n.find_net("y").unwrap();
        assert_eq!((r.p1(z), r.toggles[z.index()]), (0.0, 0));
        assert_eq!((r.p1(y), r.toggles[y.index()]), (0.5, 999));
    }

    #[test]
    fn and8_is_rare() {
        let mut t = String::new();
        for i in 0..8 {
            t += &format!("input x{i}\n");
        }
        t += "gate g0 AND y x0 x1 x2 x3 x4 x5 x6 x7\noutput y\n";
        let n = parse_netlist(&t).unwrap();
        let s = VectorStream::for_netlist(&n, StreamSpec::new(100_000, 11, StreamMode::Uniform));
        let r = activity_profile(&simulate(&n, &s).unwrap());
        let y = n.find_net("y").unwrap();
        let p: f64 = 1.0 / 256.0;
        let sigma = (p * (1.0 - p) / 100_000.0).sqrt();
        assert!((r.p1(y) - p).abs() < 3.0 * sigma, "p1 = {}", r.p1(y));
        let rare = rare_nets(&r, 0.01).unwrap();
        assert!(rare.contains(&(y, true)));
        assert!(!rare.iter().any(|(n, _)| *n != y));
    }

    #[test]
    fn bad_threshold() {
        let r = ActivityReport { total_cycles: 1, ones: vec![0], toggles: vec![0] };
        assert_eq!(rare_nets(&r, 0.6), Err(SimError::BadThreshold(0.6)));
        assert!(rare_nets(&r, 0.0).is_err());
    }

    #[test]
    fn not_gate_power() {
        let words = vec![("a".to_string(), 1)];
        let alt: Vec<u64> = (0..1000).map(|t| t % 2).collect();
        let (n, r) = activity_of("input a\ngate g0 NOT y a\noutput y\n", &VectorStream::from_values(&words, vec![alt]));
        assert_eq!(power_proxy(&n, &r, None).value, 999.0);
        let still = VectorStream::from_values(&words, vec![vec![1; 1000]]);
        let (n, r) = activity_of("input a\ngate g0 NOT y a\noutput y\n", &still);
        let p = power_proxy(&n, &r, None);
        assert_eq!(p.value, 0.0);
    }

    #[test]
    fn truncation_saves_power() {
        let exact = gen_module(&ArchParams::exact(OpType::Add, 8)).unwrap();
        let trunc = gen_module(&ArchParams::new(OpType::Add, ArchId::Trunc, 8, 2)).unwrap();
        let s = VectorStream::for_netlist(&exact, StreamSpec::new(1000, 5, StreamMode::Uniform));
        let pe = power_proxy(&exact, &activity_profile(&simulate(&exact, &s).unwrap()), None);
        let pt = power_proxy(&trunc, &activity_profile(&simulate(&trunc, &s).unwrap()), Some(&pe));
        assert!(pt.value < pe.value);
        assert!(pt.ratio.unwrap() < 1.0);
    }

    #[test]
    fn toggles_cross_block_boundaries() {
        let words = vec![("a".to_string(), 1)];
        let vals: Vec<u64> = (0..200).map(|t| ((t / 3) % 2) as u64).collect();
        let expect = vals.windows(2).filter(|w| w[0] != w[1]).count() as u64;
        let (n, r) = activity_of("input a\ngate g0 BUF y a\noutput y\n", &VectorStream::from_values(&words, vec![vals]));
        assert_eq!(r.toggles[n.find_net("y").unwrap().index()], expect);
    }
}
