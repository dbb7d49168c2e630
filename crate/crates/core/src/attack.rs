//! Module characterization, budget checks and Trojan insertion.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::arith::{gen_module, ArchParams, ArithError};
use crate::justify::{Justifier, JustifyLimits};
use crate::netlist::{Driver, GateKind, InstanceKind, NetId, Netlist, NetlistError};
use crate::scoap::{scoap, ScoapReport};
use crate::sim::{
    activity_profile, error_metrics, error_profile, power_proxy, rare_nets, simulate, ActivityReport, Reference,
    SimError, SimResult, Simulator, StreamSpec, VectorStream,
};
use crate::sta::{sta, DelayModel, StaError};

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("only {found} usable rare nets, trigger needs {q}")]
    NoRareNets { found: usize, q: usize },
    #[error("no input vector fires the trigger within the search budget")]
    NoWitness,
    #[error("infected netlist misses timing (min slack {min_slack})")]
    WouldViolateTiming { min_slack: f64 },
    #[error("profiles come from different streams")]
    UnitMismatch,
    #[error("bad attack parameters: {0}")]
    BadParams(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Sta(#[from] StaError),
    #[error(transparent)]
    Netlist(#[from] NetlistError),
    #[error(transparent)]
    Arith(#[from] ArithError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostWeights {
    pub w_ap: f64,
    pub w_r: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        CostWeights { w_ap: 0.5, w_r: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModuleSpec {
    pub params: ArchParams,
    pub e_norm: f64,
    pub p_norm: f64,
    pub rare_count: usize,
    pub r_norm: f64,
    /// Largest cc1 among the rare nets (0 when there are none).
    pub scoap_max_cc1: u32,
    pub stream: Option<StreamSpec>,
}

/// Rare nets that can serve as trigger literals: gate-driven, not constant,
/// and seen at their rare value at least once.
pub fn usable_rare_nets(
    netlist: &Netlist,
    activity: &ActivityReport,
    theta: f64,
) -> Result<Vec<(NetId, bool)>, SimError> {
    Ok(rare_nets(activity, theta)?
        .into_iter()
        .filter(|&(n, v)| {
            let seen = if v { activity.ones[n.index()] } else { activity.total_cycles as u64 - activity.ones[n.index()] };
            let driven = match netlist.driver(n) {
                Driver::Gate(g) => !netlist.gate(g).kind.is_const(),
                Driver::Input => false,
            };
            driven && seen > 0
        })
        .collect())
}

pub fn characterize(params: &ArchParams, stream: &VectorStream, theta: f64) -> Result<ModuleSpec, AttackError> {
    let n = gen_module(params)?;
    let sim = simulate(&n, stream)?;
    let activity = activity_profile(&sim);
    let e = error_profile(&n, &Reference::Oracle(*params), stream)?;
    let base = gen_module(&ArchParams::exact(params.op_type, params.width))?;
    let base_power = power_proxy(&base, &activity_profile(&simulate(&base, stream)?), None);
    let power = power_proxy(&n, &activity, Some(&base_power));
    let rare = usable_rare_nets(&n, &activity, theta)?;
    let sc = scoap(&n).map_err(SimError::from)?;
    Ok(ModuleSpec {
        params: *params,
        e_norm: e.mred,
        p_norm: power.ratio.unwrap_or(1.0),
        rare_count: rare.len(),
        r_norm: rare.len() as f64 / n.num_nets() as f64,
        scoap_max_cc1: rare.iter().map(|&(net, _)| sc.cc1[net.index()]).max().unwrap_or(0),
        stream: stream.spec,
    })
}

/// Higher is more attractive: more error, more power saved, more rare nets.
pub fn attack_score(spec: &ModuleSpec, w: &CostWeights) -> f64 {
    w.w_ap * (spec.e_norm + (1.0 - spec.p_norm)) + w.w_r * spec.r_norm
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BudgetConstraints {
    pub e_prime: f64,
    pub p_prime: f64,
    pub delta_e: f64,
    pub delta_p: f64,
}

impl BudgetConstraints {
    pub fn validate(&self) -> Result<(), AttackError> {
        if !(self.delta_e > 0.0 && self.delta_p > 0.0) {
            return Err(AttackError::BadParams("budget slacks must be positive".into()));
        }
        Ok(())
    }
}

impl FromStr for BudgetConstraints {
    type Err = AttackError;

    /// `e,p,de,dp`
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let v: Vec<f64> = s
            .split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| AttackError::BadParams(format!("budget {s}: {e}")))?;
        let [e_prime, p_prime, delta_e, delta_p] = v[..] else {
            return Err(AttackError::BadParams(format!("budget {s} needs four values")));
        };
        let b = BudgetConstraints { e_prime, p_prime, delta_e, delta_p };
        b.validate()?;
        Ok(b)
    }
}

impl fmt::Display for BudgetConstraints {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.e_prime, self.p_prime, self.delta_e, self.delta_p)
    }
}

/// Error and power of a composed netlist, in the units of [`ModuleSpec`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComposedMetrics {
    pub error: f64,
    pub power: f64,
    pub stream: Option<StreamSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BudgetCheck {
    pub pass: bool,
    /// `delta_e - (E' - sum e_norm)`; positive when the error constraint holds.
    pub error_margin: f64,
    pub power_margin: f64,
}

pub fn check_budget(
    selected: &[ModuleSpec],
    composed: &ComposedMetrics,
    budget: &BudgetConstraints,
) -> Result<BudgetCheck, AttackError> {
    if selected.iter().any(|s| s.stream != composed.stream) {
        return Err(AttackError::UnitMismatch);
    }
    let sum_e: f64 = selected.iter().map(|s| s.e_norm).sum();
    let sum_p: f64 = selected.iter().map(|s| s.p_norm).sum();
    let lhs_e = composed.error - sum_e;
    let lhs_p = composed.power - sum_p;
    Ok(BudgetCheck {
        pass: lhs_e < budget.delta_e && lhs_p < budget.delta_p,
        error_margin: budget.delta_e - lhs_e,
        power_margin: budget.delta_p - lhs_p,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PayloadKind {
    /// Route a secret word to the outputs while triggered.
    Leak,
    /// Flip one output bit while triggered.
    Corrupt,
}

impl PayloadKind {
    pub fn label(self) -> &'static str {
        match self {
            PayloadKind::Leak => "leak",
            PayloadKind::Corrupt => "corrupt",
        }
    }
}

impl FromStr for PayloadKind {
    type Err = AttackError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "leak" => Ok(PayloadKind::Leak),
            "corrupt" => Ok(PayloadKind::Corrupt),
            _ => Err(AttackError::BadParams(format!("unknown payload {s}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct InsertConfig {
    pub q: usize,
    pub theta: f64,
    pub payload: PayloadKind,
    /// Secret bits for a leak, LSB first.
    pub secret: Vec<NetId>,
    /// Number of top output bits overwritten by the secret (LSB of the
    /// secret lands on the lowest of them). `None` leaks as much as fits.
    pub leak_bits: Option<usize>,
    /// Output bit (over all output words, LSB first) flipped by a corrupt payload.
    pub corrupt_bit: usize,
    pub seed: u64,
    pub scoap_ceiling: u32,
    pub witness_budget: usize,
    pub clock: f64,
    pub delay: DelayModel,
    /// Attack score per module tag; modules absent here score 0.
    pub module_scores: BTreeMap<String, f64>,
}

impl Default for InsertConfig {
    fn default() -> Self {
        InsertConfig {
            q: 4,
            theta: 0.01,
            payload: PayloadKind::Corrupt,
            secret: Vec::new(),
            leak_bits: None,
            corrupt_bit: 0,
            seed: 0,
            scoap_ceiling: 50,
            witness_budget: 1_000_000,
            clock: 10.0,
            delay: DelayModel::default(),
            module_scores: BTreeMap::new(),
        }
    }
}

/// Profiling data of the clean netlist that insertion draws on.
pub struct TraceProfile<'a> {
    pub stream: &'a VectorStream,
    pub sim: &'a SimResult,
    pub activity: &'a ActivityReport,
    pub scoap: &'a ScoapReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HTInstance {
    /// Trigger literals as (net, required value).
    pub trigger: Vec<(NetId, bool)>,
    pub q: usize,
    pub payload: PayloadKind,
    /// Output nets whose value the payload controls.
    pub payload_targets: Vec<NetId>,
    /// Input word values (netlist `input_words()` order) that fire the trigger.
    pub witness: Vec<u64>,
    /// Module whose tag the Trojan gates live under.
    pub host: String,
    /// Tag carried by every inserted gate.
    pub host_tag: String,
    /// Net driven by the root of the trigger tree.
    pub trigger_net: NetId,
}

struct Candidate {
    net: NetId,
    value: bool,
    module: String,
    score: f64,
    rarity: f64,
    cc: u64,
    support: u64,
}

fn select_literals(cands: &[Candidate], q: usize, order_by_support: bool) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..cands.len()).collect();
    idx.sort_by(|&a, &b| {
        let (x, y) = (&cands[a], &cands[b]);
        let sup = if order_by_support {
            x.support.count_ones().cmp(&y.support.count_ones())
        } else {
            std::cmp::Ordering::Equal
        };
        sup.then(y.score.total_cmp(&x.score))
            .then(x.module.cmp(&y.module))
            .then(x.rarity.total_cmp(&y.rarity))
            .then(x.cc.cmp(&y.cc))
            .then(x.net.cmp(&y.net))
    });
    let mut chosen = Vec::new();
    let mut used = 0u64;
    for &i in &idx {
        if chosen.len() == q {
            break;
        }
        if cands[i].support & used == 0 {
            chosen.push(i);
            used |= cands[i].support;
        }
    }
    chosen
}

/// Inserts a rare-net-triggered Trojan into a copy of `netlist`.
pub fn insert_trojan(
    netlist: &Netlist,
    profile: &TraceProfile,
    config: &InsertConfig,
) -> Result<(Netlist, HTInstance), AttackError> {
    if config.q == 0 {
        return Err(AttackError::BadParams("trigger arity q must be positive".into()));
    }
    let rare = usable_rare_nets(netlist, profile.activity, config.theta)?;
    let supports = crate::justify::word_supports(netlist)?;
    let cands: Vec<Candidate> = rare
        .into_iter()
        .filter_map(|(net, value)| {
            let tag = netlist.net_tag(net)?;
            let module = netlist.module_of(tag).to_string();
            let info = netlist.instances().get(&module)?;
            let (c0, c1) = (profile.scoap.cc0[net.index()], profile.scoap.cc1[net.index()]);
            if info.kind != InstanceKind::Approximate || c0 > config.scoap_ceiling || c1 > config.scoap_ceiling {
                return None;
            }
            let p1 = profile.activity.p1(net);
            Some(Candidate {
                net,
                value,
                score: config.module_scores.get(&module).copied().unwrap_or(0.0),
                module,
                rarity: if value { p1 } else { 1.0 - p1 },
                cc: c0 as u64 + c1 as u64,
                support: supports[net.index()],
            })
        })
        .collect();
    let by_score = select_literals(&cands, config.q, false);
    let mut chosen = if by_score.len() < config.q {
        let by_support = select_literals(&cands, config.q, true);
        if by_support.len() > by_score.len() {
            by_support
        } else {
            by_score
        }
    } else {
        by_score
    };
    // top up with overlapping literals when disjoint ones run out
    if chosen.len() < config.q {
        let taken: HashSet<usize> = chosen.iter().copied().collect();
        let mut rest: Vec<usize> = (0..cands.len()).filter(|i| !taken.contains(i)).collect();
        rest.sort_by(|&a, &b| cands[b].score.total_cmp(&cands[a].score).then(cands[a].net.cmp(&cands[b].net)));
        chosen.extend(rest.into_iter().take(config.q - chosen.len()));
    }
    if chosen.len() < config.q {
        return Err(AttackError::NoRareNets { found: chosen.len(), q: config.q });
    }
    let trigger: Vec<(NetId, bool)> = chosen.iter().map(|&i| (cands[i].net, cands[i].value)).collect();
    let host = chosen
        .iter()
        .map(|&i| &cands[i])
        .fold(None::<&Candidate>, |best, c| match best {
            Some(b) if b.score >= c.score => Some(b),
            _ => Some(c),
        })
        .map(|c| c.module.clone())
        .expect("q > 0");
    let host_tag = format!("{host}.aux");

    let mut b = netlist.to_builder();
    let host_info = netlist.instances()[&host].clone();
    b.set_instance(&host_tag, host_info);
    let mut level: Vec<NetId> = trigger
        .iter()
        .map(|&(n, v)| if v { n } else { b.gate(GateKind::Not, vec![n], &host_tag) })
        .collect();
    while level.len() > 1 {
        level = level
            .chunks(2)
            .map(|c| if c.len() == 2 { b.gate(GateKind::And, c.to_vec(), &host_tag) } else { c[0] })
            .collect();
    }
    let mut trig = level[0];
    if trig == trigger[0].0 {
        // q = 1 with a positive literal: give the trigger its own net
        trig = b.gate(GateKind::Buf, vec![trig], &host_tag);
    }

    let out_bits: Vec<NetId> = netlist.output_words().iter().flat_map(|w| w.bits.clone()).collect();
    let mut targets = Vec::new();
    match config.payload {
        PayloadKind::Leak => {
            if config.secret.is_empty() {
                return Err(AttackError::BadParams("leak payload needs secret nets".into()));
            }
            let n = config.leak_bits.unwrap_or(usize::MAX).min(config.secret.len()).min(out_bits.len());
            let first = out_bits.len() - n;
            for (j, &o) in out_bits[first..].iter().enumerate() {
                let m = b.gate(GateKind::Mux2, vec![trig, o, config.secret[j]], &host_tag);
                b.replace_output(o, m);
                b.swap_names(o, m);
                targets.push(m);
            }
        }
        PayloadKind::Corrupt => {
            let o = *out_bits
                .get(config.corrupt_bit)
                .ok_or_else(|| AttackError::BadParams(format!("no output bit {}", config.corrupt_bit)))?;
            let m = b.gate(GateKind::Xor, vec![trig, o], &host_tag);
            b.replace_output(o, m);
            b.swap_names(o, m);
            targets.push(m);
        }
    }
    let infected = b.finish()?;
    let timing = sta(&infected, &config.delay, config.clock)?;
    if !timing.meets_timing() {
        return Err(AttackError::WouldViolateTiming { min_slack: timing.min_slack() });
    }
    let witness = find_witness(netlist, &infected, profile, &trigger, trig, config)?;
    let ht = HTInstance {
        trigger,
        q: config.q,
        payload: config.payload,
        payload_targets: targets,
        witness,
        host,
        host_tag,
        trigger_net: trig,
    };
    if !witness_fires(&infected, &ht)? {
        return Err(AttackError::NoWitness);
    }
    Ok((infected, ht))
}

/// Simulates the witness on the infected netlist and checks every literal
/// and the trigger root.
pub fn witness_fires(infected: &Netlist, ht: &HTInstance) -> Result<bool, SimError> {
    let words = crate::sim::word_shape(&infected.input_words());
    let s = VectorStream::from_vectors(&words, std::slice::from_ref(&ht.witness));
    let r = simulate(infected, &s)?;
    Ok(r.bit(ht.trigger_net, 0) && ht.trigger.iter().all(|&(n, v)| r.bit(n, 0) == v))
}

fn find_witness(
    clean: &Netlist,
    infected: &Netlist,
    profile: &TraceProfile,
    trigger: &[(NetId, bool)],
    trig: NetId,
    config: &InsertConfig,
) -> Result<Vec<u64>, AttackError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5157_0000);
    let mut j = Justifier::new(clean, profile.stream, profile.sim, JustifyLimits::default())?;
    let widths = j.widths().to_vec();
    let words = crate::sim::word_shape(&infected.input_words());
    let sim = Simulator::new(infected).map_err(SimError::from)?;
    let assigns = j.conjunction(trigger);
    // per literal, the cycles in which it held its rare value
    let cycles: Vec<Vec<usize>> = trigger.iter().map(|&(n, v)| j.observed_cycles(n, v).collect()).collect();
    let supports: Vec<u64> = trigger.iter().map(|&(n, _)| j.support(n)).collect();
    let mut tried = 0;
    while tried < config.witness_budget {
        let batch: Vec<Vec<u64>> = (0..64)
            .map(|k| {
                if !assigns.is_empty() {
                    assigns[(tried + k) % assigns.len()].fill(&widths, &mut rng)
                } else {
                    // crossover: each word from a cycle realizing a literal that reads it
                    let mut v: Vec<u64> = widths.iter().map(|&w| rng.gen::<u64>() & ((1u64 << w) - 1)).collect();
                    for (li, cyc) in cycles.iter().enumerate() {
                        if cyc.is_empty() {
                            continue;
                        }
                        let t = cyc[rng.gen_range(0..cyc.len())];
                        let full = j.cycle_vector(t);
                        for w in 0..widths.len() {
                            if supports[li] >> w & 1 == 1 && rng.gen_bool(0.5) {
                                v[w] = full[w];
                            }
                        }
                    }
                    v
                }
            })
            .collect();
        tried += batch.len();
        if let Some(v) = first_firing(&sim, &words, &batch, trig)? {
            return Ok(v);
        }
    }
    let total_bits: usize = widths.iter().sum();
    if total_bits <= 20 {
        let s = VectorStream::exhaustive(&words);
        let r = sim.simulate(&s)?;
        if let Some(t) = (0..s.len()).find(|&t| r.bit(trig, t)) {
            return Ok(s.vector(t));
        }
    }
    Err(AttackError::NoWitness)
}

fn first_firing(
    sim: &Simulator,
    words: &[(String, usize)],
    batch: &[Vec<u64>],
    trig: NetId,
) -> Result<Option<Vec<u64>>, SimError> {
    let s = VectorStream::from_vectors(words, batch);
    let r = sim.simulate(&s)?;
    Ok((0..batch.len()).find(|&t| r.bit(trig, t)).map(|t| batch[t].clone()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StealthReport {
    pub error_delta: f64,
    pub power_delta_fraction: f64,
    pub trigger_rate: f64,
    pub min_slack: f64,
}

/// Compares infected against clean on `stream`; `reference` holds the
/// intended output words for the error metric. The error delta only counts
/// vectors on which the trigger stays low.
pub fn verify_stealth(
    clean: &Netlist,
    infected: &Netlist,
    ht: &HTInstance,
    stream: &VectorStream,
    reference: &[Vec<u64>],
    delay: &DelayModel,
    clock: f64,
) -> Result<StealthReport, AttackError> {
    let rc = simulate(clean, stream)?;
    let ri = simulate(infected, stream)?;
    let pc = power_proxy(clean, &activity_profile(&rc), None);
    let pi = power_proxy(infected, &activity_profile(&ri), Some(&pc));
    let fired = (0..stream.len()).filter(|&t| ri.bit(ht.trigger_net, t)).count();
    let quiet: Vec<usize> = (0..stream.len()).filter(|&t| !ri.bit(ht.trigger_net, t)).collect();
    let pick = |o: &[Vec<u64>]| -> Vec<Vec<u64>> { o.iter().map(|w| quiet.iter().map(|&t| w[t]).collect()).collect() };
    let ec = error_metrics(&pick(&rc.outputs), &pick(reference));
    let ei = error_metrics(&pick(&ri.outputs), &pick(reference));
    Ok(StealthReport {
        error_delta: ei.mred - ec.mred,
        power_delta_fraction: pi.ratio.unwrap_or(1.0) - 1.0,
        trigger_rate: if stream.is_empty() { 0.0 } else { fired as f64 / stream.len() as f64 },
        min_slack: sta(infected, delay, clock)?.min_slack(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{ArchId, OpType};
    use crate::sim::{StreamMode, StreamSpec};

    fn spec(e: f64, p: f64, r: f64) -> ModuleSpec {
        ModuleSpec {
            params: ArchParams::exact(OpType::Add, 4),
            e_norm: e,
            p_norm: p,
            rare_count: 0,
            r_norm: r,
            scoap_max_cc1: 0,
            stream: None,
        }
    }

    #[test]
    fn score_examples() {
        let w = CostWeights::default();
        assert!((attack_score(&spec(0.2, 0.7, 0.1), &w) - 0.30).abs() < 1e-12);
        assert_eq!(attack_score(&spec(0.0, 1.0, 0.4), &w), 0.2);
        assert!(attack_score(&spec(0.3, 0.7, 0.1), &w) > attack_score(&spec(0.2, 0.7, 0.1), &w));
    }

    #[test]
    fn budget_examples() {
        let b = BudgetConstraints { e_prime: 1.0, p_prime: 10.0, delta_e: 0.05, delta_p: 0.05 };
        let sel = [spec(0.10, 1.0, 0.0)];
        let m = |e: f64| ComposedMetrics { error: e, power: 1.0, stream: None };
        let r = check_budget(&sel, &m(0.12), &b).unwrap();
        assert!(r.pass && (r.error_margin - 0.03).abs() < 1e-12);
        assert!(!check_budget(&sel, &m(0.20), &b).unwrap().pass);
        let r = check_budget(&sel, &m(0.05), &b).unwrap();
        assert!(r.pass && r.error_margin > 0.05);
        let other = ComposedMetrics { error: 0.1, power: 1.0, stream: Some(StreamSpec::new(1, 1, StreamMode::Uniform)) };
        assert!(matches!(check_budget(&sel, &other, &b), Err(AttackError::UnitMismatch)));
    }

    #[test]
    fn budget_parse() {
        let b: BudgetConstraints = "0.1,1.2,0.05,0.02".parse().unwrap();
        assert_eq!(b.delta_p, 0.02);
        assert!("0.1,1,0,0.1".parse::<BudgetConstraints>().is_err());
        assert!("0.1,1".parse::<BudgetConstraints>().is_err());
    }

    #[test]
    fn exact_characterization() {
        let p = ArchParams::exact(OpType::Add, 8);
        let s = VectorStream::generate(&[("a".into(), 8), ("b".into(), 8)], StreamSpec::new(1000, 1, StreamMode::Uniform));
        let m = characterize(&p, &s, 0.01).unwrap();
        assert_eq!((m.e_norm, m.p_norm), (0.0, 1.0));
    }

    #[test]
    fn block22_characterization_exhaustive() {
        let p = ArchParams::new(OpType::Mul, ArchId::Block22, 2, 1);
        let s = VectorStream::exhaustive(&[("a".into(), 2), ("b".into(), 2)]);
        let m = characterize(&p, &s, 0.01).unwrap();
        assert!((m.e_norm - 2.0 / 9.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn characterization_is_deterministic() {
        let p = ArchParams::new(OpType::Add, ArchId::Loa, 8, 4);
        let spec = StreamSpec::new(1000, 77, StreamMode::Correlated { rho: 0.5 });
        let s = VectorStream::generate(&[("a".into(), 8), ("b".into(), 8)], spec);
        let a = characterize(&p, &s, 0.01).unwrap();
        let b = characterize(&p, &VectorStream::generate(&[("a".into(), 8), ("b".into(), 8)], spec), 0.01).unwrap();
        assert_eq!(a, b);
        assert!(a.e_norm > 0.0 && a.p_norm < 1.0);
    }

    #[test]
    fn bad_threshold_propagates() {
        let n = gen_module(&ArchParams::exact(OpType::Add, 4)).unwrap();
        let s = VectorStream::for_netlist(&n, StreamSpec::new(100, 1, StreamMode::Uniform));
        let sim = simulate(&n, &s).unwrap();
        let act = activity_profile(&sim);
        let sc = scoap(&n).unwrap();
        let prof = TraceProfile { stream: &s, sim: &sim, activity: &act, scoap: &sc };
        let cfg = InsertConfig { q: 1, theta: 0.6, ..InsertConfig::default() };
        assert!(matches!(insert_trojan(&n, &prof, &cfg), Err(AttackError::Sim(SimError::BadThreshold(_)))));
    }
}
