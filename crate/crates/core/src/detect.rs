//! Golden-free Trojan detection over a set of candidate netlists.
//!
//! The candidates are compared against each other: the per-vector median
//! output word across all of them stands in for the missing golden model.
//! A strict majority, when one exists, is always the median.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::justify::{word_supports, JustifyLimits, Justifier};
use crate::netlist::{CycleError, InstanceKind, NetId, Netlist};
use crate::sim::{
    activity_profile, error_metrics, structural_constants, word_shape, ActivityReport, ErrorReport, SimError,
    SimResult, Simulator, StreamMode, StreamSpec, VectorStream,
};
use crate::sta::{near_critical_paths, DelayModel, StaError};

#[derive(Debug, Error)]
pub enum DetectError {
    #[error("empty candidate set")]
    EmptySet,
    #[error("candidate {id} has a different I/O signature: {msg}")]
    SignatureMismatch { id: String, msg: String },
    #[error("unknown instance {0}")]
    UnknownInstance(String),
    #[error("bad parameters: {0}")]
    BadParams(String),
    #[error("labels do not match report: {0}")]
    LabelMismatch(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Sta(#[from] StaError),
    #[error(transparent)]
    Cycle(#[from] CycleError),
}

#[derive(Debug, Clone)]
pub struct Candidate {
    pub id: String,
    pub netlist: Netlist,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectConfig {
    pub clock: f64,
    pub delay: DelayModel,
    pub scales: Vec<f64>,
    /// Paths kept per scale.
    pub paths: usize,
    pub window: f64,
    pub theta: f64,
    /// Directed vectors per resilience test.
    pub stress: usize,
    pub threshold: f64,
    /// A vector deviates when its distance to the reference exceeds
    /// `margin` times the profiling envelope (see [`ENVELOPE_QUANTILE`]).
    pub margin: f64,
    pub n_vectors: usize,
    pub rho: f64,
    pub seed: u64,
}

impl Default for DetectConfig {
    fn default() -> Self {
        DetectConfig {
            clock: 10.0,
            delay: DelayModel::uniform(0.125),
            scales: vec![1.0, 1.2],
            paths: 64,
            window: 10.0,
            theta: 0.01,
            stress: 96,
            threshold: 0.5,
            margin: 2.0,
            n_vectors: 1000,
            rho: 0.5,
            seed: 1,
        }
    }
}

impl DetectConfig {
    pub fn validate(&self) -> Result<(), DetectError> {
        let bad = |m: &str| Err(DetectError::BadParams(m.to_string()));
        self.delay.validate()?;
        if !(self.clock > 0.0) {
            return bad("clock must be positive");
        }
        if self.scales.is_empty() || self.scales.iter().any(|s| !(*s > 0.0)) {
            return bad("scales must be a non-empty list of positive numbers");
        }
        if self.paths == 0 {
            return bad("paths must be at least 1");
        }
        if !(self.window >= 0.0) {
            return bad("window must be non-negative");
        }
        if !(self.theta > 0.0 && self.theta < 0.5) {
            return bad("theta must lie in (0, 0.5)");
        }
        if self.stress == 0 {
            return bad("stress budget must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return bad("threshold must lie in [0, 1]");
        }
        if !(self.margin >= 1.0) {
            return bad("margin must be at least 1");
        }
        if self.n_vectors == 0 {
            return bad("n_vectors must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return bad("rho must lie in [0, 1]");
        }
        Ok(())
    }
}

fn check_signature(cands: &[Candidate]) -> Result<(), DetectError> {
    let first = cands.first().ok_or(DetectError::EmptySet)?;
    let ins = word_shape(&first.netlist.input_words());
    let outs = word_shape(&first.netlist.output_words());
    for c in &cands[1..] {
        if word_shape(&c.netlist.input_words()) != ins {
            return Err(DetectError::SignatureMismatch { id: c.id.clone(), msg: "input words differ".into() });
        }
        if word_shape(&c.netlist.output_words()) != outs {
            return Err(DetectError::SignatureMismatch { id: c.id.clone(), msg: "output words differ".into() });
        }
    }
    Ok(())
}

/// Lower median of each output word across candidates, vector by vector.
pub fn reference_words(outputs: &[&[Vec<u64>]]) -> Vec<Vec<u64>> {
    let Some(first) = outputs.first() else { return Vec::new() };
    let mut col = Vec::with_capacity(outputs.len());
    first
        .iter()
        .enumerate()
        .map(|(w, word)| {
            (0..word.len())
                .map(|t| {
                    col.clear();
                    col.extend(outputs.iter().map(|o| o[w][t]));
                    col.sort_unstable();
                    col[(col.len() - 1) / 2]
                })
                .collect()
        })
        .collect()
}

/// Summed absolute distance over output words for each vector.
fn distances(outputs: &[Vec<u64>], reference: &[Vec<u64>]) -> Vec<u64> {
    let n = outputs.first().map_or(0, |w| w.len());
    (0..n)
        .map(|t| outputs.iter().zip(reference).map(|(o, r)| o[t].abs_diff(r[t])).sum())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankEntry {
    pub id: String,
    pub error: ErrorReport,
}

/// Candidates ordered by ascending MRED against the median reference over
/// the concatenation of `streams`; ties go to the smaller id.
pub fn rank_by_error(cands: &[Candidate], streams: &[VectorStream]) -> Result<Vec<RankEntry>, DetectError> {
    check_signature(cands)?;
    let stream = concat_streams(streams)?;
    let outputs = cands
        .par_iter()
        .map(|c| Simulator::new(&c.netlist)?.outputs(&stream))
        .collect::<Result<Vec<_>, SimError>>()?;
    Ok(rank_outputs(cands, &outputs))
}

fn concat_streams(streams: &[VectorStream]) -> Result<VectorStream, DetectError> {
    let (first, rest) = streams.split_first().ok_or_else(|| DetectError::BadParams("no streams".into()))?;
    let mut out = first.clone();
    for s in rest {
        if s.words != out.words {
            return Err(DetectError::BadParams("streams disagree on input words".into()));
        }
        out = out.concat(s);
    }
    Ok(out)
}

fn rank_outputs(cands: &[Candidate], outputs: &[Vec<Vec<u64>>]) -> Vec<RankEntry> {
    let refs: Vec<&[Vec<u64>]> = outputs.iter().map(|o| o.as_slice()).collect();
    let reference = reference_words(&refs);
    let mut v: Vec<RankEntry> = cands
        .iter()
        .zip(outputs)
        .map(|(c, o)| RankEntry { id: c.id.clone(), error: error_metrics(o, &reference) })
        .collect();
    v.sort_by(|a, b| a.error.mred.total_cmp(&b.error.mred).then_with(|| a.id.cmp(&b.id)));
    v
}

/// Nets at a rare value (`p1 < theta` or `p1 > 1 - theta`) grouped by module,
/// skipping primary inputs and nets that are constant by construction.
pub fn rare_modules(
    netlist: &Netlist,
    activity: &ActivityReport,
    theta: f64,
) -> Result<BTreeMap<String, Vec<(NetId, bool)>>, DetectError> {
    let consts = structural_constants(netlist)?;
    let mut out: BTreeMap<String, Vec<(NetId, bool)>> = BTreeMap::new();
    for g in netlist.gates() {
        let n = g.output;
        if consts[n.index()].is_some() {
            continue;
        }
        let p = activity.p1(n);
        let rare = if p < theta {
            false
        } else if p > 1.0 - theta {
            true
        } else {
            continue;
        };
        out.entry(netlist.module_of(&g.tag).to_string()).or_default().push((n, !rare));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Suspect {
    pub instance: String,
    /// Paths through the instance, summed over scales.
    pub hits: usize,
    pub rare: bool,
    pub score: f64,
}

/// Instances on near-critical passing paths at every scale. The score is the
/// hit count, doubled for instances listed in `rare`.
pub fn suspect_instances(
    netlist: &Netlist,
    delay: &DelayModel,
    clock: f64,
    scales: &[f64],
    n: usize,
    window: f64,
    rare: &BTreeSet<String>,
) -> Result<Vec<Suspect>, DetectError> {
    if scales.is_empty() {
        return Err(DetectError::BadParams("no scales".into()));
    }
    let mut per_scale: Vec<BTreeMap<String, usize>> = Vec::new();
    for &s in scales {
        let paths = near_critical_paths(netlist, &delay.clone().with_scale(s), clock, n, window)?;
        let mut hits: BTreeMap<String, usize> = BTreeMap::new();
        for p in &paths {
            let mods: BTreeSet<&str> = p.tags.iter().map(|t| netlist.module_of(t)).collect();
            for m in mods {
                *hits.entry(m.to_string()).or_default() += 1;
            }
        }
        per_scale.push(hits);
    }
    let mut out: Vec<Suspect> = per_scale[0]
        .keys()
        .filter(|m| per_scale.iter().all(|h| h.contains_key(*m)))
        .map(|m| {
            let hits = per_scale.iter().map(|h| h[m]).sum();
            let rare = rare.contains(m);
            Suspect { instance: m.clone(), hits, rare, score: hits as f64 * if rare { 2.0 } else { 1.0 } }
        })
        .collect();
    out.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.instance.cmp(&b.instance)));
    Ok(out)
}

/// Profiling distances above this quantile are treated as outliers, so that
/// a payload firing by chance during profiling does not widen the envelope.
pub const ENVELOPE_QUANTILE: f64 = 0.995;

fn quantile(mut v: Vec<u64>, q: f64) -> u64 {
    if v.is_empty() {
        return 0;
    }
    v.sort_unstable();
    let i = ((v.len() - 1) as f64 * q).floor() as usize;
    v[i]
}

/// Everything the defender learns from simulating one candidate.
struct Profile {
    sim: SimResult,
    activity: ActivityReport,
    supports: Vec<u64>,
    consts: Vec<Option<bool>>,
    /// High quantile of the distance to the reference on the profiling stream.
    envelope: u64,
}

/// Candidates plus the shared profiling state used by the detection steps.
pub struct Detector {
    cands: Vec<Candidate>,
    cfg: DetectConfig,
    stream: VectorStream,
    outputs: Vec<Vec<Vec<u64>>>,
    profiles: Vec<Profile>,
}

fn fnv(parts: &[&str]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for p in parts {
        for b in p.bytes().chain([0xff]) {
            h ^= b as u64;
            h = h.wrapping_mul(0x100_0000_01b3);
        }
    }
    h
}

fn word_mask(width: usize) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

impl Detector {
    pub fn new(cands: Vec<Candidate>, cfg: DetectConfig) -> Result<Self, DetectError> {
        cfg.validate()?;
        check_signature(&cands)?;
        let words = word_shape(&cands[0].netlist.input_words());
        let uni = VectorStream::generate(&words, StreamSpec::new(cfg.n_vectors, cfg.seed, StreamMode::Uniform));
        let cor = VectorStream::generate(
            &words,
            StreamSpec::new(cfg.n_vectors, cfg.seed.wrapping_add(1), StreamMode::Correlated { rho: cfg.rho }),
        );
        let stream = uni.concat(&cor);
        let sims = cands
            .par_iter()
            .map(|c| Simulator::new(&c.netlist)?.simulate(&stream))
            .collect::<Result<Vec<_>, SimError>>()?;
        let outputs: Vec<Vec<Vec<u64>>> = sims.iter().map(|s| s.outputs.clone()).collect();
        let refs: Vec<&[Vec<u64>]> = outputs.iter().map(|o| o.as_slice()).collect();
        let reference = reference_words(&refs);
        let profiles = cands
            .par_iter()
            .zip(sims)
            .zip(&outputs)
            .map(|((c, sim), o)| {
                Ok(Profile {
                    activity: activity_profile(&sim),
                    sim,
                    supports: word_supports(&c.netlist)?,
                    consts: structural_constants(&c.netlist)?,
                    envelope: quantile(distances(o, &reference), ENVELOPE_QUANTILE),
                })
            })
            .collect::<Result<Vec<_>, DetectError>>()?;
        Ok(Detector { cands, cfg, stream, outputs, profiles })
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.cands
    }

    pub fn config(&self) -> &DetectConfig {
        &self.cfg
    }

    pub fn ranking(&self) -> Vec<RankEntry> {
        rank_outputs(&self.cands, &self.outputs)
    }

    pub fn envelope(&self, idx: usize) -> u64 {
        self.profiles[idx].envelope
    }

    pub fn activity(&self, idx: usize) -> &ActivityReport {
        &self.profiles[idx].activity
    }

    /// Directed vectors aimed at the input words feeding `tag`: low-half
    /// stress, high-half stress, and replay of the instance's rarest values.
    pub fn directed_vectors(&self, idx: usize, tag: &str, budget: usize) -> Result<Vec<Vec<u64>>, DetectError> {
        let c = &self.cands[idx];
        let prof = &self.profiles[idx];
        let n = &c.netlist;
        let widths: Vec<usize> = n.input_words().iter().map(|w| w.width()).collect();
        let mut nets: Vec<NetId> = n
            .gates()
            .iter()
            .filter(|g| n.module_of(&g.tag) == tag && prof.consts[g.output.index()].is_none())
            .map(|g| g.output)
            .collect();
        let cone = nets.iter().fold(0u64, |a, x| a | prof.supports[x.index()]);
        if cone == 0 {
            return Ok(Vec::new());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed ^ fnv(&[&c.id, tag]));
        let len = self.stream.len();
        let base = |rng: &mut ChaCha8Rng| self.stream.vector(rng.gen_range(0..len));
        let n_lsb = budget / 3;
        let n_msb = budget / 3;
        let n_rare = budget - n_lsb - n_msb;
        let mut out = Vec::with_capacity(budget);
        for (count, high) in [(n_lsb, false), (n_msb, true)] {
            for k in 0..count {
                let mut v = base(&mut rng);
                for (w, &width) in widths.iter().enumerate() {
                    if cone >> w & 1 == 0 {
                        continue;
                    }
                    let lo = word_mask(width.div_ceil(2));
                    let part = if high { word_mask(width) & !lo } else { lo };
                    let fill = if k % 2 == 0 { part } else { rng.gen::<u64>() & part };
                    v[w] = (v[w] & !part) | fill;
                }
                out.push(v);
            }
        }
        // Rarest first by the number of cycles the minority value was seen.
        let act = &prof.activity;
        let minority = |x: NetId| {
            let ones = act.ones[x.index()];
            let total = act.total_cycles as u64;
            (ones.min(total - ones), ones * 2 < total)
        };
        // Among equally rare nets, wider input cones first: they have the
        // most ways to be driven.
        nets.sort_by_key(|&x| (minority(x).0, std::cmp::Reverse(prof.supports[x.index()].count_ones()), x));
        let mut just = Justifier::new(n, &self.stream, &prof.sim, JustifyLimits::default())?;
        // Unreachable values yield no realization and do not use up a slot.
        let realizations: Vec<_> = nets
            .iter()
            .take(n_rare * 8)
            .map(|&x| just.realize(x, minority(x).1))
            .filter(|r| !r.is_empty())
            .take(n_rare)
            .collect();
        for k in 0..n_rare {
            let mut v = base(&mut rng);
            if realizations.is_empty() {
                for (w, &width) in widths.iter().enumerate() {
                    if cone >> w & 1 == 1 {
                        v[w] = rng.gen::<u64>() & word_mask(width);
                    }
                }
            } else {
                let r = &realizations[k % realizations.len()];
                let a = &r[(k / realizations.len()) % r.len()];
                for w in 0..widths.len() {
                    v[w] = (a.value[w] & a.mask[w]) | (v[w] & !a.mask[w]);
                }
            }
            out.push(v);
        }
        Ok(out)
    }

    /// One minus the fraction of directed vectors on which candidate `idx`
    /// strays from the reference by more than its profiling envelope allows.
    pub fn resilience_test(&self, idx: usize, tag: &str, budget: usize) -> Result<f64, DetectError> {
        if budget == 0 {
            return Err(DetectError::BadParams("budget must be at least 1".into()));
        }
        let n = &self.cands[idx].netlist;
        if !n.modules().iter().any(|m| m == tag) {
            return Err(DetectError::UnknownInstance(tag.to_string()));
        }
        let vectors = self.directed_vectors(idx, tag, budget)?;
        if vectors.is_empty() {
            return Ok(1.0);
        }
        let stream = VectorStream::from_vectors(&self.stream.words, &vectors);
        let outs = self
            .cands
            .iter()
            .map(|c| Simulator::new(&c.netlist)?.outputs(&stream))
            .collect::<Result<Vec<_>, SimError>>()?;
        let refs: Vec<&[Vec<u64>]> = outs.iter().map(|o| o.as_slice()).collect();
        let reference = reference_words(&refs);
        let limit = self.profiles[idx].envelope as f64 * self.cfg.margin;
        let bad = distances(&outs[idx], &reference).into_iter().filter(|&d| d as f64 > limit).count();
        Ok(1.0 - bad as f64 / vectors.len() as f64)
    }

    fn analyze(&self, idx: usize, rank: usize, error: ErrorReport) -> Result<NetlistReport, DetectError> {
        let c = &self.cands[idx];
        let n = &c.netlist;
        let cfg = &self.cfg;
        let rare = rare_modules(n, &self.profiles[idx].activity, cfg.theta)?;
        let rare_set: BTreeSet<String> = rare.keys().cloned().collect();
        let suspects = suspect_instances(n, &cfg.delay, cfg.clock, &cfg.scales, cfg.paths, cfg.window, &rare_set)?;
        let by_tag: BTreeMap<&str, &Suspect> = suspects.iter().map(|s| (s.instance.as_str(), s)).collect();
        let mut rows = Vec::new();
        for m in n.modules() {
            let s = by_tag.get(m.as_str());
            let hits = s.map_or(0, |s| s.hits);
            let is_rare = rare_set.contains(&m);
            let arithmetic = n
                .instances()
                .get(&m)
                .is_some_and(|i| i.kind == InstanceKind::Approximate && ["add", "sub", "mul"].contains(&i.op_type.as_str()));
            let (resilience, raw) = match s {
                None => (None, 0.0),
                Some(s) if arithmetic => {
                    let r = self.resilience_test(idx, &m, cfg.stress)?;
                    (Some(r), s.score * (1.0 - r))
                }
                // No arithmetic contract to test: path and rare-net evidence only.
                Some(s) => (None, if is_rare { s.score } else { 0.0 }),
            };
            rows.push(InstanceVerdict { instance: m, hits, rare: is_rare, resilience, raw, suspicion: 0.0, flagged: false });
        }
        let hi = rows.iter().map(|r| r.raw).fold(0.0, f64::max);
        let lo = rows.iter().map(|r| r.raw).fold(f64::INFINITY, f64::min);
        for r in &mut rows {
            r.suspicion = if hi <= 0.0 {
                0.0
            } else if hi == lo {
                1.0
            } else {
                (r.raw - lo) / (hi - lo)
            };
            r.flagged = r.raw > 0.0 && r.suspicion >= cfg.threshold;
        }
        let verdict = if rows.iter().any(|r| r.flagged) { Verdict::Infected } else { Verdict::Clean };
        Ok(NetlistReport { id: c.id.clone(), error_rank: rank, error, instances: rows, verdict })
    }

    pub fn classify(&self) -> Result<DetectionReport, DetectError> {
        let ranking = self.ranking();
        let pos: BTreeMap<&str, (usize, &ErrorReport)> =
            ranking.iter().enumerate().map(|(i, r)| (r.id.as_str(), (i + 1, &r.error))).collect();
        let netlists = (0..self.cands.len())
            .into_par_iter()
            .map(|i| {
                let (rank, err) = pos[self.cands[i].id.as_str()];
                self.analyze(i, rank, *err)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(DetectionReport { netlists })
    }
}

/// Runs the full pipeline on a candidate set.
pub fn classify(cands: Vec<Candidate>, cfg: &DetectConfig) -> Result<DetectionReport, DetectError> {
    Detector::new(cands, cfg.clone())?.classify()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Clean,
    Infected,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Clean => "CLEAN",
            Verdict::Infected => "INFECTED",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceVerdict {
    pub instance: String,
    pub hits: usize,
    pub rare: bool,
    /// Only for arithmetic instances that were on a near-critical path.
    pub resilience: Option<f64>,
    pub raw: f64,
    /// `raw` min-max normalized within the netlist.
    pub suspicion: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetlistReport {
    pub id: String,
    /// 1-based position in the error ranking.
    pub error_rank: usize,
    pub error: ErrorReport,
    /// Every module instance of the netlist, sorted by tag.
    pub instances: Vec<InstanceVerdict>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionReport {
    pub netlists: Vec<NetlistReport>,
}

impl DetectionReport {
    /// Rows of `netlist,verdict,instance,suspicion,flagged`.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["netlist", "verdict", "instance", "suspicion", "flagged"])?;
        for n in &self.netlists {
            for i in &n.instances {
                out.write_record([
                    n.id.as_str(),
                    &n.verdict.to_string(),
                    &i.instance,
                    &format!("{:.6}", i.suspicion),
                    if i.flagged { "1" } else { "0" },
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    }

    /// Reads back what [`DetectionReport::write_csv`] wrote; only the
    /// verdict, suspicion and flag columns survive the round trip.
    pub fn read_csv<R: std::io::Read>(r: R) -> Result<Self, DetectError> {
        let mut rd = csv::Reader::from_reader(r);
        let mut netlists: Vec<NetlistReport> = Vec::new();
        for rec in rd.records() {
            let rec = rec.map_err(|e| DetectError::BadParams(e.to_string()))?;
            let field = |i: usize| rec.get(i).ok_or_else(|| DetectError::BadParams(format!("short row {rec:?}")));
            let id = field(0)?.to_string();
            let verdict = match field(1)? {
                "CLEAN" => Verdict::Clean,
                "INFECTED" => Verdict::Infected,
                v => return Err(DetectError::BadParams(format!("bad verdict {v}"))),
            };
            let suspicion: f64 = field(3)?.parse().map_err(|_| DetectError::BadParams("bad suspicion".into()))?;
            let flagged = field(4)? == "1";
            if netlists.last().is_none_or(|n| n.id != id) {
                netlists.push(NetlistReport {
                    id,
                    error_rank: 0,
                    error: ErrorReport::default(),
                    instances: Vec::new(),
                    verdict,
                });
            }
            netlists.last_mut().unwrap().instances.push(InstanceVerdict {
                instance: field(2)?.to_string(),
                hits: 0,
                rare: false,
                resilience: None,
                raw: 0.0,
                suspicion,
                flagged,
            });
        }
        Ok(DetectionReport { netlists })
    }
}

/// Instance-level confusion counts and the rates derived from them.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Metrics {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Metrics {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        (self.tp + self.tn) as f64 / self.total().max(1) as f64
    }

    /// `None` when there is no clean instance.
    pub fn fpr(&self) -> Option<f64> {
        let neg = self.fp + self.tn;
        (neg > 0).then(|| self.fp as f64 / neg as f64)
    }

    /// `None` when there is no infected instance.
    pub fn fnr(&self) -> Option<f64> {
        let pos = self.tp + self.fn_;
        (pos > 0).then(|| self.fn_ as f64 / pos as f64)
    }

    pub fn add(&mut self, o: &Metrics) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.tn += o.tn;
        self.fn_ += o.fn_;
    }
}

/// Ground truth keyed by (netlist id, instance tag).
pub type Truth = BTreeMap<(String, String), bool>;

pub fn score(report: &DetectionReport, truth: &Truth) -> Result<Metrics, DetectError> {
    let mut m = Metrics::default();
    let mut seen = 0;
    for n in &report.netlists {
        for i in &n.instances {
            let key = (n.id.clone(), i.instance.clone());
            let Some(&infected) = truth.get(&key) else {
                return Err(DetectError::LabelMismatch(format!("no label for {}/{}", key.0, key.1)));
            };
            seen += 1;
            match (infected, i.flagged) {
                (true, true) => m.tp += 1,
                (true, false) => m.fn_ += 1,
                (false, true) => m.fp += 1,
                (false, false) => m.tn += 1,
            }
        }
    }
    if seen != truth.len() {
        return Err(DetectError::LabelMismatch(format!("{} labels but {} reported instances", truth.len(), seen)));
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{gen_module, ArchId, ArchParams, OpType};

    fn adder(arch: ArchId, k: usize) -> Netlist {
        let p = ArchParams { op_type: OpType::Add, arch_id: arch, width: 6, k, loa_and_carry: false };
        gen_module(&p).unwrap()
    }

    fn cands(ns: Vec<Netlist>) -> Vec<Candidate> {
        ns.into_iter().enumerate().map(|(i, n)| Candidate { id: format!("n{i}"), netlist: n }).collect()
    }

    fn streams(n: &Netlist) -> Vec<VectorStream> {
        vec![VectorStream::for_netlist(n, StreamSpec::new(500, 3, StreamMode::Uniform))]
    }

    #[test]
    fn median_is_majority() {
        let a = vec![vec![5u64, 1]];
        let b = vec![vec![5u64, 2]];
        let c = vec![vec![9u64, 3]];
        assert_eq!(reference_words(&[&a, &b, &c]), vec![vec![5, 2]]);
    }

    #[test]
    fn identical_candidates_rank_by_id() {
        let e = adder(ArchId::Exact, 0);
        let cs = cands(vec![e.clone(), e.clone(), e.clone()]);
        let r = rank_by_error(&cs, &streams(&e)).unwrap();
        assert_eq!(r.iter().map(|x| x.id.as_str()).collect::<Vec<_>>(), ["n0", "n1", "n2"]);
        assert!(r.iter().all(|x| x.error.mred == 0.0));
    }

    #[test]
    fn approximate_variant_ranks_last() {
        let e = adder(ArchId::Exact, 0);
        let cs = cands(vec![adder(ArchId::Loa, 4), e.clone(), e.clone()]);
        let r = rank_by_error(&cs, &streams(&e)).unwrap();
        assert_eq!(r.last().unwrap().id, "n0");
        assert!(r[0].error.mred == 0.0 && r[2].error.mred > 0.0);
    }

    #[test]
    fn empty_and_mismatched_sets() {
        assert!(matches!(rank_by_error(&[], &[]), Err(DetectError::EmptySet)));
        let cs = cands(vec![adder(ArchId::Exact, 0), gen_module(&ArchParams::exact(OpType::Add, 5)).unwrap()]);
        assert!(matches!(check_signature(&cs), Err(DetectError::SignatureMismatch { .. })));
    }

    #[test]
    fn exact_instance_is_fully_resilient() {
        let e = adder(ArchId::Exact, 0);
        let d = Detector::new(cands(vec![e.clone(), e.clone(), e]), DetectConfig::default()).unwrap();
        let tag = d.candidates()[0].netlist.modules()[0].clone();
        assert_eq!(d.resilience_test(0, &tag, 60).unwrap(), 1.0);
        assert!(matches!(d.resilience_test(0, &tag, 0), Err(DetectError::BadParams(_))));
        assert!(matches!(d.resilience_test(0, "nope", 10), Err(DetectError::UnknownInstance(_))));
    }

    #[test]
    fn clean_set_has_no_flags() {
        let e = adder(ArchId::Exact, 0);
        let r = classify(cands(vec![e.clone(), e.clone(), e]), &DetectConfig::default()).unwrap();
        assert!(r.netlists.iter().all(|n| n.verdict == Verdict::Clean));
    }

    #[test]
    fn score_counts() {
        let row = |inst: &str, flagged| InstanceVerdict {
            instance: inst.into(),
            hits: 0,
            rare: false,
            resilience: None,
            raw: 0.0,
            suspicion: 0.0,
            flagged,
        };
        let rep = DetectionReport {
            netlists: vec![NetlistReport {
                id: "a".into(),
                error_rank: 1,
                error: ErrorReport::default(),
                instances: vec![row("x", true), row("y", true), row("z", false)],
                verdict: Verdict::Infected,
            }],
        };
        let mut t = Truth::new();
        t.insert(("a".into(), "x".into()), true);
        t.insert(("a".into(), "y".into()), false);
        t.insert(("a".into(), "z".into()), false);
        let m = score(&rep, &t).unwrap();
        assert_eq!((m.tp, m.fp, m.tn, m.fn_), (1, 1, 1, 0));
        assert_eq!(m.fpr(), Some(0.5));
        assert_eq!(m.fnr(), Some(0.0));
        t.remove(&("a".into(), "z".into()));
        assert!(matches!(score(&rep, &t), Err(DetectError::LabelMismatch(_))));
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        let back = DetectionReport::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.netlists[0].instances.iter().filter(|i| i.flagged).count(), 2);
    }
}
