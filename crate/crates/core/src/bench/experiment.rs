//! End-to-end run: characterize, generate variants, infect some, detect, score.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::attack::{
    attack_score, insert_trojan, verify_stealth, BudgetConstraints, CostWeights, HTInstance, InsertConfig,
    PayloadKind, StealthReport, TraceProfile,
};
use crate::detect::{classify, Candidate, DetectConfig, DetectionReport, Metrics, Truth};
use crate::netlist::serialize_netlist;
use crate::scoap::scoap;
use crate::sim::{activity_profile, simulate, word_shape, SimError, StreamMode, StreamSpec, VectorStream};
use crate::sta::DelayModel;

use super::variants::{characterize_library, generate_variants, CharLibrary, Library, Variant};
use super::{constant_nets, operators, BenchError, DesignKind};

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub design: DesignKind,
    pub library: Library,
    pub n_variants: usize,
    /// Characterization and attacker profiling stream length.
    pub n_vectors: usize,
    pub rho: f64,
    /// Attacker rarity threshold.
    pub theta: f64,
    pub q: usize,
    pub clock: f64,
    /// Uniform gate delay at scale 1.
    pub gate_delay: f64,
    pub budget: BudgetConstraints,
    pub infected_fraction: f64,
    pub payload: PayloadKind,
    pub leak_bits: usize,
    pub scoap_ceiling: u32,
    pub witness_budget: usize,
    pub weights: CostWeights,
    /// Detector settings; its clock and delay model are taken from this
    /// config and its seed is derived from `seed`.
    pub detect: DetectConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 1,
            design: DesignKind::fir_default(),
            library: Library::default(),
            n_variants: 10,
            n_vectors: 1000,
            rho: 0.5,
            theta: 0.15,
            q: 4,
            clock: 10.0,
            gate_delay: 0.125,
            budget: BudgetConstraints { e_prime: 0.05, p_prime: 1.0, delta_e: 0.05, delta_p: 0.05 },
            infected_fraction: 0.4,
            payload: PayloadKind::Leak,
            leak_bits: 16,
            scoap_ceiling: 50,
            witness_budget: 1_000_000,
            weights: CostWeights::default(),
            detect: DetectConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: &str| Err(BenchError::BadParams(m.to_string()));
        self.design.validate()?;
        self.budget.validate()?;
        self.detect_config().validate()?;
        if self.n_variants == 0 || self.n_vectors == 0 {
            return bad("n_variants and n_vectors must be positive");
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return bad("rho must lie in [0, 1]");
        }
        if !(self.theta > 0.0 && self.theta < 0.5) {
            return bad("theta must lie in (0, 0.5)");
        }
        if self.q == 0 {
            return bad("q must be positive");
        }
        if !(self.gate_delay >= 0.0) {
            return bad("gate_delay must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.infected_fraction) {
            return bad("infected_fraction must lie in [0, 1]");
        }
        if self.library.mul.is_empty() || self.library.add.is_empty() {
            return bad("library needs at least one architecture per operator");
        }
        Ok(())
    }

    pub fn delay(&self) -> DelayModel {
        DelayModel::uniform(self.gate_delay)
    }

    pub fn stream_spec(&self) -> StreamSpec {
        StreamSpec::new(self.n_vectors, self.seed, StreamMode::Correlated { rho: self.rho })
    }

    pub fn detect_config(&self) -> DetectConfig {
        DetectConfig {
            clock: self.clock,
            delay: self.delay(),
            seed: self.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(7),
            ..self.detect.clone()
        }
    }
}

#[derive(Debug, Clone)]
pub struct Infection {
    pub id: String,
    pub ht: HTInstance,
    pub stealth: StealthReport,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub config: ExperimentConfig,
    pub library: CharLibrary,
    pub variants: Vec<Variant>,
    pub ids: Vec<String>,
    /// Netlists handed to the detector, infected ones included.
    pub candidates: Vec<Candidate>,
    pub infections: Vec<Infection>,
    pub truth: Truth,
    pub report: DetectionReport,
    pub metrics: Metrics,
    pub log: Vec<String>,
}

fn reference_words(design: &DesignKind, stream: &VectorStream) -> Vec<Vec<u64>> {
    let rows: Vec<Vec<u64>> = (0..stream.len()).map(|t| design.reference(&stream.vector(t))).collect();
    let n_out = rows.first().map_or(0, |r| r.len());
    (0..n_out).map(|w| rows.iter().map(|r| r[w]).collect()).collect()
}

/// Profiles `variant` on the library stream and inserts a Trojan with the
/// attacker settings of `cfg`; `salt` varies the insertion seed per variant.
pub fn infect_variant(
    cfg: &ExperimentConfig,
    clib: &CharLibrary,
    variant: &Variant,
    salt: u64,
) -> Result<(crate::netlist::Netlist, HTInstance, StealthReport), BenchError> {
    let n = &variant.netlist;
    let stream = VectorStream::generate(&word_shape(&n.input_words()), clib.stream);
    let sim = simulate(n, &stream)?;
    let activity = activity_profile(&sim);
    let sc = scoap(n).map_err(SimError::from)?;
    let mut module_scores = BTreeMap::new();
    for o in operators(&cfg.design)? {
        if let Some(spec) = clib.get(o.op, o.width, variant.assignment.for_op(o.op)) {
            module_scores.insert(o.tag.clone(), attack_score(spec, &cfg.weights));
        }
    }
    let ic = InsertConfig {
        q: cfg.q,
        theta: cfg.theta,
        payload: cfg.payload,
        secret: constant_nets(n, &cfg.design).concat(),
        leak_bits: Some(cfg.leak_bits),
        corrupt_bit: 0,
        seed: cfg.seed ^ salt,
        scoap_ceiling: cfg.scoap_ceiling,
        witness_budget: cfg.witness_budget,
        clock: cfg.clock,
        delay: cfg.delay(),
        module_scores,
    };
    let profile = TraceProfile { stream: &stream, sim: &sim, activity: &activity, scoap: &sc };
    let (inf, ht) = insert_trojan(n, &profile, &ic)?;
    let reference = reference_words(&cfg.design, &stream);
    let st = verify_stealth(n, &inf, &ht, &stream, &reference, &cfg.delay(), cfg.clock)?;
    Ok((inf, ht, st))
}

/// Runs the whole pipeline in memory. Nothing here reads the clock or the
/// environment, so equal configs give equal outcomes.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome, BenchError> {
    cfg.validate()?;
    let mut log = Vec::new();
    let clib = characterize_library(&cfg.design, &cfg.library, cfg.stream_spec(), cfg.theta)?;
    log.push(format!("characterized {} library entries", clib.specs.len()));
    let variants = generate_variants(&cfg.design, &cfg.library, &clib, &cfg.budget, cfg.n_variants)?;
    log.push(format!("generated {} variants", variants.len()));
    let ids: Vec<String> = (0..variants.len()).map(|i| format!("v{i:02}")).collect();

    let target = (cfg.infected_fraction * variants.len() as f64).round() as usize;
    let mut order: Vec<usize> = (0..variants.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x00c0_ffee));
    let mut netlists: Vec<_> = variants.iter().map(|v| v.netlist.clone()).collect();
    let mut infections = Vec::new();
    for &i in &order {
        if infections.len() == target {
            break;
        }
        match infect_variant(cfg, &clib, &variants[i], i as u64 + 1) {
            Ok((inf, ht, stealth)) => {
                log.push(format!(
                    "{}: infected host {} with {} literals, power delta {:.5}",
                    ids[i],
                    ht.host,
                    ht.trigger.len(),
                    stealth.power_delta_fraction
                ));
                netlists[i] = inf;
                infections.push(Infection { id: ids[i].clone(), ht, stealth });
            }
            Err(BenchError::Attack(e)) => log.push(format!("{}: insertion refused: {e}", ids[i])),
            Err(e) => return Err(e),
        }
    }
    if infections.len() < target {
        log.push(format!("infected {} of the {target} requested variants", infections.len()));
    }
    infections.sort_by(|a, b| a.id.cmp(&b.id));

    let candidates: Vec<Candidate> =
        ids.iter().zip(netlists).map(|(id, netlist)| Candidate { id: id.clone(), netlist }).collect();
    let mut truth = Truth::new();
    for c in &candidates {
        let host = infections.iter().find(|x| x.id == c.id).map(|x| x.ht.host.as_str());
        for m in c.netlist.modules() {
            let infected = host == Some(m.as_str());
            truth.insert((c.id.clone(), m), infected);
        }
    }
    let report = classify(candidates.clone(), &cfg.detect_config())?;
    let metrics = crate::detect::score(&report, &truth)?;
    log.push(format!(
        "accuracy {:.4} fpr {} fnr {}",
        metrics.accuracy(),
        fmt_rate(metrics.fpr()),
        fmt_rate(metrics.fnr())
    ));
    Ok(ExperimentOutcome {
        config: cfg.clone(),
        library: clib,
        variants,
        ids,
        candidates,
        infections,
        truth,
        report,
        metrics,
        log,
    })
}

pub fn fmt_rate(r: Option<f64>) -> String {
    r.map_or_else(|| "n/a".to_string(), |x| format!("{x:.6}"))
}

fn csv_file(path: &Path) -> Result<csv::Writer<fs::File>, BenchError> {
    Ok(csv::Writer::from_path(path)?)
}

pub fn write_metrics(m: &Metrics, path: &Path) -> Result<(), BenchError> {
    let mut w = csv_file(path)?;
    w.write_record(["accuracy", "fpr", "fnr", "tp", "fp", "tn", "fn"])?;
    w.write_record([
        format!("{:.6}", m.accuracy()),
        fmt_rate(m.fpr()),
        fmt_rate(m.fnr()),
        m.tp.to_string(),
        m.fp.to_string(),
        m.tn.to_string(),
        m.fn_.to_string(),
    ])?;
    w.flush()?;
    Ok(())
}

pub fn write_truth(truth: &Truth, path: &Path) -> Result<(), BenchError> {
    let mut w = csv_file(path)?;
    w.write_record(["netlist", "instance", "infected"])?;
    for ((n, i), v) in truth {
        w.write_record([n.as_str(), i.as_str(), if *v { "1" } else { "0" }])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_truth(path: &Path) -> Result<Truth, BenchError> {
    let mut rd = csv::Reader::from_path(path)?;
    let mut t = Truth::new();
    for rec in rd.records() {
        let rec = rec?;
        let (Some(n), Some(i), Some(v)) = (rec.get(0), rec.get(1), rec.get(2)) else {
            return Err(BenchError::BadParams(format!("short ground-truth row {rec:?}")));
        };
        t.insert((n.to_string(), i.to_string()), v == "1");
    }
    Ok(t)
}

pub fn write_stealth(rows: &[Infection], netlists: &[Candidate], path: &Path) -> Result<(), BenchError> {
    let mut w = csv_file(path)?;
    w.write_record([
        "netlist",
        "host",
        "payload",
        "trigger",
        "witness",
        "error_delta",
        "power_delta_fraction",
        "trigger_rate",
        "min_slack",
    ])?;
    for r in rows {
        let n = &netlists.iter().find(|c| c.id == r.id).expect("infected netlist present").netlist;
        let trig: Vec<String> =
            r.ht.trigger.iter().map(|&(x, v)| format!("{}={}", n.net_name(x), v as u8)).collect();
        let wit: Vec<String> = r.ht.witness.iter().map(|x| x.to_string()).collect();
        w.write_record([
            r.id.clone(),
            r.ht.host.clone(),
            r.ht.payload.label().to_string(),
            trig.join(" "),
            wit.join(" "),
            format!("{:.9}", r.stealth.error_delta),
            format!("{:.6}", r.stealth.power_delta_fraction),
            format!("{:.6}", r.stealth.trigger_rate),
            format!("{:.6}", r.stealth.min_slack),
        ])?;
    }
    w.flush()?;
    Ok(())
}

impl ExperimentOutcome {
    fn write_into(&self, dir: &Path) -> Result<(), BenchError> {
        fs::create_dir_all(dir.join("netlists"))?;
        for c in &self.candidates {
            fs::write(dir.join("netlists").join(format!("{}.net", c.id)), serialize_netlist(&c.netlist))?;
        }
        write_truth(&self.truth, &dir.join("ht_ground_truth.csv"))?;
        write_stealth(&self.infections, &self.candidates, &dir.join("stealth.csv"))?;
        let mut w = csv_file(&dir.join("library.csv"))?;
        w.write_record(["op", "width", "arch", "e_norm", "p_norm", "rare_count", "r_norm", "scoap_max_cc1", "score"])?;
        for ((op, width, arch), s) in &self.library.specs {
            w.write_record([
                op.name().to_string(),
                width.to_string(),
                arch.label(),
                format!("{:.6}", s.e_norm),
                format!("{:.6}", s.p_norm),
                s.rare_count.to_string(),
                format!("{:.6}", s.r_norm),
                s.scoap_max_cc1.to_string(),
                format!("{:.6}", attack_score(s, &self.config.weights)),
            ])?;
        }
        w.flush()?;
        let mut w = csv_file(&dir.join("variants.csv"))?;
        w.write_record(["netlist", "assignment", "front", "error", "power", "error_margin", "power_margin", "gates"])?;
        for (id, v) in self.ids.iter().zip(&self.variants) {
            w.write_record([
                id.clone(),
                v.assignment.label(),
                v.front.to_string(),
                format!("{:.6}", v.composed.error),
                format!("{:.6}", v.composed.power),
                format!("{:.6}", v.check.error_margin),
                format!("{:.6}", v.check.power_margin),
                v.netlist.num_gates().to_string(),
            ])?;
        }
        w.flush()?;
        self.report.write_csv(fs::File::create(dir.join("detect_report.csv"))?)?;
        write_metrics(&self.metrics, &dir.join("metrics.csv"))?;
        fs::write(dir.join("experiment.log"), self.log.join("\n") + "\n")?;
        Ok(())
    }

    /// Writes every artifact into `dir`, replacing it. Files are staged in a
    /// sibling directory that is removed if anything fails.
    pub fn write_artifacts(&self, dir: &Path) -> Result<(), BenchError> {
        let mut staging = PathBuf::from(dir);
        staging.set_file_name(format!(
            "{}.partial",
            dir.file_name().map_or("out".into(), |s| s.to_string_lossy().into_owned())
        ));
        if staging.exists() {
            fs::remove_dir_all(&staging)?;
        }
        if let Err(e) = self.write_into(&staging) {
            let _ = fs::remove_dir_all(&staging);
            return Err(e);
        }
        if dir.exists() {
            fs::remove_dir_all(dir)?;
        }
        fs::rename(&staging, dir)?;
        Ok(())
    }
}
