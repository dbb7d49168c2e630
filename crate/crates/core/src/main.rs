use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use approxht::arith::{gen_module, ArchParams, OpType};
use approxht::attack::{BudgetConstraints, CostWeights, PayloadKind};
use approxht::bench::experiment::{
    fmt_rate, infect_variant, read_truth, write_metrics, write_stealth, write_truth, Infection,
};
use approxht::bench::{
    build_netlist, characterize_library, generate_variants, run_experiment, ArchChoice, Assignment, DesignConfig,
    DesignKind, ExperimentConfig, Library,
};
use approxht::config::{merge_args, parse_config};
use approxht::detect::{classify, score, Candidate, DetectConfig, DetectionReport, Truth};
use approxht::netlist::{parse_netlist, serialize_netlist, Netlist};
use approxht::scoap::scoap;
use approxht::sim::{
    activity_profile, error_profile, power_proxy, rare_nets, simulate, Reference, StreamMode, StreamSpec,
    VectorStream,
};
use approxht::sta::{near_critical_paths, sta, DelayModel};

#[derive(Parser)]
#[command(name = "approxht", version, about = "Approximate-circuit Trojan insertion and detection workbench")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Emit one arithmetic module as a netlist.
    GenModule(GenModuleArgs),
    /// Emit a flattened FIR or FFT butterfly netlist.
    GenDesign(GenDesignArgs),
    /// Error, activity and power profile of a netlist.
    Profile(ProfileArgs),
    /// SCOAP controllability and observability per net.
    Scoap(NetlistArg),
    /// Arrival times and near-critical paths.
    Sta(StaArgs),
    /// Insert a Trojan into a design variant.
    Attack(AttackArgs),
    /// Classify a directory of candidate netlists.
    Detect(DetectArgs),
    /// Score a detection report against ground truth.
    Score(ScoreArgs),
    /// Full characterize, generate, infect, detect and score run.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct Common {
    /// key = value file supplying defaults for any flag.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file or directory; stdout when omitted for single reports.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenModuleArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    op: OpType,
    /// Architecture label such as exact, loa-k4, loa-k4-c, trunc-k2, block22-k7.
    #[arg(long, default_value = "exact")]
    arch: String,
    #[arg(long, default_value_t = 8)]
    width: usize,
}

#[derive(Args, Clone)]
struct DesignArgs {
    /// fir or fft.
    #[arg(long, default_value = "fir")]
    design: String,
    #[arg(long, default_value_t = 8)]
    width: usize,
    #[arg(long, default_value_t = 4)]
    taps: usize,
    /// Comma-separated FIR coefficients; defaults cycle through 45,113,171,29.
    #[arg(long)]
    coeffs: Option<String>,
    #[arg(long, default_value_t = 181)]
    twiddle: u64,
}

impl DesignArgs {
    fn kind(&self) -> Result<DesignKind> {
        let d = match self.design.as_str() {
            "fir" => {
                let coeffs = match &self.coeffs {
                    Some(s) => parse_list::<u64>(s)?,
                    None => [45u64, 113, 171, 29].iter().copied().cycle().take(self.taps).collect(),
                };
                DesignKind::Fir { taps: coeffs.len(), coeffs, width: self.width }
            }
            "fft" => DesignKind::FftBfly { width: self.width, twiddle: self.twiddle },
            other => bail!("unknown design {other}"),
        };
        d.validate()?;
        Ok(d)
    }
}

#[derive(Args)]
struct GenDesignArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    design: DesignArgs,
    #[arg(long, default_value = "exact")]
    mul: ArchChoice,
    #[arg(long, default_value = "exact")]
    add: ArchChoice,
}

#[derive(Args)]
struct StreamArgs {
    #[arg(long, default_value_t = 1000)]
    vectors: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// uniform or correlated.
    #[arg(long, default_value = "correlated")]
    mode: String,
    #[arg(long, default_value_t = 0.5)]
    rho: f64,
}

impl StreamArgs {
    fn spec(&self) -> Result<StreamSpec> {
        let mode = match self.mode.as_str() {
            "uniform" => StreamMode::Uniform,
            "correlated" => StreamMode::Correlated { rho: self.rho },
            m => bail!("unknown stream mode {m}"),
        };
        Ok(StreamSpec::new(self.vectors, self.seed, mode))
    }
}

#[derive(Args)]
struct NetlistArg {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    netlist: PathBuf,
}

#[derive(Args)]
struct ProfileArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    netlist: PathBuf,
    #[command(flatten)]
    stream: StreamArgs,
    #[arg(long, default_value_t = 0.01)]
    theta: f64,
    /// Compare a single-operator module against its exact oracle.
    #[arg(long)]
    op: Option<OpType>,
    /// Compare against another netlist with the same I/O words.
    #[arg(long)]
    against: Option<PathBuf>,
}

#[derive(Args)]
struct StaArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    netlist: PathBuf,
    #[arg(long, default_value_t = 10.0)]
    clock: f64,
    #[arg(long, default_value_t = 0.125)]
    gate_delay: f64,
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    #[arg(long, default_value_t = 10)]
    paths: usize,
    #[arg(long, default_value_t = 10.0)]
    window: f64,
}

#[derive(Args)]
struct AttackArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    design: DesignArgs,
    #[arg(long, default_value = "exact")]
    mul: ArchChoice,
    #[arg(long, default_value = "exact")]
    add: ArchChoice,
    /// e_prime,p_prime,delta_e,delta_p
    #[arg(long, default_value = "0.05,1,0.05,0.05")]
    budget: BudgetConstraints,
    #[arg(long, default_value_t = 4)]
    q: usize,
    #[arg(long, default_value_t = 0.15)]
    theta: f64,
    #[arg(long, default_value = "leak")]
    payload: PayloadKind,
    #[arg(long, default_value_t = 16)]
    leak_bits: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    vectors: usize,
    #[arg(long, default_value_t = 0.5)]
    rho: f64,
    #[arg(long, default_value_t = 10.0)]
    clock: f64,
    #[arg(long, default_value_t = 0.125)]
    gate_delay: f64,
    #[arg(long, default_value_t = 50)]
    scoap_ceiling: u32,
    #[arg(long, default_value_t = 1_000_000)]
    witness_budget: usize,
    #[arg(long, default_value_t = 0.5)]
    w_ap: f64,
    #[arg(long, default_value_t = 0.5)]
    w_r: f64,
}

#[derive(Args)]
struct DetectFlags {
    #[arg(long, default_value_t = 10.0)]
    clock: f64,
    #[arg(long, default_value_t = 0.125)]
    gate_delay: f64,
    #[arg(long, default_value = "1.0,1.2")]
    scales: String,
    #[arg(long, default_value_t = 64)]
    paths: usize,
    #[arg(long, default_value_t = 10.0)]
    window: f64,
    #[arg(long, default_value_t = 0.01)]
    detect_theta: f64,
    #[arg(long, default_value_t = 96)]
    stress: usize,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    #[arg(long, default_value_t = 2.0)]
    margin: f64,
    #[arg(long, default_value_t = 1000)]
    detect_vectors: usize,
}

impl DetectFlags {
    fn config(&self, seed: u64, rho: f64) -> Result<DetectConfig> {
        Ok(DetectConfig {
            clock: self.clock,
            delay: DelayModel::uniform(self.gate_delay),
            scales: parse_list(&self.scales)?,
            paths: self.paths,
            window: self.window,
            theta: self.detect_theta,
            stress: self.stress,
            threshold: self.threshold,
            margin: self.margin,
            n_vectors: self.detect_vectors,
            rho,
            seed,
        })
    }
}

#[derive(Args)]
struct DetectArgs {
    #[command(flatten)]
    common: Common,
    /// Directory of `*.net` files; file stems become netlist ids.
    #[arg(long)]
    candidates: PathBuf,
    #[command(flatten)]
    flags: DetectFlags,
    /// Same as --detect-theta.
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 0.5)]
    rho: f64,
}

#[derive(Args)]
struct ScoreArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    truth: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    design: DesignArgs,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    n_variants: usize,
    #[arg(long, default_value_t = 1000)]
    vectors: usize,
    #[arg(long, default_value_t = 0.5)]
    rho: f64,
    #[arg(long, default_value_t = 0.15)]
    theta: f64,
    #[arg(long, default_value_t = 4)]
    q: usize,
    #[arg(long, default_value = "0.05,1,0.05,0.05")]
    budget: BudgetConstraints,
    #[arg(long, default_value_t = 0.4)]
    infected_fraction: f64,
    #[arg(long, default_value = "leak")]
    payload: PayloadKind,
    #[arg(long, default_value_t = 16)]
    leak_bits: usize,
    #[arg(long, default_value_t = 50)]
    scoap_ceiling: u32,
    #[arg(long, default_value_t = 1_000_000)]
    witness_budget: usize,
    #[arg(long, default_value_t = 0.5)]
    w_ap: f64,
    #[arg(long, default_value_t = 0.5)]
    w_r: f64,
    /// Comma-separated multiplier architectures.
    #[arg(long, default_value = "exact,trunc-k2,trunc-k4,trunc-k6,block22-k7")]
    mul_lib: String,
    /// Comma-separated adder architectures.
    #[arg(long, default_value = "exact,loa-k2,loa-k4,loa-k6,trunc-k2,trunc-k4")]
    add_lib: String,
    #[command(flatten)]
    detect: DetectFlags,
}

fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .filter(|x| !x.trim().is_empty())
        .map(|x| x.trim().parse::<T>().map_err(|e| anyhow::anyhow!("bad list item {x}: {e}")))
        .collect()
}

fn read_netlist(p: &Path) -> Result<Netlist> {
    let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
    parse_netlist(&text).with_context(|| format!("parsing {}", p.display()))
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => Ok(std::io::stdout().write_all(text.as_bytes())?),
    }
}

fn csv_string(rows: Vec<Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.write_record(r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn row<const N: usize>(xs: [&dyn ToString; N]) -> Vec<String> {
    xs.iter().map(|x| x.to_string()).collect()
}

fn gen_module_cmd(a: GenModuleArgs) -> Result<()> {
    let p = ArchParams::from_label(a.op, &a.arch, a.width)?;
    emit(&a.common.out, &serialize_netlist(&gen_module(&p)?))
}

fn gen_design_cmd(a: GenDesignArgs) -> Result<()> {
    let cfg = DesignConfig { design: a.design.kind()?, assignment: Assignment { mul: a.mul, add: a.add } };
    emit(&a.common.out, &serialize_netlist(&build_netlist(&cfg)?))
}

fn profile_cmd(a: ProfileArgs) -> Result<()> {
    let n = read_netlist(&a.netlist)?;
    let stream = VectorStream::for_netlist(&n, a.stream.spec()?);
    let sim = simulate(&n, &stream)?;
    let act = activity_profile(&sim);
    let mut rows = vec![row([&"metric", &"value"])];
    let other;
    let reference = match (&a.op, &a.against) {
        (Some(op), None) => {
            let width = n.input_words().first().map(|w| w.width()).context("netlist has no input words")?;
            Some(Reference::Oracle(ArchParams::exact(*op, width)))
        }
        (None, Some(p)) => {
            other = simulate(&read_netlist(p)?, &stream)?.outputs;
            Some(Reference::Words(&other))
        }
        (None, None) => None,
        _ => bail!("give at most one of --op and --against"),
    };
    if let Some(r) = reference {
        let e = error_profile(&n, &r, &stream)?;
        rows.push(row([&"er", &e.er]));
        rows.push(row([&"med", &e.med]));
        rows.push(row([&"mred", &e.mred]));
        rows.push(row([&"wce", &e.wce]));
    }
    rows.push(row([&"n_vectors", &stream.len()]));
    rows.push(row([&"power", &power_proxy(&n, &act, None).value]));
    rows.push(row([&"rare_nets", &rare_nets(&act, a.theta)?.len()]));
    emit(&a.common.out, &csv_string(rows)?)
}

fn scoap_cmd(a: NetlistArg) -> Result<()> {
    let n = read_netlist(&a.netlist)?;
    let r = scoap(&n)?;
    let mut rows = vec![row([&"net", &"cc0", &"cc1", &"co"])];
    for (i, name) in n.net_names().iter().enumerate() {
        rows.push(row([name, &r.cc0[i], &r.cc1[i], &r.co[i]]));
    }
    emit(&a.common.out, &csv_string(rows)?)
}

fn sta_cmd(a: StaArgs) -> Result<()> {
    let n = read_netlist(&a.netlist)?;
    let model = DelayModel::uniform(a.gate_delay).with_scale(a.scale);
    let t = sta(&n, &model, a.clock)?;
    let paths = near_critical_paths(&n, &model, a.clock, a.paths, a.window)?;
    let mut rows = vec![row([&"rank", &"delay", &"slack", &"instances", &"nets"])];
    rows.push(row([&"critical", &t.critical_delay, &t.min_slack(), &"", &""]));
    for (i, p) in paths.iter().enumerate() {
        let nets: Vec<&str> = p.nets.iter().map(|x| n.net_name(*x)).collect();
        rows.push(row([&(i + 1), &p.delay, &p.slack, &p.tags.join(" "), &nets.join(" ")]));
    }
    emit(&a.common.out, &csv_string(rows)?)
}

fn attack_cmd(a: AttackArgs) -> Result<()> {
    let out = a.common.out.clone().context("attack needs --out DIR")?;
    let cfg = ExperimentConfig {
        seed: a.seed,
        design: a.design.kind()?,
        library: Library { mul: vec![a.mul], add: vec![a.add] },
        n_variants: 1,
        n_vectors: a.vectors,
        rho: a.rho,
        theta: a.theta,
        q: a.q,
        clock: a.clock,
        gate_delay: a.gate_delay,
        budget: a.budget,
        infected_fraction: 1.0,
        payload: a.payload,
        leak_bits: a.leak_bits,
        scoap_ceiling: a.scoap_ceiling,
        witness_budget: a.witness_budget,
        weights: CostWeights { w_ap: a.w_ap, w_r: a.w_r },
        detect: DetectConfig::default(),
    };
    cfg.validate()?;
    let clib = characterize_library(&cfg.design, &cfg.library, cfg.stream_spec(), cfg.theta)?;
    let variant = generate_variants(&cfg.design, &cfg.library, &clib, &cfg.budget, 1)?.remove(0);
    let (inf, ht, stealth) = infect_variant(&cfg, &clib, &variant, 1)?;
    fs::create_dir_all(&out)?;
    fs::write(out.join("infected.net"), serialize_netlist(&inf))?;
    let mut truth = Truth::new();
    for m in inf.modules() {
        truth.insert(("infected".to_string(), m.clone()), m == ht.host);
    }
    write_truth(&truth, &out.join("ht_ground_truth.csv"))?;
    let cand = Candidate { id: "infected".into(), netlist: inf };
    write_stealth(&[Infection { id: "infected".into(), ht, stealth }], &[cand], &out.join("stealth.csv"))?;
    Ok(())
}

fn detect_cmd(a: DetectArgs) -> Result<()> {
    let mut files: Vec<PathBuf> = fs::read_dir(&a.candidates)
        .with_context(|| format!("reading {}", a.candidates.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    files.retain(|p| p.extension().is_some_and(|e| e == "net"));
    files.sort();
    let cands = files
        .iter()
        .map(|p| {
            let id = p.file_stem().unwrap().to_string_lossy().into_owned();
            Ok(Candidate { id, netlist: read_netlist(p)? })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut cfg = a.flags.config(a.seed, a.rho)?;
    if let Some(t) = a.theta {
        cfg.theta = t;
    }
    let report = classify(cands, &cfg)?;
    let mut buf = Vec::new();
    report.write_csv(&mut buf)?;
    emit(&a.common.out, &String::from_utf8(buf)?)
}

fn score_cmd(a: ScoreArgs) -> Result<()> {
    let report = DetectionReport::read_csv(fs::File::open(&a.report)?)?;
    let truth = read_truth(&a.truth)?;
    let m = score(&report, &truth)?;
    match &a.common.out {
        Some(p) => write_metrics(&m, p)?,
        None => {
            let dir = tempdir_path();
            write_metrics(&m, &dir)?;
            print!("{}", fs::read_to_string(&dir)?);
            fs::remove_file(&dir)?;
        }
    }
    Ok(())
}

fn tempdir_path() -> PathBuf {
    std::env::temp_dir().join(format!("approxht-metrics-{}.csv", std::process::id()))
}

fn experiment_cmd(a: ExperimentArgs) -> Result<()> {
    let out = a.common.out.clone().context("experiment needs --out DIR")?;
    let cfg = ExperimentConfig {
        seed: a.seed,
        design: a.design.kind()?,
        library: Library { mul: parse_list(&a.mul_lib)?, add: parse_list(&a.add_lib)? },
        n_variants: a.n_variants,
        n_vectors: a.vectors,
        rho: a.rho,
        theta: a.theta,
        q: a.q,
        clock: a.detect.clock,
        gate_delay: a.detect.gate_delay,
        budget: a.budget,
        infected_fraction: a.infected_fraction,
        payload: a.payload,
        leak_bits: a.leak_bits,
        scoap_ceiling: a.scoap_ceiling,
        witness_budget: a.witness_budget,
        weights: CostWeights { w_ap: a.w_ap, w_r: a.w_r },
        detect: a.detect.config(0, a.rho)?,
    };
    let o = run_experiment(&cfg)?;
    o.write_artifacts(&out)?;
    let m = &o.metrics;
    println!(
        "accuracy {:.4} fpr {} fnr {}",
        m.accuracy(),
        fmt_rate(m.fpr()),
        fmt_rate(m.fnr())
    );
    Ok(())
}

/// Expands `--config FILE` into explicit flags placed after the verb.
fn expand_config(args: Vec<String>) -> Result<Vec<String>> {
    let Some(i) = args.iter().position(|a| a == "--config" || a.starts_with("--config=")) else {
        return Ok(args);
    };
    let path = match args[i].strip_prefix("--config=") {
        Some(p) => p.to_string(),
        None => args.get(i + 1).cloned().context("--config needs a file")?,
    };
    let text = fs::read_to_string(&path).with_context(|| format!("reading {path}"))?;
    let mut map = parse_config(&text)?;
    map.remove("config");
    Ok(merge_args(&args, 2, &map))
}

fn main() -> Result<()> {
    let cli = Cli::parse_from(expand_config(std::env::args().collect())?);
    match cli.cmd {
        Cmd::GenModule(a) => gen_module_cmd(a),
        Cmd::GenDesign(a) => gen_design_cmd(a),
        Cmd::Profile(a) => profile_cmd(a),
        Cmd::Scoap(a) => scoap_cmd(a),
        Cmd::Sta(a) => sta_cmd(a),
        Cmd::Attack(a) => attack_cmd(a),
        Cmd::Detect(a) => detect_cmd(a),
        Cmd::Score(a) => score_cmd(a),
        Cmd::Experiment(a) => experiment_cmd(a),
    }
}
