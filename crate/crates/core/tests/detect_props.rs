mod common;

use approxht::bench::{run_experiment, ExperimentConfig};
use approxht::detect::{classify, rank_by_error, Candidate, DetectConfig, DetectionReport};
use approxht::sim::{StreamMode, StreamSpec, VectorStream};
use rand::seq::SliceRandom;

fn small_experiment(seed: u64) -> ExperimentConfig {
    ExperimentConfig { seed, n_variants: 6, infected_fraction: 0.5, ..Default::default() }
}

fn sorted(mut r: DetectionReport) -> DetectionReport {
    r.netlists.sort_by(|a, b| a.id.cmp(&b.id));
    r
}

#[test]
fn classify_is_deterministic() {
    let o = run_experiment(&small_experiment(4)).unwrap();
    let cfg = o.config.detect_config();
    let a = classify(o.candidates.clone(), &cfg).unwrap();
    let b = classify(o.candidates.clone(), &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a, o.report);
}

#[test]
fn ranking_and_report_ignore_candidate_order() {
    for seed in [2u64, 7] {
        let o = run_experiment(&small_experiment(seed)).unwrap();
        let cfg = o.config.detect_config();
        let base = &o.candidates;
        let streams: Vec<VectorStream> = [StreamMode::Uniform, StreamMode::Correlated { rho: 0.5 }]
            .into_iter()
            .map(|m| VectorStream::for_netlist(&base[0].netlist, StreamSpec::new(500, seed, m)))
            .collect();
        let want = rank_by_error(base, &streams).unwrap();
        let want_report = sorted(classify(base.clone(), &cfg).unwrap());
        for k in 0..3u64 {
            let mut perm: Vec<Candidate> = base.clone();
            perm.shuffle(&mut common::rng(seed * 31 + k));
            assert_eq!(rank_by_error(&perm, &streams).unwrap(), want);
            assert_eq!(sorted(classify(perm, &cfg).unwrap()), want_report);
        }
    }
}

#[test]
fn clean_exact_sets_raise_no_flags() {
    for seed in 0..6u64 {
        let cfg = DetectConfig { seed, ..Default::default() };
        let r = classify(common::exact_clean_set(seed), &cfg).unwrap();
        let flagged: Vec<(&str, &str)> = r
            .netlists
            .iter()
            .flat_map(|n| n.instances.iter().filter(|i| i.flagged).map(move |i| (n.id.as_str(), i.instance.as_str())))
            .collect();
        assert!(flagged.is_empty(), "seed {seed}: {flagged:?}");
    }
}

#[test]
fn report_csv_round_trips() {
    let o = run_experiment(&small_experiment(9)).unwrap();
    let mut buf = Vec::new();
    o.report.write_csv(&mut buf).unwrap();
    let back = DetectionReport::read_csv(&buf[..]).unwrap();
    let mut again = Vec::new();
    back.write_csv(&mut again).unwrap();
    assert_eq!(buf, again);
}
