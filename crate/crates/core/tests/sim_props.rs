mod common;

use approxht::arith::{gen_module, ArchId, ArchParams, OpType};
use approxht::netlist::NetId;
use approxht::sim::{
    activity_profile, error_profile, eval_scalar, simulate, word_shape, Reference, StreamMode, StreamSpec,
    VectorStream,
};

#[test]
fn bit_parallel_matches_scalar_on_random_netlists() {
    for seed in 0..20u64 {
        let n = common::random_dag(seed, 3 + seed as usize % 6, 40 + 7 * seed as usize);
        let s = VectorStream::for_netlist(&n, StreamSpec::new(1000, seed, StreamMode::Uniform));
        let r = simulate(&n, &s).unwrap();
        let words = n.input_words();
        for t in 0..s.len() {
            let v = s.vector(t);
            let mut pi = vec![false; n.num_nets()];
            for (w, x) in words.iter().zip(&v) {
                for (i, b) in w.bits.iter().enumerate() {
                    pi[b.index()] = (x >> i) & 1 == 1;
                }
            }
            let ins: Vec<bool> = n.inputs().iter().map(|i| pi[i.index()]).collect();
            let scalar = eval_scalar(&n, &ins).unwrap();
            for net in 0..n.num_nets() {
                assert_eq!(r.bit(NetId(net as u32), t), scalar[net], "seed {seed} net {net} vector {t}");
            }
        }
    }
}

#[test]
fn same_seed_same_everything() {
    let n = gen_module(&ArchParams::new(OpType::Add, ArchId::Loa, 8, 3)).unwrap();
    for mode in [StreamMode::Uniform, StreamMode::Correlated { rho: 0.7 }] {
        let spec = StreamSpec::new(777, 42, mode);
        let (a, b) = (VectorStream::for_netlist(&n, spec), VectorStream::for_netlist(&n, spec));
        assert_eq!(a, b);
        let (ra, rb) = (simulate(&n, &a).unwrap(), simulate(&n, &b).unwrap());
        assert_eq!(ra, rb);
        assert_eq!(activity_profile(&ra), activity_profile(&rb));
        let p = ArchParams::new(OpType::Add, ArchId::Loa, 8, 3);
        assert_eq!(error_profile(&n, &Reference::Oracle(p), &a).unwrap(), error_profile(&n, &Reference::Oracle(p), &b).unwrap());
    }
    let other = VectorStream::for_netlist(&n, StreamSpec::new(777, 43, StreamMode::Uniform));
    assert_ne!(other, VectorStream::for_netlist(&n, StreamSpec::new(777, 42, StreamMode::Uniform)));
}

#[test]
fn rho_one_freezes_the_stream() {
    let words = vec![("a".to_string(), 8), ("b".to_string(), 5)];
    let s = VectorStream::generate(&words, StreamSpec::new(500, 9, StreamMode::Correlated { rho: 1.0 }));
    for t in 1..s.len() {
        assert_eq!(s.vector(t), s.vector(0));
    }
}

#[test]
fn rho_zero_is_uniform_chi_square() {
    // 16 cells of a 4-bit word, 15 degrees of freedom; 0.999 critical value 37.70
    let words = vec![("a".to_string(), 4)];
    for mode in [StreamMode::Uniform, StreamMode::Correlated { rho: 0.0 }] {
        let s = VectorStream::generate(&words, StreamSpec::new(100_000, 5, mode));
        let mut counts = [0f64; 16];
        for &v in &s.values[0] {
            counts[v as usize] += 1.0;
        }
        let e = 100_000.0 / 16.0;
        let chi: f64 = counts.iter().map(|c| (c - e) * (c - e) / e).sum();
        assert!(chi < 37.70, "{mode:?}: chi-square {chi}");
    }
}

#[test]
fn error_metrics_match_scalar_brute_force() {
    let cases = [
        ArchParams::new(OpType::Add, ArchId::Loa, 4, 2),
        ArchParams::new(OpType::Add, ArchId::Trunc, 6, 3),
        ArchParams::new(OpType::Sub, ArchId::Loa, 5, 2),
        ArchParams::new(OpType::Mul, ArchId::Trunc, 8, 5),
        ArchParams::new(OpType::Mul, ArchId::Block22, 8, 7),
        ArchParams::exact(OpType::Mul, 8),
    ];
    for p in cases {
        let n = gen_module(&p).unwrap();
        let s = VectorStream::exhaustive(&word_shape(&n.input_words()));
        let e = error_profile(&n, &Reference::Oracle(p), &s).unwrap();
        let (er, med, mred, wce) = common::brute_error(&n, p.op_type, p.width);
        assert_eq!((e.er, e.med, e.mred, e.wce), (er, med, mred, wce), "{p}");
    }
}
