use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_approxht")).args(args).current_dir(cwd).output().unwrap()
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let o = run(args, cwd);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

#[test]
fn module_profile_scoap_sta() {
    let d = tempfile::tempdir().unwrap();
    ok(&["gen-module", "--op", "add", "--arch", "loa-k2", "--width", "4", "--out", "m.net"], d.path());
    let prof = ok(&["profile", "--netlist", "m.net", "--op", "add", "--vectors", "256"], d.path());
    assert!(prof.starts_with("metric,value\ner,"));
    let sc = ok(&["scoap", "--netlist", "m.net"], d.path());
    assert_eq!(sc.lines().next(), Some("net,cc0,cc1,co"));
    assert_eq!(sc.lines().nth(1), Some("a[0],1,1,2"));
    let st = ok(&["sta", "--netlist", "m.net", "--gate-delay", "1", "--paths", "2"], d.path());
    assert!(st.lines().nth(1).unwrap().starts_with("critical,"));
}

#[test]
fn config_file_and_flag_precedence() {
    let d = tempfile::tempdir().unwrap();
    fs::write(d.path().join("c.cfg"), "# design\ndesign = fft\nwidth = 4\ntwiddle = 11\nmul = trunc-k2\n").unwrap();
    ok(&["gen-design", "--config", "c.cfg", "--out", "a.net"], d.path());
    ok(&["gen-design", "--config", "c.cfg", "--width", "6", "--out", "b.net"], d.path());
    let a = fs::read_to_string(d.path().join("a.net")).unwrap();
    let b = fs::read_to_string(d.path().join("b.net")).unwrap();
    assert!(a.contains("word a a[0] a[1] a[2] a[3]\n") && a.contains("trunc-k2"));
    assert!(b.contains("a[5]"));
    fs::write(d.path().join("bad.cfg"), "width 4\n").unwrap();
    assert!(!run(&["gen-design", "--config", "bad.cfg"], d.path()).status.success());
    assert!(!run(&["gen-module", "--op", "mul", "--arch", "loa-k2"], d.path()).status.success());
}

#[test]
fn attack_detect_score_pipeline() {
    let d = tempfile::tempdir().unwrap();
    ok(&["experiment", "--seed", "5", "--n-variants", "6", "--out", "exp"], d.path());
    let metrics = fs::read_to_string(d.path().join("exp/metrics.csv")).unwrap();
    let seed = (5u64.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(7)).to_string();
    ok(&["detect", "--candidates", "exp/netlists", "--seed", &seed, "--out", "r.csv"], d.path());
    assert_eq!(fs::read(d.path().join("r.csv")).unwrap(), fs::read(d.path().join("exp/detect_report.csv")).unwrap());
    ok(&["score", "--report", "r.csv", "--truth", "exp/ht_ground_truth.csv", "--out", "m.csv"], d.path());
    assert_eq!(fs::read_to_string(d.path().join("m.csv")).unwrap(), metrics);

    ok(&["attack", "--mul", "trunc-k4", "--out", "att"], d.path());
    let stealth = fs::read_to_string(d.path().join("att/stealth.csv")).unwrap();
    assert!(stealth.lines().nth(1).unwrap().starts_with("infected,top.mul"));
    assert!(d.path().join("att/infected.net").exists());
}
