use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use proptest::prelude::*;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn mas(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mas")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validate() {
    let ok = mas(&["validate", s(&data("fig1.net"))]);
    assert_eq!(code(&ok), 0);
    assert_eq!(stdout(&ok), "ok: 8 buses, 7 branches, 4 sources, 7 loads\n");
    assert_eq!(code(&mas(&["validate", "/nonexistent/x.net"])), 2);

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.net");
    std::fs::write(&bad, std::fs::read_to_string(data("fig1.net")).unwrap().replace("BRANCH B7 N6 N7", "BRANCH B7 N6 N9"))
        .unwrap();
    let o = mas(&["validate", s(&bad)]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("N9") && err.contains("line 22"), "{err}");
}

#[test]
fn study_run_report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let kb = dir.path().join("fig1.kb");
    let o = mas(&["study", s(&data("fig1.net")), "--out", s(&kb), "--strict"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).starts_with("kb: 8 entries, 0 infeasible"));

    let (log, metrics) = (dir.path().join("run.log"), dir.path().join("run.tsv"));
    let o = mas(&[
        "run",
        s(&data("fig1.net")),
        s(&data("b2_mid.scn")),
        "--kb",
        s(&kb),
        "--log",
        s(&log),
        "--metrics",
        s(&metrics),
        "--strict",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("faults 1 pass 1 fail 0"));

    let r1 = mas(&["report", s(&log), "--metrics", s(&metrics)]);
    assert_eq!(code(&r1), 0);
    assert!(stdout(&r1).ends_with("CONSISTENT\n"));
    assert!(stdout(&r1).contains("1   B2    clearing"));
    let r2 = mas(&["report", s(&log), "--metrics", s(&metrics)]);
    assert_eq!(r1.stdout, r2.stdout);

    let tampered = dir.path().join("tampered.tsv");
    let text = std::fs::read_to_string(&metrics).unwrap().replace("trips.B2\t2", "trips.B2\t5");
    std::fs::write(&tampered, text).unwrap();
    let o = mas(&["report", s(&log), "--metrics", s(&tampered)]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("MISMATCH trips.B2"));

    let truncated = dir.path().join("truncated.log");
    let full = std::fs::read_to_string(&log).unwrap();
    std::fs::write(&truncated, &full[..full.len() / 2]).unwrap();
    assert_eq!(code(&mas(&["report", s(&truncated)])), 2);
}

#[test]
fn frozen_settings_fail_under_strict() {
    let dir = tempfile::tempdir().unwrap();
    let kb = dir.path().join("fig1.kb");
    assert_eq!(code(&mas(&["study", s(&data("fig1.net")), "--out", s(&kb)])), 0);
    let args = |strict: bool| {
        let mut v = vec![
            "run".to_string(),
            s(&data("fig1.net")).into(),
            s(&data("b7_near.scn")).into(),
            "--kb".into(),
            s(&kb).into(),
            "--static-group".into(),
            "000".into(),
        ];
        if strict {
            v.push("--strict".into());
        }
        v
    };
    let strict: Vec<String> = args(true);
    let lax: Vec<String> = args(false);
    assert_eq!(code(&mas(&strict.iter().map(String::as_str).collect::<Vec<_>>())), 3);
    assert_eq!(code(&mas(&lax.iter().map(String::as_str).collect::<Vec<_>>())), 0);
    // The adaptive scheme clears the same fault selectively.
    assert_eq!(code(&mas(&["run", s(&data("fig1.net")), s(&data("b7_near.scn")), "--kb", s(&kb), "--strict"])), 0);
}

#[test]
fn study_edge_cases() {
    let dir = tempfile::tempdir().unwrap();
    let single = dir.path().join("single.kb");
    let o = mas(&["study", s(&data("single.net")), "--out", s(&single)]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).starts_with("kb: 1 entries"));
    assert_eq!(code(&mas(&["study", s(&data("fig1.net")), "--out", "/nonexistent/dir/x.kb"])), 1);
    let o = mas(&["study", s(&data("weak.net")), "--out", s(&dir.path().join("weak.kb")), "--strict"]);
    assert_eq!(code(&o), 3);
    assert!(stdout(&o).contains("sensitivity"));
}

#[test]
fn kb_for_another_network_is_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let kb = dir.path().join("n3.kb");
    assert_eq!(code(&mas(&["study", s(&data("n3.net")), "--out", s(&kb)])), 0);
    let o = mas(&["run", s(&data("fig1.net")), s(&data("b2_mid.scn")), "--kb", s(&kb)]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("knowledge base was built for network"));
}

#[test]
fn config_file_is_applied() {
    let dir = tempfile::tempdir().unwrap();
    let kb = dir.path().join("fig1.kb");
    assert_eq!(code(&mas(&["study", s(&data("fig1.net")), "--out", s(&kb)])), 0);
    let o = mas(&[
        "run",
        s(&data("fig1.net")),
        s(&data("gen_loss.scn")),
        "--kb",
        s(&kb),
        "--config",
        s(&data("gen_loss.cfg")),
    ]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).ends_with("frequency 49.700 Hz\n"), "{}", stdout(&o));
}

#[test]
fn usage_errors_are_input_errors() {
    assert_eq!(code(&mas(&[])), 2);
    assert_eq!(code(&mas(&["explode"])), 2);
    assert_eq!(code(&mas(&["study", s(&data("fig1.net"))])), 2);
    assert_eq!(code(&mas(&["--help"])), 0);
}

fn corrupt(text: &str, line: usize, junk: &str) -> String {
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let i = line % lines.len();
    lines[i] = junk.to_string();
    lines.join("\n")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // Any damaged input file gives exit 2, never a crash or another code.
    #[test]
    fn malformed_inputs_exit_with_input_error(line in 0usize..64, junk in "[A-Z]{3,8} [a-z0-9.]{1,6}( [a-z0-9=.+]{1,6}){0,3}") {
        let dir = tempfile::tempdir().unwrap();
        let fig1 = std::fs::read_to_string(data("fig1.net")).unwrap();
        let bad_net = dir.path().join("bad.net");
        std::fs::write(&bad_net, corrupt(&fig1, line, &junk)).unwrap();
        let o = mas(&["validate", s(&bad_net)]);
        prop_assert!(code(&o) == 2 || code(&o) == 0);
        if code(&o) == 0 {
            // Junk that happens to be a valid record is fine.
            prop_assert!(stdout(&o).starts_with("ok:"));
        }

        let bad_scn = dir.path().join("bad.scn");
        std::fs::write(&bad_scn, format!("at 0.1 fault B2 pos=0.5\n{junk}\n")).unwrap();
        let o = mas(&["run", s(&data("fig1.net")), s(&bad_scn)]);
        prop_assert_eq!(code(&o), 2);

        let bad_log = dir.path().join("bad.log");
        std::fs::write(&bad_log, format!("# mas-log 1\n# events\n{junk}\n# messages\n# end 1 0\n")).unwrap();
        prop_assert_eq!(code(&mas(&["report", s(&bad_log)])), 2);
    }
}
