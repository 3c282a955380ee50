use std::path::Path;
use std::process::{Command, Output};

use msflow::{flowio, tables};

fn msflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_msflow"))
        .args(args)
        .output()
        .expect("spawn msflow")
}

fn ok(args: &[&str]) -> String {
    let out = msflow(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    msflow(args).status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, velocity: &str) {
    ok(&[
        "synth",
        "--velocity",
        velocity,
        "--pyramid-levels",
        "3",
        "--out",
        s(dir),
    ]);
}

#[test]
fn synth_writes_frames_levels_and_truth() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "3,-2");
    for name in [
        "frame_00000.pgm",
        "frame_00001.pgm",
        "level_0.pgm",
        "level_2.pgm",
        "truth.txt",
    ] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    let l2 = msflow::pgm::load(&dir.path().join("level_2.pgm")).unwrap();
    assert_eq!(l2.dims(), (32, 32));
}

#[test]
fn flow_methods_report_and_write_csv() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "3,2");
    for method in ["lk", "serial", "parallel"] {
        let csv = dir.path().join(format!("{method}.csv"));
        let text = ok(&[
            "flow",
            "--input",
            s(dir.path()),
            "--method",
            method,
            "--out",
            s(&csv),
        ]);
        assert!(text.contains("valid="), "{text}");
        let f = flowio::load_flow(&csv).unwrap();
        assert_eq!(f.dims(), (128, 128));
    }
    let text = ok(&["flow", "--input", s(dir.path()), "--method", "serial"]);
    let err: f64 = text
        .split_whitespace()
        .find_map(|t| t.strip_prefix("mean_error="))
        .unwrap()
        .parse()
        .unwrap();
    assert!(err < 0.3, "{text}");
}

#[test]
fn job_count_does_not_change_the_flow() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "6,6");
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    ok(&[
        "flow",
        "--input",
        s(dir.path()),
        "--jobs",
        "1",
        "--out",
        s(&a),
    ]);
    ok(&[
        "flow",
        "--input",
        s(dir.path()),
        "--jobs",
        "3",
        "--out",
        s(&b),
    ]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# small frames\nwidth=48\nheight=40\nvelocity=1,1\n").unwrap();
    let out = dir.path().join("seq");
    ok(&[
        "synth",
        "--config",
        s(&cfg),
        "--height",
        "56",
        "--out",
        s(&out),
    ]);
    let f = msflow::pgm::load(&out.join("frame_00000.pgm")).unwrap();
    assert_eq!(f.dims(), (48, 56));
}

#[test]
fn exit_codes_by_failure_class() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&["flow", "--input", "/definitely/not/here"]), 3);
    assert_eq!(code(&["flow", "--bogus"]), 2);
    assert_eq!(code(&["discriminate", "--method", "nonsense"]), 2);
    let bad = dir.path().join("frame_00000.pgm");
    std::fs::write(&bad, b"P2 1 1 255\n0\n").unwrap();
    assert_eq!(code(&["flow", "--input", s(dir.path())]), 4);
    // window must be odd
    synth(dir.path(), "1,1");
    assert_eq!(
        code(&["flow", "--input", s(dir.path()), "--window", "4"]),
        5
    );
    assert_eq!(code(&["--help"]), 0);
}

#[test]
fn error_message_is_one_line_on_stderr() {
    let out = msflow(&["flow", "--input", "/definitely/not/here"]);
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1);
    assert!(err.starts_with("msflow: "), "{err}");
}

#[test]
fn calibrate_writes_a_usable_model() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.txt");
    let samples = dir.path().join("samples.csv");
    ok(&[
        "calibrate",
        "--levels",
        "3",
        "--sweep",
        "0.5:16:8",
        "--realizations",
        "3",
        "--out",
        s(&model),
        "--samples",
        s(&samples),
    ]);
    let m = tables::load_model(&model).unwrap();
    assert!(m.sigma0 > 0.0 && m.levels == 3 && m.scale == 2.0);
    assert_eq!(tables::load_samples(&samples).unwrap().len(), 24);

    let seq = dir.path().join("seq");
    synth(&seq, "4,0");
    let text = ok(&["flow", "--input", s(&seq), "--model", s(&model)]);
    assert!(text.contains("mean_error="), "{text}");
}

#[test]
fn discriminate_and_compare_write_tables() {
    let dir = tempfile::tempdir().unwrap();
    let curve = dir.path().join("curve.csv");
    let summary = dir.path().join("summary.csv");
    let small = [
        "--width",
        "64",
        "--height",
        "64",
        "--realizations",
        "3",
        "--range",
        "2:4:2",
    ];
    let mut args = vec!["compare", "--methods", "serial,parallel,oracle"];
    args.extend(small);
    args.extend(["--out", s(&curve), "--summary", s(&summary)]);
    let text = ok(&args);
    assert_eq!(text.lines().count(), 3, "{text}");
    let rows = std::fs::read_to_string(&curve).unwrap();
    assert!(rows.starts_with("method,L,v_obj,min_delta_pct\n"));
    assert_eq!(rows.lines().count(), 1 + 3 * 2);
    // exact speeds: the first candidate above alpha
    assert!(rows.contains("oracle,1,2,6\n"), "{rows}");
    let sums = std::fs::read_to_string(&summary).unwrap();
    assert!(sums.starts_with("method,L,mean,variance,range_lo,range_hi\n"));

    let mut args = vec!["discriminate", "--method", "level1"];
    args.extend(small);
    let text = ok(&args);
    assert!(text.starts_with("level1 L=2"), "{text}");
}

#[test]
fn bench_prints_report() {
    let text = ok(&["bench", "--size", "64", "--repeats", "1"]);
    for key in [
        "levels pool",
        "merge",
        "total seq",
        "speedup",
        "identical     true",
    ] {
        assert!(text.contains(key), "{key} missing from\n{text}");
    }
}
