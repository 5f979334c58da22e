use std::path::Path;
use std::process::{Command, Output};

fn syz(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_syz"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("run syz")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn ok(o: Output) -> String {
    assert!(
        o.status.success(),
        "{}\n{}",
        stdout(&o),
        String::from_utf8_lossy(&o.stderr)
    );
    stdout(&o)
}

const S22: [&str; 4] = ["--d1", "2", "--d2", "2"];

fn with<'a>(cmd: &'a str, spec: &[&'a str], extra: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec![cmd];
    v.extend_from_slice(spec);
    v.extend_from_slice(extra);
    v
}

#[test]
fn windowed_plan_size() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = ["--d1", "3", "--d2", "8", "--b1", "2", "--b2", "2"];
    let text = ok(syz(
        tmp.path(),
        &with(
            "plan",
            &spec,
            &["--window", "q0:4-8,q1:3-7", "--compare-default"],
        ),
    ));
    assert!(text.contains("jobs 1130\n"), "{text}");
    assert!(text.contains("a superset of the windowed plan"), "{text}");
}

#[test]
fn usage_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(
        syz(tmp.path(), &with("plan", &S22, &["--bogus"]))
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        syz(tmp.path(), &["plan", "--d1", "0", "--d2", "2"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        syz(tmp.path(), &with("plan", &S22, &["--window", "q7:1-2"]))
            .status
            .code(),
        Some(2)
    );
    // Assembling before ranking is refused.
    ok(syz(tmp.path(), &with("plan", &S22, &[])));
    assert_ne!(
        syz(tmp.path(), &with("assemble", &S22, &[])).status.code(),
        Some(0)
    );
}

#[test]
fn full_run_on_22() {
    let tmp = tempfile::tempdir().unwrap();
    ok(syz(tmp.path(), &with("plan", &S22, &[])));
    ok(syz(
        tmp.path(),
        &with("rank", &S22, &["--workers", "2", "--second-prime", "65521"]),
    ));
    let table = ok(syz(tmp.path(), &with("assemble", &S22, &[])));
    let expect = "\
       0  1  2  3  4  5  6
0:     1  .  .  .  .  .  .
1:     . 20 64 90 64 20  .
2:     .  .  .  .  .  .  1
";
    let got: Vec<&str> = table.lines().map(str::trim_end).collect();
    let want: Vec<&str> = expect.lines().map(str::trim_end).collect();
    assert_eq!(
        got.iter()
            .map(|l| l.split_whitespace().collect::<Vec<_>>())
            .collect::<Vec<_>>(),
        want.iter()
            .map(|l| l.split_whitespace().collect::<Vec<_>>())
            .collect::<Vec<_>>(),
        "{table}"
    );

    let schur = ok(syz(tmp.path(), &with("schur", &S22, &[])));
    assert!(schur.contains("K_{0,0} = S_(0,0,0,0)"), "{schur}");
    ok(syz(tmp.path(), &with("bs", &S22, &[])));
    ok(syz(
        tmp.path(),
        &with("verify", &S22, &["--mode", "hilbert"]),
    ));
    ok(syz(
        tmp.path(),
        &with("verify", &S22, &["--mode", "compose"]),
    ));
    ok(syz(
        tmp.path(),
        &with("verify", &S22, &["--mode", "second-prime"]),
    ));
    ok(syz(tmp.path(), &with("report", &S22, &["--row", "1"])));
    let run = std::fs::read_dir(tmp.path())
        .unwrap()
        .next()
        .unwrap()
        .unwrap()
        .path();
    for f in [
        "betti.json",
        "schur.json",
        "bs.json",
        "report/row_profile.csv",
        "report/schur_counts.csv",
        "report/redundancy.json",
        "report/unimodality.json",
        "report/bs_coeffs.csv",
        "report/conjectures.json",
    ] {
        assert!(run.join(f).is_file(), "missing {f}");
    }
    // A second rank call finds nothing to do.
    let again = ok(syz(tmp.path(), &with("rank", &S22, &[])));
    assert!(again.contains("jobs 0 "), "{again}");
}

#[test]
fn duality_between_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let a = ["--d1", "2", "--d2", "3"];
    let b = ["--d1", "2", "--d2", "3", "--b2", "1"];
    for s in [&a[..], &b[..]] {
        ok(syz(tmp.path(), &with("plan", s, &[])));
        ok(syz(tmp.path(), &with("rank", s, &[])));
        ok(syz(tmp.path(), &with("assemble", s, &[])));
        ok(syz(tmp.path(), &with("schur", s, &[])));
    }
    let text = ok(syz(tmp.path(), &with("verify", &a, &["--mode", "duality"])));
    assert!(text.to_lowercase().contains("duality"), "{text}");
}
