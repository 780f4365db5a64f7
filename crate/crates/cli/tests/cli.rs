use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn sue(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sue"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn workspace() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    let out = sue(dir.path(), &["examples", "--dir", "."]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    dir
}

fn solve(dir: &Path, demands: &str, solver: &str, seed: &str, out: &str, extra: &[&str]) -> Output {
    let mut args = vec![
        "solve",
        "--network",
        "sheffi12.net.csv",
        "--demands",
        demands,
        "--solver",
        solver,
        "--gamma",
        "0.3",
        "--epsilon",
        "0.1",
        "--seed",
        seed,
        "--out",
        out,
    ];
    args.extend_from_slice(extra);
    sue(dir, &args)
}

fn outer_iterations(summary: &str) -> usize {
    summary
        .split(": ")
        .nth(1)
        .and_then(|s| s.split_whitespace().next())
        .and_then(|s| s.parse().ok())
        .unwrap_or_else(|| panic!("no iteration count in {summary:?}"))
}

#[test]
fn solve_writes_flows_trace_and_manifest() {
    let dir = workspace();
    let out = solve(
        dir.path(),
        "example1.od.csv",
        "physarum",
        "42",
        "flows.csv",
        &[],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let flows = fs::read_to_string(dir.path().join("flows.csv")).unwrap();
    let mut lines = flows.lines();
    assert_eq!(lines.next(), Some("from,to,flow,flow_exact"));
    assert_eq!(lines.count(), 34);
    let trace = fs::read_to_string(dir.path().join("flows.trace.csv")).unwrap();
    assert!(trace.starts_with("outer_iter,epsilon,elapsed_ms,truncations\n1,"));
    assert_eq!(trace.lines().count() - 1, outer_iterations(&stdout(&out)));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("flows.manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["config"]["seed"], 42);
    assert_eq!(manifest["config"]["solver"], "physarum");
    assert!(manifest["rng_algorithm"]
        .as_str()
        .unwrap()
        .contains("chacha8"));
}

#[test]
fn msa_needs_more_outer_iterations() {
    let dir = workspace();
    let p = solve(
        dir.path(),
        "example1.od.csv",
        "physarum",
        "42",
        "p.csv",
        &[],
    );
    let m = solve(dir.path(), "example1.od.csv", "msa", "42", "m.csv", &[]);
    assert_eq!(code(&p), 0);
    // MSA's distance to a single stochastic loading stays large: it runs to the cap.
    assert_eq!(code(&m), 2, "{}", stdout(&m));
    assert!(outer_iterations(&stdout(&m)) > outer_iterations(&stdout(&p)));
    let cmp = sue(dir.path(), &["compare", "m.csv", "p.csv", "--tol", "0.5"]);
    assert_eq!(code(&cmp), 0, "{}", stdout(&cmp));
}

#[test]
fn invalid_flags_exit_one_and_name_the_flag() {
    let dir = workspace();
    let out = solve(
        dir.path(),
        "example1.od.csv",
        "physarum",
        "1",
        "f.csv",
        &["--gamma", "-1"],
    );
    assert_eq!(code(&out), 1);
    let err = stderr(&out);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.contains("--gamma"), "{err}");

    let out = sue(
        dir.path(),
        &[
            "solve",
            "--network",
            "missing.csv",
            "--demands",
            "example1.od.csv",
        ],
    );
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("missing.csv"));

    let out = solve(
        dir.path(),
        "example1.od.csv",
        "frank-wolfe",
        "1",
        "f.csv",
        &[],
    );
    assert_eq!(code(&out), 1);

    fs::write(
        dir.path().join("bad.od.csv"),
        "origin,destination,demand\n1,99,5\n",
    )
    .unwrap();
    let out = solve(dir.path(), "bad.od.csv", "physarum", "1", "f.csv", &[]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("99"), "{}", stderr(&out));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = workspace();
    for name in ["a", "b"] {
        let out = solve(
            dir.path(),
            "example2.od.csv",
            "physarum",
            "7",
            &format!("{name}.csv"),
            &["--inner", "10"],
        );
        assert_eq!(code(&out), 0);
    }
    let read = |f: &str| fs::read(dir.path().join(f)).unwrap();
    assert_eq!(read("a.csv"), read("b.csv"));
    assert_eq!(read("a.trace.csv"), read("b.trace.csv"));
}

#[test]
fn manifest_rerun_reproduces_flows() {
    let dir = workspace();
    let out = solve(
        dir.path(),
        "example1.od.csv",
        "msa",
        "5",
        "orig.csv",
        &["--max-outer", "500"],
    );
    assert_eq!(code(&out), 2);
    let sub: PathBuf = dir.path().join("rerun");
    fs::create_dir(&sub).unwrap();
    let out = sue(
        &sub,
        &[
            "solve",
            "--manifest",
            "../orig.manifest.json",
            "--out",
            "again.csv",
        ],
    );
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert_eq!(
        fs::read(dir.path().join("orig.csv")).unwrap(),
        fs::read(sub.join("again.csv")).unwrap()
    );
    let out = sue(
        dir.path(),
        &["solve", "--manifest", "orig.manifest.json", "--seed", "1"],
    );
    assert_eq!(code(&out), 1);
}

#[test]
fn wall_clock_fills_elapsed_column() {
    let dir = workspace();
    let out = solve(
        dir.path(),
        "example1.od.csv",
        "physarum",
        "1",
        "f.csv",
        &["--wall-clock"],
    );
    assert_eq!(code(&out), 0);
    let trace = fs::read_to_string(dir.path().join("f.trace.csv")).unwrap();
    let row: Vec<&str> = trace.lines().nth(1).unwrap().split(',').collect();
    assert!(row[2].parse::<f64>().is_ok(), "{row:?}");
}

#[test]
fn compare_exit_codes() {
    let dir = workspace();
    solve(dir.path(), "example1.od.csv", "physarum", "1", "x.csv", &[]);
    let same = sue(dir.path(), &["compare", "x.csv", "x.csv", "--tol", "0"]);
    assert_eq!(code(&same), 0);
    assert!(stdout(&same).contains("max difference 0.0000"));

    let shifted: String = fs::read_to_string(dir.path().join("x.csv"))
        .unwrap()
        .lines()
        .enumerate()
        .map(|(i, l)| {
            if i == 1 {
                let mut f: Vec<String> = l.split(',').map(String::from).collect();
                f[3] = (f[3].parse::<f64>().unwrap() + 1.0).to_string();
                f.join(",")
            } else {
                l.to_string()
            }
        })
        .collect::<Vec<_>>()
        .join("\n");
    fs::write(dir.path().join("y.csv"), shifted).unwrap();
    assert_eq!(
        code(&sue(
            dir.path(),
            &["compare", "x.csv", "y.csv", "--tol", "0.5"]
        )),
        3
    );

    fs::write(dir.path().join("other.csv"), "from,to,flow\n1,2,3\n2,3,1\n").unwrap();
    assert_eq!(
        code(&sue(dir.path(), &["compare", "x.csv", "other.csv"])),
        1
    );
}

fn rewrite_flows(path: &Path, f: impl Fn(usize, f64) -> f64) -> String {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .enumerate()
        .map(|(i, l)| {
            if i == 0 {
                return l.to_string();
            }
            let mut cols: Vec<String> = l.split(',').map(String::from).collect();
            let x = f(i, cols[3].parse().unwrap());
            cols[2] = format!("{x:.4}");
            cols[3] = x.to_string();
            cols.join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn verify_passes_solutions_and_catches_faults() {
    let dir = workspace();
    solve(
        dir.path(),
        "example1.od.csv",
        "physarum",
        "42",
        "p.csv",
        &[],
    );
    let verify = |flows: &str| {
        sue(
            dir.path(),
            &[
                "verify",
                "--network",
                "sheffi12.net.csv",
                "--demands",
                "example1.od.csv",
                "--flows",
                flows,
            ],
        )
    };
    let ok = verify("p.csv");
    assert_eq!(code(&ok), 0, "{}", stdout(&ok));
    assert!(!stdout(&ok).contains("FAIL"));

    // Row 1 is link 1 -> 2; node 2 then has one unit too many.
    fs::write(
        dir.path().join("bad.csv"),
        rewrite_flows(
            &dir.path().join("p.csv"),
            |i, x| if i == 1 { x + 1.0 } else { x },
        ),
    )
    .unwrap();
    let bad = verify("bad.csv");
    assert_eq!(code(&bad), 3);
    assert!(
        stdout(&bad).contains("FAIL conservation"),
        "{}",
        stdout(&bad)
    );

    fs::write(
        dir.path().join("zero.csv"),
        rewrite_flows(&dir.path().join("p.csv"), |_, _| 0.0),
    )
    .unwrap();
    let zero = verify("zero.csv");
    assert_eq!(code(&zero), 3);
    assert!(
        stdout(&zero).contains("FAIL demand satisfaction"),
        "{}",
        stdout(&zero)
    );

    assert_eq!(code(&verify("missing.csv")), 1);
}

#[test]
fn dot_export() {
    let dir = workspace();
    let plain = sue(dir.path(), &["export-dot", "--network", "sheffi12.net.csv"]);
    assert_eq!(code(&plain), 0);
    let text = stdout(&plain);
    assert!(text.starts_with("digraph"));
    assert_eq!(text.lines().filter(|l| l.contains("->")).count(), 34);
    let nodes = text
        .lines()
        .filter(|l| {
            let t = l.trim().trim_end_matches(';');
            !t.is_empty() && t.chars().all(|c| c.is_ascii_digit())
        })
        .count();
    assert_eq!(nodes, 12);
    assert!(text.contains("1 -> 2 [label=\"20/0.0056\"]"), "{text}");

    solve(
        dir.path(),
        "example1.od.csv",
        "physarum",
        "42",
        "p.csv",
        &[],
    );
    let out = sue(
        dir.path(),
        &[
            "export-dot",
            "--network",
            "sheffi12.net.csv",
            "--flows",
            "p.csv",
            "--out",
            "p.dot",
        ],
    );
    assert_eq!(code(&out), 0);
    let dot = fs::read_to_string(dir.path().join("p.dot")).unwrap();
    assert_eq!(dot.matches("style=dashed").count(), 17);
    assert_eq!(dot.matches("style=solid").count(), 17);

    fs::write(dir.path().join("empty.csv"), "").unwrap();
    let out = sue(
        dir.path(),
        &[
            "export-dot",
            "--network",
            "sheffi12.net.csv",
            "--flows",
            "empty.csv",
        ],
    );
    assert_eq!(code(&out), 1);
    fs::write(dir.path().join("header.csv"), "from,to,flow,flow_exact\n").unwrap();
    let out = sue(
        dir.path(),
        &[
            "export-dot",
            "--network",
            "sheffi12.net.csv",
            "--flows",
            "header.csv",
        ],
    );
    assert_eq!(code(&out), 1);
}
