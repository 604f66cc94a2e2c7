use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn cdfield(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cdfield"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = cdfield(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const PAIR: &str = r#"{"variables": ["a", "b"],
    "factors": [{"family": "clayton", "theta_init": 1.0, "scope": ["a", "b"]}]}"#;

#[test]
fn transform_ranks_columns() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "raw.csv", "x,y\n3.2,1\n-1.0,1\n7.7,2\n");
    let out = path(dir.path(), "u.csv");
    ok(&["transform", &input, "--out", &out]);
    assert_eq!(
        fs::read_to_string(&out).unwrap(),
        "x,y\n0.5,0.375\n0.25,0.375\n0.75,0.75\n"
    );

    let bad = write(dir.path(), "bad.csv", "x,y\n1,2\n3,oops\n");
    let res = cdfield(&["transform", &bad, "--out", &out]);
    assert_eq!(res.status.code(), Some(1));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("row 2") && err.contains("\"y\""), "{err}");
    let short = write(dir.path(), "short.csv", "x\n1\n");
    assert_eq!(cdfield(&["transform", &short, "--out", &out]).status.code(), Some(1));
}

#[test]
fn density_of_a_single_clayton_pair() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "m.json", PAIR);
    let data = write(dir.path(), "d.csv", "b,a\n0.5,0.5\n0.2,0.9\n");
    let text = ok(&["density", &model, &data]);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "row,log_density");
    let values: Vec<f64> = lines[1..3]
        .iter()
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!((values[0] - (32.0f64 / 27.0).ln()).abs() < 1e-12);
    assert!((values[0] - 0.16989).abs() < 1e-5);
    let total: f64 = lines[3].strip_prefix("total,").unwrap().parse().unwrap();
    assert_eq!(total, values[0] + values[1]);
}

#[test]
fn independence_rows_have_zero_log_density() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(
        dir.path(),
        "m.json",
        r#"{"variables": ["a", "b", "c"],
            "factors": [{"family": "independence", "scope": ["a", "b"]},
                        {"family": "independence", "scope": ["b", "c"]}]}"#,
    );
    let data = write(dir.path(), "d.csv", "a,b,c\n0.1,0.2,0.3\n0.9,0.5,0.7\n");
    let text = ok(&["density", &model, &data]);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    for line in &lines[1..] {
        let v: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!(v.abs() < 1e-12, "{line}");
    }
}

#[test]
fn graph_listing() {
    let dir = tempfile::tempdir().unwrap();
    let chain = path(dir.path(), "chain.json");
    ok(&["template", "chain", "--p", "3", "--out", &chain]);
    let text = ok(&["graph", &chain]);
    assert_eq!(text.lines().next().unwrap(), "U1 -- U2, U2 -- U3; width 1");
    assert!(text.contains("components: 1"));

    let clusters = path(dir.path(), "clusters.json");
    ok(&[
        "template",
        "cluster-pair",
        "--assignment",
        "0,0,1,1,2,2,3,3",
        "--out",
        &clusters,
    ]);
    assert!(ok(&["graph", &clusters]).contains("factors: 10\n"));

    let split = write(
        dir.path(),
        "split.json",
        r#"{"variables": ["a", "b", "c", "d"],
            "factors": [{"family": "clayton", "theta_init": 1.0, "scope": ["a", "b"]},
                        {"family": "clayton", "theta_init": 1.0, "scope": ["c", "d"]}]}"#,
    );
    let text = ok(&["graph", &split]);
    assert!(text.contains("components: 2\n  {a, b}\n  {c, d}\n"), "{text}");
}

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let model = path(dir.path(), "m.json");
    ok(&["template", "chain", "--p", "4", "--theta", "1.5", "--out", &model]);
    let a = path(dir.path(), "a.csv");
    let b = path(dir.path(), "b.csv");
    ok(&["simulate", &model, "--n", "200", "--seed", "7", "--out", &a]);
    ok(&["simulate", &model, "--n", "200", "--seed", "7", "--out", &b]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().count(), 201);
    assert!(text.lines().skip(1).all(|l| l.split(',').all(|v| {
        let x: f64 = v.parse().unwrap();
        x > 0.0 && x < 1.0
    })));
    let meta = fs::read_to_string(format!("{a}.meta.json")).unwrap();
    assert!(meta.contains("\"seed\": 7") && meta.contains("model_hash"));

    let empty = path(dir.path(), "empty.csv");
    ok(&["simulate", &model, "--n", "0", "--out", &empty]);
    assert_eq!(fs::read_to_string(&empty).unwrap(), "U1,U2,U3,U4\n");

    let mixed = write(
        dir.path(),
        "mixed.json",
        r#"{"variables": ["a", "b"], "factors": [{"family": "independence", "scope": ["a", "b"]}]}"#,
    );
    assert_eq!(
        cdfield(&["simulate", &mixed, "--n", "5", "--out", &empty])
            .status
            .code(),
        Some(1)
    );
}

fn fit_files(dir: &Path) -> (String, String) {
    let model = path(dir, "m.json");
    ok(&["template", "chain", "--p", "3", "--out", &model]);
    let truth = write(
        dir,
        "truth.json",
        r#"{"variables": ["U1", "U2", "U3"],
            "factors": [{"family": "clayton", "theta_init": 2.0, "scope": ["U1", "U2"]},
                        {"family": "clayton", "theta_init": 0.8, "scope": ["U2", "U3"]}]}"#,
    );
    let data = path(dir, "d.csv");
    ok(&["simulate", &truth, "--n", "100", "--seed", "3", "--out", &data]);
    (model, data)
}

#[test]
fn fit_writes_trace_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let (model, data) = fit_files(dir.path());
    for sampler in ["collapsed", "discrete", "continuous"] {
        let a = path(dir.path(), &format!("{sampler}-a.csv"));
        let b = path(dir.path(), &format!("{sampler}-b.csv"));
        for out in [&a, &b] {
            let text = ok(&[
                "fit",
                &model,
                &data,
                "--sampler",
                sampler,
                "--iters",
                "60",
                "--burnin",
                "10",
                "--thin",
                "2",
                "--seed",
                "5",
                "--out",
                out,
            ]);
            assert!(text.contains("rows: 25") && text.contains("wallclock"), "{text}");
        }
        let trace = fs::read_to_string(&a).unwrap();
        assert_eq!(trace, fs::read_to_string(&b).unwrap());
        let mut lines = trace.lines();
        assert_eq!(lines.next().unwrap(), "iter,theta_U1_U2,theta_U2_U3,log_post");
        assert_eq!(lines.count(), 25);
        let summary = fs::read_to_string(format!("{a}.summary.txt")).unwrap();
        assert_eq!(summary, fs::read_to_string(format!("{b}.summary.txt")).unwrap());
        assert!(summary.contains("theta_U1_U2") && summary.contains("ess"));
        if sampler == "continuous" {
            assert!(summary.contains("latent acceptance"));
        }
    }
}

#[test]
fn fit_with_no_iterations() {
    let dir = tempfile::tempdir().unwrap();
    let (model, data) = fit_files(dir.path());
    let out = path(dir.path(), "t.csv");
    let text = ok(&["fit", &model, &data, "--iters", "0", "--out", &out]);
    assert!(text.contains("rows: 0"));
    assert_eq!(
        fs::read_to_string(&out).unwrap(),
        "iter,theta_U1_U2,theta_U2_U3,log_post\n"
    );
}

#[test]
fn fit_rejects_incompatible_requests_before_sampling() {
    let dir = tempfile::tempdir().unwrap();
    let (_, data) = fit_files(dir.path());
    let out = PathBuf::from(path(dir.path(), "never.csv"));
    let mixed = write(
        dir.path(),
        "mixed.json",
        r#"{"variables": ["U1", "U2", "U3"],
            "factors": [{"family": "clayton", "theta_init": 1.0, "scope": ["U1", "U2"]},
                        {"family": "independence", "scope": ["U2", "U3"]}]}"#,
    );
    let out_s = out.to_str().unwrap();
    let res = cdfield(&[
        "fit",
        &mixed,
        &data,
        "--sampler",
        "continuous",
        "--iters",
        "10",
        "--out",
        out_s,
    ]);
    assert_eq!(res.status.code(), Some(1));
    assert!(!out.exists());

    let dense = path(dir.path(), "dense.json");
    ok(&["template", "cluster-pair", "--assignment", "0,1,2", "--out", &dense]);
    let raw = write(dir.path(), "raw.csv", "U1,U2,U3\n0.5,0.5,0.5\n");
    let res = cdfield(&[
        "fit",
        &dense,
        &raw,
        "--iters",
        "10",
        "--treewidth-cap",
        "0",
        "--out",
        out_s,
    ]);
    assert_eq!(res.status.code(), Some(1), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(!out.exists());

    let outside = write(dir.path(), "outside.csv", "U1,U2,U3\n0.5,1.5,0.5\n");
    let model = path(dir.path(), "m.json");
    let res = cdfield(&["fit", &model, &outside, "--iters", "10", "--out", out_s]);
    assert_eq!(res.status.code(), Some(1));
    let res = cdfield(&["fit", &model, &raw, "--iters", "10", "--burnin", "10", "--out", out_s]);
    assert_eq!(res.status.code(), Some(1));
    let res = cdfield(&["fit", &model, &raw, "--bogus"]);
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn template_round_trips_through_density() {
    let dir = tempfile::tempdir().unwrap();
    let model = path(dir.path(), "m.json");
    ok(&["template", "chain", "--p", "3", "--theta", "2.5", "--out", &model]);
    let printed = ok(&["template", "chain", "--p", "3", "--theta", "2.5"]);
    assert_eq!(printed, fs::read_to_string(&model).unwrap());
    let res = cdfield(&["template", "chain", "--p", "1"]);
    assert_eq!(res.status.code(), Some(1));
}
