use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bcel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bcel")).args(args).output().expect("bcel runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn records(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn col(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name} in {header:?}"))
}

const NORMAL: &str = r#"
model = "normal"
method = "bcel"
seed = 11

[data]
source = "simulate"
truth = [1.0]
n = 100

[sampler]
m = 2000
"#;

#[test]
fn run_writes_four_files_and_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "normal.toml", NORMAL);
    let a = tmp.path().join("a");
    let out = bcel(&["run", "--config", s(&cfg), "--out", s(&a)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut names: Vec<String> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    assert_eq!(names, ["data.txt", "manifest.toml", "sample.csv", "summary.csv"]);

    let (header, rows) = records(&a.join("summary.csv"));
    assert_eq!(header, ["param", "mean", "sd", "median", "lower", "upper", "ess"]);
    assert_eq!(rows[0][0], "mu");
    let ess: f64 = rows[0][6].parse().unwrap();
    assert!((1.0..=2000.0).contains(&ess));

    // The same config twice, then the manifest of the first run.
    let b = tmp.path().join("b");
    let c = tmp.path().join("c");
    assert!(bcel(&["run", "--config", s(&cfg), "--out", s(&b)]).status.success());
    assert!(bcel(&["run", "--config", s(&a.join("manifest.toml")), "--out", s(&c)]).status.success());
    for f in ["data.txt", "sample.csv", "summary.csv"] {
        let first = fs::read(a.join(f)).unwrap();
        assert_eq!(first, fs::read(b.join(f)).unwrap(), "{f}");
        assert_eq!(first, fs::read(c.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn seed_flag_and_thread_cap() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "normal.toml", NORMAL);
    let run = |dir: &str, extra: &[&str]| {
        let out = tmp.path().join(dir);
        let mut args = vec!["run", "--config", s(&cfg), "--out", s(&out)];
        args.extend_from_slice(extra);
        assert!(bcel(&args).status.success());
        fs::read(out.join("sample.csv")).unwrap()
    };
    let base = run("base", &[]);
    assert_eq!(base, run("threads", &["--threads", "3"]));
    assert_ne!(base, run("reseeded", &["--seed", "12"]));
}

#[test]
fn file_data_matches_simulated_data() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "normal.toml", NORMAL);
    let sim = tmp.path().join("sim");
    assert!(bcel(&["simulate", "--config", s(&cfg), "--out", s(&sim)]).status.success());

    let from_file = NORMAL.replace("source = \"simulate\"", "source = \"file\"\npath = \"sim/data.txt\"").replace("n = 100\n", "");
    let file_cfg = write_config(tmp.path(), "file.toml", &from_file);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(bcel(&["run", "--config", s(&cfg), "--out", s(&a)]).status.success());
    let out = bcel(&["run", "--config", s(&file_cfg), "--out", s(&b)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read(a.join("sample.csv")).unwrap(), fs::read(b.join("sample.csv")).unwrap());
    assert!(!b.join("data.txt").exists());
}

#[test]
fn exit_codes() {
    let tmp = TempDir::new().unwrap();
    let typo = write_config(tmp.path(), "typo.toml", &NORMAL.replace("m = 2000", "mm = 2000"));
    assert_eq!(bcel(&["run", "--config", s(&typo)]).status.code(), Some(2));

    let missing = tmp.path().join("nope.toml");
    assert_eq!(bcel(&["run", "--config", s(&missing)]).status.code(), Some(2));

    // A prior nowhere near the data: every particle is outside the convex hull.
    let disjoint = NORMAL.to_string() + "[[prior]]\nkind = \"uniform\"\nlo = [100.0]\nhi = [101.0]\n";
    let disjoint = write_config(tmp.path(), "disjoint.toml", &disjoint);
    let out = bcel(&["run", "--config", s(&disjoint), "--out", s(&tmp.path().join("d"))]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("weights are zero"));

    assert_eq!(bcel(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn compare_identical_and_mismatched() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "a.toml", NORMAL);
    let out = tmp.path().join("cmp");
    let res = bcel(&["compare", "--config", s(&cfg), "--config", s(&cfg), "--out", s(&out)]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let (header, rows) = records(&out.join("compare.csv"));
    assert_eq!(header, ["label", "param", "mean", "sd", "median", "lower", "upper", "ess"]);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][1..], rows[1][1..]);
    assert_eq!(fs::read(out.join("hist_bcel-1.csv")).unwrap(), fs::read(out.join("hist_bcel-2.csv")).unwrap());

    let other = write_config(tmp.path(), "b.toml", &NORMAL.replace("seed = 11", "seed = 12"));
    let res = bcel(&["compare", "--config", s(&cfg), "--config", s(&other), "--out", s(&out)]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("different datasets"));
}

#[test]
fn compare_bcel_and_abc_on_the_normal_model() {
    let tmp = TempDir::new().unwrap();
    let a = write_config(tmp.path(), "a.toml", NORMAL);
    let b = write_config(tmp.path(), "b.toml", &NORMAL.replace("method = \"bcel\"", "method = \"abc\""));
    let out = tmp.path().join("cmp");
    assert!(bcel(&["compare", "--config", s(&a), "--config", s(&b), "--out", s(&out)]).status.success());
    let (header, rows) = records(&out.join("compare.csv"));
    let (mean, sd) = (col(&header, "mean"), col(&header, "sd"));
    let get = |r: usize, c: usize| rows[r][c].parse::<f64>().unwrap();
    assert_eq!((rows[0][0].as_str(), rows[1][0].as_str()), ("bcel", "abc"));
    let spread = get(0, sd).max(get(1, sd));
    assert!((get(0, mean) - get(1, mean)).abs() < 3.0 * spread);

    // Both histograms share bins and each carries unit mass.
    let (_, ha) = records(&out.join("hist_bcel.csv"));
    let (_, hb) = records(&out.join("hist_abc.csv"));
    assert_eq!(ha.iter().map(|r| &r[1]).collect::<Vec<_>>(), hb.iter().map(|r| &r[1]).collect::<Vec<_>>());
    for h in [ha, hb] {
        let total: f64 = h.iter().map(|r| r[3].parse::<f64>().unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }
}

#[test]
fn replicate_with_the_stub_estimator_has_zero_error() {
    let tmp = TempDir::new().unwrap();
    let text = NORMAL.to_string() + "[replicate]\nreplicates = 7\nmethods = [\"truth\"]\n";
    let cfg = write_config(tmp.path(), "stub.toml", &text);
    let out = tmp.path().join("rep");
    assert!(bcel(&["replicate", "--config", s(&cfg), "--out", s(&out)]).status.success());
    let (header, rows) = records(&out.join("metrics.csv"));
    assert_eq!(header, ["param", "rmse_truth", "mad_truth", "coverage_truth"]);
    assert_eq!(rows, [["mu", "0", "0", "1"]]);
    assert_eq!(fs::read_to_string(out.join("failures.csv")).unwrap(), "replicate,method,message\n");
}

const POPGEN_DESK: &str = r#"
model = "popgen-A"
method = "bcel-amis"
seed = 4

[data]
source = "simulate"
truth = [1.0, 1.0]
individuals_per_pop = 5
loci = 10

[sampler]
m = 100
iterations = 2

[abc]
quantile = 0.1
m = 20
"#;

#[test]
fn replicate_desk_scale_popgen_schema() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "popgen.toml", POPGEN_DESK);
    let out = tmp.path().join("rep");
    let res = bcel(&["replicate", "--config", s(&cfg), "--replicates", "10", "--out", s(&out)]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let (header, rows) = records(&out.join("metrics.csv"));
    assert_eq!(header.len(), 1 + 6);
    assert_eq!(rows.iter().map(|r| r[0].as_str()).collect::<Vec<_>>(), ["theta", "tau"]);
    for m in ["abc", "bcel-amis"] {
        let c = col(&header, &format!("coverage_{m}"));
        for r in &rows {
            let v: f64 = r[c].parse().unwrap();
            assert!((0.0..=1.0).contains(&v), "{v}");
        }
    }
}

#[test]
fn replicate_rejects_file_data() {
    let tmp = TempDir::new().unwrap();
    let text = NORMAL.replace("source = \"simulate\"", "source = \"file\"\npath = \"x.txt\"").replace("n = 100\n", "");
    let cfg = write_config(tmp.path(), "file.toml", &text);
    assert_eq!(bcel(&["replicate", "--config", s(&cfg)]).status.code(), Some(2));
}

#[test]
fn popgen_smoke_run_has_healthy_ess() {
    let tmp = TempDir::new().unwrap();
    let text = r#"
model = "popgen-A"
method = "bcel-amis"
seed = 1

[data]
source = "simulate"
truth = [1.0, 1.0]

[sampler]
m = 2000
iterations = 5
"#;
    let cfg = write_config(tmp.path(), "popgen.toml", text);
    let out = tmp.path().join("run");
    let res = bcel(&["run", "--config", s(&cfg), "--out", s(&out)]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let (header, rows) = records(&out.join("summary.csv"));
    let ess: f64 = rows[0][col(&header, "ess")].parse().unwrap();
    assert!(ess.is_finite() && ess > 50.0 && ess <= 10_000.0, "{ess}");
}

#[test]
fn shipped_configs_are_valid() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            bcel_cli::ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            n += 1;
        }
    }
    assert!(n >= 4);
}
