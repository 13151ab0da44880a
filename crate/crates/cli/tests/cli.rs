use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_finsler"))
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    bin().args(args).arg("--config").arg(config).arg("--out").arg(out).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// `(name, pass, worst)` from the `VERDICT` line.
fn verdict(o: &Output) -> (String, bool, f64) {
    let text = stdout(o);
    let line = text.lines().find(|l| l.starts_with("VERDICT ")).unwrap_or_else(|| panic!("no verdict in:\n{text}"));
    let parts: Vec<&str> = line.split_whitespace().collect();
    assert_eq!(parts.len(), 4, "{line}");
    (parts[1].to_string(), parts[2] == "pass", parts[3].parse().unwrap())
}

const FLAT: &str = "seed = 11\n[metric]\nzoo = \"flat_randers\"\n";

#[test]
fn killing_check_on_flat_randers_passes() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "run.toml", FLAT);
    let out = tmp.path().join("out");
    let o = run(&["killing-check"], &cfg, &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let (name, pass, worst) = verdict(&o);
    assert_eq!(name, "killing");
    assert!(pass && worst <= 1e-12);
    let report = fs::read_to_string(out.join("killing_report.txt")).unwrap();
    assert!(report.lines().last().unwrap().starts_with("VERDICT killing pass"));
    assert!(out.join("killing.csv").exists());
}

#[test]
fn non_killing_field_exits_two() {
    let tmp = TempDir::new().unwrap();
    let body = format!("{FLAT}[killing]\nname = \"rotation\"\nfield = [\"0\", \"-x2\", \"x1\"]\n");
    let cfg = write_config(tmp.path(), "run.toml", &body);
    let o = run(&["killing-check"], &cfg, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(!verdict(&o).1);
}

#[test]
fn lightlike_check_on_kerr_defaults_passes() {
    let tmp = TempDir::new().unwrap();
    for (i, body) in ["[metric]\nzoo = \"kerr_perturbation\"\n", "[metric]\nzoo = \"kerr_perturbation\"\nparams = { equatorial = 1 }\n"]
        .iter()
        .enumerate()
    {
        let cfg = write_config(tmp.path(), &format!("kerr{i}.toml"), body);
        let out = tmp.path().join(format!("out{i}"));
        let o = run(&["lightlike-check"], &cfg, &out);
        assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), String::from_utf8_lossy(&o.stderr));
        let (name, pass, gap) = verdict(&o);
        assert_eq!(name, "lightlike");
        assert!(pass && gap <= 1e-5, "gap {gap}");
        for f in ["lightlike_spacetime.csv", "lightlike_fermat.csv", "lightlike_summary.csv"] {
            assert!(out.join(f).exists(), "{f}");
        }
    }
}

#[test]
fn index_check_on_indefinite_b_reports_witness() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "run.toml", "seed = 5\n[metric]\nzoo = \"indefinite_b\"\n");
    let out = tmp.path().join("out");
    let o = run(&["index-check"], &cfg, &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).lines().any(|l| l.starts_with("WITNESS")));
    let csv = fs::read_to_string(out.join("index1.csv")).unwrap();
    assert!(csv.lines().any(|l| l.starts_with("witness,")), "no witness row");
    assert!(!verdict(&o).1);
}

#[test]
fn index_check_on_flat_randers_passes() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "run.toml", FLAT);
    let o = run(&["index-check"], &cfg, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn static_check_separates_static_from_twisted() {
    let tmp = TempDir::new().unwrap();
    let st = write_config(tmp.path(), "st.toml", "seed = 2\n[metric]\nzoo = \"static_warped\"\n");
    let tw = write_config(tmp.path(), "tw.toml", "seed = 2\n[metric]\nzoo = \"twisted_oneform\"\n");
    let o = run(&["static-check"], &st, &tmp.path().join("a"));
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("verdict: static"));
    let o = run(&["static-check"], &tw, &tmp.path().join("b"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("stationary-nonstatic"));
}

#[test]
fn every_command_prints_a_verdict() {
    let tmp = TempDir::new().unwrap();
    let body = format!("{FLAT}[evidence]\npairs = 4\n[evidence.grid]\nbounds = [[-1, 1], [-1, 1]]\nresolution = 41\norder2 = true\n[chrono]\npoints = [[1.0, -0.9, 0.0], [1.0, 0.9, 0.0]]\n");
    let cfg = write_config(tmp.path(), "run.toml", &body);
    let cmds = [
        ("eval", "eval"),
        ("tensor", "tensor"),
        ("index-check", "index1"),
        ("killing-check", "killing"),
        ("static-check", "static"),
        ("fermat", "fermat"),
        ("classify", "classify"),
        ("geodesic", "geodesic"),
        ("lightlike-check", "lightlike"),
        ("shoot", "shoot"),
        ("balls", "balls"),
        ("chrono", "chrono"),
        ("evidence", "evidence"),
    ];
    for (cmd, name) in cmds {
        let out = tmp.path().join(cmd);
        let o = run(&[cmd], &cfg, &out);
        assert_eq!(o.status.code(), Some(0), "{cmd}: {}{}", stdout(&o), String::from_utf8_lossy(&o.stderr));
        assert_eq!(verdict(&o).0, name);
        assert!(out.join(format!("{name}_report.txt")).exists(), "{cmd}");
    }
    let shoot = fs::read_to_string(tmp.path().join("shoot/shoot_report.txt")).unwrap();
    assert!(shoot.contains("length 1.618033988"), "{shoot}");
    let member = fs::read_to_string(tmp.path().join("chrono/chrono_membership.csv")).unwrap();
    assert_eq!(member.lines().skip(1).map(|l| l.rsplit(',').next().unwrap()).collect::<Vec<_>>(), ["inside", "outside"]);
}

#[test]
fn outputs_are_deterministic_across_runs_and_threads() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "run.toml", &format!("{FLAT}[classify]\nn_vectors = 2000\n"));
    for (cmd, file) in [("classify", "classify.csv"), ("index-check", "index1.csv"), ("geodesic", "geodesic.csv"), ("fermat", "fermat_samples.csv")] {
        let a = tmp.path().join(format!("{cmd}-a"));
        let b = tmp.path().join(format!("{cmd}-b"));
        assert_eq!(run(&[cmd, "--threads", "1"], &cfg, &a).status.code(), Some(0));
        assert_eq!(run(&[cmd, "--threads", "3"], &cfg, &b).status.code(), Some(0));
        let x = fs::read(a.join(file)).unwrap();
        let y = fs::read(b.join(file)).unwrap();
        assert!(!x.is_empty());
        assert!(x == y, "{file} differs between runs");
    }
    let a = tmp.path().join("seed-a");
    assert_eq!(run(&["classify", "--seed", "12"], &cfg, &a).status.code(), Some(0));
    assert_ne!(fs::read(a.join("classify.csv")).unwrap(), fs::read(tmp.path().join("classify-a/classify.csv")).unwrap());
}

#[test]
fn sampled_commands_require_a_seed() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "run.toml", "[metric]\nzoo = \"flat_randers\"\n");
    let o = run(&["killing-check"], &cfg, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));
    let o = run(&["killing-check", "--seed", "4"], &cfg, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn config_errors_carry_line_and_column() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "bad.toml", "seed = 1\n[metric]\nzoo = \"flat_randers\"\ncolour = 3\n");
    let o = run(&["eval"], &cfg, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 4"), "{err}");

    let cfg = write_config(tmp.path(), "expr.toml", "seed = 1\n[lambda]\nexpr = \"1 +\"\n[B]\nexpr = \"y1\"\n[F]\nsquared = \"y1^2\"\n");
    let o = run(&["eval"], &cfg, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3, column"));
}

#[test]
fn expression_metric_from_separate_file() {
    let tmp = TempDir::new().unwrap();
    write_config(
        tmp.path(),
        "metric.toml",
        "[lambda]\nexpr = \"1\"\n[B]\nexpr = \"0.5 * y1\"\n[F]\nsquared = \"y1^2 + y2^2\"\n[cone]\nkind = \"upper_half\"\n",
    );
    let cfg = write_config(tmp.path(), "run.toml", "metric_file = \"metric.toml\"\n[shoot]\nx0 = [1.0, 0.0]\nx1 = [0.0, 0.0]\n");
    let o = run(&["shoot"], &cfg, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("length 6.18033988"), "{}", stdout(&o));
}

#[test]
fn zoo_list_needs_no_config() {
    let o = bin().args(["zoo", "list"]).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for name in ["flat_randers", "kerr_perturbation", "indefinite_b"] {
        assert!(text.contains(name), "{name}");
    }
    assert_eq!(verdict(&o), ("zoo".to_string(), true, 0.0));
}

#[test]
fn missing_config_and_bad_flags_exit_one() {
    assert_eq!(bin().arg("eval").output().unwrap().status.code(), Some(1));
    assert_eq!(bin().args(["eval", "--threads", "many"]).output().unwrap().status.code(), Some(1));
}
