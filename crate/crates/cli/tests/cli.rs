use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn fbvp(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fbvp"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn report(dir: &Path) -> String {
    fs::read_to_string(dir.join("report.txt")).expect("report written")
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("problem.toml");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const NON_RESONANT: &str = r#"
[problem]
alpha = 2.0
xi = 0.5
grid_n = 16

[operator]
inline = """
2,2
1.4142135623730951,0
0,1.4142135623730951
"""

[rhs]
builtin = "zero"

[growth]
a1 = 0.1
b1 = 0.2
"#;

#[test]
fn verify_example_reports_every_golden_check() {
    let tmp = TempDir::new().unwrap();
    let o = fbvp(&["verify-example", "--builtin", "section4", "--k", "1"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(tmp.path());
    for name in [
        "M = blockdiag(1/4, 1/8, 0)",
        "M+ = blockdiag(4, 8, 0)",
        "dim ker M = k",
        "ep_defect = 0",
        "Q prefactor Gamma(3/2)Gamma(3)",
        "B xi^a - I",
        "d_hat",
        "d_tilde",
        "h(N e t^(1/2))_1 = 11/(40 sqrt(pi))",
        "h(N e t^(1/2))_3",
        "<e, J Q N(e t^(1/2))> > 0",
        "smallness condition: quotient",
        "(e) L K_P",
        "A^2 xi^(2a-2) != I",
        "solver converged",
    ] {
        assert!(r.contains(name), "missing {name:?}");
    }
    assert!(r.contains("product quotient: 0.124204"));
    assert!(r.contains("[failed checks]"));
    assert!(tmp.path().join("solution.csv").exists());
}

#[test]
fn one_iteration_does_not_converge() {
    let tmp = TempDir::new().unwrap();
    let o = fbvp(&["solve", "--builtin", "section4", "--max-iter", "1"], tmp.path());
    assert_eq!(code(&o), 2);
    let r = report(tmp.path());
    assert!(r.contains("termination: MaxIterations"));
    assert!(r.contains("product quotient"));
}

#[test]
fn non_resonant_analyze_exits_1_with_condition() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), NON_RESONANT);
    let o = fbvp(&["analyze", "--config", &cfg], tmp.path());
    assert_eq!(code(&o), 1);
    let r = report(tmp.path());
    assert!(r.contains("non-resonant"), "{r}");
    assert!(r.contains("Gamma(alpha): 1.000000"), "{r}");
    assert!(r.contains("max side: 0.200000"), "{r}");
    assert!(r.contains("product quotient:"), "{r}");
}

#[test]
fn failing_condition_exits_1_and_keeps_triple() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[problem]\nbuiltin = \"section4\"\nk = 1\n\n[growth]\na1 = 1.0\nb1 = 0.1\n",
    );
    for cmd in ["analyze", "check-hypotheses"] {
        let o = fbvp(&[cmd, "--config", &cfg], tmp.path());
        assert_eq!(code(&o), 1, "{cmd}");
        let r = report(tmp.path());
        assert!(r.contains("Gamma(alpha): 0.886227"), "{r}");
        assert!(r.contains("max side: 2.000000"), "{r}");
        assert!(r.contains("product quotient: inf"), "{r}");
        assert!(r.contains("result: fail"), "{r}");
    }
}

#[test]
fn solution_csv_is_reproducible() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let args = ["solve", "--builtin", "section4", "--k", "2", "--grid", "64", "--seed", "7", "--sweep", "3"];
    assert_eq!(code(&fbvp(&args, a.path())), 0);
    assert_eq!(code(&fbvp(&args, b.path())), 0);
    for f in ["solution.csv", "sweep.csv", "report.txt"] {
        let x = fs::read(a.path().join(f)).unwrap();
        let y = fs::read(b.path().join(f)).unwrap();
        assert_eq!(x, y, "{f} differs");
    }
}

#[test]
fn solution_csv_layout() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&fbvp(&["solve", "--builtin", "section4", "--grid", "32"], tmp.path())), 0);
    let csv = fs::read_to_string(tmp.path().join("solution.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "t,x_1,x_2,x_3,dtrace_1,dtrace_2,dtrace_3");
    assert_eq!(lines.len(), 1 + 33);
    let last: Vec<f64> = lines[33].split(',').map(|s| s.parse().unwrap()).collect();
    assert_eq!(last.len(), 7);
    assert_eq!(last[0], 1.0);
    // 17 significant digits
    assert_eq!(lines[1].split(',').next().unwrap(), "0.0000000000000000e0");
}

#[test]
fn custom_affine_problem_solves() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"
[problem]
alpha = 1.5
xi = 0.25
grid_n = 64

[operator]
inline = "2,2\n2,0\n0,1"

[rhs]
profile = "one_minus_two_t"
amplitude = [0.5, 0.25]

[solver]
damping = 1.0
"#,
    );
    let o = fbvp(&["solve", "--config", &cfg], tmp.path());
    assert_eq!(code(&o), 0, "{}", report(tmp.path()));
    assert!(report(tmp.path()).contains("solvability_defect"));
}

#[test]
fn unknown_key_is_an_input_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "[problem]\nalpha = 1.5\ncolour = 1\n");
    let o = fbvp(&["analyze", "--config", &cfg], tmp.path());
    assert_eq!(code(&o), 3);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 3"), "{err}");
    assert!(err.contains("colour"), "{err}");
}

#[test]
fn off_grid_xi_names_smallest_grid() {
    let tmp = TempDir::new().unwrap();
    let o = fbvp(&["analyze", "--builtin", "section4", "--grid", "30"], tmp.path());
    assert_eq!(code(&o), 3);
    assert!(report(tmp.path()).contains("smallest valid N is 8"));
}

#[test]
fn bad_usage_is_an_input_error() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&fbvp(&["solve", "--bogus"], tmp.path())), 3);
    assert_eq!(code(&fbvp(&["solve"], tmp.path())), 3);
    assert_eq!(code(&fbvp(&["solve", "--builtin", "nope"], tmp.path())), 3);
    assert_eq!(code(&fbvp(&["solve", "--builtin", "section4", "--damping", "0"], tmp.path())), 3);
}

#[test]
fn verify_example_needs_a_builtin() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), NON_RESONANT);
    assert_eq!(code(&fbvp(&["verify-example", "--config", &cfg], tmp.path())), 3);
}
