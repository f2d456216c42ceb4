use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_lambda-forge"));
    c.current_dir(env!("CARGO_MANIFEST_DIR"));
    c.env_remove("LAMBDA_FORGE_BOUND");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    run(args).status.code().expect("exit code")
}

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

/// Documented commands and the golden file holding their output.
const GOLDEN: &[(&str, &[&str])] = &[
    ("dr_table_6inf.csv", &["dr-table", "--field", "Q", "--cycle", "6*inf", "--format", "csv"]),
    ("dr_table_6inf.json", &["dr-table", "--field", "Q", "--cycle", "6*inf", "--json"]),
    ("dr_table_gauss.csv", &["dr-table", "--field", "d:-1", "--cycle", "[5, 2+w, 1]", "--format", "csv"]),
    ("dr_mul_12inf.json", &["dr-mul", "--field", "Q", "--cycle", "12*inf", "--a", "5", "--b", "7", "--json"]),
    ("f_equiv_4inf.txt", &["f-equiv", "--field", "Q", "--cycle", "4*inf", "--a", "2", "--b", "6"]),
    ("ray_class_15inf.csv", &["ray-class", "--field", "Q", "--cycle", "15*inf", "--format", "csv"]),
    ("ray_class_d5.json", &["ray-class", "--field", "d:-5", "--cycle", "[1, 0+w, 1]", "--json"]),
    ("model_check_mu5.json", &["model-check", "--input", "tests/data/mu5.json", "--cycle", "10*inf", "--json"]),
    ("model_check_twisted.txt", &["model-check", "--input", "tests/data/twisted.json"]),
    ("chebyshev_2.txt", &["chebyshev", "--n", "2"]),
    ("chebyshev_17.json", &["chebyshev", "--n", "17", "--json"]),
    ("chebyshev_17_mod_17.txt", &["chebyshev", "--n", "17", "--mod", "17"]),
    ("periodic_locus_cheb_12.json", &["periodic-locus", "--family", "chebyshev", "--n", "12", "--json"]),
    ("periodic_locus_toric.csv", &["periodic-locus", "--family", "toric", "--n", "1-10", "--format", "csv"]),
    ("witt_convert.txt", &["witt", "convert", "--ghost", "1,2,3", "--trunc", "div:6"]),
    ("witt_check.json", &["witt", "check", "--ring", "x^4-1", "--frob", "p:x^p", "--json"]),
    ("witt_periodic_4.json", &["witt", "periodic", "--n", "4", "--bound", "64", "--json"]),
    ("cotangent.csv", &["cotangent", "--a", "1-12", "--q", "3", "--format", "csv"]),
];

#[test]
fn golden_outputs() {
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    for (file, args) in GOLDEN {
        let got = stdout(args);
        let path = golden_dir().join(file);
        if update {
            std::fs::write(&path, &got).unwrap();
            continue;
        }
        let want = std::fs::read_to_string(&path).unwrap_or_else(|_| panic!("missing golden file {file}"));
        assert_eq!(got, want, "output of {args:?} differs from {file}");
    }
}

#[test]
fn outputs_are_byte_stable() {
    for (_, args) in GOLDEN {
        assert_eq!(stdout(args), stdout(args), "{args:?}");
    }
}

#[test]
fn jobs_do_not_change_output() {
    let base = ["cotangent", "--a", "1-30", "--q", "5", "--json"];
    let one = stdout(&base);
    let many = stdout(&[&base[..], &["--jobs", "4"]].concat());
    assert_eq!(one, many);
    let base = ["periodic-locus", "--family", "chebyshev", "--n", "1-15", "--format", "csv"];
    assert_eq!(stdout(&base), stdout(&[&base[..], &["--jobs", "3"]].concat()));
}

#[test]
fn documented_examples() {
    let csv = stdout(&["dr-table", "--field", "Q", "--cycle", "6*inf", "--format", "csv"]);
    assert_eq!(csv.lines().count(), 7, "header plus six rows");
    assert_eq!(stdout(&["f-equiv", "--field", "Q", "--cycle", "4*inf", "--a", "2", "--b", "6"]), "true\n");
    assert_eq!(stdout(&["f-equiv", "--field", "Q", "--cycle", "4*inf", "--a", "2", "--b", "10"]), "true\n");
    assert_eq!(stdout(&["f-equiv", "--field", "Q", "--cycle", "4*inf", "--a", "1", "--b", "3"]), "false\n");
    assert_eq!(stdout(&["chebyshev", "--n", "2"]), "y^2 - 2\n");
    assert_eq!(stdout(&["chebyshev", "--n", "3"]), "y^3 - 3y\n");
    assert_eq!(stdout(&["chebyshev", "--n", "5"]), "y^5 - 5y^3 + 5y\n");
    assert_eq!(stdout(&["dr-mul", "--cycle", "12*inf", "--a", "5", "--b", "7"]), "11\n");
}

#[test]
fn json_reports_have_documented_fields() {
    let v: serde_json::Value =
        serde_json::from_str(&stdout(&["periodic-locus", "--family", "chebyshev", "--n", "12", "--json"])).unwrap();
    for k in ["Q", "image_basis", "cokernel_order"] {
        assert!(v.get(k).is_some(), "missing {k}");
    }
    assert_eq!(v["cokernel_order"], 2);

    let v: serde_json::Value = serde_json::from_str(&stdout(&[
        "model-check",
        "--input",
        "tests/data/mu5.json",
        "--json",
    ]))
    .unwrap();
    for k in ["exists", "minimal_cycle", "r", "conductors"] {
        assert!(v.get(k).is_some(), "missing {k}");
    }
    assert_eq!(v["minimal_cycle"], "5*inf");

    let v: serde_json::Value =
        serde_json::from_str(&stdout(&["dr-table", "--cycle", "6*inf", "--json"])).unwrap();
    for k in ["cycle", "support", "elements", "table"] {
        assert!(v.get(k).is_some(), "missing {k}");
    }
    assert_eq!(v["elements"].as_array().unwrap().len(), 6);
    assert!(v["elements"][0].get("d").is_some() && v["elements"][0].get("unit_rep").is_some());

    let v: serde_json::Value =
        serde_json::from_str(&stdout(&["witt", "periodic", "--n", "1-3", "--json"])).unwrap();
    let arr = v.as_array().unwrap();
    assert_eq!(arr.len(), 3);
    assert!(arr.iter().all(|r| r["verdict"] == "true" && r["stable"] == true));
}

#[test]
fn exit_codes() {
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["chebyshev", "--n", "2", "--bogus"]), 1);
    assert_eq!(code(&["no-such-verb"]), 1);
    assert_eq!(code(&["dr-table", "--cycle", "six"]), 1);
    assert_eq!(code(&["dr-table", "--field", "d:-1", "--cycle", "5*inf"]), 1, "no real place");
    assert_eq!(code(&["model-check", "--input", "tests/data/missing.json"]), 1);
    assert_eq!(code(&["witt", "check", "--ring", "x^4-1", "--frob", "2=x^3"]), 1);
    assert_eq!(code(&["f-equiv", "--cycle", "3", "--a", "2", "--b", "4", "--format", "csv"]), 0);
    assert_eq!(code(&["witt", "check", "--json", "--format", "csv"]), 0, "--json wins");
    // no Frobenius lift at the ramified prime 2
    assert_eq!(code(&["witt", "check", "--ring", "cyclotomic:4", "--trunc", "div:4", "--ghost", "1,1,1"]), 2);
}

#[test]
fn bound_override() {
    let out = bin()
        .args(["dr-table", "--cycle", "60*inf"])
        .env("LAMBDA_FORGE_BOUND", "monoid=10")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin()
        .args(["dr-table", "--cycle", "6*inf"])
        .env("LAMBDA_FORGE_BOUND", "nonsense")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = bin()
        .args(["dr-table", "--cycle", "6*inf"])
        .env("LAMBDA_FORGE_BOUND", "100")
        .output()
        .unwrap();
    assert!(out.status.success());
}
