//! CLI contract: exit 0 on success, 2 on usage errors, 1 on domain errors
//! with a single-line stderr diagnostic; fixed output shapes.

use std::process::Command;

fn bp(args: &[&str]) -> (String, String, i32) {
    let out = Command::new(env!("CARGO_BIN_EXE_bp"))
        .args(args)
        .output()
        .expect("spawn bp");
    (
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
        out.status.code().unwrap_or(-1),
    )
}

#[test]
fn hyperdistance_example() {
    let (stdout, _, code) = bp(&["dist", "--u", "1,0;0,1", "--v", "6,0;0,1"]);
    assert_eq!(code, 0);
    assert_eq!(stdout, "6\n");
}

#[test]
fn neighbor_listing() {
    let (stdout, _, code) = bp(&["neighbors", "--vertex", "1,0;0,1", "--p", "2"]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines, ["1,0;0,2", "1,1;0,2", "2,0;0,1"]);
}

#[test]
fn canonical_form() {
    let (stdout, _, code) = bp(&["canon", "--matrix", "4,6;0,10"]);
    assert_eq!(code, 0);
    assert_eq!(stdout, "2,3;0,5\n");
}

#[test]
fn faber_polynomial_listing() {
    let (stdout, _, code) = bp(&["faber", "--k", "2", "--terms", "12"]);
    assert_eq!(code, 0);
    assert_eq!(stdout, "0,-393768\n1,0\n2,1\n");
}

#[test]
fn discriminant_coefficients() {
    let (stdout, _, code) = bp(&["qseries", "--kind", "delta", "--terms", "12"]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(&lines[..4], ["1,1", "2,-24", "3,252", "4,-1472"]);
}

#[test]
fn replicate_of_the_builtin_table() {
    let table = format!(
        "{}/../../data/mckay_thompson.csv",
        env!("CARGO_MANIFEST_DIR")
    );
    let (stdout, _, code) = bp(&[
        "replicate", "--series", &table, "--class", "1A", "--k", "3", "--terms", "20",
    ]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines[0], "-1,1");
    assert!(lines.contains(&"1,196884"));
    assert!(lines.contains(&"2,21493760"));
    assert!(lines.contains(&"20,189449976248893390028800"));
}

#[test]
fn thread_graph_schema() {
    let (stdout, _, code) = bp(&["thread", "--n", "6", "--json"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(v["schema"], "bp/1");
    assert_eq!(v["N"], 6);
    assert_eq!(v["kind"], "thread");
    let vertices: Vec<&str> = v["vertices"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x["id"].as_str().unwrap())
        .collect();
    assert_eq!(vertices, ["1,0;0,1", "2,0;0,1", "3,0;0,1", "6,0;0,1"]);
    assert!(!v["edges"].as_array().unwrap().is_empty());
}

#[test]
fn evaluation_at_i() {
    let (stdout, _, code) = bp(&["eval", "--re", "0", "--im", "1", "--terms", "40"]);
    assert_eq!(code, 0);
    assert!(stdout.starts_with("984,0,"));
}

#[test]
fn partition_row() {
    let (stdout, _, code) = bp(&["partition", "--beta", "3", "--x", "1000", "--mode", "vertex"]);
    assert_eq!(code, 0);
    assert_eq!(stdout, "3,1000,vertex,1.9420775775352008\n");
}

#[test]
fn replication_report() {
    let (stdout, _, code) = bp(&["verify-replicable", "--kmax", "3", "--terms", "8"]);
    assert_eq!(code, 0);
    assert_eq!(stdout, "k=1 replicable\nk=2 replicable\nk=3 replicable\n");
}

#[test]
fn usage_errors_exit_2() {
    let (_, stderr, code) = bp(&["dist", "--bogus"]);
    assert_eq!(code, 2);
    assert!(!stderr.is_empty());
    let (_, stderr, code) = bp(&["replicate", "--class", "1A", "--k", "2"]);
    assert_eq!(code, 2);
    assert_eq!(stderr, "error: --series and --class must be given together\n");
}

#[test]
fn domain_errors_exit_1_with_one_line() {
    let cases: Vec<(Vec<&str>, &str)> = vec![
        (vec!["sphere", "--radius", "0"], "error: radius must be at least 1"),
        (vec!["neighbors", "--p", "4"], "error: 4 is not prime"),
        (vec!["eval", "--im", "-1"], "error: evaluation requires Im(z) > 0"),
        (vec!["dist", "--u", "1,0;0", "--v", "1,0;0,1"], ""),
        (vec!["snake", "--n", "20000"], ""),
    ];
    for (args, want) in cases {
        let (_, stderr, code) = bp(&args);
        assert_eq!(code, 1, "bp {args:?}");
        assert_eq!(stderr.lines().count(), 1, "bp {args:?}: stderr {stderr:?}");
        assert!(stderr.starts_with("error: "), "bp {args:?}: stderr {stderr:?}");
        if !want.is_empty() {
            assert_eq!(stderr.trim_end(), want, "bp {args:?}");
        }
    }
}
