#![allow(dead_code)]

use std::fs;
use std::path::PathBuf;
use std::process::Command;

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn qlode(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_qlode"))
        .args(args)
        .env_remove("QLODE_LOG")
        .output()
        .expect("binary runs");
    Run {
        code: out.status.code().expect("exit code"),
        stdout: String::from_utf8(out.stdout).expect("utf-8 stdout"),
        stderr: String::from_utf8(out.stderr).expect("utf-8 stderr"),
    }
}

fn golden_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures/golden")
        .join(name)
}

pub fn load_golden(name: &str) -> String {
    let path = golden_path(name);
    fs::read_to_string(&path).unwrap_or_else(|e| panic!("cannot read {}: {e}", path.display()))
}

/// Byte comparison against a stored fixture; `UPDATE_GOLDEN=1` rewrites it.
pub fn assert_golden(name: &str, actual: &str) {
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::write(golden_path(name), actual).expect("write golden file");
        return;
    }
    let expected = load_golden(name);
    if actual != expected {
        for (i, (a, e)) in actual.lines().zip(expected.lines()).enumerate() {
            if a != e {
                eprintln!(
                    "first difference at line {}:\n  expected {e}\n  actual   {a}",
                    i + 1
                );
                break;
            }
        }
        panic!("{name} does not match its golden file");
    }
}

/// Command lines whose output is pinned by a golden file.
pub const GOLDEN_RUNS: &[(&str, &[&str])] = &[
    ("count_q2_mu4.5.txt", &["count", "--q", "2", "--mu", "4.5"]),
    ("count_q3_mu3.txt", &["count", "--q", "3", "--mu", "3"]),
    (
        "yamabe_n4_r0.5.txt",
        &["yamabe", "--n", "4", "--RN", "4", "--r", "0.5"],
    ),
    (
        "yamabe_n4_r2.5.txt",
        &["yamabe", "--n", "4", "--RN", "4", "--r", "2.5"],
    ),
    (
        "yamabe_n4_radii.csv",
        &[
            "yamabe",
            "--n",
            "4",
            "--RN",
            "4",
            "--r",
            "0.5,1.5,2.5,3.5,4.5,5.5,6.5,7.5,8.5,9.5",
        ],
    ),
];
