//! Golden-file cases shared by the CLI tests and the acceptance run.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub struct Case {
    pub name: &'static str,
    pub args: &'static [&'static str],
    pub exit: i32,
    /// Compare stdout with `golden/<name>.out`.
    pub golden: bool,
    /// Must appear in stdout or stderr.
    pub contains: Option<&'static str>,
}

const fn case(name: &'static str, args: &'static [&'static str], exit: i32) -> Case {
    Case {
        name,
        args,
        exit,
        golden: true,
        contains: None,
    }
}

/// Arguments may name `@feeders/<file>` or `@golden/<file>`.
pub const CASES: &[Case] = &[
    case(
        "validate-two-bus",
        &["validate", "@feeders/two-bus.json"],
        0,
    ),
    case(
        "validate-unbalanced",
        &["validate", "@feeders/unbalanced-delta-10.json"],
        0,
    ),
    Case {
        contains: Some("cycle"),
        ..case("validate-cyclic", &["validate", "@golden/cyclic.json"], 2)
    },
    Case {
        golden: false,
        ..case(
            "validate-malformed",
            &["validate", "@golden/malformed.json"],
            1,
        )
    },
    Case {
        golden: false,
        contains: Some("99"),
        ..case(
            "validate-unknown-node",
            &["validate", "@golden/unknown-node.json"],
            1,
        )
    },
    Case {
        golden: false,
        contains: Some("cycle"),
        ..case("solve-cyclic", &["solve", "@golden/cyclic.json"], 2)
    },
    case(
        "solve-zero-load-simple",
        &[
            "solve",
            "@feeders/zero-load.json",
            "--method",
            "linear-simple",
            "--format",
            "csv",
        ],
        0,
    ),
    case(
        "solve-two-bus-bfs",
        &[
            "solve",
            "@feeders/two-bus.json",
            "--method",
            "bfs",
            "--tolerance",
            "1e-10",
        ],
        0,
    ),
    case(
        "solve-ten-node-v0-1.05",
        &[
            "solve",
            "@feeders/ten-node-1.05.json",
            "--method",
            "linear-full",
            "--v0",
            "1.05",
        ],
        0,
    ),
    case(
        "solve-ten-node-v0-1.0",
        &[
            "solve",
            "@feeders/ten-node-1.05.json",
            "--method",
            "linear-full",
            "--v0",
            "1.0",
        ],
        0,
    ),
    case(
        "solve-unbalanced-csv",
        &[
            "solve",
            "@feeders/unbalanced-delta-10.json",
            "--format",
            "csv",
        ],
        0,
    ),
    Case {
        golden: false,
        ..case("solve-overloaded", &["solve", "@golden/overloaded.json"], 3)
    },
    Case {
        golden: false,
        ..case(
            "solve-overloaded-iterations",
            &[
                "solve",
                "@golden/overloaded.json",
                "--method",
                "bfs",
                "--max-iterations",
                "5",
            ],
            3,
        )
    },
    Case {
        golden: false,
        ..case(
            "compare-overloaded",
            &["compare", "@golden/overloaded.json"],
            3,
        )
    },
    case(
        "compare-zero-load",
        &["compare", "@feeders/zero-load.json", "--format", "csv"],
        0,
    ),
    case(
        "compare-ten-node",
        &[
            "compare",
            "@feeders/ten-node-1.05.json",
            "--linear",
            "linear-simple",
        ],
        0,
    ),
    case(
        "compare-unbalanced",
        &["compare", "@feeders/unbalanced-delta-10.json"],
        0,
    ),
    case(
        "compare-unbalanced-csv",
        &[
            "compare",
            "@feeders/unbalanced-delta-10.json",
            "--format",
            "csv",
        ],
        0,
    ),
    case(
        "metrics-ten-node",
        &["metrics", "@feeders/ten-node-1.05.json"],
        0,
    ),
    case(
        "metrics-unbalanced-csv",
        &[
            "metrics",
            "@feeders/unbalanced-delta-10.json",
            "--format",
            "csv",
        ],
        0,
    ),
    Case {
        golden: false,
        ..case(
            "metrics-rejects-method",
            &["metrics", "@feeders/two-bus.json", "--method", "bfs"],
            1,
        )
    },
    Case {
        golden: false,
        ..case(
            "validate-rejects-v0",
            &["validate", "@feeders/two-bus.json", "--v0", "1.0"],
            1,
        )
    },
    Case {
        golden: false,
        ..case(
            "missing-file",
            &["solve", "@feeders/does-not-exist.json"],
            1,
        )
    },
    Case {
        golden: false,
        ..case(
            "bad-format",
            &["solve", "@feeders/two-bus.json", "--format", "xml"],
            1,
        )
    },
];

pub fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

pub fn resolve(arg: &str) -> String {
    if let Some(rest) = arg.strip_prefix("@feeders/") {
        workspace().join("feeders").join(rest).display().to_string()
    } else if let Some(rest) = arg.strip_prefix("@golden/") {
        golden_dir().join(rest).display().to_string()
    } else {
        arg.to_string()
    }
}

pub fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_radialpf"))
        .args(args.iter().map(|a| resolve(a)))
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

/// Checks one case; `Err` describes the first mismatch.
pub fn check(case: &Case) -> Result<(), String> {
    let first = run(case.args);
    let code = first.status.code().unwrap_or(-1);
    if code != case.exit {
        return Err(format!(
            "exit {code}, expected {} (stderr: {})",
            case.exit,
            String::from_utf8_lossy(&first.stderr).trim()
        ));
    }
    if let Some(needle) = case.contains {
        let all = format!(
            "{}{}",
            String::from_utf8_lossy(&first.stdout),
            String::from_utf8_lossy(&first.stderr)
        );
        if !all.contains(needle) {
            return Err(format!("output lacks {needle:?}"));
        }
    }
    let again = run(case.args);
    if again.stdout != first.stdout || again.stderr != first.stderr || again.status != first.status
    {
        return Err("rerun output differs".into());
    }
    if case.golden {
        let path = golden_dir().join(format!("{}.out", case.name));
        if std::env::var_os("UPDATE_GOLDEN").is_some() {
            std::fs::write(&path, &first.stdout).map_err(|e| e.to_string())?;
        }
        let expected = std::fs::read(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        if expected != first.stdout {
            return Err(format!("stdout differs from {}", path.display()));
        }
    }
    Ok(())
}
