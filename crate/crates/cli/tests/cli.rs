use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SUBCOMMANDS: [&str; 12] = [
    "atlas",
    "threshold",
    "orbit",
    "grid",
    "dimension",
    "mcmullen",
    "verify-web",
    "verify-forest",
    "probe",
    "experiment",
    "sweep",
    "defaults",
];

fn escdim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_escdim"))
        .args(args)
        .env_remove("ESCDIM_OUT")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Option blocks of a help page: each starts at a line beginning with `-`.
fn option_blocks(help: &str) -> Vec<String> {
    let mut blocks: Vec<String> = Vec::new();
    let mut in_options = false;
    for line in help.lines() {
        if line.starts_with("Options:") {
            in_options = true;
            continue;
        }
        if !in_options || line.trim().is_empty() {
            continue;
        }
        let t = line.trim_start();
        // option lines start `-x` or `--x`; value lists start `- `
        if t.starts_with('-') && !t.starts_with("- ") {
            blocks.push(line.trim().to_string());
        } else if let Some(b) = blocks.last_mut() {
            b.push(' ');
            b.push_str(line.trim());
        }
    }
    blocks
}

#[test]
fn every_flag_is_documented_with_a_default() {
    for sub in SUBCOMMANDS {
        let o = escdim(&[sub, "--help"]);
        assert!(o.status.success(), "{sub}");
        let help = stdout(&o);
        let blocks = option_blocks(&help);
        assert!(!blocks.is_empty() || sub == "defaults", "{sub} lists no options");
        for b in blocks {
            if b.starts_with("-h, --help") || b.starts_with("-V, --version") {
                continue;
            }
            let flag = b.split_whitespace().next().unwrap();
            let described = b
                .split_whitespace()
                .take_while(|w| !w.starts_with('['))
                .any(|w| !w.starts_with('-') && !w.starts_with('<'));
            assert!(described, "{sub} {flag} has no description: {b}");
            assert!(b.contains("[default"), "{sub} {flag} documents no default: {b}");
        }
    }
}

fn rows(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().count() - 1
}

#[test]
fn atlas_rows_match_brute_force_count() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("nested").join("atlas");
    let o = escdim(&["atlas", "--rho", "1", "--r-max", "300", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    // poles k^2 e^(i pi l / k), 0 <= l < 2k, with k^2 <= 300
    let brute = (1..100u64).filter(|k| (*k as f64).powi(2) <= 300.0).map(|k| 2 * k).sum::<u64>();
    assert_eq!(rows(&out.join("atlas.csv")) as u64, brute);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    assert_eq!(escdim(&["atlas", "--r-max", "0.5", "--out", d]).status.code(), Some(2));
    assert_eq!(escdim(&["threshold", "--bogus"]).status.code(), Some(2));
    assert_eq!(escdim(&["nonexistent"]).status.code(), Some(2));

    let file = dir.path().join("plain");
    fs::write(&file, "x").unwrap();
    let o = escdim(&["grid", "--nx", "4", "--ny", "4", "--out", file.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));

    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "schema_version = 7\n").unwrap();
    assert_eq!(escdim(&["experiment", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn probe_names_the_failing_constraint() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.csv");
    fs::write(
        &spec,
        "re,im,radius,inner_radius,separation,eps,m\n5,0,0.5,0.25,inf,0.6,9\n",
    )
    .unwrap();
    let o = escdim(&["probe", "--spec", spec.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("eps_sum"), "{}", stderr(&o));
}

#[test]
fn summaries() {
    let o = escdim(&["threshold", "--rho", "2", "-m", "1", "--rings", "16384"]);
    let s = stdout(&o);
    assert!(s.starts_with("t* ≈ 1.0") && s.contains("(formula 1.000000)"), "{s}");
    let o = escdim(&["verify-web", "--rho", "2", "--max-ring", "12", "--per-component", "20"]);
    let s = stdout(&o);
    assert!(s.contains("bound 4C+4") && s.trim_end().ends_with("PASS"), "{s}");
    let o = escdim(&["defaults"]);
    assert!(stdout(&o).contains("schema_version = 1"));
}

fn small_config(dir: &Path) -> std::path::PathBuf {
    let cfg = dir.join("small.toml");
    fs::write(
        &cfg,
        "schema_version = 1\nrings = 4096\n[grid]\nnx = 24\nny = 24\n[forest]\nannuli = 2\nprobe_samples = 1000\ndichotomy_samples = 300\n",
    )
    .unwrap();
    cfg
}

#[test]
fn experiment_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("run");
    let run = || {
        let o = escdim(&["experiment", "--config", cfg.to_str().unwrap(), "--seed", "9", "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let manifest = fs::read_to_string(out.join("manifest.csv")).unwrap();
        let files: Vec<(String, Vec<u8>)> = manifest
            .lines()
            .skip(1)
            .map(|l| {
                let f = l.split(',').next().unwrap().to_string();
                let bytes = fs::read(out.join(&f)).unwrap();
                (f, bytes)
            })
            .collect();
        (manifest, files)
    };
    let first = run();
    let second = run();
    assert!(first.1.iter().any(|(f, _)| f == "grid.png"));
    assert_eq!(first, second);
    assert!(fs::read_to_string(out.join("config.toml")).unwrap().contains("seed = 9"));
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_escdim"))
        .args(["mcmullen", "--delta", "0.5", "--ratio", "0.25"])
        .env("ESCDIM_OUT", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(stdout(&o).contains("bound 1.5"), "{}", stdout(&o));
    assert!(dir.path().join("cover.csv").exists());
}
