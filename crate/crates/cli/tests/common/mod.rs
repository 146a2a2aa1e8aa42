#![allow(dead_code)]

use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use planshare_cli::RunConfig;
use planshare_core::synthetic::plan_fixture;
use tempfile::TempDir;

/// The example configuration shipped at the workspace root.
pub const EXAMPLE_CONFIG: &str = include_str!("../../../../planshare.toml");

/// A scratch directory holding the synthetic fixture under `fixture/` and a
/// `config.toml` derived from the example configuration.
pub struct Workspace {
    pub dir: TempDir,
}

impl Workspace {
    /// `lambda_count` shortens the path so stage tests stay quick.
    pub fn new(seed: u64, lambda_count: usize) -> Self {
        let dir = TempDir::new().unwrap();
        let fixture = plan_fixture(seed);
        fs::create_dir_all(dir.path().join("fixture")).unwrap();
        fixture
            .write_plans(File::create(dir.path().join("fixture/plans.csv")).unwrap())
            .unwrap();
        fixture
            .write_totals(File::create(dir.path().join("fixture/totals.csv")).unwrap())
            .unwrap();
        let config = EXAMPLE_CONFIG.replace(
            "lambda_count = 100",
            &format!("lambda_count = {lambda_count}"),
        );
        assert_ne!(
            config, EXAMPLE_CONFIG,
            "example config lost its lambda_count line"
        );
        fs::write(dir.path().join("config.toml"), config).unwrap();
        Workspace { dir }
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    pub fn config(&self) -> RunConfig {
        RunConfig::load(&self.path("config.toml")).unwrap()
    }

    /// Runs the binary in the workspace with `--config config.toml`.
    pub fn run(&self, args: &[&str]) -> Output {
        planshare(
            self.dir.path(),
            &[&["--config", "config.toml"], args].concat(),
        )
    }
}

pub fn planshare(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_planshare"))
        .current_dir(cwd)
        .env_remove("RUST_LOG")
        .args(args)
        .output()
        .unwrap()
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Every file in `dir`, sorted by name, with its bytes.
pub fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

/// Parsed rows of the results table fixture: group, feature and the seven
/// printed numeric columns in file order.
pub struct PrintedTableRow {
    pub group: String,
    pub feature: String,
    pub coeff: [f64; 3],
    pub diff_2_1: f64,
    pub exp_2_1: f64,
    pub diff_3_1: f64,
    pub exp_3_1: f64,
}

pub fn results_table() -> Vec<PrintedTableRow> {
    let text = include_str!("../data/results_table.tsv");
    text.lines()
        .skip(1)
        .map(|line| {
            let f: Vec<&str> = line.split('\t').collect();
            let v: Vec<f64> = f[2..].iter().map(|s| s.parse().unwrap()).collect();
            PrintedTableRow {
                group: f[0].to_string(),
                feature: f[1].to_string(),
                coeff: [v[0], v[1], v[4]],
                diff_2_1: v[2],
                exp_2_1: v[3],
                diff_3_1: v[5],
                exp_3_1: v[6],
            }
        })
        .collect()
}

/// Feature name as the encoder would produce it: brands are one-hot levels.
pub fn encoded_name(row: &PrintedTableRow) -> String {
    if row.group == "brand" {
        format!("brand={}", row.feature)
    } else {
        row.feature.clone()
    }
}
