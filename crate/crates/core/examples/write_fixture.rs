//! Writes the synthetic plan fixture: `plans.csv` and `totals.csv` in the
//! given directory (default `fixture`).

use std::fs::{self, File};
use std::path::PathBuf;

use planshare_core::synthetic::plan_fixture;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "fixture".into()));
    let seed = match args.next() {
        Some(s) => s.parse()?,
        None => 7,
    };
    fs::create_dir_all(&dir)?;
    let fixture = plan_fixture(seed);
    fixture.write_plans(File::create(dir.join("plans.csv"))?)?;
    fixture.write_totals(File::create(dir.join("totals.csv"))?)?;
    println!(
        "{} plan-years ({} ineligible) written to {}",
        fixture.records.len(),
        fixture.excluded,
        dir.display()
    );
    Ok(())
}
