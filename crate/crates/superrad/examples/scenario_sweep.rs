//! Drive a pulse-area sweep from a TOML scenario and print the summary
//! table the CLI would write.
//!
//! `cargo run --release --example scenario_sweep -- [config.toml]`

use superrad::scenario::{self, ScenarioConfig};

const DEFAULT: &str = include_str!("configs/six_level_sweep.toml");

fn main() -> superrad::error::Result<()> {
    let cfg = match std::env::args().nth(1) {
        Some(path) => ScenarioConfig::load(path)?,
        None => ScenarioConfig::from_toml(DEFAULT)?,
    };
    cfg.validate()?;
    let dir = std::env::temp_dir().join("superrad_sweep_example");
    let manifest = scenario::sweep(&cfg, Some(&dir))?;
    for f in &manifest.files {
        println!("== {f}");
        if f.ends_with(".csv") {
            print!("{}", std::fs::read_to_string(f).unwrap_or_default());
        }
    }
    Ok(())
}
