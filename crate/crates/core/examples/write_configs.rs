//! Writes the acceptance configurations as TOML files into a directory.
//!
//! `cargo run -p linpot --example write_configs -- configs`

use std::path::PathBuf;

use linpot::acceptance::seed_for;
use linpot::acceptance::{self, DEFAULT_SEED};
use linpot::report::to_toml;
use linpot::verify::LemmaSuiteConfig;

fn main() -> linpot::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "configs".into()));
    std::fs::create_dir_all(&dir)?;
    let s8 = seed_for(DEFAULT_SEED, 8);
    let files = [
        (
            "bandit_gaussian_d5.toml",
            to_toml(&acceptance::gaussian_regret_config(s8))?,
        ),
        (
            "bandit_bernoulli_d3.toml",
            to_toml(&acceptance::bernoulli_regret_config(s8))?,
        ),
        (
            "bandit_student_t_d3.toml",
            to_toml(&acceptance::student_t_regret_config(s8))?,
        ),
        (
            "potential_mc_d3.toml",
            to_toml(&acceptance::thm23_mc_configs(seed_for(DEFAULT_SEED, 6))[0])?,
        ),
        ("lemmas.toml", to_toml(&LemmaSuiteConfig::default())?),
    ];
    for (name, body) in files {
        let path = dir.join(name);
        std::fs::write(&path, body)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
