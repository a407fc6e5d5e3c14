//! Writes a synthetic two-country panel and a matching pipeline config.
//!
//! ```text
//! cargo run -p fxlab --example synthetic_panel -- DIR [SEED]
//! fxlab run --config DIR/config.json
//! ```

use std::path::PathBuf;

use fxlab_core::synthetic::synthetic_panel;

fn main() -> std::io::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "fxlab-demo".into()));
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);
    std::fs::create_dir_all(&dir)?;
    let (usa, ind) = synthetic_panel(seed);
    std::fs::write(dir.join("usa.csv"), usa.to_csv_string())?;
    std::fs::write(dir.join("ind.csv"), ind.to_csv_string())?;
    let config = serde_json::json!({
        "usa_csv": "usa.csv",
        "ind_csv": "ind.csv",
        "target": "forex",
        "output_dir": "out",
        "seed": seed,
    });
    std::fs::write(dir.join("config.json"), serde_json::to_string_pretty(&config)? + "\n")?;
    println!("wrote {}", dir.display());
    Ok(())
}
