//! Write the built-in benchmark scenarios to `scenarios/*.json`.
//!
//! Run from the workspace root: `cargo run -p ips-harness --example dump_scenarios`

use std::fs;
use std::path::Path;

use ips_harness::presets;

fn main() -> anyhow::Result<()> {
    let dir = Path::new("scenarios");
    fs::create_dir_all(dir)?;
    let scenarios = [
        presets::cox_rate(vec![50, 200, 800], 64),
        presets::lipschitz_product_rate(vec![50, 200, 800], 48),
        presets::changepoint_recovery(vec![100, 200, 400], 48),
        presets::truth_in_net_sanity(vec![200], 100),
    ];
    for scenario in scenarios {
        let path = dir.join(format!("{}.json", scenario.name));
        fs::write(&path, serde_json::to_string_pretty(&scenario)?)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
