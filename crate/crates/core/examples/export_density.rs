//! Run the command pipeline from a preset and print a summary of the exported
//! marginal density grid.

use mixboost::cli::{cmd_export_density, cmd_fit, cmd_simulate, RunConfig};

fn main() -> mixboost::Result<()> {
    let cfg = RunConfig::from_toml(include_str!("../presets/quick-demo.toml"))?;
    let out = std::env::temp_dir().join("mixboost-export-demo");
    cmd_simulate(&cfg, &out)?;
    let manifest = cmd_fit(&cfg, &out, false)?;
    println!("fitted {} components", manifest.mixture.components.len());
    let path = cmd_export_density(&cfg, &out)?;

    let mut rdr = csv::Reader::from_path(&path).map_err(|e| mixboost::Error::Format(e.to_string()))?;
    let mut rows: Vec<(String, f64, f64)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| mixboost::Error::Format(e.to_string()))?;
        let key = format!("{} {}", &rec[0], &rec[1]);
        rows.push((key, rec[3].parse().unwrap_or(f64::NAN), rec[4].parse().unwrap_or(f64::NAN)));
    }
    let mut keys: Vec<String> = rows.iter().map(|r| r.0.clone()).collect();
    keys.dedup();
    for key in keys {
        let pts: Vec<(f64, f64)> = rows.iter().filter(|r| r.0 == key).map(|r| (r.1, r.2)).collect();
        let mass: f64 = pts.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1)).sum();
        let modes = pts
            .windows(3)
            .filter(|w| w[1].1 > w[0].1 && w[1].1 > w[2].1)
            .count();
        println!("{key}: {} grid points, mass {mass:.6}, {modes} local maxima", pts.len());
    }
    println!("grid written to {}", path.display());
    Ok(())
}
