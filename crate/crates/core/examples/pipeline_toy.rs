//! Runs the full rolling evaluation on the bundled toy data set, audits it
//! for look-ahead and writes all outputs.
//!
//! `cargo run --example pipeline_toy -- [out_dir]`

use dynbps::data::ingest;
use dynbps::pipeline::{audit_look_ahead, run_on_table, write_outputs, PipelineConfig};

fn main() -> dynbps::Result<()> {
    let here = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data");
    let out = std::env::args().nth(1).unwrap_or_else(|| "toy_out".into());
    let cfg = PipelineConfig::from_file(here.join("toy.toml"))?;
    let table = ingest(cfg.data.path.as_ref().expect("toy config names its data"), &cfg.data.mapping())?;
    let result = run_on_table(&cfg, &table)?;
    write_outputs(&result, std::path::Path::new(&out))?;

    for h in &result.summary.horizons {
        println!("horizon {} (relative to {})", h.horizon, h.baseline);
        for r in &h.rows {
            println!(
                "  {:<7} MSFE {:.4} {:>+8.2}%  LPDR {}",
                r.method,
                r.msfe,
                r.msfe_pct,
                r.lpdr.map_or("-".into(), |v| format!("{v:.2}"))
            );
        }
    }
    let violations = audit_look_ahead(&result, &table);
    println!("look-ahead violations: {}", violations.len());
    println!("outputs in {out}/");
    Ok(())
}
