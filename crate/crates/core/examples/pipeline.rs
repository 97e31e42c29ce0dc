//! The full pipeline on a bundled spec, writing artifacts to a temp directory.

use groupshift::pipeline::{run_pipeline, PipelineConfig};

fn main() -> groupshift::Result<()> {
    let spec = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("specs/no33_Z.json");
    let out = std::env::temp_dir().join("groupshift-pipeline");
    let mut cfg = PipelineConfig::from_spec_file(&spec, 2, &out)?;
    cfg.trials = 20;
    let outcome = run_pipeline(&cfg)?;
    print!("{}", std::fs::read_to_string(&outcome.report)?);
    println!("artifacts in {}", out.display());
    Ok(())
}
