//! Run a configured experiment from TOML text and print the manifest verdicts.

use critwave::config::ExperimentConfig;
use critwave::error::Result;
use critwave::pipeline;

const CONFIG: &str = r#"
name = "quick"
output = "quick"
stages = ["spectrum", "expansion-check"]

[potential]
family = "bump"
v0 = 30.0
a = 4.0

[grid]
n = 2048
r_max = 40.0
"#;

fn main() -> Result<()> {
    let cfg = ExperimentConfig::from_toml(CONFIG)?;
    let root = std::env::temp_dir().join("critwave-example");
    let manifest = pipeline::run(&cfg, &root)?;
    for (stage, verdict) in &manifest.verdicts {
        println!("{stage}: {verdict}");
    }
    println!("success = {}, outputs in {}", manifest.success, pipeline::output_dir(&cfg, &root).display());
    Ok(())
}
