//! Drives a comparison from a TOML configuration, as the `compare`
//! subcommand does, and prints the violation summary.

use dmpdiffuse::config::parse_config;
use dmpdiffuse::driver;

const CONFIG: &str = r#"
[problem]
name = "slab2d"
end_time = 0.002

[mesh]
xseed = 21
yseed = 21
element = "tri3"

[[schemes]]
type = "proposed"
dt = 1e-4
label = "proposed"

[[schemes]]
type = "single_field"
dt = 1e-4
label = "single_field"
"#;

fn main() -> dmpdiffuse::Result<()> {
    let spec = parse_config(CONFIG, None)?;
    let out = std::env::temp_dir().join("dmpdiffuse-compare");
    let (report, _) = driver::compare(&spec, &out)?;
    print!("{}", report.text);
    println!("wrote {} files to {}", report.files.len(), out.display());
    Ok(())
}
