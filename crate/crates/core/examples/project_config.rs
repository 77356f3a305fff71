// The project file: defaults, a TOML round trip and validation errors.

use gazefuse::cli::{fixture_config, FixtureSpec, ProjectConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = fixture_config(&FixtureSpec::default());
    let text = cfg.to_toml()?;
    println!("{}", text.lines().take(12).collect::<Vec<_>>().join("\n"));
    assert_eq!(ProjectConfig::from_toml(&text, "gazefuse.toml")?, cfg);

    let mut bad = cfg.clone();
    bad.sessions.held_out.push("s42".into());
    println!("invalid: {}", bad.validate().unwrap_err());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
