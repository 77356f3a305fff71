// Generates the synthetic project and drives it through every stage, as
// `gazefuse <subcommand>` would from a shell.

use gazefuse::cli::{self, FixtureSpec};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let spec = FixtureSpec { duration_s: 30, ..FixtureSpec::default() };
    cli::generate_fixture(dir.path(), &spec)?;
    let config = dir.path().join("gazefuse.toml");
    let config = config.to_str().expect("utf-8 path");

    for stage in [
        "sync",
        "sample",
        "featurize --backbone toy",
        "dataset build",
        "dataset split",
        "dataset balance",
        "train --task mg --seeds 0,1 --epochs 10",
        "eval --task mg",
        "predict --task mg",
        "export-timeline",
    ] {
        println!("$ gazefuse {stage}");
        let args = ["gazefuse", "--config", config].into_iter().chain(stage.split(' '));
        cli::run(args)?;
    }
    let out = dir.path().join("out");
    print!("{}", std::fs::read_to_string(out.join("aggregate_MG.csv"))?);
    print!("{}", std::fs::read_to_string(out.join("aggregate_MG.csv.manifest"))?);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
