// Drive the batch CLI from code: synthesize a bundle, sweep it, and check
// the digests recorded in each run manifest.
//
// ```bash
// cargo run -p trendvis --example synthetic_bundle
// ```

use trendvis::bundle::{read_manifest, verify_manifest};

fn cli(args: &[&str]) -> anyhow::Result<String> {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = trendvis::cli::run(std::iter::once("trendvis").chain(args.iter().copied()), &mut out, &mut err);
    anyhow::ensure!(code == 0, "exit {code}: {}", String::from_utf8_lossy(&err));
    Ok(String::from_utf8(out)?)
}

pub fn run_example() -> anyhow::Result<()> {
    let dir = tempfile::tempdir()?;
    let config = dir.path().join("synth.conf");
    std::fs::write(&config, "n_topics = 500\nseed = 1\nsigma = 0.2\n")?;
    let bundle = dir.path().join("bundle");
    let sweep = dir.path().join("sweep");
    let (config, bundle, sweep) = (
        config.to_str().unwrap(),
        bundle.to_str().unwrap(),
        sweep.to_str().unwrap(),
    );

    print!("{}", cli(&["synth", "--config", config, "--out", bundle])?);
    print!("{}", cli(&["sweep", "--bundle", bundle, "--out", sweep])?);

    for dir in [bundle, sweep] {
        let manifest = read_manifest(dir.as_ref())?;
        println!("{} manifest: {} inputs, {} outputs", manifest.command, manifest.inputs.len(), manifest.outputs.len());
        for f in &manifest.outputs {
            println!("  {:<18} {}", f.path, &f.sha256[..16]);
        }
        anyhow::ensure!(verify_manifest(dir.as_ref(), &manifest).is_empty());
    }
    Ok(())
}

fn main() -> anyhow::Result<()> {
    run_example()
}
