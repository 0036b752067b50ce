use std::path::PathBuf;

use clap::Args;
use dynamix_core::io::write_dataset;
use dynamix_core::systems::generate_corpus;
use log::info;

use super::{ensure_parent, resolve_out};
use crate::config::{catalog, read_text, GenerateConfig};
use crate::error::{CliError, CliResult};
use crate::manifest::{sidecar, ManifestBuilder};
use crate::GlobalArgs;

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Generation config (systems, sequence counts, lengths, noise).
    #[arg(long)]
    pub config: PathBuf,
    /// Dataset path; defaults to `corpus.dmx` under the artifact root.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(global: &GlobalArgs, args: &GenerateArgs) -> CliResult<()> {
    let mut config = GenerateConfig::parse(&read_text(&args.config)?)?;
    if let Some(seed) = global.seed {
        config.seed = seed;
    }
    let catalog = catalog(&config.variants)?;
    let unknown: Vec<&str> = config
        .systems
        .iter()
        .filter(|s| catalog.get(s).is_err())
        .map(String::as_str)
        .collect();
    if !unknown.is_empty() {
        return Err(CliError::input(format!(
            "unknown system(s): {}; known systems: {}",
            unknown.join(", "),
            catalog.names().join(", ")
        )));
    }
    let systems = catalog.resolve(&config.systems)?;
    let corpus = generate_corpus(
        &systems,
        config.sequences_per_system,
        config.seq_len,
        config.context_length,
        config.overlap,
        config.noise_level,
        config.seed,
    )?;
    let out = resolve_out(&args.out, &global.root(), "corpus.dmx");
    ensure_parent(&out)?;
    write_dataset(&out, &corpus)?;
    info!("wrote {} sequences to {}", corpus.len(), out.display());

    let mut manifest = ManifestBuilder::new("generate", config.seed);
    manifest.config("", &config);
    manifest.input(&args.config);
    manifest.output(&out);
    manifest.write(&sidecar(&out))?;
    Ok(())
}
