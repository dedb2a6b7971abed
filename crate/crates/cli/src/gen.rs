use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use log::info;
use stationing::scenario::{write_corpus, GeneratorConfig};

use crate::io::{ensure_dir, read_text, require_file};
use crate::manifest::Recorder;
use crate::Globals;

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Generator config (TOML). `--seed` overrides its `seed` key.
    #[arg(long)]
    pub config: PathBuf,
}

pub fn run(globals: &Globals, args: GenArgs) -> Result<()> {
    require_file(&args.config)?;
    let text = read_text(&args.config)?;
    let mut cfg = GeneratorConfig::from_toml(&text)
        .with_context(|| format!("parsing {}", args.config.display()))?;
    if let Some(seed) = globals.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;

    ensure_dir(&globals.out)?;
    let mut rec = Recorder::new();
    rec.input(&args.config);
    let files = write_corpus(&cfg, &globals.out)?;
    for f in files.files {
        rec.output(f);
    }
    info!("wrote corpus to {}", globals.out.display());
    rec.finish(globals, "gen", cfg.seed, &cfg)?;
    Ok(())
}
