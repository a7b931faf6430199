//! Regenerates fixtures/synthetic/{data,polarity}.jsonl.
//!
//! cargo run -p pabsa-cli --example make_fixtures -- fixtures/synthetic

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use pabsa::features::write_cache;
use pabsa::synth::{generate, SynthConfig};

fn main() -> anyhow::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "fixtures/synthetic".into()));
    std::fs::create_dir_all(&dir)?;
    let (data, cache) = generate(&SynthConfig::default())?;
    data.save(dir.join("data.jsonl"))?;
    write_cache(&cache, BufWriter::new(File::create(dir.join("polarity.jsonl"))?))?;
    eprintln!("wrote {} instances to {}", data.len(), dir.display());
    Ok(())
}
