//! Writes a small synthetic saliency dataset and prints its manifest.
//!
//! cargo run --example synth_dataset -- <out_dir> [count] [seed] [--thin]

use grids::train::{generate_synthetic, SynthOptions};

fn main() -> grids::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let out = args.first().map(String::as_str).unwrap_or("synth_out");
    let count = args.get(1).and_then(|v| v.parse().ok()).unwrap_or(8);
    let seed = args.get(2).and_then(|v| v.parse().ok()).unwrap_or(1);
    let opts = SynthOptions {
        thin_parts: args.iter().any(|a| a == "--thin"),
    };
    let manifest = generate_synthetic(count, seed, out, &opts)?;
    for e in &manifest.entries {
        println!("{}\t{}", e.image.display(), e.mask.display());
    }
    Ok(())
}
