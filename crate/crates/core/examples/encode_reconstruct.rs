//! Encodes an image into a grid tensor of mean cell colors and paints it
//! back to full resolution.
//!
//! cargo run --example encode_reconstruct -- <image.png> [n] [out.png]

use grids::codec::{encode_image, minmax_normalize, reconstruct};
use grids::gridize::gridize;
use grids::image::load_image;

fn main() -> grids::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let Some(path) = args.first() else {
        eprintln!("usage: encode_reconstruct <image.png> [n] [out.png]");
        std::process::exit(2);
    };
    let n = args.get(1).and_then(|v| v.parse().ok()).unwrap_or(950);
    let out = args.get(2).map(String::as_str).unwrap_or("reconstructed.png");

    let img = load_image(path)?;
    let grid = gridize(&img, n)?;
    let x = encode_image(&img, &grid)?;
    reconstruct(&x, &grid)?.save(out)?;
    let normalized = minmax_normalize(&x);
    println!(
        "{} x {} x {} tensor, {} bytes as a blob; preview at {out}",
        x.rows(),
        x.cols(),
        x.channels(),
        normalized.to_bytes().len()
    );
    Ok(())
}
