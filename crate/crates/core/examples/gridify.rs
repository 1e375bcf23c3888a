//! Gridizes an image into about `n` lattice-shaped superpixels and writes
//! the boundary overlay and grid metadata.
//!
//! cargo run --example gridify -- <image.png> [n] [out_dir]

use grids::gridize::gridize;
use grids::image::load_image;

fn main() -> grids::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let Some(path) = args.first() else {
        eprintln!("usage: gridify <image.png> [n] [out_dir]");
        std::process::exit(2);
    };
    let n = args.get(1).and_then(|v| v.parse().ok()).unwrap_or(950);
    let out = std::path::PathBuf::from(args.get(2).map(String::as_str).unwrap_or("gridify_out"));
    std::fs::create_dir_all(&out).map_err(|e| grids::Error::InvalidArgument(e.to_string()))?;

    let img = load_image(path)?;
    let grid = gridize(&img, n)?;
    grid.overlay(&img)?.save(out.join("overlay.png"))?;
    grid.write_metadata(out.join("grid.txt"))?;

    let d = grid.dims();
    let sizes = grid.cell_sizes();
    println!(
        "{}x{} image -> {}x{} cells (fallback={}), cell sizes {}..{}",
        img.height(),
        img.width(),
        d.rows,
        d.cols,
        grid.is_fallback(),
        sizes.iter().min().unwrap(),
        sizes.iter().max().unwrap()
    );
    Ok(())
}
