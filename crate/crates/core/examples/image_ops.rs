//! Loads an image (or draws one), then writes its luma, Sobel boundary map
//! and a bicubic half-size copy.
//!
//! cargo run --example image_ops -- [image.png] [out_dir]

use grids::image::{boundary_map, load_image, resize_bicubic, to_grayscale, RasterImage};

fn main() -> grids::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let img = match args.first() {
        Some(p) => load_image(p)?,
        None => RasterImage::from_fn(120, 160, 3, |y, x, c| {
            let disc = ((y as f32 - 60.0).powi(2) + (x as f32 - 80.0).powi(2)) < 40.0 * 40.0;
            if disc {
                [0.9, 0.3, 0.2][c]
            } else {
                0.2 + 0.3 * x as f32 / 160.0
            }
        })?,
    };
    let out = std::path::PathBuf::from(args.get(1).map(String::as_str).unwrap_or("image_ops_out"));
    std::fs::create_dir_all(&out).map_err(|e| grids::Error::InvalidArgument(e.to_string()))?;

    to_grayscale(&img).save(out.join("luma.png"))?;
    let bmap = boundary_map(&img);
    RasterImage::new(bmap.height(), bmap.width(), 1, bmap.data().to_vec())?.save(out.join("boundary.png"))?;
    resize_bicubic(&img, img.height() / 2, img.width() / 2)?.save(out.join("half.png"))?;
    println!("{}x{}x{} -> {}", img.height(), img.width(), img.channels(), out.display());
    Ok(())
}
