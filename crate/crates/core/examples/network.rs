//! Builds the GRIDS16 and GRIDS32 networks, prints their size and runs one
//! forward pass on a random grid.

use grids::nn::{LayerSpec, NetworkModel, Tensor4};

fn main() -> grids::Result<()> {
    for filters in [16, 32] {
        let model = NetworkModel::initialized(filters, 13, 0)?;
        let convs = model
            .layer_specs()
            .iter()
            .filter(|l| matches!(l, LayerSpec::Conv { .. }))
            .count();
        println!(
            "GRIDS{filters}: {} parameters ({} trainable), {convs} conv layers, receptive field {}",
            model.count_parameters(),
            model.trainable_count(),
            model.receptive_field()
        );
    }
    let model = NetworkModel::initialized(16, 13, 0)?;
    let x = Tensor4::from_vec(1, 27, 35, 3, (0..27 * 35 * 3).map(|i| (i % 11) as f32 / 10.0).collect())?;
    let y = model.forward_eval(&x)?;
    let (lo, hi) = y.data.iter().fold((1f32, 0f32), |(a, b), &v| (a.min(v), b.max(v)));
    println!("output {:?}, values in [{lo:.4}, {hi:.4}]", y.shape());
    Ok(())
}
