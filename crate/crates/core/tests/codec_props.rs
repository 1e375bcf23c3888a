mod common;

#[test]
fn encode_and_reconstruct_are_exact_inverses_on_cell_constant_data() {
    common::codec_round_trips(40).unwrap();
}

#[test]
fn constant_images_give_rectangular_cells() {
    common::constant_images_tile_rectangles().unwrap();
}

proptest::proptest! {
    #[test]
    fn blobs_round_trip(rows in 1usize..6, cols in 1usize..6, ch in 1usize..4, seed in 0u64..1000) {
        use grids::codec::GridTensor;
        let data = (0..rows * cols * ch).map(|i| ((i as u64 * 7919 + seed) % 1000) as f32 / 999.0).collect();
        let x = GridTensor::new(rows, cols, ch, data).unwrap();
        proptest::prop_assert_eq!(GridTensor::from_bytes(&x.to_bytes()).unwrap(), x);
    }
}
