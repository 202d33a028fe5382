//! Samples a 30 fps clip down to 5 fps, featurizes the kept frames with the
//! toy block-mean extractor and round-trips them through a feature file.
//!
//! cargo run --example frame_features

use vdp::corpus::{
    read_features, sample_frames, toy_extract, write_features, FeatureSequence, TOY_SIDE,
};

fn frame(t: f64) -> Vec<Vec<f32>> {
    // a bright bar sweeping left to right
    let col = ((t * 16.0) as usize) % TOY_SIDE;
    (0..TOY_SIDE)
        .map(|_| {
            (0..TOY_SIDE)
                .map(|x| if x.abs_diff(col) < 4 { 1.0 } else { 0.1 })
                .collect()
        })
        .collect()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let timestamps: Vec<f64> = (0..19 * 30).map(|i| i as f64 / 30.0).collect();
    let kept = sample_frames(&timestamps, 5.0)?;
    println!(
        "{} source frames -> {} sampled",
        timestamps.len(),
        kept.len()
    );

    let rows = kept
        .iter()
        .map(|&i| toy_extract(&frame(timestamps[i])))
        .collect::<Result<Vec<_>, _>>()?;
    let features = FeatureSequence::from_rows("sweep", &rows, 30.0)?;
    println!("features {} x {}", features.len(), features.dim());

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("sweep.vdpf");
    write_features(&features, &path)?;
    let back = read_features(&path)?;
    assert_eq!(back.data(), features.data());
    println!(
        "{} bytes on disk, round trip exact",
        std::fs::metadata(&path)?.len()
    );
    Ok(())
}
