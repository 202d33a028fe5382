use super::CorpusError;

/// Side of the square grayscale grid accepted by [`toy_extract`].
pub const TOY_SIDE: usize = 64;
pub const TOY_BLOCK: usize = 8;
/// Output length of [`toy_extract`].
pub const TOY_DIM: usize = (TOY_SIDE / TOY_BLOCK) * (TOY_SIDE / TOY_BLOCK);

const TICK_TOLERANCE: f64 = 1e-9;

/// Picks, for each tick `k / target_fps`, the earliest frame at or after it.
/// Ticks past the last frame are dropped, and a frame claimed by an earlier
/// tick is not repeated, so the result is strictly increasing.
pub fn sample_frames(timestamps: &[f64], target_fps: f64) -> Result<Vec<usize>, CorpusError> {
    if timestamps.is_empty() {
        return Err(CorpusError::EmptyVideo);
    }
    if !(target_fps.is_finite() && target_fps > 0.0) {
        return Err(CorpusError::BadRate(target_fps));
    }
    if timestamps.iter().any(|t| !t.is_finite()) || timestamps.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CorpusError::NonIncreasingTimestamps);
    }
    let last = *timestamps.last().unwrap();
    let mut picked = Vec::new();
    let mut j = 0;
    let mut k = 0u64;
    loop {
        let tick = k as f64 / target_fps;
        if tick > last + TICK_TOLERANCE {
            break;
        }
        while timestamps[j] < tick - TICK_TOLERANCE {
            j += 1;
        }
        if picked.last() != Some(&j) {
            picked.push(j);
        }
        k += 1;
    }
    Ok(picked)
}

/// Stand-in frame featurizer: 8×8 block means of a 64×64 grid in [0, 1],
/// row-major.
pub fn toy_extract(image: &[Vec<f32>]) -> Result<Vec<f32>, CorpusError> {
    if image.len() != TOY_SIDE {
        return Err(CorpusError::BadShape {
            expected: TOY_SIDE,
            found: image.len(),
        });
    }
    if let Some(row) = image.iter().find(|r| r.len() != TOY_SIDE) {
        return Err(CorpusError::BadShape {
            expected: TOY_SIDE,
            found: row.len(),
        });
    }
    if let Some(&v) = image.iter().flatten().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(CorpusError::PixelOutOfRange(v));
    }
    let blocks = TOY_SIDE / TOY_BLOCK;
    let mut out = vec![0.0f32; TOY_DIM];
    for (by, chunk) in image.chunks(TOY_BLOCK).enumerate() {
        for bx in 0..blocks {
            let sum: f64 = chunk
                .iter()
                .flat_map(|r| &r[bx * TOY_BLOCK..(bx + 1) * TOY_BLOCK])
                .map(|&v| v as f64)
                .sum();
            out[by * blocks + bx] = (sum / (TOY_BLOCK * TOY_BLOCK) as f64) as f32;
        }
    }
    Ok(out)
}
