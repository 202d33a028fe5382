//! `VDPF` feature files: magic, version u32, rows u32, cols u32, then
//! rows × cols f32 row-major. Little-endian throughout.

use std::fs;
use std::path::Path;

use super::CorpusError;

pub const FEATURE_MAGIC: &[u8; 4] = b"VDPF";
pub const FEATURE_VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

/// A p × D matrix of frame features for one video.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    video_id: String,
    rows: usize,
    cols: usize,
    data: Vec<f32>,
    fps_source: f64,
}

impl FeatureSequence {
    pub fn new(
        video_id: impl Into<String>,
        rows: usize,
        cols: usize,
        data: Vec<f32>,
        fps_source: f64,
    ) -> Result<Self, CorpusError> {
        if rows == 0 {
            return Err(CorpusError::EmptyVideo);
        }
        if cols == 0 || data.len() != rows * cols {
            return Err(CorpusError::BadShape {
                expected: rows * cols,
                found: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(CorpusError::NonFiniteValue);
        }
        Ok(FeatureSequence {
            video_id: video_id.into(),
            rows,
            cols,
            data,
            fps_source,
        })
    }

    pub fn from_rows(
        video_id: impl Into<String>,
        rows: &[Vec<f32>],
        fps_source: f64,
    ) -> Result<Self, CorpusError> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(CorpusError::BadShape {
                expected: cols,
                found: bad.len(),
            });
        }
        Self::new(video_id, rows.len(), cols, rows.concat(), fps_source)
    }

    pub fn video_id(&self) -> &str {
        &self.video_id
    }

    pub fn set_video_id(&mut self, id: impl Into<String>) {
        self.video_id = id.into();
    }

    pub fn len(&self) -> usize {
        self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn dim(&self) -> usize {
        self.cols
    }

    pub fn fps_source(&self) -> f64 {
        self.fps_source
    }

    pub fn row(&self, t: usize) -> &[f32] {
        &self.data[t * self.cols..(t + 1) * self.cols]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Frames as f64 rows, keeping at most `max_len` from the front.
    pub fn to_f64_rows(&self, max_len: usize) -> Vec<Vec<f64>> {
        (0..self.rows.min(max_len))
            .map(|t| self.row(t).iter().map(|&v| v as f64).collect())
            .collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.data.len());
        out.extend_from_slice(FEATURE_MAGIC);
        out.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.rows as u32).to_le_bytes());
        out.extend_from_slice(&(self.cols as u32).to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// The video id is not stored in the file; callers name the sequence.
    pub fn from_bytes(
        video_id: impl Into<String>,
        bytes: &[u8],
        fps_source: f64,
    ) -> Result<Self, CorpusError> {
        if bytes.len() < 4 {
            return Err(CorpusError::TruncatedFile);
        }
        if &bytes[..4] != FEATURE_MAGIC {
            return Err(CorpusError::BadMagic);
        }
        if bytes.len() < HEADER_LEN {
            return Err(CorpusError::TruncatedFile);
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
        let version = word(4);
        if version != FEATURE_VERSION {
            return Err(CorpusError::UnsupportedVersion(version));
        }
        let (rows, cols) = (word(8) as usize, word(12) as usize);
        let expected = rows
            .checked_mul(cols)
            .and_then(|n| n.checked_mul(4))
            .and_then(|n| n.checked_add(HEADER_LEN))
            .ok_or(CorpusError::TruncatedFile)?;
        if bytes.len() < expected {
            return Err(CorpusError::TruncatedFile);
        }
        if bytes.len() > expected {
            return Err(CorpusError::TrailingBytes);
        }
        let data = bytes[HEADER_LEN..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::new(video_id, rows, cols, data, fps_source)
    }
}

pub fn write_features(seq: &FeatureSequence, path: impl AsRef<Path>) -> Result<(), CorpusError> {
    fs::write(path, seq.to_bytes())?;
    Ok(())
}

/// Reads a feature file, naming the sequence after the file stem.
pub fn read_features(path: impl AsRef<Path>) -> Result<FeatureSequence, CorpusError> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    FeatureSequence::from_bytes(id, &bytes, super::DEFAULT_FPS)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(rows: usize, cols: usize) -> FeatureSequence {
        let data = (0..rows * cols).map(|i| (i as f32).sin() * 1e3).collect();
        FeatureSequence::new("v", rows, cols, data, 5.0).unwrap()
    }

    #[test]
    fn header_layout() {
        let b = seq(2, 3).to_bytes();
        assert_eq!(&b[..4], b"VDPF");
        assert_eq!(b[4..8], 1u32.to_le_bytes());
        assert_eq!(b[8..12], 2u32.to_le_bytes());
        assert_eq!(b[12..16], 3u32.to_le_bytes());
        assert_eq!(b.len(), 16 + 24);
        assert_eq!(b[20..24], seq(2, 3).data()[1].to_le_bytes());
    }

    #[test]
    fn large_round_trip() {
        let s = seq(95, 4096);
        let back = FeatureSequence::from_bytes("v", &s.to_bytes(), 5.0).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn errors() {
        let mut b = seq(10, 2).to_bytes();
        assert!(matches!(
            FeatureSequence::from_bytes("v", &b[..b.len() - 8], 5.0),
            Err(CorpusError::TruncatedFile)
        ));
        assert!(matches!(
            FeatureSequence::from_bytes("v", &b[..10], 5.0),
            Err(CorpusError::TruncatedFile)
        ));
        let mut extra = b.clone();
        extra.push(0);
        assert!(matches!(
            FeatureSequence::from_bytes("v", &extra, 5.0),
            Err(CorpusError::TrailingBytes)
        ));
        b[16..20].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(
            FeatureSequence::from_bytes("v", &b, 5.0),
            Err(CorpusError::NonFiniteValue)
        ));
        b[0] = b'X';
        assert!(matches!(
            FeatureSequence::from_bytes("v", &b, 5.0),
            Err(CorpusError::BadMagic)
        ));
        let empty = FeatureSequence {
            video_id: String::new(),
            rows: 0,
            cols: 2,
            data: vec![],
            fps_source: 5.0,
        }
        .to_bytes();
        assert!(matches!(
            FeatureSequence::from_bytes("v", &empty, 5.0),
            Err(CorpusError::EmptyVideo)
        ));
    }

    #[test]
    fn ragged_rows_rejected() {
        let rows = vec![vec![1.0, 2.0], vec![3.0]];
        assert!(matches!(
            FeatureSequence::from_rows("v", &rows, 5.0),
            Err(CorpusError::BadShape { .. })
        ));
    }
}
