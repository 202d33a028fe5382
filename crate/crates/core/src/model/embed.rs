//! Text embedding files: one token per line followed by its vector
//! components. A leading `<count> <dim>` line (word2vec text format) is
//! skipped.

use std::path::Path;

use super::{ModelError, ModelParams};
use crate::vocab::TokenVocab;

pub fn read_embedding_file(path: impl AsRef<Path>) -> Result<Vec<(String, Vec<f64>)>, ModelError> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let mut fields = line.split_whitespace();
        let Some(token) = fields.next() else { continue };
        let values: Vec<&str> = fields.collect();
        if lineno == 0
            && values.len() == 1
            && token.parse::<usize>().is_ok()
            && values[0].parse::<usize>().is_ok()
        {
            continue;
        }
        let vector = values
            .iter()
            .map(|v| v.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| ModelError::Shape(format!("embedding line {}: {e}", lineno + 1)))?;
        out.push((token.to_string(), vector));
    }
    Ok(out)
}

/// Overwrites embedding rows of tokens present in both the file and the
/// vocabulary. Returns how many rows were replaced.
pub fn load_embedding_file(
    params: &mut ModelParams,
    vocab: &TokenVocab,
    path: impl AsRef<Path>,
) -> Result<usize, ModelError> {
    let rows = read_embedding_file(path)?
        .into_iter()
        .filter_map(|(tok, v)| {
            vocab
                .tokens()
                .iter()
                .position(|t| *t == tok)
                .map(|id| (id, v))
        });
    params.load_embeddings(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn skips_word2vec_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.txt");
        std::fs::write(&path, "2 3\nperson 0.1 0.2 0.3\ncoffee 1 2 3\n").unwrap();
        let rows = read_embedding_file(&path).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1], ("coffee".to_string(), vec![1.0, 2.0, 3.0]));
        std::fs::write(&path, "person 0.1 x\n").unwrap();
        assert!(read_embedding_file(&path).is_err());
    }
}
