use std::collections::HashMap;
use std::fs;
use std::path::Path;

use super::{EmbeddingError, VectorProvider};
use crate::corpus::TokenDoc;

/// Token vectors exported from an external encoder.
///
/// File layout: a `d=<int>` header line, then
/// `doc_id<TAB>position<TAB>token<TAB>f1 f2 ... fd` per token.
#[derive(Debug, Clone)]
pub struct PrecomputedProvider {
    dimension: usize,
    vectors: HashMap<(String, usize), (String, Vec<f64>)>,
}

impl PrecomputedProvider {
    pub fn load(path: &Path) -> Result<Self, EmbeddingError> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Self, EmbeddingError> {
        let mut lines = text.lines().enumerate();
        let header = lines
            .next()
            .map(|(_, l)| l.trim())
            .ok_or_else(|| EmbeddingError::BadHeader("empty file".into()))?;
        let dimension: usize = header
            .strip_prefix("d=")
            .and_then(|d| d.parse().ok())
            .filter(|&d| d > 0)
            .ok_or_else(|| EmbeddingError::BadHeader(header.to_string()))?;

        let mut vectors = HashMap::new();
        for (i, line) in lines {
            let line_no = i + 1;
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 4 {
                return Err(EmbeddingError::Malformed(line_no));
            }
            let position: usize = cols[1].parse().map_err(|_| EmbeddingError::Malformed(line_no))?;
            let vector = cols[3]
                .split_whitespace()
                .map(|f| f.parse::<f64>().ok().filter(|x| x.is_finite()))
                .collect::<Option<Vec<f64>>>()
                .ok_or(EmbeddingError::Malformed(line_no))?;
            if vector.len() != dimension {
                return Err(EmbeddingError::DimensionMismatch(line_no));
            }
            vectors.insert((cols[0].to_string(), position), (cols[2].to_string(), vector));
        }
        Ok(Self { dimension, vectors })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

impl VectorProvider for PrecomputedProvider {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn token_vector(&self, doc: &TokenDoc, position: usize) -> Result<Vec<f64>, EmbeddingError> {
        let (token, v) = self
            .vectors
            .get(&(doc.article_id.clone(), position))
            .ok_or_else(|| EmbeddingError::MissingVector {
                doc_id: doc.article_id.clone(),
                position,
            })?;
        if let Some(expected) = doc.tokens.get(position) {
            if expected != token {
                return Err(EmbeddingError::TokenMismatch {
                    doc_id: doc.article_id.clone(),
                    position,
                    expected: expected.clone(),
                    found: token.clone(),
                });
            }
        }
        Ok(v.clone())
    }
}
