use serde::{Deserialize, Serialize};

use crate::coremath::Tensor;
use crate::error::{Error, Result};

/// `k x d` embedding table.
#[derive(Clone, Debug, PartialEq)]
pub struct Codebook(pub Tensor);

impl Codebook {
    pub fn new(embeddings: Tensor) -> Result<Self> {
        match *embeddings.shape() {
            [k, d] if k > 0 && d > 0 => Ok(Codebook(embeddings)),
            [0, _] => Err(Error::Empty("codebook has no embeddings".into())),
            _ => Err(Error::shape(format!("codebook must be [k, d], got {:?}", embeddings.shape()))),
        }
    }

    pub fn size(&self) -> usize {
        self.0.shape()[0]
    }

    pub fn dim(&self) -> usize {
        self.0.shape()[1]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.0.data()[i * d..(i + 1) * d]
    }

    pub fn tensor(&self) -> &Tensor {
        &self.0
    }
}

/// Code sequence of one utterance.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LatentCodes(pub Vec<u32>);

impl LatentCodes {
    pub fn new(codes: Vec<u32>, positions: usize, codebook_size: usize) -> Result<Self> {
        if codes.len() != positions {
            return Err(Error::shape(format!("expected {positions} codes, got {}", codes.len())));
        }
        if let Some(c) = codes.iter().find(|&&c| c as usize >= codebook_size) {
            return Err(Error::shape(format!("code {c} outside codebook of {codebook_size}")));
        }
        Ok(LatentCodes(codes))
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }
}

/// Index of the nearest embedding by squared Euclidean distance; ties go to
/// the lowest index.
pub fn nearest(z: &[f64], codebook: &Codebook) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for i in 0..codebook.size() {
        let d: f64 = z.iter().zip(codebook.row(i)).map(|(a, b)| (a - b) * (a - b)).sum();
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// Snaps each row of `z_e` (`[P, d]`) to its nearest embedding.
pub fn quantize(z_e: &Tensor, codebook: &Codebook) -> Result<(Tensor, Vec<usize>)> {
    let d = codebook.dim();
    match *z_e.shape() {
        [_, zd] if zd == d => {}
        _ => {
            return Err(Error::shape(format!(
                "quantize: z_e must be [P, {d}], got {:?}",
                z_e.shape()
            )))
        }
    }
    let mut codes = Vec::with_capacity(z_e.shape()[0]);
    let mut out = Vec::with_capacity(z_e.len());
    for row in z_e.data().chunks(d) {
        let (i, _) = nearest(row, codebook);
        codes.push(i);
        out.extend_from_slice(codebook.row(i));
    }
    Ok((Tensor::new(z_e.shape(), out)?, codes))
}
