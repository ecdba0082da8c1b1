//! Finite scalar quantization and residual vector quantization.

mod fsq;
mod kmeans;
mod rvq;

pub use fsq::{
    fsq_dequantize, fsq_digits, fsq_grid, fsq_index, fsq_quantize, FsqGrid, FsqQuantized, FsqSpec,
};
pub use kmeans::{kmeans, KMeansOptions, KMeansResult};
pub use rvq::{rvq_decode, rvq_encode, rvq_train, RvqCodebooks, RvqTrainOptions};

/// Index of the nearest row of `rows` (each `dim` wide) to `v` in squared
/// Euclidean distance; ties go to the lowest index.
pub(crate) fn nearest_row(v: &[f64], rows: &[f64], dim: usize) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, row) in rows.chunks_exact(dim).enumerate() {
        let d: f64 = row.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}
