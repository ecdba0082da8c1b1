//! Seeded Lloyd's k-means with k-means++ initialization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::nearest_row;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansOptions {
    pub k: usize,
    pub max_iterations: usize,
    /// Stop once the inertia improves by less than this fraction.
    pub tolerance: f64,
    pub seed: u64,
    /// Fix centroid 0 at the origin for the whole run.
    pub pin_zero: bool,
}

impl KMeansOptions {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            max_iterations: 100,
            tolerance: 1e-6,
            seed,
            pin_zero: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    /// `k x dim`, row-major.
    pub centroids: Vec<f64>,
    pub assignments: Vec<u32>,
    pub inertia: f64,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Assignment step. Parallel over points; each point's result only depends
/// on the point and the centroids, so the output is thread-count independent.
fn assign(data: &[f64], dim: usize, centroids: &[f64]) -> Vec<(u32, f64)> {
    data.par_chunks_exact(dim)
        .map(|x| {
            let (i, d) = nearest_row(x, centroids, dim);
            (i as u32, d)
        })
        .collect()
}

fn init_plus_plus(
    data: &[f64],
    dim: usize,
    opts: &KMeansOptions,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let n = data.len() / dim;
    let mut centroids = Vec::with_capacity(opts.k * dim);
    if opts.pin_zero {
        centroids.extend(std::iter::repeat_n(0.0, dim));
    } else {
        let first = rng.random_range(0..n);
        centroids.extend_from_slice(&data[first * dim..(first + 1) * dim]);
    }
    let mut d2: Vec<f64> = data
        .chunks_exact(dim)
        .map(|x| sq_dist(x, &centroids[..dim]))
        .collect();
    while centroids.len() < opts.k * dim {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            // Guard against landing on a zero-weight tail through rounding.
            if d2[chosen] == 0.0 {
                chosen = d2.iter().rposition(|&w| w > 0.0).unwrap_or(chosen);
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = data[pick * dim..(pick + 1) * dim].to_vec();
        for (slot, x) in d2.iter_mut().zip(data.chunks_exact(dim)) {
            *slot = slot.min(sq_dist(x, &c));
        }
        centroids.extend_from_slice(&c);
    }
    centroids
}

/// Clusters `data` (`n x dim`, row-major) into `opts.k` groups.
///
/// Empty clusters are reseeded to the points farthest from their current
/// centroids. Deterministic for a fixed seed.
pub fn kmeans(data: &[f64], dim: usize, opts: &KMeansOptions) -> Result<KMeansResult> {
    if dim == 0 || !data.len().is_multiple_of(dim) {
        return Err(Error::shape(format!("rows of width {dim}"), data.len()));
    }
    let n = data.len() / dim;
    if opts.k == 0 {
        return Err(Error::config("k must be at least 1"));
    }
    if n < opts.k {
        return Err(Error::input(format!(
            "{n} points cannot form {} clusters",
            opts.k
        )));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::input("k-means data contains non-finite values"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut centroids = init_plus_plus(data, dim, opts, &mut rng);
    let first_free = usize::from(opts.pin_zero);
    let mut prev_inertia = f64::INFINITY;
    let mut iterations = 0;
    let mut assigned = assign(data, dim, &centroids);

    while iterations < opts.max_iterations {
        iterations += 1;
        let inertia: f64 = assigned.iter().map(|&(_, d)| d).sum();
        let stalled =
            prev_inertia.is_finite() && prev_inertia - inertia <= opts.tolerance * prev_inertia;
        if inertia == 0.0 || stalled {
            break;
        }
        prev_inertia = inertia;

        let mut sums = vec![0.0; opts.k * dim];
        let mut counts = vec![0usize; opts.k];
        for (x, &(c, _)) in data.chunks_exact(dim).zip(&assigned) {
            let c = c as usize;
            counts[c] += 1;
            for (s, v) in sums[c * dim..(c + 1) * dim].iter_mut().zip(x) {
                *s += v;
            }
        }
        let mut spread: Vec<f64> = assigned.iter().map(|&(_, d)| d).collect();
        for c in first_free..opts.k {
            let row = &mut centroids[c * dim..(c + 1) * dim];
            if counts[c] > 0 {
                let inv = 1.0 / counts[c] as f64;
                for (r, s) in row.iter_mut().zip(&sums[c * dim..(c + 1) * dim]) {
                    *r = s * inv;
                }
            } else {
                let far = (0..n)
                    .max_by(|&a, &b| spread[a].total_cmp(&spread[b]).then(b.cmp(&a)))
                    .expect("n >= k >= 1");
                row.copy_from_slice(&data[far * dim..(far + 1) * dim]);
                spread[far] = 0.0;
            }
        }
        assigned = assign(data, dim, &centroids);
    }

    Ok(KMeansResult {
        inertia: assigned.iter().map(|&(_, d)| d).sum(),
        assignments: assigned.into_iter().map(|(c, _)| c).collect(),
        centroids,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_points_are_recovered() {
        let pts = vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 5.0, 5.0];
        let res = kmeans(&pts, 2, &KMeansOptions::new(4, 3)).unwrap();
        let mut got: Vec<[u64; 2]> = res
            .centroids
            .chunks(2)
            .map(|c| [c[0].to_bits(), c[1].to_bits()])
            .collect();
        let mut want: Vec<[u64; 2]> = pts
            .chunks(2)
            .map(|c| [c[0].to_bits(), c[1].to_bits()])
            .collect();
        got.sort();
        want.sort();
        assert_eq!(got, want);
        assert_eq!(res.inertia, 0.0);
    }

    #[test]
    fn centroids_are_cluster_means() {
        let pts = vec![0.0, 1.0, 2.0, 10.0, 11.0, 12.0];
        let res = kmeans(&pts, 1, &KMeansOptions::new(2, 1)).unwrap();
        let mut c = res.centroids.clone();
        c.sort_by(f64::total_cmp);
        assert_eq!(c, vec![1.0, 11.0]);
        assert_eq!(res.inertia, 4.0);
        assert!(res.iterations > 1);
    }

    #[test]
    fn too_few_points() {
        assert!(kmeans(&[1.0, 2.0], 1, &KMeansOptions::new(3, 0)).is_err());
    }

    #[test]
    fn pinned_zero_stays_put() {
        let pts: Vec<f64> = (0..200).map(|i| (i % 7) as f64 + 10.0).collect();
        let opts = KMeansOptions {
            pin_zero: true,
            ..KMeansOptions::new(4, 9)
        };
        let res = kmeans(&pts, 1, &opts).unwrap();
        assert_eq!(res.centroids[0], 0.0);
        assert!(res.inertia < 200.0);
    }

    #[test]
    fn duplicate_heavy_data_reseeds_empty_clusters() {
        // Three distinct values, five clusters: some clusters must end up empty
        // or duplicated, and the run must still terminate cleanly.
        let mut pts = vec![1.0; 50];
        pts.extend(vec![2.0; 50]);
        pts.extend(vec![3.0; 50]);
        let res = kmeans(&pts, 1, &KMeansOptions::new(5, 1)).unwrap();
        assert_eq!(res.inertia, 0.0);
        assert_eq!(res.centroids.len(), 5);
    }
}
