use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::LabeledDataset;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;
use crate::seed::{self, Stream};

const MAX_PLACEMENT_RETRIES: usize = 10_000;

/// Isotropic unit-variance Gaussian clusters whose means are pairwise at
/// least `separation` apart. Sample `i` belongs to cluster `i % num_clusters`.
pub fn gen_synthetic<T: Scalar>(
    num_clusters: usize,
    dim: usize,
    n: usize,
    separation: f64,
    seed: u64,
) -> Result<LabeledDataset<T>> {
    if num_clusters < 2 || dim < 2 || n < num_clusters {
        return Err(Error::Config(format!(
            "need clusters >= 2, dim >= 2 and n >= clusters (got {num_clusters}, {dim}, {n})"
        )));
    }
    if !(separation.is_finite() && separation >= 0.0) {
        return Err(Error::Config(format!("invalid separation {separation}")));
    }
    let mut rng = seed::rng(seed, Stream::Synthetic, &[]);
    // Mean spread chosen so that typical pairwise distance is ~1.4 x separation.
    let spread = separation / (dim as f64).sqrt();
    let mut means: Vec<Vec<f64>> = Vec::with_capacity(num_clusters);
    for c in 0..num_clusters {
        let mut placed = false;
        for _ in 0..MAX_PLACEMENT_RETRIES {
            let candidate: Vec<f64> = (0..dim).map(|_| spread * normal(&mut rng)).collect();
            let ok = means.iter().all(|m| {
                m.iter()
                    .zip(&candidate)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
                    >= separation
            });
            if ok {
                means.push(candidate);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::Generation(format!(
                "could not place cluster {c} at separation {separation} in {dim} dimensions"
            )));
        }
    }

    let mut data = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % num_clusters;
        labels.push(c);
        data.extend(means[c].iter().map(|&m| T::lit(m + normal(&mut rng))));
    }
    LabeledDataset::new(
        Matrix::from_vec(n, dim, data)?,
        labels,
        (0..n as u64).collect(),
        num_clusters,
    )
}

fn normal<R: Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn centroids(d: &LabeledDataset<f64>) -> Vec<Vec<f64>> {
        let mut sums = vec![vec![0.0; d.dim()]; d.num_classes()];
        let mut counts = vec![0usize; d.num_classes()];
        for (row, &l) in d.labels().iter().enumerate() {
            counts[l] += 1;
            for (s, x) in sums[l].iter_mut().zip(d.sample(row)) {
                *s += x;
            }
        }
        sums.into_iter()
            .zip(counts)
            .map(|(s, c)| s.into_iter().map(|v| v / c as f64).collect())
            .collect()
    }

    fn dist2(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
    }

    #[test]
    fn tiny_two_cluster_set() {
        let d = gen_synthetic::<f64>(2, 2, 4, 10.0, 3).unwrap();
        assert_eq!(d.len(), 4);
        assert_eq!(d.labels(), &[0, 1, 0, 1]);
        let within = dist2(d.sample(0), d.sample(2)).sqrt();
        let across = dist2(d.sample(0), d.sample(1)).sqrt();
        assert!(within < across, "within {within} across {across}");
    }

    #[test]
    fn same_seed_same_data() {
        let a = gen_synthetic::<f64>(3, 5, 30, 4.0, 9).unwrap();
        let b = gen_synthetic::<f64>(3, 5, 30, 4.0, 9).unwrap();
        assert_eq!(a, b);
        let c = gen_synthetic::<f64>(3, 5, 30, 4.0, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn nearest_centroid_recovers_labels() {
        let d = gen_synthetic::<f64>(5, 16, 500, 6.0, 0).unwrap();
        let cents = centroids(&d);
        let correct = (0..d.len())
            .filter(|&row| {
                let x = d.sample(row);
                let best = (0..cents.len())
                    .min_by(|&a, &b| dist2(x, &cents[a]).total_cmp(&dist2(x, &cents[b])))
                    .unwrap();
                best == d.labels()[row]
            })
            .count();
        let acc = correct as f64 / d.len() as f64;
        assert!(acc > 0.99, "nearest-centroid accuracy {acc}");
    }

    #[test]
    fn infeasible_geometry_reports_generation_error() {
        // 2-d clusters at spread sep/sqrt(2) cannot all sit 100 sigma apart from 60 others
        let r = gen_synthetic::<f64>(60, 2, 60, 1e3, 1);
        assert!(matches!(r, Err(Error::Generation(_))));
    }

    #[test]
    fn bad_arguments_rejected() {
        assert!(gen_synthetic::<f64>(1, 2, 4, 1.0, 0).is_err());
        assert!(gen_synthetic::<f64>(2, 1, 4, 1.0, 0).is_err());
        assert!(gen_synthetic::<f64>(3, 2, 2, 1.0, 0).is_err());
    }
}
