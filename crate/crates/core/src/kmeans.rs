//! k-means++ seeding and plain Lloyd passes, used to produce initial
//! partitions for the clustering algorithms.

use rand::Rng;

use crate::dataio::Dataset;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means++ centers (D² sampling). Returns fewer than `k` centers only if
/// the data has fewer than `k` distinct points.
pub fn kmeans_pp_seeds<R: Rng + ?Sized>(points: &Dataset, k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let n = points.len();
    if n == 0 || k == 0 {
        return Vec::new();
    }
    let mut centers = vec![points.point(rng.random_range(0..n)).to_vec()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        if total <= 0.0 {
            break;
        }
        let mut target = rng.random::<f64>() * total;
        let mut pick = n - 1;
        for (i, &w) in d2.iter().enumerate() {
            if target < w {
                pick = i;
                break;
            }
            target -= w;
        }
        let c = points.point(pick).to_vec();
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, &c));
        }
        centers.push(c);
    }
    centers
}

/// Index of the nearest center; ties go to the lower index.
pub fn nearest(point: &[f64], centers: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in centers.iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

/// Seeds with k-means++, then runs `passes` Lloyd updates. Empty clusters
/// keep their previous center.
pub fn kmeans_labels<R: Rng + ?Sized>(
    points: &Dataset,
    k: usize,
    passes: usize,
    rng: &mut R,
) -> (Vec<usize>, Vec<Vec<f64>>) {
    let mut centers = kmeans_pp_seeds(points, k, rng);
    let mut labels: Vec<usize> = points.iter().map(|p| nearest(p, &centers)).collect();
    for _ in 0..passes {
        let dim = points.dim();
        let mut sums = vec![vec![0.0; dim]; centers.len()];
        let mut counts = vec![0usize; centers.len()];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(p) {
                *s += v;
            }
        }
        for (c, (s, &cnt)) in centers.iter_mut().zip(sums.iter().zip(&counts)) {
            if cnt > 0 {
                *c = s.iter().map(|v| v / cnt as f64).collect();
            }
        }
        labels = points.iter().map(|p| nearest(p, &centers)).collect();
    }
    (labels, centers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn separates_two_blobs() {
        let mut rows = Vec::new();
        for i in 0..20 {
            let t = i as f64 * 0.01;
            rows.push(vec![t, t]);
            rows.push(vec![10.0 + t, 10.0 - t]);
        }
        let d = Dataset::from_rows(&rows).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let (labels, centers) = kmeans_labels(&d, 2, 3, &mut rng);
        assert_eq!(centers.len(), 2);
        for pair in labels.chunks(2) {
            assert_ne!(pair[0], pair[1]);
        }
    }

    #[test]
    fn duplicate_points_limit_seed_count() {
        let d = Dataset::from_rows(&vec![vec![1.0, 1.0]; 10]).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        assert_eq!(kmeans_pp_seeds(&d, 3, &mut rng).len(), 1);
    }
}
