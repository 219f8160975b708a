//! Brute-force Euclidean neighbour search; ties resolve to the lower row index.

use ndarray::ArrayView2;

pub(crate) fn sq_dist(a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>) -> f64 {
    match (a.as_slice(), b.as_slice()) {
        (Some(a), Some(b)) => sq_dist_slice(a, b),
        _ => a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum(),
    }
}

pub(crate) fn sq_dist_slice(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// The `k` nearest rows among `candidates` (row indices into `x`) to row
/// `query`, excluding `query` itself, nearest first.
pub(crate) fn k_nearest(
    x: ArrayView2<f64>,
    query: usize,
    candidates: &[usize],
    k: usize,
) -> Vec<usize> {
    let q = x.row(query);
    let mut d: Vec<(f64, usize)> = candidates
        .iter()
        .filter(|&&c| c != query)
        .map(|&c| (sq_dist(q, x.row(c)), c))
        .collect();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    let k = k.min(d.len());
    if k == 0 {
        return Vec::new();
    }
    if k < d.len() {
        d.select_nth_unstable_by(k - 1, cmp);
        d.truncate(k);
    }
    d.sort_by(cmp);
    d.into_iter().map(|(_, i)| i).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn nearest_with_ties() {
        let x = array![[0.0], [1.0], [-1.0], [3.0]];
        let all = [0, 1, 2, 3];
        assert_eq!(k_nearest(x.view(), 0, &all, 2), vec![1, 2]);
        assert_eq!(k_nearest(x.view(), 3, &all, 1), vec![1]);
        assert_eq!(k_nearest(x.view(), 0, &all, 10), vec![1, 2, 3]);
    }
}
