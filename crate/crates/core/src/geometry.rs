pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    squared_distance(a, b).sqrt()
}

/// Median of an unsorted list; mean of the central pair for even lengths.
pub(crate) fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty());
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Indices of the `k` points of `candidates` nearest to `query`, ties by index.
/// `skip` excludes one candidate (the query itself).
pub(crate) fn k_nearest<'a, I>(query: &[f64], candidates: I, k: usize, skip: Option<usize>) -> Vec<usize>
where
    I: Iterator<Item = (usize, &'a [f64])>,
{
    let mut scored: Vec<(f64, usize)> = candidates
        .filter(|(i, _)| Some(*i) != skip)
        .map(|(i, row)| (squared_distance(query, row), i))
        .collect();
    let k = k.min(scored.len());
    if k == 0 {
        return Vec::new();
    }
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < scored.len() {
        scored.select_nth_unstable_by(k - 1, cmp);
        scored.truncate(k);
    }
    scored.sort_by(cmp);
    scored.into_iter().map(|(_, i)| i).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 3.0, 2.0]), 2.5);
    }

    #[test]
    fn knn_ties_break_by_index() {
        let pts: Vec<Vec<f64>> = vec![vec![1.0], vec![-1.0], vec![0.0], vec![2.0]];
        let got = k_nearest(&[0.0], pts.iter().enumerate().map(|(i, p)| (i, p.as_slice())), 3, Some(2));
        assert_eq!(got, vec![0, 1, 3]);
    }
}
