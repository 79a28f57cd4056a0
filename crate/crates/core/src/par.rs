//! Parallel reductions whose floating-point result does not depend on the
//! thread count or on scheduling.

use rayon::prelude::*;

/// Smallest group; groups grow with `n` so that at most `MAX_GROUPS`
/// partial results are alive.
const MIN_GROUP: usize = 16;
const MAX_GROUPS: usize = 64;

/// Folds `0..n` in contiguous groups (in parallel), then merges the group
/// results left to right. The grouping depends on `n` alone.
pub(crate) fn ordered_fold<T, E, Z, F, M>(n: usize, zero: Z, fold: F, merge: M) -> Result<T, E>
where
    T: Send,
    E: Send,
    Z: Fn() -> T + Sync,
    F: Fn(T, usize) -> Result<T, E> + Sync,
    M: Fn(T, T) -> Result<T, E>,
{
    let size = n.div_ceil(MAX_GROUPS).max(MIN_GROUP);
    let groups: Vec<T> = (0..n.div_ceil(size))
        .into_par_iter()
        .map(|g| (g * size..((g + 1) * size).min(n)).try_fold(zero(), &fold))
        .collect::<Result<_, E>>()?;
    groups.into_iter().try_fold(zero(), merge)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_a_fixed_summation_tree() {
        let xs: Vec<f64> =
            (0..1000).map(|i| 1.0 / (1.0 + i as f64).powi(3) * if i % 2 == 0 { 1e8 } else { 1.0 }).collect();
        let run =
            || ordered_fold::<f64, (), _, _, _>(xs.len(), || 0.0, |a, i| Ok(a + xs[i]), |a, b| Ok(a + b)).unwrap();
        let first = run();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        assert_eq!(pool.install(run).to_bits(), first.to_bits());
        assert_eq!(ordered_fold::<f64, (), _, _, _>(0, || 0.0, |a, _| Ok(a), |a, b| Ok(a + b)), Ok(0.0));
    }
}
