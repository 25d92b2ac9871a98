//! Thin switch between rayon and plain iteration.
//!
//! Every parallel loop in the crate maps an index range to owned values and
//! collects them in index order, so results are bit-identical whichever path
//! runs and however many threads rayon uses.

/// Execution strategy for data-parallel loops.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Parallelism {
    Sequential,
    #[default]
    Parallel,
}

impl Parallelism {
    /// Whether the rayon path is compiled in and requested.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Parallelism::Parallel
    }
}

/// Strategy for a requested thread count; sizes the global rayon pool when
/// more than one thread is asked for.
pub fn with_threads(threads: usize) -> crate::Result<Parallelism> {
    if threads == 0 {
        return Err(crate::KrrError::param("threads", "must be at least 1"));
    }
    if threads == 1 || !cfg!(feature = "parallel") {
        return Ok(Parallelism::Sequential);
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| crate::KrrError::param("threads", e.to_string()))?;
    Ok(Parallelism::Parallel)
}

/// Map `f` over `0..n`, returning results in index order.
pub fn map_range<T, F>(n: usize, par: Parallelism, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if par.is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = par;
    (0..n).map(f).collect()
}

/// Split `0..n` into consecutive blocks of at most `block` items and map each.
pub fn map_blocks<T, F>(n: usize, block: usize, par: Parallelism, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, std::ops::Range<usize>) -> T + Sync + Send,
{
    let block = block.max(1);
    let count = n.div_ceil(block);
    map_range(count, par, |b| {
        let start = b * block;
        f(b, start..(start + block).min(n))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thread_requests() {
        assert!(with_threads(0).is_err());
        assert_eq!(with_threads(1).unwrap(), Parallelism::Sequential);
    }

    #[test]
    fn both_paths_agree() {
        let seq = map_range(1000, Parallelism::Sequential, |i| (i as f64).sqrt());
        let par = map_range(1000, Parallelism::Parallel, |i| (i as f64).sqrt());
        assert_eq!(seq, par);
    }

    #[test]
    fn blocks_cover_range() {
        let spans = map_blocks(10, 4, Parallelism::Parallel, |_, r| r);
        assert_eq!(spans, vec![0..4, 4..8, 8..10]);
        assert!(map_blocks(0, 4, Parallelism::Sequential, |_, r| r).is_empty());
    }
}
