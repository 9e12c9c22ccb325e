//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) work is spread over the rayon pool;
//! without it everything runs on the calling thread. Both paths return
//! results in input order and split work at the same chunk boundaries, so any
//! order-dependent reduction the caller performs afterwards is bit-identical
//! across builds and thread counts.

/// Sequential implementations. Always compiled so benchmarks can compare.
pub mod sequential {
    pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
    where
        F: Fn(&T) -> R,
    {
        items.iter().map(f).collect()
    }

    pub fn map_chunks<T, R, F>(items: &[T], chunk: usize, f: F) -> Vec<R>
    where
        F: Fn(&[T]) -> R,
    {
        items.chunks(chunk.max(1)).map(f).collect()
    }
}

#[cfg(feature = "parallel")]
pub mod threaded {
    use rayon::prelude::*;

    pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        items.par_iter().map(f).collect()
    }

    pub fn map_chunks<T, R, F>(items: &[T], chunk: usize, f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&[T]) -> R + Sync + Send,
    {
        items.par_chunks(chunk.max(1)).map(f).collect()
    }
}

/// Maps `f` over `items`, preserving order.
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        threaded::map(items, f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        sequential::map(items, f)
    }
}

/// Maps `f` over fixed-size chunks of `items`, preserving chunk order.
pub fn map_chunks<T, R, F>(items: &[T], chunk: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&[T]) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        threaded::map_chunks(items, chunk, f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        sequential::map_chunks(items, chunk, f)
    }
}

/// Whether the threaded path is compiled in.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunked_results_keep_order() {
        let xs: Vec<u32> = (0..103).collect();
        let sums = map_chunks(&xs, 10, |c| c.iter().sum::<u32>());
        let expect = sequential::map_chunks(&xs, 10, |c| c.iter().sum::<u32>());
        assert_eq!(sums, expect);
        assert_eq!(sums.len(), 11);
        assert_eq!(map(&xs, |x| x * 2)[50], 100);
    }
}
