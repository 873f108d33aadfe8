//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) work items are spread over the
//! rayon pool; without it they run in order on the calling thread. Results
//! are always returned in item order, so any reduction performed by the
//! caller over the returned vector is bit-identical between the two modes.

/// Evaluates `f(i)` for `i in 0..len` and collects the results in order.
#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..len).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..len).map(f).collect()
}

/// Fixed chunk length for chunked reductions. Keeping it independent of the
/// thread count is what makes parallel sums reproducible.
pub const CHUNK: usize = 8192;

/// Splits `0..len` into fixed-size chunks and maps each `(start, end)` range.
pub fn map_chunks<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, usize) -> T + Sync + Send,
{
    let chunks = len.div_ceil(CHUNK);
    map_indexed(chunks, |c| {
        let start = c * CHUNK;
        f(start, (start + CHUNK).min(len))
    })
}

/// Whether this build spreads work over threads.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let v = map_indexed(1000, |i| i * 2);
        assert!(v.iter().enumerate().all(|(i, &x)| x == 2 * i));
    }

    #[test]
    fn chunks_cover_range() {
        let n = 3 * CHUNK + 17;
        let parts = map_chunks(n, |s, e| (s, e));
        assert_eq!(parts.first().unwrap().0, 0);
        assert_eq!(parts.last().unwrap().1, n);
        for w in parts.windows(2) {
            assert_eq!(w[0].1, w[1].0);
        }
        assert!(map_chunks(0, |s, e| (s, e)).is_empty());
    }
}
