//! Data-parallel helpers.
//!
//! With the `parallel` feature (default) these dispatch to rayon; without it
//! they run sequentially. Reductions always use fixed chunk boundaries and a
//! sequential final combine, so results are bit-identical regardless of the
//! number of worker threads.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Chunk length used for deterministic reductions.
pub const REDUCE_CHUNK: usize = 4096;

/// Evaluates `f` on `0..len` and collects the results in order.
pub fn map_range<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..len).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..len).map(f).collect()
    }
}

/// Runs `f(chunk_index, chunk)` over consecutive chunks of `data`.
pub fn for_each_chunk_mut<T, F>(data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        data.par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
    }
    #[cfg(not(feature = "parallel"))]
    {
        data.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
    }
}

/// Deterministic sum of `f(i)` over `0..len`.
pub fn sum_by<T, F>(len: usize, f: F) -> T
where
    T: Send + Copy + Default + std::ops::Add<Output = T>,
    F: Fn(usize) -> T + Sync + Send,
{
    let chunks = len.div_ceil(REDUCE_CHUNK);
    let partials = map_range(chunks, |c| {
        let start = c * REDUCE_CHUNK;
        let end = (start + REDUCE_CHUNK).min(len);
        (start..end).fold(T::default(), |acc, i| acc + f(i))
    });
    partials.into_iter().fold(T::default(), |acc, x| acc + x)
}

/// Deterministic maximum of `f(i)` over `0..len`; `None` when `len == 0`.
pub fn max_by<F>(len: usize, f: F) -> Option<f64>
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    argmin_by(len, |i| -f(i)).map(|(_, v)| -v)
}

/// Index and value of the smallest `f(i)` over `0..len`, skipping NaN values.
/// Ties resolve to the lowest index.
pub fn argmin_by<F>(len: usize, f: F) -> Option<(usize, f64)>
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let chunks = len.div_ceil(REDUCE_CHUNK);
    let partials = map_range(chunks, |c| {
        let start = c * REDUCE_CHUNK;
        let end = (start + REDUCE_CHUNK).min(len);
        let mut best: Option<(usize, f64)> = None;
        for i in start..end {
            let v = f(i);
            if v.is_nan() {
                continue;
            }
            match best {
                Some((_, b)) if v >= b => {}
                _ => best = Some((i, v)),
            }
        }
        best
    });
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in partials.into_iter().flatten() {
        match best {
            Some((_, b)) if v >= b => {}
            _ => best = Some((i, v)),
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmin_prefers_first_on_ties() {
        let vals = [3.0, 1.0, 2.0, 1.0];
        assert_eq!(argmin_by(vals.len(), |i| vals[i]), Some((1, 1.0)));
    }

    #[test]
    fn sum_matches_sequential() {
        let n = 3 * REDUCE_CHUNK + 17;
        let s: f64 = sum_by(n, |i| i as f64);
        assert_eq!(s, (n * (n - 1) / 2) as f64);
    }
}
