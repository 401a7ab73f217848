//! Deterministic data-parallel reductions.
//!
//! Index ranges are cut into fixed-size chunks. Each chunk is folded
//! sequentially into its own buffer and the buffers are summed in chunk order,
//! so the result is bitwise identical whether chunks run on one thread or many.

/// Indices per chunk. Fixed so that results never depend on the thread count.
pub const CHUNK: usize = 64;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// True when the parallel path is compiled in and selected.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Computes `Σ_{i<n} f(i, ·)` into a fresh length-`dim` buffer, where `f(i, out)`
/// accumulates term `i` into `out`.
pub fn chunked_sum<F>(exec: Execution, n: usize, dim: usize, f: F) -> Vec<f64>
where
    F: Fn(usize, &mut [f64]) + Sync,
{
    let fold_chunk = |c: usize| {
        let mut buf = vec![0.0; dim];
        for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
            f(i, &mut buf);
        }
        buf
    };
    let n_chunks = n.div_ceil(CHUNK);
    let partials: Vec<Vec<f64>> = if exec.is_parallel() && n_chunks > 1 {
        parallel_map(n_chunks, fold_chunk)
    } else {
        (0..n_chunks).map(fold_chunk).collect()
    };
    let mut out = vec![0.0; dim];
    for part in &partials {
        out.iter_mut().zip(part).for_each(|(o, p)| *o += p);
    }
    out
}

/// Maps `f` over `0..n`, in parallel when compiled with the `parallel`
/// feature. Output order always matches index order.
pub fn parallel_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Runs `f` inside a pool of `threads` workers (0 = library default).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    #[cfg(feature = "parallel")]
    {
        if threads > 0 {
            if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
                return pool.install(f);
            }
        }
        f()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        f()
    }
}
