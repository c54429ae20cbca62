//! Data-parallel loops with a sequential fallback.
//!
//! Every helper splits work into index ranges that do not depend on the
//! execution strategy and combines partial results in index order, so
//! sequential and parallel runs are bitwise identical.

/// Execution strategy for data-parallel loops.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    /// Uses rayon when the `parallel` feature is enabled; otherwise sequential.
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

impl Exec {
    /// True when this strategy actually runs on multiple threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }

    /// Evaluates `f(0..n)` and collects the results in index order.
    pub fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => {
                use rayon::prelude::*;
                (0..n).into_par_iter().map(f).collect()
            }
            _ => (0..n).map(f).collect(),
        }
    }

    /// Calls `f(start, chunk)` on consecutive chunks of `out` of length `chunk_len`.
    pub fn for_chunks<F>(self, out: &mut [f64], chunk_len: usize, f: F)
    where
        F: Fn(usize, &mut [f64]) + Sync + Send,
    {
        let chunk_len = chunk_len.max(1);
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => {
                use rayon::prelude::*;
                out.par_chunks_mut(chunk_len).enumerate().for_each(|(c, s)| f(c * chunk_len, s));
            }
            _ => out.chunks_mut(chunk_len).enumerate().for_each(|(c, s)| f(c * chunk_len, s)),
        }
    }

    /// Splits `0..n` into fixed blocks, maps each block to a vector of partial
    /// sums of length `width`, and adds the blocks together in block order.
    pub fn block_sum<F>(self, n: usize, block: usize, width: usize, f: F) -> Vec<f64>
    where
        F: Fn(std::ops::Range<usize>) -> Vec<f64> + Sync + Send,
    {
        let block = block.max(1);
        let nblocks = n.div_ceil(block);
        let parts = self.map(nblocks, |b| f(b * block..((b + 1) * block).min(n)));
        let mut acc = vec![0.0; width];
        for p in parts {
            for (a, v) in acc.iter_mut().zip(p) {
                *a += v;
            }
        }
        acc
    }
}
