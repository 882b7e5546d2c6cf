//! Execution backend for embarrassingly parallel loops.
//!
//! Implementations must return results in index order; every reduction in
//! this crate is performed serially over that ordered output, which is what
//! makes results bit-identical for any thread count.

use alloc::vec::Vec;

pub trait Executor: Sync {
    /// Evaluates `f(0), …, f(n-1)` and returns the results in index order.
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;

    /// Monotonic seconds, used only to annotate traces with wall-clock time.
    fn now(&self) -> Option<f64> {
        None
    }
}

/// Runs everything on the calling thread.
#[derive(Debug, Default, Clone, Copy)]
pub struct Serial;

impl Executor for Serial {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).map(f).collect()
    }
}
