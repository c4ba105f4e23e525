//! Realization-parallel maps.
//!
//! Estimators evaluate one closure per realization index through an
//! [`Executor`] and reduce the ordered results with a fixed-shape pairwise
//! tree, so the scheduler never influences the numbers.

use alloc::vec::Vec;

pub trait Executor: Sync {
    /// `(0..n).map(f)`, returned in index order.
    fn map_indexed<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Runs everything on the calling thread.
#[derive(Clone, Copy, Debug, Default)]
pub struct Serial;

impl Executor for Serial {
    fn map_indexed<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).map(f).collect()
    }
}

impl<E: Executor> Executor for &E {
    fn map_indexed<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (**self).map_indexed(n, f)
    }
}
