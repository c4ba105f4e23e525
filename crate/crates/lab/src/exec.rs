//! Thread-pool executor for realization-parallel maps.

use anderson_lab_core::exec::Executor;
use rayon::prelude::*;

use crate::error::LabError;

pub const THREADS_ENV: &str = "ANDERSON_LAB_THREADS";

/// Runs each realization on a private rayon pool. Results come back in
/// index order, so the thread count never changes the numbers.
pub struct RayonExecutor {
    pool: rayon::ThreadPool,
}

impl RayonExecutor {
    /// `threads = None` defers to `ANDERSON_LAB_THREADS`, then to rayon's
    /// default.
    pub fn new(threads: Option<usize>) -> Result<Self, LabError> {
        let threads = match threads {
            Some(t) => Some(t),
            None => threads_from_env()?,
        };
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(t) = threads {
            if t == 0 {
                return Err(LabError::Config("thread count must be positive".into()));
            }
            builder = builder.num_threads(t);
        }
        let pool = builder.build().map_err(|e| LabError::Io(e.to_string()))?;
        Ok(RayonExecutor { pool })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

fn threads_from_env() -> Result<Option<usize>, LabError> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| LabError::Config(format!("{THREADS_ENV}=`{v}` is not a positive integer"))),
        Err(_) => Ok(None),
    }
}

impl Executor for RayonExecutor {
    fn map_indexed<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        self.pool.install(|| (0..n).into_par_iter().map(f).collect())
    }
}
