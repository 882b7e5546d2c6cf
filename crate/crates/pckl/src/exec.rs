use std::time::Instant;

use pckl_core::exec::Executor;
use rayon::prelude::*;

/// Rayon-backed executor with its own pool.
pub struct Rayon {
    pool: rayon::ThreadPool,
    start: Instant,
}

impl Rayon {
    /// `threads = 0` uses every available core.
    pub fn new(threads: usize) -> anyhow::Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
        Ok(Self { pool, start: Instant::now() })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl Executor for Rayon {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        // indexed collect keeps index order
        self.pool.install(|| (0..n).into_par_iter().map(f).collect())
    }

    fn now(&self) -> Option<f64> {
        Some(self.start.elapsed().as_secs_f64())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn results_come_back_in_index_order() {
        let ex = Rayon::new(4).unwrap();
        assert_eq!(ex.threads(), 4);
        let v = ex.map(1000, |i| i * i);
        assert!(v.iter().enumerate().all(|(i, &x)| x == i * i));
        let t0 = ex.now().unwrap();
        assert!(ex.now().unwrap() >= t0);
    }
}
