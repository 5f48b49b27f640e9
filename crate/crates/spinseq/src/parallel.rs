//! Thread-pool backed point evaluation for scans.

use rayon::prelude::*;
use spinseq_core::propagate::SimError;
use spinseq_core::scan::PointMap;

/// Environment variable that caps the number of worker threads.
pub const THREADS_ENV: &str = "SPINSEQ_THREADS";

/// Evaluates points on a dedicated rayon pool. Results are collected in index
/// order, so the output is the same for any thread count.
pub struct RayonMap {
    pool: rayon::ThreadPool,
}

impl RayonMap {
    pub fn new(threads: Option<usize>) -> Result<Self, rayon::ThreadPoolBuildError> {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = threads {
            b = b.num_threads(n);
        }
        Ok(Self { pool: b.build()? })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl PointMap for RayonMap {
    fn map(&self, n: usize, f: &(dyn Fn(usize) -> Result<f64, SimError> + Sync)) -> Vec<Result<f64, SimError>> {
        self.pool.install(|| (0..n).into_par_iter().map(f).collect())
    }
}

/// Thread count: the explicit flag wins, then `SPINSEQ_THREADS`, then rayon's
/// default. Returns an error message for an unusable environment value.
pub fn resolve_threads(flag: Option<usize>, env: Option<&str>) -> Result<Option<usize>, String> {
    if let Some(n) = flag {
        return if n == 0 { Err("--threads must be at least 1".into()) } else { Ok(Some(n)) };
    }
    match env.map(str::trim) {
        None | Some("") => Ok(None),
        Some(s) => match s.parse::<usize>() {
            Ok(0) | Err(_) => Err(format!("{THREADS_ENV} must be a positive integer, got {s:?}")),
            Ok(n) => Ok(Some(n)),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flag_overrides_env() {
        assert_eq!(resolve_threads(Some(3), Some("8")), Ok(Some(3)));
        assert_eq!(resolve_threads(None, Some("8")), Ok(Some(8)));
        assert_eq!(resolve_threads(None, None), Ok(None));
        assert!(resolve_threads(None, Some("zero")).is_err());
        assert!(resolve_threads(Some(0), None).is_err());
    }

    #[test]
    fn results_keep_index_order() {
        let m = RayonMap::new(Some(4)).unwrap();
        let out = m.map(100, &|i| Ok(i as f64));
        assert!(out.iter().enumerate().all(|(i, r)| *r.as_ref().unwrap() == i as f64));
    }
}
