//! Thread-count control for the rayon-parallel parts of the planner.

use crate::error::{Error, Result};

/// Environment variable that overrides any `--jobs` setting.
pub const JOBS_ENV: &str = "CONTRAPLAN_JOBS";

/// Runs `f` on a dedicated pool of `jobs` threads, or on the global pool
/// when `jobs` is `None`. Results never depend on the thread count.
pub fn with_jobs<T, F>(jobs: Option<usize>, f: F) -> Result<T>
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    match jobs {
        None => Ok(f()),
        Some(0) => Err(Error::Config("jobs must be at least 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Reads [`JOBS_ENV`], falling back to `fallback`.
pub fn jobs_from_env(fallback: Option<usize>) -> Result<Option<usize>> {
    match std::env::var(JOBS_ENV) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| Error::Config(format!("{JOBS_ENV}={v:?} is not a thread count"))),
        _ => Ok(fallback),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pool_size_is_applied() {
        let n = with_jobs(Some(3), rayon::current_num_threads).unwrap();
        assert_eq!(n, 3);
        assert!(with_jobs(Some(0), || ()).is_err());
    }
}
