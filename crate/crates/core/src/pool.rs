use rayon::ThreadPoolBuilder;

/// Runs `f` on a dedicated pool of `jobs` threads (`None` or 0: rayon's default).
pub fn with_jobs<R, F>(jobs: Option<usize>, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    match jobs {
        Some(n) if n > 0 => match ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(f),
            Err(e) => {
                log::warn!("could not build a {n}-thread pool ({e}); using the global pool");
                f()
            }
        },
        _ => f(),
    }
}
