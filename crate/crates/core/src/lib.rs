//! Certification of dissipativity, negative-imaginary and L2-gain
//! properties for square LTI and input-affine systems.
//!
//! The crate is organised bottom-up:
//! [`matcore`] (dense symmetric linear algebra), [`expr`] (expressions and
//! exact derivatives), [`sysmodel`] (system classes, storage candidates,
//! grids), [`supply`] (supply rates), [`certify`] (matrix conditions and
//! certificates), [`simulate`] (trajectories and audits) and [`cli`].

use std::sync::OnceLock;

pub mod certify;
pub mod cli;
pub mod expr;
pub mod matcore;
pub mod simulate;
pub mod supply;
pub mod sysmodel;

/// Environment variable capping the worker threads used for grid sweeps and
/// trajectory ensembles.
pub const THREADS_ENV: &str = "DISSIPACERT_THREADS";

/// Shared worker pool, sized from [`THREADS_ENV`] when set.
pub fn thread_pool() -> &'static rayon::ThreadPool {
    static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&n| n > 0)
        {
            builder = builder.num_threads(n);
        }
        builder.build().expect("thread pool")
    })
}
