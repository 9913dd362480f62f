//! Per-path random streams and the path-parallel map.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// How paths are distributed over threads. Results do not depend on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Execution {
    Sequential,
    /// Uses the rayon pool when the `parallel` feature is enabled, and runs
    /// sequentially otherwise.
    #[default]
    Parallel,
}

/// Independent generator for path `path` under `seed`.
pub fn path_rng(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}

/// `(0..paths).map(|i| f(&mut scratch, i))` in path order. `init` builds
/// per-worker scratch space.
pub fn map_paths<T, W, I, F>(exec: Execution, paths: usize, init: I, f: F) -> Vec<T>
where
    T: Send,
    I: Fn() -> W + Sync + Send,
    F: Fn(&mut W, usize) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..paths).into_par_iter().map_init(init, f).collect()
        }
        _ => {
            let mut scratch = init();
            (0..paths).map(|i| f(&mut scratch, i)).collect()
        }
    }
}
