//! Execution policy for data-parallel loops.

use serde::{Deserialize, Serialize};

/// How independent work items are scheduled.
///
/// `Parallel` uses the rayon pool when the `parallel` feature is enabled and
/// silently degrades to `Sequential` otherwise. Results never depend on the
/// policy: every parallel map preserves input order.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    /// True when this policy will actually fan out across threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }

    /// Order-preserving map over a slice.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel {
            use rayon::prelude::*;
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }

    /// Order-preserving map over `0..n`.
    pub fn map_range<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }
}

/// Sizes the global worker pool. Returns false when the pool was already
/// started or the `parallel` feature is off.
pub fn init_threads(n: usize) -> bool {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_ok()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = n;
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policies_agree() {
        let xs: Vec<u64> = (0..1000).collect();
        let a = Exec::Sequential.map(&xs, |x| x * x);
        let b = Exec::Parallel.map(&xs, |x| x * x);
        assert_eq!(a, b);
        assert_eq!(Exec::Parallel.map_range(17, |i| i), (0..17).collect::<Vec<_>>());
    }
}
