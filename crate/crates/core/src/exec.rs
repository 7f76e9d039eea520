//! Data-parallel map with a sequential fallback.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    /// Uses the rayon pool when the `parallel` feature is enabled.
    #[default]
    Parallel,
    Sequential,
}

/// Maps `f` over `items`, preserving input order in the output.
pub fn par_map<T, R, F>(exec: Execution, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        _ => items.iter().map(f).collect(),
    }
}

/// Evenly spaced points including both ends; one point gives `lo`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree_and_keep_order() {
        let xs: Vec<u64> = (0..1000).collect();
        let a = par_map(Execution::Parallel, &xs, |x| x * x);
        let b = par_map(Execution::Sequential, &xs, |x| x * x);
        assert_eq!(a, b);
        assert_eq!(a[999], 999 * 999);
    }

    #[test]
    fn linspace_ends() {
        let v = linspace(0.0, 40.0, 41);
        assert_eq!(v.len(), 41);
        assert_eq!(v[0], 0.0);
        assert_eq!(v[40], 40.0);
        assert_eq!(v[20], 20.0);
        assert_eq!(linspace(3.0, 5.0, 1), vec![3.0]);
    }
}
