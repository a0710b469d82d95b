//! Data-parallel execution with a sequential fallback.
//!
//! With the `parallel` feature (on by default) [`Exec::Parallel`] maps work
//! units over the current rayon pool. Without the feature, or with
//! [`Exec::Sequential`], the same closures run in index order on the calling
//! thread. Results are always returned in index order, so output never
//! depends on the schedule.

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    pub fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Like [`Exec::map`], returning the error of the lowest failing index.
    pub fn try_map<T, E, F>(self, n: usize, f: F) -> Result<Vec<T>, E>
    where
        T: Send,
        E: Send,
        F: Fn(usize) -> Result<T, E> + Sync + Send,
    {
        self.map(n, f).into_iter().collect()
    }

    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_paths_agree_in_order() {
        let seq = Exec::Sequential.map(100, |i| i * i);
        let par = Exec::Parallel.map(100, |i| i * i);
        assert_eq!(seq, par);
    }

    #[test]
    fn try_map_reports_first_error() {
        let r: Result<Vec<usize>, usize> =
            Exec::Parallel.try_map(50, |i| if i % 7 == 3 { Err(i) } else { Ok(i) });
        assert_eq!(r, Err(3));
    }
}
