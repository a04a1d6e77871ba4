//! Data-parallel map with a sequential fallback.
//!
//! Builds without the `parallel` feature run every `Exec` mode sequentially.
//! Results are always returned in input order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }

    pub fn map<T, U, F>(self, items: &[T], f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(&T) -> U + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel {
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }

    /// Like [`Exec::map`] but each call returns a batch; batches are
    /// concatenated in input order.
    pub fn flat_map<T, U, F>(self, items: &[T], f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(&T) -> Vec<U> + Sync + Send,
    {
        self.map(items, f).into_iter().flatten().collect()
    }

    pub fn try_map<T, U, E, F>(self, items: &[T], f: F) -> Result<Vec<U>, E>
    where
        T: Sync,
        U: Send,
        E: Send,
        F: Fn(&T) -> Result<U, E> + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel {
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree_and_keep_order() {
        let items: Vec<u64> = (0..1000).collect();
        let seq = Exec::Sequential.map(&items, |x| x * x);
        let par = Exec::Parallel.map(&items, |x| x * x);
        assert_eq!(seq, par);
        assert_eq!(seq[999], 999 * 999);
        let flat = Exec::Parallel.flat_map(&items[..3], |x| vec![*x; *x as usize]);
        assert_eq!(flat, vec![1, 2, 2]);
    }

    #[test]
    fn try_map_propagates_error() {
        let items = [1, 2, 3];
        let r: Result<Vec<i32>, String> =
            Exec::Parallel.try_map(&items, |x| if *x == 2 { Err("two".into()) } else { Ok(*x) });
        assert_eq!(r.unwrap_err(), "two");
    }
}
