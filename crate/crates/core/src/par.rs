//! Data-parallel helpers.
//!
//! Everything that fans out (measurement branches, random trials, parameter
//! sweeps, exploration frontiers) goes through these functions. With the
//! `parallel` feature disabled, [`Exec::Parallel`] runs sequentially, so call
//! sites never need their own `cfg` switches. Results are always returned in
//! input order.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    /// Whether work will actually be spread across threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }
}

pub fn map_range<T, F>(exec: Exec, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() && n > 1 {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

pub fn map_slice<I, T, F>(exec: Exec, items: &[I], f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() && items.len() > 1 {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved_in_both_modes() {
        let seq = map_range(Exec::Sequential, 100, |i| i * i);
        let par = map_range(Exec::Parallel, 100, |i| i * i);
        assert_eq!(seq, par);
        let items: Vec<u32> = (0..50).collect();
        assert_eq!(
            map_slice(Exec::Parallel, &items, |x| x + 1),
            map_slice(Exec::Sequential, &items, |x| x + 1)
        );
    }
}
