//! Data-parallel helpers. With the `parallel` feature these run on the rayon
//! pool; without it, or with [`Execution::Sequential`], they run in order on
//! the calling thread. Results are always returned in input order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

pub fn map<T, R, F>(exec: Execution, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

pub fn map_indexed<T, R, F>(exec: Execution, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return items.par_iter().enumerate().map(|(i, x)| f(i, x)).collect();
    }
    let _ = exec;
    items.iter().enumerate().map(|(i, x)| f(i, x)).collect()
}

/// Run `f` on a pool of `threads` workers (sequentially when `threads <= 1`
/// or the `parallel` feature is off).
pub fn with_threads<R: Send>(threads: usize, f: impl FnOnce(Execution) -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    if threads > 1 {
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
            return pool.install(|| f(Execution::Parallel));
        }
    }
    let _ = threads;
    f(Execution::Sequential)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preserves_order_under_both_modes() {
        let xs: Vec<u64> = (0..1000).collect();
        let seq = map(Execution::Sequential, &xs, |x| x * x);
        let par = map(Execution::Parallel, &xs, |x| x * x);
        assert_eq!(seq, par);
        let idx = map_indexed(Execution::Parallel, &xs, |i, x| i as u64 + x);
        assert_eq!(idx[999], 1998);
    }

    #[test]
    fn with_threads_runs_closure() {
        assert_eq!(with_threads(1, |e| e), Execution::Sequential);
        let r = with_threads(2, |e| map(e, &[1, 2, 3], |x| x + 1));
        assert_eq!(r, vec![2, 3, 4]);
    }
}
