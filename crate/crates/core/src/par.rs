//! Data-parallel helpers.
//!
//! With the `parallel` feature (on by default) the helpers dispatch to rayon;
//! without it they run sequentially. Output order never depends on scheduling.

/// Explicit choice of execution strategy, mainly for benchmarking both paths
/// in the same build. `Parallel` degrades to sequential when the crate is
/// built without the `parallel` feature.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match self {
            Execution::Sequential => items.iter().map(f).collect(),
            Execution::Parallel => par_map(items, f),
        }
    }

    pub fn for_each_chunk<T, F>(self, data: &mut [T], chunk: usize, f: F)
    where
        T: Send,
        F: Fn(&mut [T]) + Sync + Send,
    {
        match self {
            Execution::Sequential => data.chunks_mut(chunk).for_each(f),
            Execution::Parallel => par_chunks(data, chunk, f),
        }
    }
}

/// Order-preserving map over a slice.
#[cfg(feature = "parallel")]
pub fn par_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn par_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.iter().map(f).collect()
}

#[cfg(feature = "parallel")]
pub fn par_chunks<T, F>(data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(&mut [T]) + Sync + Send,
{
    use rayon::prelude::*;
    data.par_chunks_mut(chunk).for_each(f)
}

#[cfg(not(feature = "parallel"))]
pub fn par_chunks<T, F>(data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(&mut [T]) + Sync + Send,
{
    data.chunks_mut(chunk).for_each(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_paths_agree_and_keep_order() {
        let items: Vec<u64> = (0..1000).collect();
        let seq = Execution::Sequential.map(&items, |x| x * x + 1);
        let par = Execution::Parallel.map(&items, |x| x * x + 1);
        assert_eq!(seq, par);
        assert_eq!(seq[17], 17 * 17 + 1);
    }

    #[test]
    fn chunks_cover_everything() {
        let mut data = vec![1u32; 103];
        Execution::Parallel.for_each_chunk(&mut data, 10, |c| c.iter_mut().for_each(|x| *x += 1));
        assert!(data.iter().all(|&x| x == 2));
    }
}
