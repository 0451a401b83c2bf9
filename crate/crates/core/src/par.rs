//! Parallel map with a sequential fallback.
//!
//! With the `parallel` feature (default) the maps run on the rayon pool and
//! gather in input order; without it they degrade to plain iterator maps
//! with identical semantics. Thread count follows the ambient rayon pool
//! (`RAYON_NUM_THREADS` or an explicitly built pool).

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map over owned items, preserving input order.
pub fn map<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.into_iter().map(f).collect()
    }
}

/// Map over a slice by reference, preserving input order.
pub fn map_ref<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Always-sequential map, kept for benchmark comparisons.
pub fn map_sequential<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    F: Fn(T) -> U,
{
    items.into_iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preserves_order() {
        let xs: Vec<usize> = (0..1000).collect();
        let ys = map(xs.clone(), |x| x * 2);
        assert_eq!(ys, xs.iter().map(|x| x * 2).collect::<Vec<_>>());
        let zs = map_ref(&xs, |x| x + 1);
        assert_eq!(zs[0], 1);
        assert_eq!(zs[999], 1000);
    }
}
