//! Data-parallel helpers.
//!
//! With the `parallel` feature the helpers dispatch to rayon unless
//! [`set_sequential`] forced the single-threaded path at runtime; without the
//! feature they are plain iterator loops. Closures must never block on a
//! network channel: rayon workers are shared by every party thread.

use std::sync::atomic::{AtomicBool, Ordering};

static FORCE_SEQUENTIAL: AtomicBool = AtomicBool::new(false);

/// Forces (or releases) the sequential path for every helper in this module.
pub fn set_sequential(on: bool) {
    FORCE_SEQUENTIAL.store(on, Ordering::Relaxed);
}

pub fn is_parallel() -> bool {
    cfg!(feature = "parallel") && !FORCE_SEQUENTIAL.load(Ordering::Relaxed)
}

/// Below this many items the rayon split overhead dominates.
#[cfg(feature = "parallel")]
const MIN_PARALLEL: usize = 64;

#[cfg(feature = "parallel")]
mod imp {
    use super::*;
    use rayon::prelude::*;

    pub fn map<T, U, F>(items: &[T], f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(&T) -> U + Sync + Send,
    {
        if is_parallel() && items.len() >= MIN_PARALLEL {
            items.par_iter().map(f).collect()
        } else {
            items.iter().map(f).collect()
        }
    }

    pub fn map_range<U, F>(n: usize, f: F) -> Vec<U>
    where
        U: Send,
        F: Fn(usize) -> U + Sync + Send,
    {
        if is_parallel() && n >= MIN_PARALLEL {
            (0..n).into_par_iter().map(f).collect()
        } else {
            (0..n).map(f).collect()
        }
    }

    pub fn for_each_mut<T, F>(items: &mut [T], f: F)
    where
        T: Send,
        F: Fn(usize, &mut T) + Sync + Send,
    {
        if is_parallel() && items.len() >= MIN_PARALLEL {
            items.par_iter_mut().enumerate().for_each(|(i, t)| f(i, t));
        } else {
            items.iter_mut().enumerate().for_each(|(i, t)| f(i, t));
        }
    }

    pub fn chunks_mut<F>(data: &mut [u8], width: usize, f: F)
    where
        F: Fn(usize, &mut [u8]) + Sync + Send,
    {
        if width == 0 {
            return;
        }
        if is_parallel() && data.len() / width >= MIN_PARALLEL {
            data.par_chunks_exact_mut(width).enumerate().for_each(|(i, c)| f(i, c));
        } else {
            data.chunks_exact_mut(width).enumerate().for_each(|(i, c)| f(i, c));
        }
    }
}

#[cfg(not(feature = "parallel"))]
mod imp {
    pub fn map<T, U, F>(items: &[T], f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(&T) -> U + Sync + Send,
    {
        items.iter().map(f).collect()
    }

    pub fn map_range<U, F>(n: usize, f: F) -> Vec<U>
    where
        U: Send,
        F: Fn(usize) -> U + Sync + Send,
    {
        (0..n).map(f).collect()
    }

    pub fn for_each_mut<T, F>(items: &mut [T], f: F)
    where
        T: Send,
        F: Fn(usize, &mut T) + Sync + Send,
    {
        items.iter_mut().enumerate().for_each(|(i, t)| f(i, t));
    }

    pub fn chunks_mut<F>(data: &mut [u8], width: usize, f: F)
    where
        F: Fn(usize, &mut [u8]) + Sync + Send,
    {
        if width == 0 {
            return;
        }
        data.chunks_exact_mut(width).enumerate().for_each(|(i, c)| f(i, c));
    }
}

pub use imp::{chunks_mut, for_each_mut, map, map_range};
