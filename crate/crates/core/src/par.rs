// SPDX-License-Identifier: MIT OR Apache-2.0

//! Data-parallel helpers. With the `parallel` feature these fan out on the
//! rayon pool; without it they run sequentially in index order. Results are
//! always returned in input order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::Result;

#[cfg(feature = "parallel")]
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

#[cfg(feature = "parallel")]
pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    F: Fn(usize) -> R,
{
    (0..n).map(f).collect()
}

/// Fallible [`map`]; the first error in input order is returned.
#[cfg(feature = "parallel")]
pub fn try_map<T, R, F>(items: &[T], f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R> + Sync + Send,
{
    map(items, f).into_iter().collect()
}

#[cfg(not(feature = "parallel"))]
pub fn try_map<T, R, F>(items: &[T], f: F) -> Result<Vec<R>>
where
    F: Fn(&T) -> Result<R>,
{
    items.iter().map(f).collect()
}

/// Fallible [`map_range`].
#[cfg(feature = "parallel")]
pub fn try_map_range<R, F>(n: usize, f: F) -> Result<Vec<R>>
where
    R: Send,
    F: Fn(usize) -> Result<R> + Sync + Send,
{
    map_range(n, f).into_iter().collect()
}

#[cfg(not(feature = "parallel"))]
pub fn try_map_range<R, F>(n: usize, f: F) -> Result<Vec<R>>
where
    F: Fn(usize) -> Result<R>,
{
    (0..n).map(f).collect()
}

/// True when built with rayon support.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
