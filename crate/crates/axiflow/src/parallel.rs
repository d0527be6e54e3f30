//! Deterministic data-parallel kernels.
//!
//! Every reduction in the solver runs over *fixed-size chunks*: each chunk
//! is summed (or maxed) sequentially in index order, the per-chunk partials
//! are collected in chunk order, and the partials are combined sequentially.
//! The floating-point evaluation order is therefore a pure function of the
//! array length — it does not depend on the number of worker threads, nor on
//! whether the `parallel` feature (rayon) is enabled at all. Repeated runs
//! of the same problem produce byte-identical fields.
//!
//! With `parallel` enabled the chunks are evaluated by rayon; without it the
//! same chunk loop runs on the calling thread. The `*_seq` variants always
//! use the sequential path and exist so benchmarks can compare both.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Reduction chunk length. Fixed so that the pairwise combination order is
/// independent of thread count; 4096 doubles keeps per-chunk state inside
/// L1 while amortising scheduling overhead.
pub const CHUNK: usize = 4096;

/// Configures the global worker pool to `n` threads (`0` keeps the library
/// default). Only meaningful with the `parallel` feature; without it the
/// call is a no-op because everything already runs on the calling thread.
/// Results are identical either way — this knob trades wall-clock time only.
pub fn init_thread_pool(n: usize) -> Result<()> {
    #[cfg(feature = "parallel")]
    {
        if n > 0 {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| {
                    Error::Config(format!("thread pool init failed: {e}"))
                })?;
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = n;
    }
    Ok(())
}

#[inline]
fn n_chunks(len: usize) -> usize {
    len.div_ceil(CHUNK).max(1)
}

/// Evaluates `per_chunk(start, end)` on every chunk and returns the partials
/// in chunk order.
fn chunk_partials<T, F>(len: usize, per_chunk: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, usize) -> T + Sync,
{
    let chunks = n_chunks(len);
    let eval = |c: usize| per_chunk(c * CHUNK, ((c + 1) * CHUNK).min(len));
    #[cfg(feature = "parallel")]
    {
        (0..chunks).into_par_iter().map(eval).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..chunks).map(eval).collect()
    }
}

fn chunk_partials_seq<T, F>(len: usize, per_chunk: F) -> Vec<T>
where
    F: Fn(usize, usize) -> T,
{
    let chunks = n_chunks(len);
    (0..chunks)
        .map(|c| per_chunk(c * CHUNK, ((c + 1) * CHUNK).min(len)))
        .collect()
}

#[inline]
fn dot_range(a: &[f64], b: &[f64], start: usize, end: usize) -> f64 {
    let mut s = 0.0;
    for i in start..end {
        s += a[i] * b[i];
    }
    s
}

/// Chunked dot product; deterministic combination order.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    chunk_partials(a.len(), |s, e| dot_range(a, b, s, e))
        .into_iter()
        .sum()
}

/// Sequential reference path of [`dot`], byte-identical by construction.
pub fn dot_seq(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    chunk_partials_seq(a.len(), |s, e| dot_range(a, b, s, e))
        .into_iter()
        .sum()
}

/// Euclidean norm via [`dot`].
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Chunked weighted sum `Σ f(i)`; deterministic combination order.
pub fn sum_indexed<F: Fn(usize) -> f64 + Sync>(len: usize, f: F) -> f64 {
    chunk_partials(len, |s, e| {
        let mut acc = 0.0;
        for i in s..e {
            acc += f(i);
        }
        acc
    })
    .into_iter()
    .sum()
}

/// Chunked maximum of `f(i)` over `0..len`; returns `f64::NEG_INFINITY` for
/// an empty range. NaN partials propagate (max with NaN is NaN here), so a
/// poisoned evaluation cannot be masked by a healthy chunk.
pub fn max_indexed<F: Fn(usize) -> f64 + Sync>(len: usize, f: F) -> f64 {
    chunk_partials(len, |s, e| {
        let mut m = f64::NEG_INFINITY;
        for i in s..e {
            let v = f(i);
            // Propagate NaN, otherwise take the larger value.
            if v.is_nan() || v > m {
                m = v;
            }
            if m.is_nan() {
                return m;
            }
        }
        m
    })
    .into_iter()
    .fold(f64::NEG_INFINITY, |acc, v| {
        if v.is_nan() || v > acc {
            v
        } else {
            acc
        }
    })
}

/// Maximum absolute componentwise difference, chunked.
pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    max_indexed(a.len(), |i| (a[i] - b[i]).abs())
}

/// Fills `out[i] = f(i)` elementwise. The write pattern is chunked to
/// mirror the reductions, though elementwise maps are order-independent
/// anyway.
pub fn map_into<F: Fn(usize) -> f64 + Sync>(out: &mut [f64], f: F) {
    #[cfg(feature = "parallel")]
    {
        out.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
            let base = c * CHUNK;
            for (t, slot) in chunk.iter_mut().enumerate() {
                *slot = f(base + t);
            }
        });
    }
    #[cfg(not(feature = "parallel"))]
    {
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = f(i);
        }
    }
}

/// Sequential reference path of [`map_into`] (benchmark comparator).
pub fn map_into_seq<F: Fn(usize) -> f64>(out: &mut [f64], f: F) {
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = f(i);
    }
}

/// Fills three output arrays from one shared evaluation per index. Used by
/// the assembly pass, which produces nodal inverse density, source term and
/// truncation ratio in a single sweep.
pub fn map3_into<F>(o1: &mut [f64], o2: &mut [f64], o3: &mut [f64], f: F)
where
    F: Fn(usize) -> (f64, f64, f64) + Sync,
{
    debug_assert_eq!(o1.len(), o2.len());
    debug_assert_eq!(o1.len(), o3.len());
    #[cfg(feature = "parallel")]
    {
        o1.par_chunks_mut(CHUNK)
            .zip(o2.par_chunks_mut(CHUNK))
            .zip(o3.par_chunks_mut(CHUNK))
            .enumerate()
            .for_each(|(c, ((c1, c2), c3))| {
                let base = c * CHUNK;
                for t in 0..c1.len() {
                    let (a, b, d) = f(base + t);
                    c1[t] = a;
                    c2[t] = b;
                    c3[t] = d;
                }
            });
    }
    #[cfg(not(feature = "parallel"))]
    {
        for i in 0..o1.len() {
            let (a, b, d) = f(i);
            o1[i] = a;
            o2[i] = b;
            o3[i] = d;
        }
    }
}

/// `y[i] += alpha * x[i]`.
pub fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    debug_assert_eq!(y.len(), x.len());
    #[cfg(feature = "parallel")]
    {
        y.par_chunks_mut(CHUNK)
            .zip(x.par_chunks(CHUNK))
            .for_each(|(yc, xc)| {
                for (yi, xi) in yc.iter_mut().zip(xc) {
                    *yi += alpha * xi;
                }
            });
    }
    #[cfg(not(feature = "parallel"))]
    {
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi += alpha * xi;
        }
    }
}

/// `p[i] = z[i] + beta * p[i]` (conjugate-gradient direction update).
pub fn xpby(p: &mut [f64], z: &[f64], beta: f64) {
    debug_assert_eq!(p.len(), z.len());
    #[cfg(feature = "parallel")]
    {
        p.par_chunks_mut(CHUNK)
            .zip(z.par_chunks(CHUNK))
            .for_each(|(pc, zc)| {
                for (pi, zi) in pc.iter_mut().zip(zc) {
                    *pi = zi + beta * *pi;
                }
            });
    }
    #[cfg(not(feature = "parallel"))]
    {
        for (pi, zi) in p.iter_mut().zip(z) {
            *pi = zi + beta * *pi;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(n: usize) -> Vec<f64> {
        (0..n).map(|i| (i as f64) * 0.37 - 1.0).collect()
    }

    #[test]
    fn dot_matches_sequential_bitwise() {
        // Lengths around chunk boundaries are where ordering bugs hide.
        for n in [0, 1, 7, CHUNK - 1, CHUNK, CHUNK + 1, 3 * CHUNK + 17] {
            let a = ramp(n);
            let b: Vec<f64> = a.iter().map(|v| v * 0.913 + 0.2).collect();
            let d_par = dot(&a, &b);
            let d_seq = dot_seq(&a, &b);
            assert_eq!(d_par.to_bits(), d_seq.to_bits(), "n = {n}");
        }
    }

    #[test]
    fn max_indexed_handles_empty_and_nan() {
        assert_eq!(max_indexed(0, |_| 1.0), f64::NEG_INFINITY);
        let v = vec![1.0, f64::NAN, 3.0];
        assert!(max_indexed(v.len(), |i| v[i]).is_nan());
        let w = vec![1.0, -2.0, 3.0, 0.5];
        assert_eq!(max_indexed(w.len(), |i| w[i]), 3.0);
    }

    #[test]
    fn map_into_matches_seq() {
        let mut a = vec![0.0; 2 * CHUNK + 5];
        let mut b = vec![0.0; 2 * CHUNK + 5];
        let f = |i: usize| (i as f64).sqrt() * 1.5 - 3.0;
        map_into(&mut a, f);
        map_into_seq(&mut b, f);
        assert_eq!(a, b);
    }

    #[test]
    fn map3_fills_all_outputs() {
        let n = CHUNK + 3;
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        let mut c = vec![0.0; n];
        map3_into(&mut a, &mut b, &mut c, |i| {
            let x = i as f64;
            (x, 2.0 * x, 3.0 * x)
        });
        assert_eq!(a[n - 1], (n - 1) as f64);
        assert_eq!(b[n - 1], 2.0 * (n - 1) as f64);
        assert_eq!(c[n - 1], 3.0 * (n - 1) as f64);
    }

    #[test]
    fn axpy_and_xpby_agree_with_reference() {
        let n = CHUNK + 11;
        let x = ramp(n);
        let mut y = ramp(n);
        let mut y_ref = y.clone();
        axpy(&mut y, 0.25, &x);
        for (yr, xr) in y_ref.iter_mut().zip(&x) {
            *yr += 0.25 * xr;
        }
        assert_eq!(y, y_ref);

        let z = ramp(n);
        let mut p = x.clone();
        let mut p_ref = x.clone();
        xpby(&mut p, &z, -0.5);
        for (pi, zi) in p_ref.iter_mut().zip(&z) {
            *pi = zi - 0.5 * *pi;
        }
        assert_eq!(p, p_ref);
    }

    #[test]
    fn sum_indexed_is_chunk_ordered() {
        let n = 2 * CHUNK + 9;
        let v = ramp(n);
        let s = sum_indexed(n, |i| v[i]);
        // Reference: same chunking, explicit loop.
        let mut partials = Vec::new();
        let mut i = 0;
        while i < n {
            let e = (i + CHUNK).min(n);
            let mut acc = 0.0;
            for k in i..e {
                acc += v[k];
            }
            partials.push(acc);
            i = e;
        }
        let s_ref: f64 = partials.into_iter().sum();
        assert_eq!(s.to_bits(), s_ref.to_bits());
    }
}
