//! One-dimensional complex FFT kernels behind a small planner interface.
//!
//! The grid only needs batched, unnormalized, in-place transforms of a fixed
//! length. [`BuiltinPlanner`] provides an iterative radix-2 kernel and a
//! Bluestein kernel for other lengths; hosts with `std` can plug in a faster
//! backend by implementing [`FftPlanner`].

use alloc::{sync::Arc, vec, vec::Vec};
use core::f64::consts::PI;

use crate::{math, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// `X_k = sum_j x_j exp(-2 pi i j k / n)`
    Forward,
    /// `x_j = sum_k X_k exp(+2 pi i j k / n)`
    Inverse,
}

pub trait Fft1d: Send + Sync {
    fn len(&self) -> usize;

    /// Transforms every consecutive chunk of `len()` values in place, unnormalized.
    fn process(&self, data: &mut [C64], direction: Direction);
}

pub trait FftPlanner: Send + Sync {
    fn plan(&self, len: usize) -> Arc<dyn Fft1d>;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct BuiltinPlanner;

impl FftPlanner for BuiltinPlanner {
    fn plan(&self, len: usize) -> Arc<dyn Fft1d> {
        assert!(len > 0, "FFT length must be positive");
        if len.is_power_of_two() {
            Arc::new(Radix2::new(len))
        } else {
            Arc::new(Bluestein::new(len))
        }
    }
}

fn unit_root(k: usize, n: usize) -> C64 {
    // exp(-2 pi i k / n)
    let (s, c) = math::sin_cos(-2.0 * PI * (k as f64) / (n as f64));
    C64::new(c, s)
}

/// Iterative decimation-in-time radix-2 transform.
pub struct Radix2 {
    len: usize,
    twiddles: Vec<C64>,
    bitrev: Vec<usize>,
}

impl Radix2 {
    pub fn new(len: usize) -> Self {
        assert!(len.is_power_of_two());
        let bits = len.trailing_zeros();
        let bitrev = (0..len)
            .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) })
            .collect();
        let twiddles = (0..len / 2).map(|k| unit_root(k, len)).collect();
        Self { len, twiddles, bitrev }
    }

    fn transform(&self, x: &mut [C64], direction: Direction) {
        let n = self.len;
        for i in 0..n {
            let j = self.bitrev[i];
            if i < j {
                x.swap(i, j);
            }
        }
        let inverse = direction == Direction::Inverse;
        let mut size = 2;
        while size <= n {
            let half = size / 2;
            let stride = n / size;
            for start in (0..n).step_by(size) {
                for k in 0..half {
                    let mut w = self.twiddles[k * stride];
                    if inverse {
                        w = w.conj();
                    }
                    let a = x[start + k];
                    let b = x[start + k + half] * w;
                    x[start + k] = a + b;
                    x[start + k + half] = a - b;
                }
            }
            size *= 2;
        }
    }
}

impl Fft1d for Radix2 {
    fn len(&self) -> usize {
        self.len
    }

    fn process(&self, data: &mut [C64], direction: Direction) {
        assert_eq!(data.len() % self.len, 0, "buffer is not a whole number of chunks");
        if self.len == 1 {
            return;
        }
        for chunk in data.chunks_exact_mut(self.len) {
            self.transform(chunk, direction);
        }
    }
}

/// Chirp-z transform for arbitrary lengths, built on a power-of-two convolution.
pub struct Bluestein {
    len: usize,
    chirp: Vec<C64>,
    kernel_hat: Vec<C64>,
    inner: Radix2,
}

impl Bluestein {
    pub fn new(len: usize) -> Self {
        let m = (2 * len - 1).next_power_of_two();
        let inner = Radix2::new(m);
        // chirp_k = exp(-i pi k^2 / n), with k^2 reduced mod 2n to keep the phase accurate.
        let chirp: Vec<C64> = (0..len)
            .map(|k| {
                let k2 = (k * k) % (2 * len);
                let (s, c) = math::sin_cos(-PI * (k2 as f64) / (len as f64));
                C64::new(c, s)
            })
            .collect();
        let mut kernel = vec![C64::new(0.0, 0.0); m];
        kernel[0] = chirp[0].conj();
        for k in 1..len {
            kernel[k] = chirp[k].conj();
            kernel[m - k] = chirp[k].conj();
        }
        inner.transform(&mut kernel, Direction::Forward);
        Self { len, chirp, kernel_hat: kernel, inner }
    }

    fn forward(&self, x: &mut [C64], scratch: &mut [C64]) {
        let m = scratch.len();
        scratch.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        for k in 0..self.len {
            scratch[k] = x[k] * self.chirp[k];
        }
        self.inner.transform(scratch, Direction::Forward);
        for (v, h) in scratch.iter_mut().zip(&self.kernel_hat) {
            *v *= h;
        }
        self.inner.transform(scratch, Direction::Inverse);
        let scale = 1.0 / m as f64;
        for k in 0..self.len {
            x[k] = scratch[k] * self.chirp[k] * scale;
        }
    }
}

impl Fft1d for Bluestein {
    fn len(&self) -> usize {
        self.len
    }

    fn process(&self, data: &mut [C64], direction: Direction) {
        assert_eq!(data.len() % self.len, 0, "buffer is not a whole number of chunks");
        let mut scratch = vec![C64::new(0.0, 0.0); self.kernel_hat.len()];
        for chunk in data.chunks_exact_mut(self.len) {
            match direction {
                Direction::Forward => self.forward(chunk, &mut scratch),
                Direction::Inverse => {
                    chunk.iter_mut().for_each(|v| *v = v.conj());
                    self.forward(chunk, &mut scratch);
                    chunk.iter_mut().for_each(|v| *v = v.conj());
                }
            }
        }
    }
}
