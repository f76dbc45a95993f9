//! `rustfft` backend for the core planner interface.

use std::sync::{Arc, Mutex};

use pksns_core::fft::{Direction, Fft1d, FftPlanner};
use pksns_core::{Grid, GridSpec, C64};

pub struct RustFftPlanner {
    inner: Mutex<rustfft::FftPlanner<f64>>,
}

impl RustFftPlanner {
    pub fn new() -> Self {
        Self { inner: Mutex::new(rustfft::FftPlanner::new()) }
    }
}

impl Default for RustFftPlanner {
    fn default() -> Self {
        Self::new()
    }
}

struct Plan {
    len: usize,
    forward: Arc<dyn rustfft::Fft<f64>>,
    inverse: Arc<dyn rustfft::Fft<f64>>,
}

impl Fft1d for Plan {
    fn len(&self) -> usize {
        self.len
    }

    fn process(&self, data: &mut [C64], direction: Direction) {
        match direction {
            Direction::Forward => self.forward.process(data),
            Direction::Inverse => self.inverse.process(data),
        }
    }
}

impl FftPlanner for RustFftPlanner {
    fn plan(&self, len: usize) -> Arc<dyn Fft1d> {
        let mut p = self.inner.lock().expect("fft planner poisoned");
        Arc::new(Plan { len, forward: p.plan_fft_forward(len), inverse: p.plan_fft_inverse(len) })
    }
}

/// Builds a grid whose transforms run on `rustfft`.
pub fn grid(spec: GridSpec) -> pksns_core::Result<Arc<Grid>> {
    pksns_core::grid::make_grid_with(spec, &RustFftPlanner::new())
}
