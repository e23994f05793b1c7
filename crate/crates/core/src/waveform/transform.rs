//! Oversampled DFT pair used throughout the clipping loops.
//!
//! The inverse is the plain (unnormalized) sum `x[n] = Σ X[k] e^{+j2πkn/N}`,
//! which is exactly the synthesis sum once the `1/√N_act` factor has been
//! folded into the stacked spectrum. The forward transform carries the `1/N`
//! so that `inverse(forward(x)) == x` and `forward(x⁰)` returns the stacked
//! spectrum.

use std::cell::RefCell;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

thread_local! {
    static SCRATCH: RefCell<Vec<Complex64>> = const { RefCell::new(Vec::new()) };
}

fn process(fft: &dyn Fft<f64>, buf: &mut [Complex64]) {
    SCRATCH.with_borrow_mut(|scratch| {
        let need = fft.get_inplace_scratch_len();
        if scratch.len() < need {
            scratch.resize(need, Complex64::new(0.0, 0.0));
        }
        fft.process_with_scratch(buf, &mut scratch[..need]);
    });
}

/// A planned forward/inverse transform pair of fixed power-of-two length.
#[derive(Clone)]
pub struct OfdmTransform {
    size: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scale: f64,
}

impl fmt::Debug for OfdmTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OfdmTransform").field("size", &self.size).finish()
    }
}

impl OfdmTransform {
    pub fn new(size: usize) -> Result<Self> {
        if !size.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(size));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            size,
            forward: planner.plan_fft_forward(size),
            inverse: planner.plan_fft_inverse(size),
            scale: 1.0 / size as f64,
        })
    }

    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub fn forward(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(x.len())?;
        let mut buf = x.to_vec();
        self.forward_in_place(&mut buf);
        Ok(buf)
    }

    pub fn inverse(&self, spectrum: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(spectrum.len())?;
        let mut buf = spectrum.to_vec();
        self.inverse_in_place(&mut buf);
        Ok(buf)
    }

    /// Caller guarantees `buf.len() == self.len()`.
    pub(crate) fn forward_in_place(&self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.size);
        process(self.forward.as_ref(), buf);
        for v in buf.iter_mut() {
            *v *= self.scale;
        }
    }

    /// Caller guarantees `buf.len() == self.len()`.
    pub(crate) fn inverse_in_place(&self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.size);
        process(self.inverse.as_ref(), buf);
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.size {
            return Err(Error::Dimension {
                expected: self.size,
                actual: len,
            });
        }
        Ok(())
    }
}

/// One-shot forward transform; plans a transform for `x.len()`.
pub fn forward_transform(x: &[Complex64]) -> Result<Vec<Complex64>> {
    OfdmTransform::new(x.len())?.forward(x)
}

/// One-shot inverse transform; plans a transform for `spectrum.len()`.
pub fn inverse_transform(spectrum: &[Complex64]) -> Result<Vec<Complex64>> {
    OfdmTransform::new(spectrum.len())?.inverse(spectrum)
}
