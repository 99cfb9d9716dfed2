//! Cooperative cancellation and progress reporting for long renders.

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};

use crate::error::{Error, Result};

/// Shared between a render and whoever supervises it. Renders poll
/// [`Control::checkpoint`] once per image row.
#[derive(Debug, Default)]
pub struct Control {
    cancelled: AtomicBool,
    samples_done: AtomicU64,
}

impl Control {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn cancel(&self) {
        self.cancelled.store(true, Ordering::SeqCst);
    }

    pub fn is_cancelled(&self) -> bool {
        self.cancelled.load(Ordering::Relaxed)
    }

    #[inline]
    pub fn checkpoint(&self) -> Result<()> {
        if self.is_cancelled() {
            Err(Error::Cancelled)
        } else {
            Ok(())
        }
    }

    /// Samples per pixel fully accumulated so far by the current pass.
    pub fn samples_done(&self) -> u64 {
        self.samples_done.load(Ordering::Relaxed)
    }

    pub fn set_samples_done(&self, n: u64) {
        self.samples_done.store(n, Ordering::Relaxed);
    }
}
