//! Uniform frame selection over a video.

use alloc::vec::Vec;
use core::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingError {
    ZeroFrames,
    ZeroSamples,
    TooManySamples { requested: usize, frame_count: usize },
}

impl fmt::Display for SamplingError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SamplingError::ZeroFrames => f.write_str("video has no frames"),
            SamplingError::ZeroSamples => f.write_str("at least one frame must be sampled"),
            SamplingError::TooManySamples { requested, frame_count } => {
                write!(f, "cannot sample {requested} distinct frames from {frame_count}")
            }
        }
    }
}

impl core::error::Error for SamplingError {}

/// `n` strictly increasing indices spread evenly over `0..frame_count`,
/// `floor(k * (frame_count - 1) / (n - 1))` for `k in 0..n`. Both endpoints
/// are included when `n >= 2`.
pub fn sample_indices(frame_count: usize, n: usize) -> Result<Vec<usize>, SamplingError> {
    if frame_count == 0 {
        return Err(SamplingError::ZeroFrames);
    }
    if n == 0 {
        return Err(SamplingError::ZeroSamples);
    }
    if n > frame_count {
        return Err(SamplingError::TooManySamples { requested: n, frame_count });
    }
    if n == 1 {
        return Ok(alloc::vec![0]);
    }
    let span = (frame_count - 1) as u128;
    let steps = (n - 1) as u128;
    Ok((0..n as u128).map(|k| (k * span / steps) as usize).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn identity_and_single() {
        assert_eq!(sample_indices(5, 5).unwrap(), vec![0, 1, 2, 3, 4]);
        assert_eq!(sample_indices(100, 1).unwrap(), vec![0]);
        assert_eq!(sample_indices(1, 1).unwrap(), vec![0]);
    }

    #[test]
    fn argument_errors() {
        assert_eq!(sample_indices(10, 0), Err(SamplingError::ZeroSamples));
        assert_eq!(
            sample_indices(3, 4),
            Err(SamplingError::TooManySamples { requested: 4, frame_count: 3 })
        );
        assert_eq!(sample_indices(0, 1), Err(SamplingError::ZeroFrames));
    }
}
