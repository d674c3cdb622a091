use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Real, Result};

/// A `channels x length` array stored channel-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor1D<T> {
    channels: usize,
    length: usize,
    data: Vec<T>,
}

impl<T: Real> Tensor1D<T> {
    pub fn new(channels: usize, length: usize, data: Vec<T>) -> Result<Self> {
        if channels == 0 || length == 0 {
            return Err(Error::InvalidArgument(alloc::format!(
                "tensor shape ({channels}, {length}) must be positive"
            )));
        }
        if data.len() != channels * length {
            return Err(Error::ShapeMismatch {
                context: "tensor data",
                expected: channels * length,
                actual: data.len(),
            });
        }
        Ok(Self {
            channels,
            length,
            data,
        })
    }

    pub fn zeros(channels: usize, length: usize) -> Self {
        Self::filled(channels, length, T::zero())
    }

    pub fn filled(channels: usize, length: usize, value: T) -> Self {
        assert!(channels > 0 && length > 0, "tensor shape must be positive");
        Self {
            channels,
            length,
            data: vec![value; channels * length],
        }
    }

    /// Single-channel tensor from a signal.
    pub fn from_signal(samples: &[T]) -> Result<Self> {
        Self::new(1, samples.len(), samples.to_vec())
    }

    pub fn from_fn(channels: usize, length: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(channels * length);
        for c in 0..channels {
            for t in 0..length {
                data.push(f(c, t));
            }
        }
        Self {
            channels,
            length,
            data,
        }
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn length(&self) -> usize {
        self.length
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.channels, self.length)
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn channel(&self, c: usize) -> &[T] {
        &self.data[c * self.length..(c + 1) * self.length]
    }

    #[inline]
    pub fn channel_mut(&mut self, c: usize) -> &mut [T] {
        &mut self.data[c * self.length..(c + 1) * self.length]
    }

    #[inline]
    pub fn get(&self, c: usize, t: usize) -> T {
        self.data[c * self.length + t]
    }

    pub fn map(&self, mut f: impl FnMut(T) -> T) -> Self {
        Self {
            channels: self.channels,
            length: self.length,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Reinterprets the buffer with a new shape of equal size.
    pub fn reshape(self, channels: usize, length: usize) -> Result<Self> {
        Self::new(channels, length, self.data)
    }

    pub fn add_assign(&mut self, other: &Self) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn cast<U: Real>(&self) -> Tensor1D<U> {
        Tensor1D {
            channels: self.channels,
            length: self.length,
            data: self.data.iter().map(|v| U::from_f64(v.as_f64())).collect(),
        }
    }
}

pub(crate) fn check_channels(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::ShapeMismatch {
            context,
            expected,
            actual,
        });
    }
    Ok(())
}
