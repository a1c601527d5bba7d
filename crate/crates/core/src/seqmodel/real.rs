use core::fmt::Debug;
use num_traits::{Float, NumAssign};

/// Scalar type for model parameters and activations.
pub trait Real: Float + NumAssign + Default + Debug + Send + Sync + 'static {
    const NAME: &'static str;
    const BYTES: usize;
    fn of(v: f64) -> Self;
    fn f64(self) -> f64;
    fn write_le(self, out: &mut alloc::vec::Vec<u8>);
    /// `bytes.len()` must equal `BYTES`.
    fn read_le(bytes: &[u8]) -> Self;
}

impl Real for f32 {
    const NAME: &'static str = "f32";
    const BYTES: usize = 4;
    fn of(v: f64) -> Self {
        v as f32
    }
    fn f64(self) -> f64 {
        self as f64
    }
    fn write_le(self, out: &mut alloc::vec::Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn read_le(bytes: &[u8]) -> Self {
        f32::from_le_bytes(bytes.try_into().expect("4 bytes"))
    }
}

impl Real for f64 {
    const NAME: &'static str = "f64";
    const BYTES: usize = 8;
    fn of(v: f64) -> Self {
        v
    }
    fn f64(self) -> f64 {
        self
    }
    fn write_le(self, out: &mut alloc::vec::Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn read_le(bytes: &[u8]) -> Self {
        f64::from_le_bytes(bytes.try_into().expect("8 bytes"))
    }
}
