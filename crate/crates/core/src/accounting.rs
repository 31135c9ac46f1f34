//! Stored-size accounting: 8 bytes per float entry and 8 bytes per stored index.

use serde::{Deserialize, Serialize};

pub const BYTES_PER_ENTRY: u64 = 8;
pub const BYTES_PER_MB: f64 = (1u64 << 20) as f64;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StorageCount {
    pub floats: u64,
    pub ints: u64,
}

impl StorageCount {
    pub fn new(floats: usize, ints: usize) -> Self {
        StorageCount {
            floats: floats as u64,
            ints: ints as u64,
        }
    }

    /// Footprint of a dense `n_rows × n_cols` matrix.
    pub fn dense(n_rows: usize, n_cols: usize) -> Self {
        Self::new(n_rows * n_cols, 0)
    }

    pub fn bytes(&self) -> u64 {
        BYTES_PER_ENTRY * (self.floats + self.ints)
    }

    pub fn megabytes(&self) -> f64 {
        self.bytes() as f64 / BYTES_PER_MB
    }
}

impl std::ops::Add for StorageCount {
    type Output = StorageCount;

    fn add(self, o: StorageCount) -> StorageCount {
        StorageCount {
            floats: self.floats + o.floats,
            ints: self.ints + o.ints,
        }
    }
}

impl std::ops::AddAssign for StorageCount {
    fn add_assign(&mut self, o: StorageCount) {
        *self = *self + o;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_megabytes() {
        assert_eq!(StorageCount::dense(1024, 512).megabytes(), 4.0);
        assert_eq!(StorageCount::new(3, 2).bytes(), 40);
    }
}
