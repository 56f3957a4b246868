//! Mixed-radix indexing over joint state spaces.
//!
//! Every table in the crate (CPT rows, joint mode states, input tuples) is
//! addressed through a [`JointSpace`]. The first coordinate varies slowest,
//! so enumeration order matches nested loops in declaration order.

/// A product of finite coordinate spaces.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct JointSpace {
    radix: Vec<usize>,
    strides: Vec<usize>,
    size: usize,
}

impl JointSpace {
    pub fn new(radix: Vec<usize>) -> Self {
        let mut strides = vec![0; radix.len()];
        let mut size = 1usize;
        for k in (0..radix.len()).rev() {
            strides[k] = size;
            size = size.checked_mul(radix[k]).expect("joint space size overflows usize");
        }
        Self { radix, strides, size }
    }

    pub fn radix(&self) -> &[usize] {
        &self.radix
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn dims(&self) -> usize {
        self.radix.len()
    }

    /// Number of joint states (1 for the empty product).
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn index(&self, digits: &[usize]) -> usize {
        debug_assert_eq!(digits.len(), self.radix.len());
        digits.iter().zip(&self.strides).map(|(d, s)| d * s).sum()
    }

    pub fn decode(&self, mut index: usize) -> Vec<usize> {
        let mut digits = vec![0; self.radix.len()];
        for k in 0..self.radix.len() {
            digits[k] = index / self.strides[k];
            index %= self.strides[k];
        }
        digits
    }

    /// Coordinate `k` of the joint state at `index`.
    pub fn digit(&self, index: usize, k: usize) -> usize {
        (index / self.strides[k]) % self.radix[k]
    }

    /// Replace coordinate `k` of `index` with `value`.
    pub fn with_digit(&self, index: usize, k: usize, value: usize) -> usize {
        index - self.digit(index, k) * self.strides[k] + value * self.strides[k]
    }

    pub fn iter(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        (0..self.size).map(move |i| self.decode(i))
    }
}
