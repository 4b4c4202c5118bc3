use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;

use crate::error::Error;

/// Packed binary vector. Bit `i` lives in word `i / 64` at position
/// `63 - i % 64`, so the derived ordering is lexicographic with `0 < 1`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PatternBits {
    len: usize,
    words: Vec<u64>,
}

impl PatternBits {
    pub fn zeros(len: usize) -> Self {
        Self {
            len,
            words: vec![0; len.div_ceil(64)],
        }
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut out = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b {
                out.set(i);
            }
        }
        out
    }

    /// Reads a 0/1 vector; any nonzero entry is a one.
    pub fn from_vector(v: &DVector<f64>) -> Self {
        Self::from_bools(&v.iter().map(|&x| x != 0.0).collect::<Vec<_>>())
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len);
        self.words[i / 64] >> (63 - i % 64) & 1 == 1
    }

    #[inline]
    fn set(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (63 - i % 64);
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(|&i| self.get(i))
    }

    pub fn to_bools(&self) -> Vec<bool> {
        (0..self.len).map(|i| self.get(i)).collect()
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_fn(self.len, |i, _| if self.get(i) { 1.0 } else { 0.0 })
    }

    /// Bits at the given positions, in order.
    pub fn select(&self, rows: &[usize]) -> Self {
        Self::from_bools(&rows.iter().map(|&i| self.get(i)).collect::<Vec<_>>())
    }

    pub fn complement(&self) -> Self {
        Self::from_bools(&(0..self.len).map(|i| !self.get(i)).collect::<Vec<_>>())
    }
}

impl fmt::Display for PatternBits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for PatternBits {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Format {
                    what: "pattern",
                    message: format!("unexpected character {other:?}"),
                }),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::from_bools(&bits))
    }
}
