//! Hyperplane arrangement patterns `H(X) = {1{Xw >= 0} : w}`.
//!
//! [`enumerate_exact`] lists every pattern of a low-rank matrix,
//! [`sample_arrangements`] draws patterns from Gaussian directions and
//! [`deep_construct`] grows the pattern set of the next layer.

mod bits;
mod deep;
mod exact;
mod io;

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{activation_pattern, Dataset};

pub use bits::PatternBits;
pub use deep::{deep_construct, deep_construct_sampled};
pub use exact::{enumerate_exact, enumerate_matrix, DEFAULT_BUDGET};
pub use io::{read_text, read_witness_csv, write_text, write_witness_csv};

/// A weight vector (and shift) producing a pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub weights: Vec<f64>,
    pub shift: f64,
    /// Columns of the previous layer's arrangement the witness reads, for
    /// deep patterns.
    pub columns: Option<Vec<usize>>,
}

impl Witness {
    pub fn new(weights: Vec<f64>) -> Self {
        Self {
            weights,
            shift: 0.0,
            columns: None,
        }
    }

    /// Pattern of this witness on `x` (restricted to `columns` when set).
    pub fn evaluate(&self, x: &DMatrix<f64>) -> Vec<bool> {
        match &self.columns {
            Some(cols) => activation_pattern(&x.select_columns(cols), &self.weights, self.shift),
            None => activation_pattern(x, &self.weights, self.shift),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArrangementPattern {
    pub bits: PatternBits,
    pub witness: Option<Witness>,
}

/// Deduplicated, lexicographically ordered set of patterns.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrangementMatrix {
    n: usize,
    layer: usize,
    patterns: Vec<ArrangementPattern>,
}

impl ArrangementMatrix {
    /// Builds the matrix from patterns in any order. The first witness seen
    /// for a bit vector is kept.
    pub fn from_patterns(
        n: usize,
        layer: usize,
        patterns: impl IntoIterator<Item = ArrangementPattern>,
    ) -> Result<Self> {
        let mut set: BTreeMap<PatternBits, Option<Witness>> = BTreeMap::new();
        for p in patterns {
            if p.bits.len() != n {
                return Err(Error::InvalidArgument(format!(
                    "pattern of length {} in an arrangement over {n} samples",
                    p.bits.len()
                )));
            }
            set.entry(p.bits).or_insert(p.witness);
        }
        Ok(Self {
            n,
            layer,
            patterns: set
                .into_iter()
                .map(|(bits, witness)| ArrangementPattern { bits, witness })
                .collect(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of patterns P.
    pub fn p(&self) -> usize {
        self.patterns.len()
    }

    pub fn layer(&self) -> usize {
        self.layer
    }

    pub fn patterns(&self) -> &[ArrangementPattern] {
        &self.patterns
    }

    pub fn contains(&self, bits: &PatternBits) -> bool {
        self.patterns
            .binary_search_by(|p| p.bits.cmp(bits))
            .is_ok()
    }

    pub fn index_of(&self, bits: &PatternBits) -> Option<usize> {
        self.patterns.binary_search_by(|p| p.bits.cmp(bits)).ok()
    }

    /// Column `j` as a 0/1 vector.
    pub fn column(&self, j: usize) -> DVector<f64> {
        self.patterns[j].bits.to_vector()
    }

    /// The `n × P` 0/1 design matrix.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.n, self.p());
        for (j, p) in self.patterns.iter().enumerate() {
            for i in p.bits.ones() {
                d[(i, j)] = 1.0;
            }
        }
        d
    }

    /// Patterns as `'0'/'1'` strings, in column order.
    pub fn bit_strings(&self) -> Vec<String> {
        self.patterns.iter().map(|p| p.bits.to_string()).collect()
    }

    /// Every pattern of `{0,1}^n`, each with no witness.
    pub fn complete(n: usize) -> Result<Self> {
        if n > 30 {
            return Err(Error::TooManySamples(n));
        }
        let patterns = (0u64..1 << n).map(|code| ArrangementPattern {
            bits: PatternBits::from_bools(&(0..n).map(|i| code >> (n - 1 - i) & 1 == 1).collect::<Vec<_>>()),
            witness: None,
        });
        Self::from_patterns(n, 1, patterns)
    }
}

/// `2 Σ_{k<r} C(n−1, k)`, the maximum number of patterns of a rank-`r`
/// matrix with `n` rows.
pub fn count_bound(n: u64, r: u64) -> Result<u128> {
    if r < 1 || r > n {
        return Err(Error::InvalidArgument(format!(
            "count_bound needs 1 <= r <= n, got n = {n}, r = {r}"
        )));
    }
    let mut total: u128 = 0;
    let mut binom: u128 = 1;
    for k in 0..r {
        if k > 0 {
            binom = binom * u128::from(n - k) / u128::from(k);
        }
        total += binom;
    }
    Ok(2 * total)
}

/// True when the arrangement contains all `2^n` patterns.
pub fn is_complete(arr: &ArrangementMatrix) -> Result<bool> {
    if arr.n() > 30 {
        return Err(Error::TooManySamples(arr.n()));
    }
    Ok(arr.p() == 1usize << arr.n())
}

/// Patterns of `count` i.i.d. standard normal directions.
pub fn sample_arrangements(data: &Dataset, count: usize, seed: u64) -> Result<ArrangementMatrix> {
    sample_matrix(data.features(), count, seed)
}

pub(crate) fn sample_matrix(x: &DMatrix<f64>, count: usize, seed: u64) -> Result<ArrangementMatrix> {
    if count == 0 {
        return Err(Error::InvalidArgument("count must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = x.ncols();
    let patterns: Vec<ArrangementPattern> = (0..count)
        .map(|_| {
            let g: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
            let bits = PatternBits::from_bools(&activation_pattern(x, &g, 0.0));
            ArrangementPattern {
                bits,
                witness: Some(Witness::new(g)),
            }
        })
        .collect();
    ArrangementMatrix::from_patterns(x.nrows(), 1, patterns)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example_data() -> Dataset {
        Dataset::from_rows(
            &[vec![-1.0, 1.0], vec![0.0, 1.0], vec![1.0, 1.0]],
            &[0.0, 1.0, 1.0],
        )
        .unwrap()
    }

    #[test]
    fn bounds() {
        assert_eq!(count_bound(3, 2).unwrap(), 6);
        assert_eq!(count_bound(8, 2).unwrap(), 2 * (1 + 7));
        for n in 1..20 {
            assert_eq!(count_bound(n, n).unwrap(), 1u128 << n);
        }
        assert!(count_bound(3, 0).is_err());
        assert!(count_bound(3, 4).is_err());
    }

    #[test]
    fn completeness() {
        let single = ArrangementMatrix::from_patterns(
            1,
            1,
            [false, true].map(|b| ArrangementPattern {
                bits: PatternBits::from_bools(&[b]),
                witness: None,
            }),
        )
        .unwrap();
        assert!(is_complete(&single).unwrap());
        assert_eq!(ArrangementMatrix::complete(3).unwrap().p(), 8);
        let big = ArrangementMatrix::from_patterns(31, 1, []).unwrap();
        assert!(matches!(is_complete(&big), Err(Error::TooManySamples(31))));
    }

    #[test]
    fn single_sample_draw() {
        let data = example_data();
        let arr = sample_arrangements(&data, 1, 11).unwrap();
        assert_eq!(arr.p(), 1);
        let p = &arr.patterns()[0];
        let w = p.witness.as_ref().unwrap();
        assert_eq!(w.evaluate(data.features()), p.bits.to_bools());
    }

    #[test]
    fn sampling_is_deterministic() {
        let data = example_data();
        let a = sample_arrangements(&data, 50, 3).unwrap();
        let b = sample_arrangements(&data, 50, 3).unwrap();
        assert_eq!(a, b);
        assert!(sample_arrangements(&data, 0, 3).is_err());
    }

    #[test]
    fn dedup_keeps_first_witness_and_sorts() {
        let mk = |s: &str, w: f64| ArrangementPattern {
            bits: s.parse().unwrap(),
            witness: Some(Witness::new(vec![w])),
        };
        let arr = ArrangementMatrix::from_patterns(2, 1, [mk("10", 1.0), mk("01", 2.0), mk("10", 3.0)]).unwrap();
        assert_eq!(arr.bit_strings(), vec!["01", "10"]);
        assert_eq!(arr.patterns()[1].witness.as_ref().unwrap().weights, vec![1.0]);
        assert_eq!(arr.to_dense(), DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
    }
}
