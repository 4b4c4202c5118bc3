//! Next-layer arrangements: the union over column subsets `S` of the
//! patterns of `[D_S, 1]`.

use itertools::Itertools;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::exact::{enumerate_matrix, DEFAULT_BUDGET};
use super::{ArrangementMatrix, ArrangementPattern, Witness};
use crate::error::{Error, Result};

/// `D^(l+1)` from every `width`-subset of `prev`'s columns.
///
/// Each subset is read as a data matrix with a bias column appended; witness
/// `(a, c)` is stored as weights `a`, shift `−c` and the subset's columns.
pub fn deep_construct(prev: &ArrangementMatrix, width: usize, budget: u128) -> Result<ArrangementMatrix> {
    check_width(prev, width)?;
    let subsets = binomial(prev.p(), width);
    if subsets > budget {
        return Err(Error::BudgetExceeded {
            subsets,
            budget,
            advice: "use deep_construct_sampled to draw column subsets at random",
        });
    }
    let combos: Vec<Vec<usize>> = (0..prev.p()).combinations(width).collect();
    build(prev, &combos)
}

/// Like [`deep_construct`] over `subsets` uniformly drawn column subsets.
pub fn deep_construct_sampled(
    prev: &ArrangementMatrix,
    width: usize,
    subsets: usize,
    seed: u64,
) -> Result<ArrangementMatrix> {
    check_width(prev, width)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let combos: Vec<Vec<usize>> = (0..subsets)
        .map(|_| {
            let mut s = sample(&mut rng, prev.p(), width).into_vec();
            s.sort_unstable();
            s
        })
        .collect();
    build(prev, &combos)
}

fn check_width(prev: &ArrangementMatrix, width: usize) -> Result<()> {
    if width == 0 || width > prev.p() {
        return Err(Error::InvalidArgument(format!(
            "width must be in 1..={}, got {width}",
            prev.p()
        )));
    }
    Ok(())
}

fn binomial(n: usize, k: usize) -> u128 {
    (0..k as u128).fold(1u128, |acc, i| acc * (n as u128 - i) / (i + 1))
}

fn build(prev: &ArrangementMatrix, combos: &[Vec<usize>]) -> Result<ArrangementMatrix> {
    let d = prev.to_dense();
    let n = prev.n();
    let per_subset: Vec<Vec<ArrangementPattern>> = combos
        .par_iter()
        .map(|cols| {
            let ds = d.select_columns(cols);
            let x = ds.clone().insert_column(cols.len(), 1.0);
            let local = enumerate_matrix(&x, DEFAULT_BUDGET)?;
            Ok(local
                .patterns()
                .iter()
                .map(|p| {
                    let w = &p.witness.as_ref().expect("exact patterns carry witnesses").weights;
                    let witness = Witness {
                        weights: w[..cols.len()].to_vec(),
                        shift: -w[cols.len()],
                        columns: Some(cols.clone()),
                    };
                    debug_assert_eq!(witness.evaluate(&d), p.bits.to_bools());
                    ArrangementPattern {
                        bits: p.bits.clone(),
                        witness: Some(witness),
                    }
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    ArrangementMatrix::from_patterns(n, prev.layer() + 1, per_subset.into_iter().flatten())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use crate::arrangements::{enumerate_matrix, is_complete, PatternBits};

    fn first_layer() -> ArrangementMatrix {
        let x = DMatrix::from_row_slice(3, 2, &[-1.0, 1.0, 0.0, 1.0, 1.0, 1.0]);
        enumerate_matrix(&x, DEFAULT_BUDGET).unwrap()
    }

    #[test]
    fn second_layer_is_complete() {
        let d1 = first_layer();
        let d2 = deep_construct(&d1, 2, 1000).unwrap();
        assert_eq!(d2.p(), 8);
        assert_eq!(d2.layer(), 2);
        assert!(is_complete(&d2).unwrap());
        for p in d2.patterns() {
            assert_eq!(p.witness.as_ref().unwrap().evaluate(&d1.to_dense()), p.bits.to_bools());
        }
    }

    #[test]
    fn single_block_matches_display() {
        // columns 001 and 110 of the first layer
        let d1 = first_layer();
        let a = d1.index_of(&"001".parse().unwrap()).unwrap();
        let b = d1.index_of(&"110".parse().unwrap()).unwrap();
        let x = d1.to_dense().select_columns(&[a, b]).insert_column(2, 1.0);
        let block = enumerate_matrix(&x, DEFAULT_BUDGET).unwrap();
        assert_eq!(block.bit_strings(), vec!["000", "001", "110", "111"]);
    }

    #[test]
    fn all_ones_column() {
        let ones = ArrangementMatrix::from_patterns(
            4,
            1,
            [ArrangementPattern {
                bits: PatternBits::from_bools(&[true; 4]),
                witness: None,
            }],
        )
        .unwrap();
        let d2 = deep_construct(&ones, 1, 10).unwrap();
        assert_eq!(d2.bit_strings(), vec!["0000", "1111"]);
    }

    #[test]
    fn width_monotone() {
        let d1 = first_layer();
        let narrow = deep_construct(&d1, 1, 1000).unwrap();
        let wide = deep_construct(&d1, 2, 1000).unwrap();
        assert!(narrow.patterns().iter().all(|p| wide.contains(&p.bits)));
    }

    #[test]
    fn guards() {
        let d1 = first_layer();
        assert!(matches!(deep_construct(&d1, 3, 5), Err(Error::BudgetExceeded { subsets: 20, .. })));
        assert!(deep_construct(&d1, 7, 1000).is_err());
        let sampled = deep_construct_sampled(&d1, 2, 40, 9).unwrap();
        assert_eq!(sampled, deep_construct_sampled(&d1, 2, 40, 9).unwrap());
        assert!(sampled.patterns().iter().all(|p| deep_construct(&d1, 2, 1000).unwrap().contains(&p.bits)));
    }
}
