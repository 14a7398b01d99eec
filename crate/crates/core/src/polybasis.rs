//! Multivariate monomial bases of bounded total degree in graded reverse
//! lexicographic (grevlex) order.
//!
//! The basis is stored together with its parent decomposition: every monomial
//! beyond the constant factors as `phi_i = x_u * phi_s` for some earlier basis
//! element `phi_s` (position `s < i`) and coordinate `u`. All recurrences in
//! [`crate::garnoldi`] are driven by these `(s, u)` links instead of the
//! monomials themselves.
//!
//! Positions are 0-based throughout the API; the mathematical convention that
//! numbers the basis `phi_1, ..., phi_g` shifts everything by one.

use std::cmp::Ordering;
use std::collections::HashMap;

use thiserror::Error;

/// Largest basis size we are willing to enumerate.
const MAX_BASIS_SIZE: u128 = 1 << 24;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BasisError {
    #[error("ambient dimension must be at least 1")]
    ZeroDimension,
    #[error("basis of degree {degree} in dimension {dim} has more than {MAX_BASIS_SIZE} elements")]
    SizeOverflow { dim: usize, degree: u32 },
}

/// Exponent vector of one monomial.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    exponents: Vec<u32>,
}

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        assert!(
            !exponents.is_empty(),
            "multi-index needs at least one coordinate"
        );
        Self { exponents }
    }

    pub fn dim(&self) -> usize {
        self.exponents.len()
    }

    pub fn total_degree(&self) -> u32 {
        self.exponents.iter().sum()
    }

    pub fn exponents(&self) -> &[u32] {
        &self.exponents
    }
}

/// Grevlex position order: ascending total degree, ties broken so that the
/// grevlex-largest monomial of a degree class comes first. Comparing the
/// reversed exponent vectors lexicographically produces exactly that order.
fn grevlex_position_cmp(a: &[u32], b: &[u32]) -> Ordering {
    let da: u32 = a.iter().sum();
    let db: u32 = b.iter().sum();
    da.cmp(&db).then_with(|| a.iter().rev().cmp(b.iter().rev()))
}

/// All monomials of total degree `<= degree` in `dim` variables, grevlex
/// ordered, with precomputed parent links.
#[derive(Debug, Clone, PartialEq)]
pub struct MonomialBasis {
    dim: usize,
    degree: u32,
    indices: Vec<MultiIndex>,
    /// `(s, u)` for every position `i >= 1`: `indices[i]` equals `indices[s]`
    /// with exponent `u` raised by one, `s` minimal.
    parents: Vec<(usize, usize)>,
}

/// Enumerate the monomial basis of `P_{dim, degree}`.
///
/// The result is deterministic: position 0 is the constant monomial, total
/// degree never decreases along the list, and within a degree class monomials
/// follow the grevlex tie-break.
pub fn enumerate_basis(dim: usize, degree: u32) -> Result<MonomialBasis, BasisError> {
    if dim == 0 {
        return Err(BasisError::ZeroDimension);
    }
    let g = binomial(degree as u128 + dim as u128, dim as u128)
        .filter(|&g| g <= MAX_BASIS_SIZE)
        .ok_or(BasisError::SizeOverflow { dim, degree })? as usize;

    let mut indices = Vec::with_capacity(g);
    let mut scratch = vec![0u32; dim];
    collect_exponents(0, degree, &mut scratch, &mut indices);
    indices.sort_by(|a, b| grevlex_position_cmp(a.exponents(), b.exponents()));
    debug_assert_eq!(indices.len(), g);

    let position: HashMap<&[u32], usize> = indices
        .iter()
        .enumerate()
        .map(|(i, mi)| (mi.exponents(), i))
        .collect();

    // The minimal parent divides out the last nonzero coordinate: among the
    // quotients phi_i / x_u (all of equal degree), lowering the rightmost
    // exponent yields the grevlex-earliest one.
    let mut parents = Vec::with_capacity(g.saturating_sub(1));
    for mi in indices.iter().skip(1) {
        let exps = mi.exponents();
        let u = exps
            .iter()
            .rposition(|&e| e > 0)
            .expect("non-constant monomial has a nonzero exponent");
        let mut quotient = exps.to_vec();
        quotient[u] -= 1;
        let s = position[quotient.as_slice()];
        parents.push((s, u));
    }

    Ok(MonomialBasis {
        dim,
        degree,
        indices,
        parents,
    })
}

fn collect_exponents(coord: usize, budget: u32, scratch: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
    if coord == scratch.len() {
        out.push(MultiIndex::new(scratch.clone()));
        return;
    }
    for e in 0..=budget {
        scratch[coord] = e;
        collect_exponents(coord + 1, budget - e, scratch, out);
    }
    scratch[coord] = 0;
}

fn binomial(n: u128, k: u128) -> Option<u128> {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul(n - i)?;
        acc /= i + 1;
    }
    Some(acc)
}

impl MonomialBasis {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    /// Number of basis elements `g = binomial(degree + dim, dim)`.
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn monomial(&self, i: usize) -> &MultiIndex {
        &self.indices[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &MultiIndex> {
        self.indices.iter()
    }

    /// Parent decomposition of position `i >= 1`: the pair `(s, u)` with
    /// `indices[i] = x_u * indices[s]` and `s` minimal.
    pub fn parent(&self, i: usize) -> (usize, usize) {
        assert!(
            i >= 1 && i < self.len(),
            "parent is defined for positions 1..{}",
            self.len()
        );
        self.parents[i - 1]
    }
}

/// Highest derivative order carried through the stacked evaluations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivOrder {
    Value,
    First,
    Second,
}

impl DerivOrder {
    pub fn order(self) -> u8 {
        match self {
            DerivOrder::Value => 0,
            DerivOrder::First => 1,
            DerivOrder::Second => 2,
        }
    }

    pub fn from_order(order: u8) -> Option<Self> {
        match order {
            0 => Some(DerivOrder::Value),
            1 => Some(DerivOrder::First),
            2 => Some(DerivOrder::Second),
            _ => None,
        }
    }

    /// Length of the per-point stacked vector: the value, then `dim` first
    /// partials, then the upper triangle of second partials.
    pub fn stacked_dim(self, dim: usize) -> usize {
        match self {
            DerivOrder::Value => 1,
            DerivOrder::First => 1 + dim,
            DerivOrder::Second => 1 + dim + dim * (dim + 1) / 2,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exps(basis: &MonomialBasis) -> Vec<Vec<u32>> {
        basis.iter().map(|mi| mi.exponents().to_vec()).collect()
    }

    /// Reference comparator, written from the definition: graded, ties broken
    /// by the sign of the last nonzero entry of the difference.
    fn reference_grevlex_cmp(a: &[u32], b: &[u32]) -> Ordering {
        let da: i64 = a.iter().map(|&e| e as i64).sum();
        let db: i64 = b.iter().map(|&e| e as i64).sum();
        if da != db {
            return da.cmp(&db);
        }
        for k in (0..a.len()).rev() {
            let diff = a[k] as i64 - b[k] as i64;
            if diff != 0 {
                // last nonzero difference negative => a is grevlex-larger => a first
                return if diff < 0 {
                    Ordering::Less
                } else {
                    Ordering::Greater
                };
            }
        }
        Ordering::Equal
    }

    /// Exhaustive parent search: smallest s < i whose exponent vector matches
    /// indices[i] with one coordinate lowered.
    fn reference_parent(basis: &MonomialBasis, i: usize) -> (usize, usize) {
        let target = basis.monomial(i).exponents();
        for s in 0..i {
            let cand = basis.monomial(s).exponents();
            let mut u = None;
            let mut ok = true;
            for k in 0..target.len() {
                match target[k] as i64 - cand[k] as i64 {
                    0 => {}
                    1 if u.is_none() => u = Some(k),
                    _ => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                if let Some(u) = u {
                    return (s, u);
                }
            }
        }
        panic!("no parent found for position {i}");
    }

    #[test]
    fn rejects_zero_dimension() {
        assert_eq!(
            enumerate_basis(0, 3).unwrap_err(),
            BasisError::ZeroDimension
        );
    }

    #[test]
    fn rejects_oversized_basis() {
        assert!(matches!(
            enumerate_basis(30, 10_000),
            Err(BasisError::SizeOverflow { .. })
        ));
    }

    #[test]
    fn basis_size_d2_n6() {
        // binomial(8, 2) = 28
        assert_eq!(enumerate_basis(2, 6).unwrap().len(), 28);
    }

    #[test]
    fn univariate_cubic_basis_and_parents() {
        let basis = enumerate_basis(1, 3).unwrap();
        assert_eq!(exps(&basis), vec![vec![0], vec![1], vec![2], vec![3]]);
        for i in 1..4 {
            assert_eq!(basis.parent(i), (i - 1, 0));
        }
    }

    #[test]
    fn grevlex_order_d2_n2() {
        let basis = enumerate_basis(2, 2).unwrap();
        // Oracle: sort every exponent vector of degree <= 2 with the reference
        // comparator.
        let mut expected = vec![
            vec![0, 0],
            vec![1, 0],
            vec![0, 1],
            vec![2, 0],
            vec![1, 1],
            vec![0, 2],
        ];
        expected.sort_by(|a, b| reference_grevlex_cmp(a, b));
        assert_eq!(exps(&basis), expected);
        // Frozen expectation: 1, x1, x2, x1^2, x1*x2, x2^2.
        assert_eq!(
            exps(&basis),
            vec![
                vec![0, 0],
                vec![1, 0],
                vec![0, 1],
                vec![2, 0],
                vec![1, 1],
                vec![0, 2]
            ]
        );
    }

    #[test]
    fn enumeration_matches_reference_comparator() {
        for dim in 1..=4 {
            for degree in 0..=6 {
                let basis = enumerate_basis(dim, degree).unwrap();
                let mut expected = exps(&basis);
                expected.sort_by(|a, b| reference_grevlex_cmp(a, b));
                assert_eq!(exps(&basis), expected, "dim {dim} degree {degree}");
            }
        }
    }

    #[test]
    fn parent_of_x1x2_is_x1_times_coordinate_2() {
        let basis = enumerate_basis(2, 2).unwrap();
        // position 4 holds x1*x2; spec speaks 1-based: i=5 -> (s=2, u=2).
        assert_eq!(basis.monomial(4).exponents(), &[1, 1]);
        assert_eq!(basis.parent(4), (1, 1));
        assert_eq!(basis.parent(4), reference_parent(&basis, 4));
    }

    #[test]
    fn degree_one_parents_are_the_constant() {
        let basis = enumerate_basis(3, 2).unwrap();
        for i in 1..=3 {
            let (s, u) = basis.parent(i);
            assert_eq!(s, 0);
            assert_eq!(basis.monomial(i).exponents()[u], 1);
        }
    }

    #[test]
    fn parent_of_x3_squared() {
        let basis = enumerate_basis(3, 2).unwrap();
        let i = basis
            .iter()
            .position(|mi| mi.exponents() == [0, 0, 2])
            .unwrap();
        let x3 = basis
            .iter()
            .position(|mi| mi.exponents() == [0, 0, 1])
            .unwrap();
        assert_eq!(basis.parent(i), (x3, 2));
        assert_eq!(basis.parent(i), reference_parent(&basis, i));
    }

    #[test]
    fn parents_match_exhaustive_search() {
        for dim in 1..=3 {
            for degree in 0..=5 {
                let basis = enumerate_basis(dim, degree).unwrap();
                for i in 1..basis.len() {
                    assert_eq!(
                        basis.parent(i),
                        reference_parent(&basis, i),
                        "dim {dim} degree {degree} position {i}"
                    );
                }
            }
        }
    }

    #[test]
    fn parent_links_reconstruct_every_monomial() {
        for dim in 1..=4 {
            for degree in [1u32, 4, 10] {
                if dim == 4 && degree == 10 {
                    continue; // 1001 entries is plenty below
                }
                let basis = enumerate_basis(dim, degree).unwrap();
                for i in 0..basis.len() {
                    let mut acc = vec![0u32; dim];
                    let mut pos = i;
                    while pos >= 1 {
                        let (s, u) = basis.parent(pos);
                        acc[u] += 1;
                        pos = s;
                    }
                    assert_eq!(
                        acc,
                        basis.monomial(i).exponents(),
                        "dim {dim} degree {degree}"
                    );
                }
            }
        }
        // the d=4, n=10 case from the stated invariant range
        let basis = enumerate_basis(4, 10).unwrap();
        assert_eq!(basis.len(), 1001);
        for i in 1..basis.len() {
            let (s, u) = basis.parent(i);
            let mut rebuilt = basis.monomial(s).exponents().to_vec();
            rebuilt[u] += 1;
            assert_eq!(rebuilt, basis.monomial(i).exponents());
        }
    }

    #[test]
    fn span_closure_below_parent() {
        // For j <= s_i - 1 the product x_{u_i} * phi_j appears strictly before i.
        for (dim, degree) in [(2usize, 6u32), (3, 4)] {
            let basis = enumerate_basis(dim, degree).unwrap();
            let position: HashMap<Vec<u32>, usize> = basis
                .iter()
                .enumerate()
                .map(|(i, mi)| (mi.exponents().to_vec(), i))
                .collect();
            for i in 1..basis.len() {
                let (s, u) = basis.parent(i);
                for j in 0..s {
                    let mut prod = basis.monomial(j).exponents().to_vec();
                    prod[u] += 1;
                    let pos = position[&prod];
                    assert!(pos < i, "x_{u} * phi_{j} lands at {pos}, not before {i}");
                }
            }
        }
    }

    #[test]
    fn enumeration_is_pure() {
        let a = enumerate_basis(3, 5).unwrap();
        let b = enumerate_basis(3, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn stacked_dims() {
        assert_eq!(DerivOrder::Value.stacked_dim(2), 1);
        assert_eq!(DerivOrder::First.stacked_dim(2), 3);
        assert_eq!(DerivOrder::Second.stacked_dim(2), 6);
        assert_eq!(DerivOrder::Second.stacked_dim(3), 10);
    }
}
