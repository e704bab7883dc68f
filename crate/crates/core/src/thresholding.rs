//! Global and set-local hard thresholding.
//!
//! Ties between equal magnitudes always keep the lowest index, so every
//! operator here is a deterministic function of its input.

use std::cmp::Ordering;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::ComplexVector;

/// Disjoint index sets with a sparsity budget for each.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparsityStructure {
    sets: Vec<Vec<usize>>,
    budgets: Vec<usize>,
    ambient_length: usize,
}

impl SparsityStructure {
    /// Validates disjointness, index range and `k_j <= |S_j|`. Each set is
    /// stored sorted.
    pub fn new(sets: Vec<Vec<usize>>, budgets: Vec<usize>, ambient_length: usize) -> Result<Self> {
        if sets.len() != budgets.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} sets but {} budgets",
                sets.len(),
                budgets.len()
            )));
        }
        let mut seen = vec![false; ambient_length];
        let mut sorted = Vec::with_capacity(sets.len());
        for (set, &k) in sets.into_iter().zip(&budgets) {
            let mut set = set;
            set.sort_unstable();
            for &i in &set {
                if i >= ambient_length {
                    return Err(Error::IndexOutOfRange {
                        index: i,
                        len: ambient_length,
                    });
                }
                if seen[i] {
                    return Err(Error::OverlappingSets(i));
                }
                seen[i] = true;
            }
            if k > set.len() {
                return Err(Error::BudgetTooLarge {
                    budget: k,
                    len: set.len(),
                });
            }
            sorted.push(set);
        }
        Ok(Self {
            sets: sorted,
            budgets,
            ambient_length,
        })
    }

    /// One set covering every index.
    pub fn full_cover(n: usize, k: usize) -> Result<Self> {
        Self::new(vec![(0..n).collect()], vec![k], n)
    }

    /// `L` contiguous blocks `{(j-1)N/L, ..., jN/L - 1}` (0-based) with budgets
    /// read off the support of `truth`.
    pub fn uniform_split(n: usize, l: usize, truth_support: &[usize]) -> Result<Self> {
        if l == 0 || l > n {
            return Err(Error::InvalidArgument(format!("cannot split {n} indices into {l} blocks")));
        }
        let sets: Vec<Vec<usize>> = (0..l).map(|j| (j * n / l..(j + 1) * n / l).collect()).collect();
        let budgets = sets
            .iter()
            .map(|s| truth_support.iter().filter(|&&i| s.first().is_some_and(|&a| i >= a) && s.last().is_some_and(|&b| i <= b)).count())
            .collect();
        Self::new(sets, budgets, n)
    }

    pub fn sets(&self) -> &[Vec<usize>] {
        &self.sets
    }

    pub fn budgets(&self) -> &[usize] {
        &self.budgets
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn ambient_length(&self) -> usize {
        self.ambient_length
    }

    pub fn total_budget(&self) -> usize {
        self.budgets.iter().sum()
    }

    /// Same sets, every budget raised by `extra` (capped at the set size).
    pub fn inflated(&self, extra: usize) -> Self {
        let budgets = self
            .sets
            .iter()
            .zip(&self.budgets)
            .map(|(s, &k)| (k + extra).min(s.len()))
            .collect();
        Self {
            sets: self.sets.clone(),
            budgets,
            ambient_length: self.ambient_length,
        }
    }

    /// Set index of every position, `None` outside the union.
    pub fn membership(&self) -> Vec<Option<usize>> {
        let mut m = vec![None; self.ambient_length];
        for (j, s) in self.sets.iter().enumerate() {
            for &i in s {
                m[i] = Some(j);
            }
        }
        m
    }

    /// Copy with sets taken in the given order.
    pub fn reordered(&self, order: &[usize]) -> Self {
        Self {
            sets: order.iter().map(|&j| self.sets[j].clone()).collect(),
            budgets: order.iter().map(|&j| self.budgets[j]).collect(),
            ambient_length: self.ambient_length,
        }
    }
}

fn by_magnitude_then_index(v: &[Complex64]) -> impl Fn(&usize, &usize) -> Ordering + '_ {
    move |&a, &b| {
        v[b].norm_sqr()
            .partial_cmp(&v[a].norm_sqr())
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    }
}

/// Positions of the `k` largest-magnitude entries among `candidates`.
fn top_k(v: &[Complex64], candidates: &[usize], k: usize) -> Vec<usize> {
    let mut idx = candidates.to_vec();
    let cmp = by_magnitude_then_index(v);
    if k < idx.len() {
        if k > 0 {
            idx.select_nth_unstable_by(k - 1, &cmp);
        }
        idx.truncate(k);
    }
    idx
}

/// Keeps the `k` largest entries in modulus, zeroing the rest.
pub fn hard_threshold(v: &[Complex64], k: usize) -> Result<ComplexVector> {
    if k > v.len() {
        return Err(Error::BudgetTooLarge { budget: k, len: v.len() });
    }
    let all: Vec<usize> = (0..v.len()).collect();
    let mut out = vec![Complex64::new(0.0, 0.0); v.len()];
    for i in top_k(v, &all, k) {
        out[i] = v[i];
    }
    Ok(out)
}

/// Hard threshold restricted to `set`, leaving other entries untouched.
pub fn local_threshold(v: &[Complex64], set: &[usize], k: usize) -> Result<ComplexVector> {
    let mut out = v.to_vec();
    local_threshold_in_place(&mut out, set, k)?;
    Ok(out)
}

fn local_threshold_in_place(v: &mut [Complex64], set: &[usize], k: usize) -> Result<()> {
    if let Some(&bad) = set.iter().find(|&&i| i >= v.len()) {
        return Err(Error::IndexOutOfRange { index: bad, len: v.len() });
    }
    if k > set.len() {
        return Err(Error::BudgetTooLarge { budget: k, len: set.len() });
    }
    if k == set.len() {
        return Ok(());
    }
    let keep = top_k(v, set, k);
    let mut saved: Vec<(usize, Complex64)> = keep.iter().map(|&i| (i, v[i])).collect();
    for &i in set {
        v[i] = Complex64::new(0.0, 0.0);
    }
    for (i, z) in saved.drain(..) {
        v[i] = z;
    }
    Ok(())
}

/// Composition of every local threshold of `ss`. With `zero_outside`, entries
/// outside the union of the sets are also cleared.
pub fn structured_threshold(v: &[Complex64], ss: &SparsityStructure, zero_outside: bool) -> Result<ComplexVector> {
    if ss.ambient_length() != v.len() {
        return Err(Error::DimensionMismatch(format!(
            "structure over {} indices applied to a vector of length {}",
            ss.ambient_length(),
            v.len()
        )));
    }
    let mut out = v.to_vec();
    for (set, &k) in ss.sets().iter().zip(ss.budgets()) {
        local_threshold_in_place(&mut out, set, k)?;
    }
    if zero_outside {
        for (o, m) in out.iter_mut().zip(ss.membership()) {
            if m.is_none() {
                *o = Complex64::new(0.0, 0.0);
            }
        }
    }
    Ok(out)
}

/// Indices of nonzero entries.
pub fn support(v: &[Complex64]) -> Vec<usize> {
    v.iter()
        .enumerate()
        .filter(|(_, z)| z.norm_sqr() > 0.0)
        .map(|(i, _)| i)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;
    use proptest::prelude::*;

    fn real(v: &[f64]) -> ComplexVector {
        v.iter().map(|&x| Complex64::new(x, 0.0)).collect()
    }

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, n - 1);
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn keeps_two_clear_maxima() {
        let out = hard_threshold(&real(&[3.0, -5.0, 1.0, 0.0]), 2).unwrap();
        assert_eq!(out, real(&[3.0, -5.0, 0.0, 0.0]));
    }

    #[test]
    fn empty_budget_and_oversized_budget() {
        assert_eq!(hard_threshold(&real(&[1.0, 2.0]), 0).unwrap(), real(&[0.0, 0.0]));
        assert_eq!(
            hard_threshold(&real(&[1.0, 2.0]), 3),
            Err(Error::BudgetTooLarge { budget: 3, len: 2 })
        );
    }

    #[test]
    fn ties_keep_lowest_index() {
        assert_eq!(hard_threshold(&real(&[2.0, -2.0]), 1).unwrap(), real(&[2.0, 0.0]));
        let v = vec![Complex64::new(0.0, 1.0), Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)];
        let out = hard_threshold(&v, 2).unwrap();
        assert_eq!(out, vec![v[0], v[1], Complex64::new(0.0, 0.0)]);
    }

    #[test]
    fn local_threshold_examples() {
        let v = real(&[5.0, 1.0, 2.0]);
        assert_eq!(local_threshold(&v, &[1, 2], 1).unwrap(), real(&[5.0, 0.0, 2.0]));
        assert_eq!(local_threshold(&v, &[0, 1, 2], 1).unwrap(), hard_threshold(&v, 1).unwrap());
        assert_eq!(local_threshold(&v, &[1, 2], 2).unwrap(), v);
        assert_eq!(
            local_threshold(&v, &[1, 3], 1),
            Err(Error::IndexOutOfRange { index: 3, len: 3 })
        );
    }

    #[test]
    fn structured_threshold_per_set_maxima() {
        let v = real(&[1.0, 3.0, 2.0, 0.5, 0.4]);
        let ss = SparsityStructure::new(vec![vec![0, 1, 2], vec![3, 4]], vec![1, 1], 5).unwrap();
        assert_eq!(structured_threshold(&v, &ss, false).unwrap(), real(&[0.0, 3.0, 0.0, 0.5, 0.0]));
    }

    #[test]
    fn single_full_set_reduces_to_global() {
        let mut rng = CounterRng::new(3, 0);
        let v: ComplexVector = (0..20).map(|_| rng.complex_normal()).collect();
        let ss = SparsityStructure::full_cover(20, 4).unwrap();
        assert_eq!(structured_threshold(&v, &ss, false).unwrap(), hard_threshold(&v, 4).unwrap());
    }

    #[test]
    fn zero_outside_modes() {
        let v = real(&[1.0, 3.0, 2.0, 0.5, 0.4]);
        let ss = SparsityStructure::new(vec![vec![1, 2]], vec![1], 5).unwrap();
        assert_eq!(structured_threshold(&v, &ss, false).unwrap(), real(&[1.0, 3.0, 0.0, 0.5, 0.4]));
        assert_eq!(structured_threshold(&v, &ss, true).unwrap(), real(&[0.0, 3.0, 0.0, 0.0, 0.0]));
    }

    #[test]
    fn structure_validation() {
        assert_eq!(
            SparsityStructure::new(vec![vec![0, 1], vec![1, 2]], vec![1, 1], 3),
            Err(Error::OverlappingSets(1))
        );
        assert_eq!(
            SparsityStructure::new(vec![vec![0, 5]], vec![1], 3),
            Err(Error::IndexOutOfRange { index: 5, len: 3 })
        );
        assert_eq!(
            SparsityStructure::new(vec![vec![0]], vec![2], 3),
            Err(Error::BudgetTooLarge { budget: 2, len: 1 })
        );
    }

    #[test]
    fn uniform_split_reads_budgets_from_truth() {
        let ss = SparsityStructure::uniform_split(10, 2, &[0, 3, 7]).unwrap();
        assert_eq!(ss.sets()[0], vec![0, 1, 2, 3, 4]);
        assert_eq!(ss.budgets(), &[2, 1]);
    }

    fn random_structure(rng: &mut CounterRng, n: usize, l: usize) -> SparsityStructure {
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = rng.below(i as u64 + 1) as usize;
            perm.swap(i, j);
        }
        // Leave a few indices uncovered.
        let covered = n - 2;
        let mut sets = Vec::new();
        let mut budgets = Vec::new();
        for j in 0..l {
            let s: Vec<usize> = perm[j * covered / l..(j + 1) * covered / l].to_vec();
            budgets.push(rng.below(s.len() as u64 + 1) as usize);
            sets.push(s);
        }
        SparsityStructure::new(sets, budgets, n).unwrap()
    }

    #[test]
    fn composition_order_is_irrelevant_for_all_orders() {
        let mut rng = CounterRng::new(77, 0);
        for l in 1..=4 {
            for trial in 0..10 {
                let n = 14 + trial;
                let v: ComplexVector = (0..n).map(|_| rng.complex_normal()).collect();
                let ss = random_structure(&mut rng, n, l);
                for zero_outside in [false, true] {
                    let reference = structured_threshold(&v, &ss, zero_outside).unwrap();
                    for order in permutations(l) {
                        let got = structured_threshold(&v, &ss.reordered(&order), zero_outside).unwrap();
                        assert_eq!(got, reference);
                    }
                }
            }
        }
    }

    #[test]
    fn retained_set_is_magnitude_optimal() {
        let mut rng = CounterRng::new(8, 8);
        for n in [5usize, 9, 12] {
            for k in 0..=n.min(5) {
                let v: ComplexVector = (0..n).map(|_| rng.complex_normal()).collect();
                let kept: f64 = hard_threshold(&v, k).unwrap().iter().map(|z| z.norm_sqr()).sum();
                let mut best = 0.0_f64;
                for mask in 0u32..(1 << n) {
                    if mask.count_ones() as usize != k {
                        continue;
                    }
                    let e: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| v[i].norm_sqr()).sum();
                    best = best.max(e);
                }
                assert!((kept - best).abs() <= 1e-12 * best.max(1.0));
            }
        }
    }

    proptest! {
        #[test]
        fn hard_threshold_is_a_projection(xs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..40), kf in 0.0f64..1.0) {
            let v: ComplexVector = xs.iter().map(|&(a, b)| Complex64::new(a, b)).collect();
            let k = (kf * v.len() as f64) as usize;
            let once = hard_threshold(&v, k).unwrap();
            prop_assert!(support(&once).len() <= k);
            prop_assert_eq!(hard_threshold(&once, k).unwrap(), once.clone());
            for (o, x) in once.iter().zip(&v) {
                prop_assert!(*o == Complex64::new(0.0, 0.0) || o == x);
            }
        }

        #[test]
        fn per_set_nonzero_counts(seed in 0u64..500, l in 1usize..5) {
            let mut rng = CounterRng::new(seed, 4);
            let n = 20;
            let mut v: ComplexVector = (0..n).map(|_| rng.complex_normal()).collect();
            for z in v.iter_mut() {
                if rng.uniform() < 0.3 {
                    *z = Complex64::new(0.0, 0.0);
                }
            }
            let ss = random_structure(&mut rng, n, l);
            let out = structured_threshold(&v, &ss, true).unwrap();
            for (set, &k) in ss.sets().iter().zip(ss.budgets()) {
                let in_set = set.iter().filter(|&&i| v[i].norm_sqr() > 0.0).count();
                let kept = set.iter().filter(|&&i| out[i].norm_sqr() > 0.0).count();
                prop_assert_eq!(kept, k.min(in_set));
            }
        }
    }
}
