//! Structure discovery from a least-squares image: masking, connected
//! regions on the angle lattice, and per-region budgets.

use std::collections::VecDeque;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::isp::{AngleGrid, GridShape};
use crate::thresholding::SparsityStructure;

pub const DEFAULT_MASK_FACTOR: f64 = 7.5;

/// Indices with `|x_j| > factor * mean(|x|)`, increasing.
pub fn mask_by_mean_multiple(x: &[Complex64], factor: f64) -> Result<Vec<usize>> {
    if !(factor.is_finite() && factor > 0.0) {
        return Err(Error::InvalidArgument(format!("mask factor must be positive, got {factor}")));
    }
    if x.is_empty() {
        return Ok(Vec::new());
    }
    let cutoff = factor * mask_mean(x);
    Ok((0..x.len()).filter(|&j| x[j].norm() > cutoff).collect())
}

/// `mean(|x|)`, the quantity the mask factor multiplies.
pub fn mask_mean(x: &[Complex64]) -> f64 {
    x.iter().map(|v| v.norm()).sum::<f64>() / x.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Adjacency {
    #[default]
    Four,
    Eight,
}

/// Connected components of `mask` on the grid lattice. Azimuth wraps around,
/// the polar direction does not. Components are ordered by their smallest
/// index and each is sorted.
pub fn connected_regions(mask: &[usize], grid: &AngleGrid, adjacency: Adjacency) -> Result<Vec<Vec<usize>>> {
    let (n1, n2) = match grid.shape() {
        GridShape::TwoD { n1, n2 } => (n1, n2),
        GridShape::OneD { n } => (n, 1),
        GridShape::Scattered => {
            return Err(Error::InvalidArgument("regions need a lattice grid".into()));
        }
    };
    let len = n1 * n2;
    let mut in_mask = vec![false; len];
    for &j in mask {
        if j >= len {
            return Err(Error::IndexOutOfRange { index: j, len });
        }
        in_mask[j] = true;
    }
    let offsets: &[(isize, isize)] = match adjacency {
        Adjacency::Four => &[(-1, 0), (1, 0), (0, -1), (0, 1)],
        Adjacency::Eight => &[(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)],
    };
    let mut seen = vec![false; len];
    let mut regions = Vec::new();
    let mut starts: Vec<usize> = mask.to_vec();
    starts.sort_unstable();
    for start in starts {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut region = vec![start];
        let mut queue = VecDeque::from([start]);
        while let Some(j) = queue.pop_front() {
            let (m, n) = (j % n1, j / n1);
            for &(dm, dn) in offsets {
                let nn = n as isize + dn;
                if nn < 0 || nn >= n2 as isize {
                    continue;
                }
                let mm = (m as isize + dm).rem_euclid(n1 as isize) as usize;
                let k = mm + n1 * nn as usize;
                if in_mask[k] && !seen[k] {
                    seen[k] = true;
                    region.push(k);
                    queue.push_back(k);
                }
            }
        }
        region.sort_unstable();
        regions.push(region);
    }
    Ok(regions)
}

/// Region masses `sum_{j in r} |x_j|`.
pub fn region_masses(x: &[Complex64], regions: &[Vec<usize>]) -> Vec<f64> {
    regions.iter().map(|r| r.iter().map(|&j| x[j].norm()).sum()).collect()
}

/// Budgets from masses: one per region, then each remaining unit to the
/// region with the largest `mass / assigned`, ties to the lowest index.
/// A region never receives more than its own size.
pub fn budgets_from_masses(masses: &[f64], sizes: &[usize], k_total: usize) -> Result<Vec<usize>> {
    let l = masses.len();
    if k_total < l {
        return Err(Error::TooFewSources { k: k_total, regions: l });
    }
    let capacity: usize = sizes.iter().sum();
    if k_total > capacity {
        return Err(Error::BudgetTooLarge { budget: k_total, len: capacity });
    }
    let mut budgets = vec![1usize; l];
    for _ in l..k_total {
        let mut best: Option<(usize, f64)> = None;
        for r in 0..l {
            if budgets[r] >= sizes[r] {
                continue;
            }
            let score = masses[r] / budgets[r] as f64;
            if best.map_or(true, |(_, s)| score > s) {
                best = Some((r, score));
            }
        }
        // Capacity was checked above, so some region always has room.
        let (r, _) = best.expect("a region with spare capacity");
        budgets[r] += 1;
    }
    Ok(budgets)
}

/// Structure with one set per region and budgets split by region mass.
pub fn assign_budgets(x: &[Complex64], regions: &[Vec<usize>], k_total: usize) -> Result<SparsityStructure> {
    if regions.iter().any(|r| r.is_empty()) {
        return Err(Error::EmptySet);
    }
    let masses = region_masses(x, regions);
    let sizes: Vec<usize> = regions.iter().map(Vec::len).collect();
    let budgets = budgets_from_masses(&masses, &sizes, k_total)?;
    SparsityStructure::new(regions.to_vec(), budgets, x.len())
}
