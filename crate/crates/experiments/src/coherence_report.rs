//! Normalized Gram magnitudes and coherence values of a sensing matrix.

use std::path::Path;

use siht::coherence::{coherence_table, gram_magnitudes_upper, mutual_coherence};
use siht::isp::{fibonacci_sphere_detectors, grid_1d, grid_2d, sensing_matrix};
use siht::numerics::ComplexMatrix;

use crate::config::{expand_ranges, ExperimentConfig, ExperimentKind};
use crate::error::{ExpResult, Stage};
use crate::ensure_dir;
use crate::output::{heatmap, Artifacts, Cell, Table};

/// Heatmaps of larger matrices are binned down to this many cells per side.
const MAX_PIXELS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceTables {
    /// `(j, l, |<A_j, A_l>|)` for `j < l`.
    pub gram: Table,
    /// Rows `(quantity, set_a, set_b, value)`; set columns are empty for `mu`.
    pub values: Table,
    pub mu: f64,
    pub table: Vec<Vec<f64>>,
}

pub fn coherence_tables(a: &ComplexMatrix, sets: &[Vec<usize>]) -> siht::Result<CoherenceTables> {
    let mut gram = Table::new(&["j", "l", "value"]);
    for (j, l, v) in gram_magnitudes_upper(a)? {
        gram.push(vec![j.into(), l.into(), v.into()]);
    }
    let mu = mutual_coherence(a)?;
    let table = coherence_table(a, sets)?;
    let mut values = Table::new(&["quantity", "set_a", "set_b", "value"]);
    values.push(vec!["mu".into(), "".into(), "".into(), mu.into()]);
    for (i, row) in table.iter().enumerate() {
        values.push(vec!["mu_within".into(), i.into(), i.into(), row[i].into()]);
    }
    for (i, row) in table.iter().enumerate() {
        for (j, &v) in row.iter().enumerate().skip(i + 1) {
            values.push(vec!["mu_between".into(), i.into(), j.into(), v.into()]);
        }
    }
    Ok(CoherenceTables { gram, values, mu, table })
}

impl CoherenceTables {
    pub fn value(&self, quantity: &str, a: usize, b: usize) -> Option<f64> {
        self.values.rows.iter().find_map(|r| match (&r[0], &r[1], &r[2], &r[3]) {
            (Cell::Text(q), Cell::Int(x), Cell::Int(y), Cell::Num(v)) if q == quantity && *x == a as i64 && *y == b as i64 => Some(*v),
            _ => None,
        })
    }
}

/// Upper triangle as an image, max-pooled to at most `MAX_PIXELS` per side;
/// cells strictly below the diagonal stay blank.
fn gram_image(n: usize, gram: &Table) -> (usize, Vec<f64>) {
    let side = n.min(MAX_PIXELS);
    let mut img = vec![f64::NAN; side * side];
    let js = gram.column("j");
    let ls = gram.column("l");
    let vs = gram.column("value");
    for ((j, l), v) in js.iter().zip(&ls).zip(&vs) {
        let r = *j as usize * side / n;
        let c = *l as usize * side / n;
        let cell = &mut img[r * side + c];
        if cell.is_nan() || *v > *cell {
            *cell = *v;
        }
    }
    (side, img)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceOutput {
    pub tables: CoherenceTables,
    pub artifacts: Artifacts,
}

pub fn run_coherence_report(cfg: &ExperimentConfig, out: &Path) -> ExpResult<CoherenceOutput> {
    cfg.validate(ExperimentKind::CoherenceReport)?;
    ensure_dir(out)?;
    let c = &cfg.coherence_report;
    let det = fibonacci_sphere_detectors(c.detectors, c.omega_r).stage("detectors")?;
    let grid = match (c.n1, c.n2) {
        (Some(n1), Some(n2)) => grid_2d(n1, n2),
        _ => grid_1d(c.grid),
    }
    .stage("grid")?;
    let a = sensing_matrix(&det, &grid).stage("sensing matrix")?;
    let tables = coherence_tables(&a, &expand_ranges(&c.sets)).stage("coherence")?;

    let mut artifacts = Artifacts::default();
    artifacts.csv(out, "coherence_gram.csv", &tables.gram)?;
    artifacts.csv(out, "coherence_values.csv", &tables.values)?;
    let (side, img) = gram_image(a.cols(), &tables.gram);
    artifacts.svg(
        out,
        "coherence_gram.svg",
        &heatmap("normalized Gram magnitudes", "l", "j", side, side, &img),
    )?;
    log::info!("coherence report: mu = {:.6}", tables.mu);
    Ok(CoherenceOutput { tables, artifacts })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_has_zero_off_diagonal() {
        let a = ComplexMatrix::identity(5).unwrap();
        let t = coherence_tables(&a, &[vec![0, 1], vec![3, 4]]).unwrap();
        assert_eq!(t.gram.rows.len(), 10);
        assert!(t.gram.column("value").iter().all(|&v| v == 0.0));
        assert_eq!(t.mu, 0.0);
        assert_eq!(t.value("mu_between", 0, 1), Some(0.0));
        // Only j < l is emitted.
        let (j, l) = (t.gram.column("j"), t.gram.column("l"));
        assert!(j.iter().zip(&l).all(|(a, b)| a < b));
    }

    #[test]
    fn image_pools_large_matrices() {
        let mut g = Table::new(&["j", "l", "value"]);
        g.push(vec![0usize.into(), 399usize.into(), 0.5.into()]);
        let (side, img) = gram_image(400, &g);
        assert_eq!(side, MAX_PIXELS);
        assert_eq!(img[MAX_PIXELS - 1], 0.5);
        assert!(img[MAX_PIXELS * (MAX_PIXELS - 1)].is_nan());
    }
}
