//! Two-dimensional on-grid recovery with structure found by masking a
//! regularized least-squares image.

use std::path::Path;

use siht::isp::{fibonacci_sphere_detectors, grid_2d, sensing_matrix, AngleGrid};
use siht::numerics::{default_lambda, norm2, sub, tikhonov_least_squares, ComplexMatrix};
use siht::preprocessing::{assign_budgets, connected_regions, mask_by_mean_multiple, Adjacency};
use siht::rng::CounterRng;
use siht::thresholding::support;
use siht::{iht_solve, structured_iht_solve, Complex64, SolveConfig};

use crate::config::{ExperimentConfig, ExperimentKind, Masked2dSection};
use crate::error::{ExpError, ExpResult, Stage};
use crate::output::{heatmap, Artifacts, Cell, Table};
use crate::{ensure_dir, real};

const MAX_DRAWS: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    /// Grid indices, increasing.
    pub support: Vec<usize>,
    pub amplitudes: Vec<f64>,
}

/// Sources on distinct cells off the pole row, pairwise at least
/// `min_separation` cells apart in the max norm (azimuth wraps).
pub fn sample_scene(m: &Masked2dSection, seed: u64) -> ExpResult<Scene> {
    let (n1, n2) = (m.n1, m.n2);
    let rows = n2 - 1;
    let mut rng = CounterRng::new(seed, 0x2D);
    let mut cells: Vec<(usize, usize)> = Vec::with_capacity(m.sources);
    let mut draws = 0;
    while cells.len() < m.sources {
        draws += 1;
        if draws > MAX_DRAWS {
            return Err(ExpError::Config(format!(
                "cannot place {} sources {} cells apart on a {n1} x {n2} grid",
                m.sources, m.min_separation
            )));
        }
        let c = (rng.below(n1 as u64) as usize, rng.below(rows as u64) as usize);
        let far = cells.iter().all(|&(a, b)| {
            let dm = a.abs_diff(c.0);
            let dm = dm.min(n1 - dm);
            dm.max(b.abs_diff(c.1)) >= m.min_separation.max(1)
        });
        if far {
            cells.push(c);
        }
    }
    let [lo, hi] = m.amplitude_range;
    let mut pairs: Vec<(usize, f64)> = cells.iter().map(|&(a, b)| (a + n1 * b, rng.uniform_range(lo, hi))).collect();
    pairs.sort_by_key(|p| p.0);
    Ok(Scene {
        support: pairs.iter().map(|p| p.0).collect(),
        amplitudes: pairs.iter().map(|p| p.1).collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariantResult {
    pub name: &'static str,
    pub regions: Vec<Vec<usize>>,
    pub budgets: Vec<usize>,
    pub siht_support_match: bool,
    pub iht_support_match: bool,
    pub siht_a_err: f64,
    pub iht_a_err: f64,
    pub stages: Table,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskedOutput {
    pub scene: Scene,
    pub variants: Vec<VariantResult>,
    pub summary: Table,
    pub artifacts: Artifacts,
}

impl MaskedOutput {
    pub fn variant(&self, name: &str) -> Option<&VariantResult> {
        self.variants.iter().find(|v| v.name == name)
    }
}

struct Setup<'a> {
    a: &'a ComplexMatrix,
    grid: &'a AngleGrid,
    m: &'a Masked2dSection,
    solve: &'a SolveConfig,
}

fn run_variant(s: &Setup, name: &'static str, support_idx: &[usize], amps: &[f64], extra: usize) -> ExpResult<VariantResult> {
    let n = s.a.cols();
    let mut truth = vec![real(0.0); n];
    for (&j, &v) in support_idx.iter().zip(amps) {
        truth[j] = real(v);
    }
    let b = s.a.apply(&truth).stage("data")?;
    let lambda = s.m.lambda.unwrap_or_else(|| default_lambda(s.a));
    let ls = tikhonov_least_squares(s.a, &b, lambda).stage("least squares")?;
    let mask = mask_by_mean_multiple(&ls, s.m.mask_factor).stage("mask")?;
    let adjacency = if s.m.eight_neighbour { Adjacency::Eight } else { Adjacency::Four };
    let regions = connected_regions(&mask, s.grid, adjacency).stage("regions")?;
    let ss = assign_budgets(&ls, &regions, support_idx.len()).stage("budgets")?.inflated(extra);
    let (xs, _) = structured_iht_solve(s.a, &b, &ss, s.solve, None).stage("structured iht")?;
    let (xi, _) = iht_solve(s.a, &b, support_idx.len(), s.solve, None).stage("iht")?;

    let mut region_of = vec![-1i64; n];
    for (r, region) in regions.iter().enumerate() {
        for &j in region {
            region_of[j] = r as i64;
        }
    }
    let mut in_mask = vec![false; n];
    for &j in &mask {
        in_mask[j] = true;
    }
    let mut stages = Table::new(&["j", "theta_index", "phi_index", "truth", "least_squares", "mask", "region", "siht", "iht"]);
    for j in 0..n {
        let (p, q) = s.grid.lattice_position(j).expect("lattice grid");
        stages.push(vec![
            j.into(),
            p.into(),
            q.into(),
            truth[j].norm().into(),
            ls[j].norm().into(),
            in_mask[j].into(),
            Cell::Int(region_of[j]),
            xs[j].norm().into(),
            xi[j].norm().into(),
        ]);
    }
    let a_err = |x: &[Complex64]| norm2(&sub(x, &truth));
    Ok(VariantResult {
        name,
        budgets: ss.budgets().to_vec(),
        regions,
        siht_support_match: support(&xs) == support_idx,
        iht_support_match: support(&xi) == support_idx,
        siht_a_err: a_err(&xs),
        iht_a_err: a_err(&xi),
        stages,
    })
}

pub fn run_masked_2d(cfg: &ExperimentConfig, out: &Path) -> ExpResult<MaskedOutput> {
    cfg.validate(ExperimentKind::Masked2d)?;
    ensure_dir(out)?;
    let m = &cfg.masked_2d;
    let det = fibonacci_sphere_detectors(m.detectors, m.omega_r).stage("detectors")?;
    let grid = grid_2d(m.n1, m.n2).stage("grid")?;
    let a = sensing_matrix(&det, &grid).stage("sensing matrix")?;
    let scene = sample_scene(m, cfg.seed)?;
    let solve = cfg.solver.solve_config();
    let setup = Setup {
        a: &a,
        grid: &grid,
        m,
        solve: &solve,
    };
    let ones = vec![1.0; scene.amplitudes.len()];
    let variants = vec![
        run_variant(&setup, "model", &scene.support, &scene.amplitudes, 0)?,
        run_variant(&setup, "equal_amplitude", &scene.support, &ones, 0)?,
        run_variant(&setup, "inflated", &scene.support, &scene.amplitudes, m.inflation)?,
    ];

    let mut artifacts = Artifacts::default();
    let mut summary = Table::new(&[
        "variant",
        "regions",
        "budgets",
        "siht_support_match",
        "iht_support_match",
        "siht_a_err",
        "iht_a_err",
    ]);
    for v in &variants {
        let budgets: Vec<String> = v.budgets.iter().map(|b| b.to_string()).collect();
        summary.push(vec![
            v.name.into(),
            v.regions.len().into(),
            budgets.join(";").into(),
            v.siht_support_match.into(),
            v.iht_support_match.into(),
            v.siht_a_err.into(),
            v.iht_a_err.into(),
        ]);
        artifacts.csv(out, &format!("masked_2d_{}.csv", v.name), &v.stages)?;
        for stage in ["truth", "least_squares", "siht", "iht"] {
            let values = v.stages.column(stage);
            // Rows of the picture run over the polar index.
            let svg = heatmap(&format!("{} ({})", stage, v.name), "azimuth index", "polar index", m.n2, m.n1, &values);
            artifacts.svg(out, &format!("masked_2d_{}_{stage}.svg", v.name), &svg)?;
        }
        log::info!(
            "masked 2d {}: budgets {:?}, siht exact {}, iht exact {}",
            v.name,
            v.budgets,
            v.siht_support_match,
            v.iht_support_match
        );
    }
    artifacts.csv(out, "masked_2d_summary.csv", &summary)?;
    Ok(MaskedOutput {
        scene,
        variants,
        summary,
        artifacts,
    })
}
