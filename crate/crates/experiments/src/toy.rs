//! Error curves of IHT and structured IHT against their contraction bounds
//! on the small one-dimensional scene.

use std::path::Path;

use siht::coherence::{contraction_bound, corollary1_bound, mutual_coherence, theorem1_bound, CoherenceReport};
use siht::isp::{fibonacci_sphere_detectors, grid_1d, sensing_matrix};
use siht::{iht_solve, structured_iht_solve, SparsityStructure};

use crate::config::{expand_ranges, ExperimentConfig, ExperimentKind};
use crate::error::{ExpResult, Stage};
use crate::output::{format_number, line_chart, Artifacts, Series, Table};
use crate::{ensure_dir, real};

#[derive(Debug, Clone, PartialEq)]
pub struct ToyCase {
    pub omega_r: f64,
    pub report: CoherenceReport,
    /// `3 mu k`.
    pub rate_iht: f64,
    /// `rho + (L - 1) rho_tilde`.
    pub rate_siht: f64,
    pub rate_column_sum: f64,
    pub curves: Table,
}

impl ToyCase {
    pub fn mu_between_max(&self) -> f64 {
        let l = self.report.set_count();
        let mut best = 0.0_f64;
        for m in 0..l {
            for n in 0..l {
                if m != n {
                    best = best.max(self.report.mu_between[m][n]);
                }
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyOutput {
    pub cases: Vec<ToyCase>,
    pub summary: Table,
    pub artifacts: Artifacts,
}

pub fn run_toy_bounds(cfg: &ExperimentConfig, out: &Path) -> ExpResult<ToyOutput> {
    cfg.validate(ExperimentKind::ToyBounds)?;
    ensure_dir(out)?;
    let t = &cfg.toy_bounds;
    let grid = grid_1d(t.grid).stage("grid")?;
    let ss = SparsityStructure::new(expand_ranges(&t.sets), t.budgets.clone(), t.grid).stage("structure")?;
    let k = ss.total_budget();
    let mut truth = vec![real(0.0); t.grid];
    for &j in &t.support {
        truth[j] = real(1.0);
    }
    let solve = siht::SolveConfig {
        max_iters: t.iterations,
        residual_tol: 0.0,
        ..cfg.solver.solve_config()
    };

    let mut artifacts = Artifacts::default();
    let mut cases = Vec::new();
    let mut summary = Table::new(&[
        "omega_r",
        "mu",
        "mu_within_max",
        "mu_between_max",
        "rate_iht",
        "rate_siht",
        "rate_column_sum",
        "iht_bound_contracts",
        "siht_bound_contracts",
    ]);
    for &omega_r in &t.omega_r {
        let det = fibonacci_sphere_detectors(t.detectors, omega_r).stage("detectors")?;
        let a = sensing_matrix(&det, &grid).stage("sensing matrix")?;
        let b = a.apply(&truth).stage("data")?;
        let (_, tr_iht) = iht_solve(&a, &b, k, &solve, Some(&truth)).stage("iht")?;
        let (_, tr_siht) = structured_iht_solve(&a, &b, &ss, &solve, Some(&truth)).stage("structured iht")?;
        let err_iht = tr_iht.l1_errors_from_start().expect("truth given");
        let err_siht = tr_siht.l1_errors_from_start().expect("truth given");
        let e0 = err_iht[0];

        let mu = mutual_coherence(&a).stage("coherence")?;
        let report = CoherenceReport::compute(&a, &ss).stage("coherence")?;
        let b_iht = theorem1_bound(mu, k, e0, 0.0, t.iterations);
        let b_siht = corollary1_bound(&report, ss.len(), k, e0, 0.0, t.iterations);
        let rate_column_sum = report.column_sum_rate();
        let b_cs = contraction_bound(rate_column_sum, k, e0, 0.0, t.iterations);

        let mut curves = Table::new(&["t", "err_iht", "err_siht", "bound_iht", "bound_siht"]);
        let at = |v: &[f64], i: usize| *v.get(i).or(v.last()).expect("nonempty");
        for i in 0..=t.iterations {
            curves.push(vec![
                i.into(),
                at(&err_iht, i).into(),
                at(&err_siht, i).into(),
                b_iht.values[i].into(),
                b_siht.values[i].into(),
            ]);
        }
        let tag = format_number(omega_r);
        artifacts.csv(out, &format!("toy_bounds_w{tag}.csv"), &curves)?;
        let ts = curves.column("t");
        let svg = line_chart(
            &format!("l1 error, omega R = {tag}"),
            "iteration",
            "l1 error",
            &[
                Series { label: "IHT", x: ts.clone(), y: curves.column("err_iht"), dashed: false },
                Series { label: "structured IHT", x: ts.clone(), y: curves.column("err_siht"), dashed: false },
                Series { label: "IHT bound", x: ts.clone(), y: curves.column("bound_iht"), dashed: true },
                Series { label: "SIHT bound", x: ts.clone(), y: curves.column("bound_siht"), dashed: true },
                Series { label: "column-sum bound", x: ts, y: b_cs.values.clone(), dashed: true },
            ],
            true,
        );
        artifacts.svg(out, &format!("toy_bounds_w{tag}.svg"), &svg)?;

        let case = ToyCase {
            omega_r,
            rate_iht: 3.0 * mu * k as f64,
            rate_siht: report.corollary_rate(),
            rate_column_sum,
            report,
            curves,
        };
        summary.push(vec![
            omega_r.into(),
            mu.into(),
            case.report.mu_within.iter().copied().fold(0.0, f64::max).into(),
            case.mu_between_max().into(),
            case.rate_iht.into(),
            case.rate_siht.into(),
            case.rate_column_sum.into(),
            b_iht.converges.into(),
            b_siht.converges.into(),
        ]);
        log::info!("toy bounds omega R = {tag}: mu = {mu:.6}, rate_siht = {:.6}", case.rate_siht);
        cases.push(case);
    }
    artifacts.csv(out, "toy_bounds_summary.csv", &summary)?;
    Ok(ToyOutput { cases, summary, artifacts })
}
