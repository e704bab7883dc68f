//! Off-grid recovery: the on-grid size sweep, grid refinement from coarse
//! blocks, and the adaptive variant with unknown source count.

use std::f64::consts::{PI, TAU};
use std::path::Path;

use siht::coherence::mutual_coherence;
use siht::isp::{
    direction, fibonacci_sphere_detectors, grid_1d, grid_2d, sensing_matrix, sensing_matrix_from_directions,
    synthesize_data, DetectorArray, SourceSet,
};
use siht::numerics::{norm2, sub};
use siht::offgrid::{
    adaptive_offgrid_solve, recovery_errors, refinement_solve, AdaptiveConfig, OffgridMetrics, RecoveryErrors,
    RefinementState,
};
use siht::rng::CounterRng;
use siht::{iht_solve, structured_iht_solve, Complex64, SolveConfig, SparsityStructure};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::{ExpResult, Stage};
use crate::output::{line_chart, Artifacts, Series, Table};
use crate::{ensure_dir, real};

/// Largest `|d_{i+1} - d_i|` over consecutive finite entries.
pub fn max_successive_change(values: &[f64]) -> f64 {
    values
        .windows(2)
        .filter(|w| w[0].is_finite() && w[1].is_finite())
        .map(|w| (w[1] - w[0]).abs())
        .fold(0.0, f64::max)
}

/// Contiguous blocks `{jN/L, ..., (j+1)N/L - 1}`.
pub fn contiguous_blocks(n: usize, l: usize) -> Vec<Vec<usize>> {
    (0..l).map(|j| (j * n / l..(j + 1) * n / l).collect()).collect()
}

fn relative_residual(b: &[Complex64], ax: &[Complex64]) -> f64 {
    norm2(&sub(b, ax)) / norm2(b)
}

/// Largest coherence over all column pairs of the refined matrix.
fn overall_coherence(m: &OffgridMetrics) -> f64 {
    (m.rho / 3.0).max(m.coherence_between)
}

/// Equatorial sources, the `j`-th drawn uniformly from
/// `[2 (j-1) pi / S, (2j - 1) pi / S]`, unit amplitude.
pub fn equatorial_scene(sources: usize, seed: u64) -> siht::Result<SourceSet> {
    let mut rng = CounterRng::new(seed, 0x1D);
    let s = sources as f64;
    let angles = (0..sources)
        .map(|j| {
            let lo = 2.0 * j as f64 * PI / s;
            direction(rng.uniform_range(lo, lo + PI / s), PI / 2.0)
        })
        .collect();
    SourceSet::new(angles, vec![real(1.0); sources])
}

/// Sources at uniform azimuth in `[0, 2 pi)` and uniform polar angle in
/// `[0, pi]`, real amplitudes drawn from `N(mean, std^2)`.
pub fn spherical_scene(sources: usize, mean: f64, std: f64, seed: u64) -> siht::Result<SourceSet> {
    let mut rng = CounterRng::new(seed, 0xAD);
    let mut angles = Vec::with_capacity(sources);
    let mut amps = Vec::with_capacity(sources);
    for _ in 0..sources {
        let theta = rng.uniform_range(0.0, TAU);
        let phi = rng.uniform_range(0.0, PI);
        angles.push(direction(theta, phi));
        amps.push(real(mean + std * rng.normal()));
    }
    SourceSet::new(angles, amps)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Offgrid1dOutput {
    pub truth: SourceSet,
    pub sweep: Table,
    pub refine: Table,
    pub errors: RecoveryErrors,
    /// Largest successive change of the sweep residuals (both solvers).
    pub sweep_max_jump: f64,
    /// Largest successive change of the refinement residual over the last
    /// 50 iterations.
    pub refine_max_jump: f64,
    pub summary: Table,
    pub artifacts: Artifacts,
}

pub fn run_offgrid_1d(cfg: &ExperimentConfig, out: &Path) -> ExpResult<Offgrid1dOutput> {
    cfg.validate(ExperimentKind::Offgrid1d)?;
    ensure_dir(out)?;
    let o = &cfg.offgrid_1d;
    let det = fibonacci_sphere_detectors(o.detectors, o.omega_r).stage("detectors")?;
    let truth = equatorial_scene(o.sources, cfg.seed).stage("scene")?;
    let (b, _) = synthesize_data(&det, &truth, 0.0, cfg.seed).stage("data")?;
    let solve = cfg.solver.solve_config();

    let mut sweep = Table::new(&["N", "mu", "dr_iht", "dr_siht"]);
    for &n in &o.sweep {
        let grid = grid_1d(n).stage("grid")?;
        let a = sensing_matrix(&det, &grid).stage("sensing matrix")?;
        let mu = mutual_coherence(&a).stage("coherence")?;
        let (xi, _) = iht_solve(&a, &b, o.sources, &solve, None).stage("iht")?;
        let ss = SparsityStructure::new(contiguous_blocks(n, o.sources), vec![1; o.sources], n).stage("structure")?;
        let (xs, _) = structured_iht_solve(&a, &b, &ss, &solve, None).stage("structured iht")?;
        let dr_i = relative_residual(&b, &a.apply(&xi).stage("iht")?);
        let dr_s = relative_residual(&b, &a.apply(&xs).stage("structured iht")?);
        sweep.push(vec![n.into(), mu.into(), dr_i.into(), dr_s.into()]);
    }

    let grid0 = grid_1d(o.initial_grid).stage("grid")?;
    let state = RefinementState::from_grid_blocks(&grid0, &contiguous_blocks(o.initial_grid, o.sources), o.alpha)
        .stage("refinement setup")?;
    let inner = SolveConfig {
        stop_on_residual_increase: true,
        ..solve.clone()
    };
    let run = refinement_solve(state, &b, &det, o.iterations, &inner).stage("refinement")?;
    let mut refine = Table::new(&["t", "mu", "mu_between", "delta_r"]);
    for m in &run.metrics {
        refine.push(vec![
            m.iteration.into(),
            overall_coherence(m).into(),
            m.coherence_between.into(),
            m.delta_r.into(),
        ]);
    }
    let errors = recovery_errors(&run.sources, &truth);

    let sweep_max_jump = max_successive_change(&sweep.column("dr_iht")).max(max_successive_change(&sweep.column("dr_siht")));
    let dr = refine.column("delta_r");
    let refine_max_jump = max_successive_change(&dr[dr.len().saturating_sub(50)..]);
    let mut summary = Table::new(&[
        "recovered",
        "a_err",
        "theta_err",
        "final_delta_r",
        "sweep_max_jump",
        "refine_max_jump_last50",
    ]);
    summary.push(vec![
        run.sources.len().into(),
        errors.a_err.into(),
        errors.theta_err.into(),
        dr.last().copied().unwrap_or(f64::NAN).into(),
        sweep_max_jump.into(),
        refine_max_jump.into(),
    ]);

    let mut artifacts = Artifacts::default();
    artifacts.csv(out, "offgrid_1d_sweep.csv", &sweep)?;
    artifacts.csv(out, "offgrid_1d_refine.csv", &refine)?;
    artifacts.csv(out, "offgrid_1d_summary.csv", &summary)?;
    let ns = sweep.column("N");
    artifacts.svg(
        out,
        "offgrid_1d_sweep.svg",
        &line_chart(
            "on-grid residual against grid size",
            "N",
            "relative residual",
            &[
                Series { label: "IHT", x: ns.clone(), y: sweep.column("dr_iht"), dashed: false },
                Series { label: "structured IHT", x: ns.clone(), y: sweep.column("dr_siht"), dashed: false },
                Series { label: "mu", x: ns, y: sweep.column("mu"), dashed: true },
            ],
            true,
        ),
    )?;
    let ts = refine.column("t");
    artifacts.svg(
        out,
        "offgrid_1d_refine.svg",
        &line_chart(
            "grid refinement",
            "iteration",
            "value",
            &[
                Series { label: "relative residual", x: ts.clone(), y: dr, dashed: false },
                Series { label: "mu", x: ts.clone(), y: refine.column("mu"), dashed: true },
                Series { label: "mu between sets", x: ts, y: refine.column("mu_between"), dashed: true },
            ],
            true,
        ),
    )?;
    log::info!("offgrid 1d: a_err {:.3e}, theta_err {:.3e}", errors.a_err, errors.theta_err);
    Ok(Offgrid1dOutput {
        truth,
        sweep,
        refine,
        errors,
        sweep_max_jump,
        refine_max_jump,
        summary,
        artifacts,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveRun {
    pub name: &'static str,
    pub noise_level: f64,
    pub recovered: SourceSet,
    pub errors: RecoveryErrors,
    pub trace: Table,
    pub final_mu_between: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveOutput {
    pub truth: SourceSet,
    /// Coherence of the matrix built from the true directions only.
    pub true_mu: f64,
    pub runs: Vec<AdaptiveRun>,
    pub summary: Table,
    pub artifacts: Artifacts,
}

fn adaptive_run(
    name: &'static str,
    level: f64,
    det: &DetectorArray,
    truth: &SourceSet,
    grid: &siht::isp::AngleGrid,
    acfg: &AdaptiveConfig,
    seed: u64,
) -> ExpResult<AdaptiveRun> {
    let (b, _) = synthesize_data(det, truth, level, seed).stage("data")?;
    let run = adaptive_offgrid_solve(grid, &b, det, acfg).stage(name)?;
    let mut trace = Table::new(&["t", "mu_between", "active_count", "K"]);
    for m in &run.metrics {
        trace.push(vec![
            m.iteration.into(),
            m.coherence_between.into(),
            m.active_count.into(),
            m.k_threshold.unwrap_or(0).into(),
        ]);
    }
    let final_mu_between = run.metrics.last().map_or(f64::NAN, |m| m.coherence_between);
    Ok(AdaptiveRun {
        name,
        noise_level: level,
        errors: recovery_errors(&run.sources, truth),
        recovered: run.sources,
        trace,
        final_mu_between,
    })
}

pub fn run_offgrid_adaptive(cfg: &ExperimentConfig, out: &Path) -> ExpResult<AdaptiveOutput> {
    cfg.validate(ExperimentKind::OffgridAdaptive)?;
    ensure_dir(out)?;
    let o = &cfg.offgrid_adaptive;
    let det = fibonacci_sphere_detectors(o.detectors, o.omega_r).stage("detectors")?;
    let grid = grid_2d(o.n1, o.n2).stage("grid")?;
    let truth = spherical_scene(o.sources, o.amplitude_mean, o.amplitude_std, cfg.seed).stage("scene")?;
    let true_mu = if truth.len() >= 2 {
        let a_true = sensing_matrix_from_directions(&det, &truth.angles).stage("true-angle matrix")?;
        mutual_coherence(&a_true).stage("coherence")?
    } else {
        0.0
    };
    let acfg = AdaptiveConfig {
        k_floor: o.k_floor.max(1),
        c: o.c,
        alpha: o.alpha,
        max_iters: o.iterations,
        solve: SolveConfig {
            stop_on_residual_increase: true,
            ..cfg.solver.solve_config()
        },
    };
    let runs = vec![
        adaptive_run("adaptive noiseless", 0.0, &det, &truth, &grid, &acfg, cfg.seed)?,
        adaptive_run("adaptive noisy", o.noisy_level, &det, &truth, &grid, &acfg, cfg.seed)?,
    ];

    let mut artifacts = Artifacts::default();
    let mut summary = Table::new(&[
        "run",
        "noise_level",
        "recovered",
        "a_err",
        "theta_err",
        "final_mu_between",
        "true_mu",
    ]);
    let mut series = Vec::new();
    for r in &runs {
        let tag = if r.noise_level > 0.0 { "noisy" } else { "noiseless" };
        artifacts.csv(out, &format!("offgrid_adaptive_{tag}.csv"), &r.trace)?;
        summary.push(vec![
            tag.into(),
            r.noise_level.into(),
            r.recovered.len().into(),
            r.errors.a_err.into(),
            r.errors.theta_err.into(),
            r.final_mu_between.into(),
            true_mu.into(),
        ]);
        series.push(Series {
            label: if r.noise_level > 0.0 { "noisy" } else { "noiseless" },
            x: r.trace.column("t"),
            y: r.trace.column("mu_between"),
            dashed: false,
        });
        log::info!(
            "{}: {} sources, a_err {:.3e}, theta_err {:.3e}",
            r.name,
            r.recovered.len(),
            r.errors.a_err,
            r.errors.theta_err
        );
    }
    let t_max = runs.iter().map(|r| r.trace.rows.len()).max().unwrap_or(1).max(1);
    series.push(Series {
        label: "true angles",
        x: vec![1.0, t_max as f64],
        y: vec![true_mu, true_mu],
        dashed: true,
    });
    artifacts.csv(out, "offgrid_adaptive_summary.csv", &summary)?;
    artifacts.svg(
        out,
        "offgrid_adaptive_coherence.svg",
        &line_chart("coherence between sets", "iteration", "mu between", &series, false),
    )?;
    Ok(AdaptiveOutput {
        truth,
        true_mu,
        runs,
        summary,
        artifacts,
    })
}
