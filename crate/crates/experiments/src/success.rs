//! Monte Carlo probability of exact support recovery.

use std::path::Path;

use siht::isp::{fibonacci_sphere_detectors, grid_1d, sensing_matrix, synthesize_data, SourceSet};
use siht::numerics::ComplexMatrix;
use siht::isp::DetectorArray;
use siht::isp::AngleGrid;
use siht::rng::CounterRng;
use siht::thresholding::support;
use siht::{iht_solve, structured_iht_solve, Complex64, SolveConfig, SparsityStructure};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::{ExpResult, Stage};
use crate::output::{line_chart, Artifacts, Series, Table};
use crate::{ensure_dir, real};

/// Success probabilities of one algorithm at one sparsity level.
#[derive(Debug, Clone, PartialEq)]
pub struct SuccessRecord {
    pub k: usize,
    pub alg: String,
    pub p0: f64,
    pub p_noise: Option<f64>,
    pub delta_p: Option<f64>,
}

/// `(P_noise - P0) / P0`; undefined when `P0 = 0`. Equals -1 whenever the
/// noisy runs never succeed.
pub fn relative_change(p0: f64, p_noise: f64) -> Option<f64> {
    (p0 > 0.0).then(|| (p_noise - p0) / p0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuccessOutput {
    pub records: Vec<SuccessRecord>,
    pub table: Table,
    pub artifacts: Artifacts,
}

impl SuccessOutput {
    pub fn p0(&self, k: usize, alg: &str) -> Option<f64> {
        self.records.iter().find(|r| r.k == k && r.alg == alg).map(|r| r.p0)
    }
}

pub fn algorithm_name(set_count: Option<usize>) -> String {
    match set_count {
        None => "iht".into(),
        Some(l) => format!("siht_l{l}"),
    }
}

struct Scene<'a> {
    a: &'a ComplexMatrix,
    det: &'a DetectorArray,
    grid: &'a AngleGrid,
    solve: &'a SolveConfig,
    set_counts: &'a [usize],
    noise_level: Option<f64>,
}

/// Successes per algorithm (IHT first, then each set count) for one trial,
/// noiseless and, when requested, noisy.
fn trial(scene: &Scene, seed: u64, k: usize, index: u64) -> siht::Result<(Vec<bool>, Vec<bool>)> {
    let n = scene.a.cols();
    let mut rng = CounterRng::new(seed, ((k as u64) << 32) | index);
    let truth_support = rng.sample_indices(n, k);
    let noise_seed = rng.next_u64();
    let mut x = vec![real(0.0); n];
    for &j in &truth_support {
        x[j] = real(1.0);
    }
    let clean = scene.a.apply_sparse(&x)?;
    let noisy = match scene.noise_level {
        Some(level) => {
            let amps = vec![real(1.0); k];
            let sources = SourceSet::on_grid(scene.grid, &truth_support, &amps)?;
            Some(synthesize_data(scene.det, &sources, level, noise_seed)?.0)
        }
        None => None,
    };
    let run = |b: &[Complex64]| -> siht::Result<Vec<bool>> {
        let mut hits = Vec::with_capacity(1 + scene.set_counts.len());
        let (xi, _) = iht_solve(scene.a, b, k, scene.solve, None)?;
        hits.push(support(&xi) == truth_support);
        for &l in scene.set_counts {
            let ss = SparsityStructure::uniform_split(n, l, &truth_support)?;
            let (xs, _) = structured_iht_solve(scene.a, b, &ss, scene.solve, None)?;
            hits.push(support(&xs) == truth_support);
        }
        Ok(hits)
    };
    let h0 = run(&clean)?;
    let h1 = match noisy {
        Some(b) => run(&b)?,
        None => Vec::new(),
    };
    Ok((h0, h1))
}

pub fn run_success_prob(cfg: &ExperimentConfig, out: &Path) -> ExpResult<SuccessOutput> {
    cfg.validate(ExperimentKind::SuccessProb)?;
    ensure_dir(out)?;
    let s = &cfg.success_prob;
    let det = fibonacci_sphere_detectors(s.detectors, s.omega_r).stage("detectors")?;
    let grid = grid_1d(s.grid).stage("grid")?;
    let a = sensing_matrix(&det, &grid).stage("sensing matrix")?;
    let solve = SolveConfig {
        max_iters: s.max_iters,
        ..cfg.solver.solve_config()
    };
    let scene = Scene {
        a: &a,
        det: &det,
        grid: &grid,
        solve: &solve,
        set_counts: &s.set_counts,
        noise_level: s.with_noise.then_some(cfg.noise_level),
    };
    let algs: Vec<String> = std::iter::once(None)
        .chain(s.set_counts.iter().map(|&l| Some(l)))
        .map(algorithm_name)
        .collect();
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(cfg.trials);

    let mut records = Vec::new();
    let mut table = Table::new(&["k", "alg", "P0", "Pnoise", "deltaP"]);
    for &k in &s.k_values {
        let mut wins0 = vec![0usize; algs.len()];
        let mut wins1 = vec![0usize; algs.len()];
        // Trials are independent; each worker takes every `workers`-th one
        // and only counts are merged, so the result does not depend on the
        // worker count.
        let partials: Vec<siht::Result<(Vec<usize>, Vec<usize>)>> = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    let scene = &scene;
                    let n_algs = algs.len();
                    scope.spawn(move || {
                        let mut c0 = vec![0usize; n_algs];
                        let mut c1 = vec![0usize; n_algs];
                        for t in (w..cfg.trials).step_by(workers) {
                            let (h0, h1) = trial(scene, cfg.seed, k, t as u64)?;
                            for (i, &h) in h0.iter().enumerate() {
                                c0[i] += h as usize;
                            }
                            for (i, &h) in h1.iter().enumerate() {
                                c1[i] += h as usize;
                            }
                        }
                        Ok((c0, c1))
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("trial worker panicked")).collect()
        });
        for p in partials {
            let (c0, c1) = p.stage("trial")?;
            for i in 0..algs.len() {
                wins0[i] += c0[i];
                wins1[i] += c1[i];
            }
        }
        for (i, alg) in algs.iter().enumerate() {
            let p0 = wins0[i] as f64 / cfg.trials as f64;
            let p_noise = s.with_noise.then(|| wins1[i] as f64 / cfg.trials as f64);
            let delta_p = p_noise.and_then(|pn| relative_change(p0, pn));
            let opt = |v: Option<f64>| v.map_or_else(|| "".into(), |x| x.into());
            table.push(vec![k.into(), alg.as_str().into(), p0.into(), opt(p_noise), opt(delta_p)]);
            records.push(SuccessRecord {
                k,
                alg: alg.clone(),
                p0,
                p_noise,
                delta_p,
            });
        }
        log::info!("success prob k = {k}: {:?}", wins0);
    }

    let mut artifacts = Artifacts::default();
    artifacts.csv(out, "success_prob.csv", &table)?;
    let series_for = |alg: &str, pick: fn(&SuccessRecord) -> Option<f64>| {
        let rows: Vec<&SuccessRecord> = records.iter().filter(|r| r.alg == alg).collect();
        (
            rows.iter().map(|r| r.k as f64).collect::<Vec<_>>(),
            rows.iter().map(|r| pick(r).unwrap_or(f64::NAN)).collect::<Vec<_>>(),
        )
    };
    let p0_series: Vec<Series> = algs
        .iter()
        .map(|alg| {
            let (x, y) = series_for(alg, |r| Some(r.p0));
            Series { label: alg, x, y, dashed: false }
        })
        .collect();
    artifacts.svg(
        out,
        "success_prob_p0.svg",
        &line_chart("probability of exact support recovery", "k", "P", &p0_series, false),
    )?;
    if s.with_noise {
        let dp_series: Vec<Series> = algs
            .iter()
            .map(|alg| {
                let (x, y) = series_for(alg, |r| r.delta_p);
                Series { label: alg, x, y, dashed: false }
            })
            .collect();
        artifacts.svg(
            out,
            "success_prob_delta.svg",
            &line_chart("relative change under noise", "k", "delta P", &dp_series, false),
        )?;
    }
    Ok(SuccessOutput { records, table, artifacts })
}
