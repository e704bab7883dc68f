//! Experiment configuration, read from TOML.
//!
//! Every table is optional and falls back to the published setup, so an empty
//! file (or no file) runs the default experiment for the chosen subcommand.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use siht::solvers::SolveConfig;

use crate::error::{ExpError, ExpResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    ToyBounds,
    SuccessProb,
    Masked2d,
    Offgrid1d,
    OffgridAdaptive,
    CoherenceReport,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::ToyBounds => "toy_bounds",
            ExperimentKind::SuccessProb => "success_prob",
            ExperimentKind::Masked2d => "masked_2d",
            ExperimentKind::Offgrid1d => "offgrid_1d",
            ExperimentKind::OffgridAdaptive => "offgrid_adaptive",
            ExperimentKind::CoherenceReport => "coherence_report",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Option<ExperimentKind>,
    pub seed: u64,
    pub trials: usize,
    pub noise_level: f64,
    pub out: PathBuf,
    pub solver: SolverSection,
    pub toy_bounds: ToyBoundsSection,
    pub success_prob: SuccessProbSection,
    pub masked_2d: Masked2dSection,
    pub offgrid_1d: Offgrid1dSection,
    pub offgrid_adaptive: OffgridAdaptiveSection,
    pub coherence_report: CoherenceReportSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kind: None,
            seed: 1,
            trials: 200,
            noise_level: 0.05,
            out: PathBuf::from("out"),
            solver: SolverSection::default(),
            toy_bounds: ToyBoundsSection::default(),
            success_prob: SuccessProbSection::default(),
            masked_2d: Masked2dSection::default(),
            offgrid_1d: Offgrid1dSection::default(),
            offgrid_adaptive: OffgridAdaptiveSection::default(),
            coherence_report: CoherenceReportSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub max_iters: usize,
    pub residual_tol: f64,
    pub stagnation_tol: f64,
    pub zero_outside: bool,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolveConfig::default();
        Self {
            max_iters: d.max_iters,
            residual_tol: d.residual_tol,
            stagnation_tol: d.stagnation_tol,
            zero_outside: d.zero_outside,
        }
    }
}

impl SolverSection {
    pub fn solve_config(&self) -> SolveConfig {
        SolveConfig {
            max_iters: self.max_iters,
            residual_tol: self.residual_tol,
            stagnation_tol: self.stagnation_tol,
            zero_outside: self.zero_outside,
            ..SolveConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyBoundsSection {
    pub omega_r: Vec<f64>,
    pub detectors: usize,
    pub grid: usize,
    /// Zero-based support of the unit-amplitude truth.
    pub support: Vec<usize>,
    /// Zero-based inclusive index ranges of the sets.
    pub sets: Vec<[usize; 2]>,
    pub budgets: Vec<usize>,
    pub iterations: usize,
}

impl Default for ToyBoundsSection {
    fn default() -> Self {
        Self {
            omega_r: vec![275.0, 88.0],
            detectors: 100,
            grid: 200,
            support: vec![103, 105, 164],
            sets: vec![[97, 111], [158, 170]],
            budgets: vec![2, 1],
            iterations: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuccessProbSection {
    pub omega_r: f64,
    pub detectors: usize,
    pub grid: usize,
    pub k_values: Vec<usize>,
    pub set_counts: Vec<usize>,
    /// Also run every trial with `noise_level` noise for the relative change.
    pub with_noise: bool,
    pub max_iters: usize,
}

impl Default for SuccessProbSection {
    fn default() -> Self {
        Self {
            omega_r: 275.0,
            detectors: 400,
            grid: 1000,
            k_values: (1..=20).map(|i| 5 * i).collect(),
            set_counts: vec![2, 5, 10, 20],
            with_noise: true,
            max_iters: 300,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Masked2dSection {
    pub omega_r: f64,
    pub detectors: usize,
    pub n1: usize,
    pub n2: usize,
    pub sources: usize,
    pub amplitude_range: [f64; 2],
    /// Minimum lattice distance between sources, in cells.
    pub min_separation: usize,
    pub mask_factor: f64,
    /// `None` uses the default Tikhonov weight.
    pub lambda: Option<f64>,
    pub eight_neighbour: bool,
    /// Extra budget added to every region in the inflated variant.
    pub inflation: usize,
}

impl Default for Masked2dSection {
    fn default() -> Self {
        Self {
            omega_r: 10.0,
            detectors: 100,
            n1: 40,
            n2: 20,
            sources: 5,
            amplitude_range: [0.4, 1.0],
            min_separation: 3,
            mask_factor: 7.5,
            lambda: None,
            eight_neighbour: false,
            inflation: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Offgrid1dSection {
    pub omega_r: f64,
    pub detectors: usize,
    pub sources: usize,
    /// Grid sizes of the on-grid sweep; each must be a multiple of `sources`.
    pub sweep: Vec<usize>,
    pub initial_grid: usize,
    pub alpha: f64,
    pub iterations: usize,
}

impl Default for Offgrid1dSection {
    fn default() -> Self {
        Self {
            omega_r: 40.0,
            detectors: 100,
            sources: 5,
            sweep: (3..=30).map(|i| 5 * i).collect(),
            initial_grid: 15,
            alpha: 1.1,
            iterations: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OffgridAdaptiveSection {
    pub omega_r: f64,
    pub detectors: usize,
    pub sources: usize,
    pub n1: usize,
    pub n2: usize,
    pub c: f64,
    pub alpha: f64,
    pub iterations: usize,
    /// Floor on the kept set count; zero means the source count is unknown
    /// and the floor is one.
    pub k_floor: usize,
    pub amplitude_mean: f64,
    pub amplitude_std: f64,
    /// Noise level of the second, noisy run.
    pub noisy_level: f64,
}

impl Default for OffgridAdaptiveSection {
    fn default() -> Self {
        Self {
            omega_r: 4.0,
            detectors: 100,
            sources: 6,
            n1: 20,
            n2: 10,
            c: 0.25,
            alpha: 1.1,
            iterations: 100,
            k_floor: 0,
            amplitude_mean: 1.0,
            amplitude_std: 0.2,
            noisy_level: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoherenceReportSection {
    pub omega_r: f64,
    pub detectors: usize,
    /// 1D grid size; ignored when `n1`/`n2` are given.
    pub grid: usize,
    pub n1: Option<usize>,
    pub n2: Option<usize>,
    /// Zero-based inclusive index ranges.
    pub sets: Vec<[usize; 2]>,
}

impl Default for CoherenceReportSection {
    fn default() -> Self {
        Self {
            omega_r: 275.0,
            detectors: 100,
            grid: 200,
            n1: None,
            n2: None,
            sets: vec![[97, 111], [158, 170]],
        }
    }
}

fn positive(name: &str, v: usize) -> ExpResult<()> {
    if v == 0 {
        Err(ExpError::Config(format!("{name} must be at least 1")))
    } else {
        Ok(())
    }
}

fn positive_real(name: &str, v: f64) -> ExpResult<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(ExpError::Config(format!("{name} must be positive, got {v}")))
    }
}

fn ranges_ok(name: &str, sets: &[[usize; 2]], len: usize) -> ExpResult<()> {
    for &[lo, hi] in sets {
        if lo > hi || hi >= len {
            return Err(ExpError::Config(format!("{name}: range [{lo}, {hi}] invalid for length {len}")));
        }
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> ExpResult<Self> {
        toml::from_str(text).map_err(|e| ExpError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> ExpResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExpError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self, kind: ExperimentKind) -> ExpResult<()> {
        if let Some(k) = self.kind {
            if k != kind {
                return Err(ExpError::Config(format!(
                    "config is for {} but {} was requested",
                    k.name(),
                    kind.name()
                )));
            }
        }
        positive("trials", self.trials)?;
        if !(self.noise_level.is_finite() && self.noise_level >= 0.0) {
            return Err(ExpError::Config(format!("noise_level must be nonnegative, got {}", self.noise_level)));
        }
        self.solver.solve_config().validate().map_err(|e| ExpError::Config(e.to_string()))?;
        match kind {
            ExperimentKind::ToyBounds => {
                let t = &self.toy_bounds;
                positive("toy_bounds.detectors", t.detectors)?;
                positive("toy_bounds.iterations", t.iterations)?;
                if t.grid < 2 {
                    return Err(ExpError::Config("toy_bounds.grid must be at least 2".into()));
                }
                t.omega_r.iter().try_for_each(|&w| positive_real("toy_bounds.omega_r", w))?;
                ranges_ok("toy_bounds.sets", &t.sets, t.grid)?;
                if t.sets.len() != t.budgets.len() {
                    return Err(ExpError::Config("toy_bounds.sets and budgets differ in length".into()));
                }
                if t.support.iter().any(|&j| j >= t.grid) {
                    return Err(ExpError::Config("toy_bounds.support outside the grid".into()));
                }
            }
            ExperimentKind::SuccessProb => {
                let s = &self.success_prob;
                positive_real("success_prob.omega_r", s.omega_r)?;
                positive("success_prob.detectors", s.detectors)?;
                positive("success_prob.max_iters", s.max_iters)?;
                if s.k_values.is_empty() || s.k_values.iter().any(|&k| k == 0 || k > s.grid) {
                    return Err(ExpError::Config("success_prob.k_values must lie in 1..=grid".into()));
                }
                if s.set_counts.iter().any(|&l| l == 0 || s.grid % l != 0) {
                    return Err(ExpError::Config("success_prob.set_counts must divide grid".into()));
                }
            }
            ExperimentKind::Masked2d => {
                let m = &self.masked_2d;
                positive_real("masked_2d.omega_r", m.omega_r)?;
                positive_real("masked_2d.mask_factor", m.mask_factor)?;
                positive("masked_2d.detectors", m.detectors)?;
                positive("masked_2d.sources", m.sources)?;
                if m.n1 < 2 || m.n2 < 2 {
                    return Err(ExpError::Config("masked_2d grid must be at least 2 x 2".into()));
                }
                let [lo, hi] = m.amplitude_range;
                if !(lo > 0.0 && lo <= hi) {
                    return Err(ExpError::Config("masked_2d.amplitude_range must satisfy 0 < lo <= hi".into()));
                }
            }
            ExperimentKind::Offgrid1d => {
                let o = &self.offgrid_1d;
                positive_real("offgrid_1d.omega_r", o.omega_r)?;
                positive("offgrid_1d.detectors", o.detectors)?;
                positive("offgrid_1d.sources", o.sources)?;
                positive("offgrid_1d.iterations", o.iterations)?;
                if o.sweep.iter().chain([&o.initial_grid]).any(|&n| n == 0 || n % o.sources != 0) {
                    return Err(ExpError::Config("offgrid_1d grid sizes must be multiples of the source count".into()));
                }
                if !(o.alpha > 1.0 && o.alpha <= 2.0) {
                    return Err(ExpError::Config(format!("offgrid_1d.alpha must lie in (1, 2], got {}", o.alpha)));
                }
            }
            ExperimentKind::OffgridAdaptive => {
                let o = &self.offgrid_adaptive;
                positive_real("offgrid_adaptive.omega_r", o.omega_r)?;
                positive("offgrid_adaptive.detectors", o.detectors)?;
                positive("offgrid_adaptive.sources", o.sources)?;
                positive("offgrid_adaptive.iterations", o.iterations)?;
                if o.n1 < 2 || o.n2 < 2 {
                    return Err(ExpError::Config("offgrid_adaptive grid must be at least 2 x 2".into()));
                }
                if !(o.c > 0.0 && o.c < 1.0) {
                    return Err(ExpError::Config(format!("offgrid_adaptive.c must lie in (0, 1), got {}", o.c)));
                }
                if !(o.alpha > 1.0 && o.alpha <= 2.0) {
                    return Err(ExpError::Config(format!("offgrid_adaptive.alpha must lie in (1, 2], got {}", o.alpha)));
                }
                if !(o.noisy_level >= 0.0 && o.amplitude_std >= 0.0) {
                    return Err(ExpError::Config("offgrid_adaptive noise and spread must be nonnegative".into()));
                }
            }
            ExperimentKind::CoherenceReport => {
                let c = &self.coherence_report;
                positive_real("coherence_report.omega_r", c.omega_r)?;
                positive("coherence_report.detectors", c.detectors)?;
                let len = match (c.n1, c.n2) {
                    (Some(a), Some(b)) => a * b,
                    (None, None) => c.grid,
                    _ => return Err(ExpError::Config("coherence_report needs both n1 and n2".into())),
                };
                if len < 2 {
                    return Err(ExpError::Config("coherence_report grid needs at least 2 points".into()));
                }
                ranges_ok("coherence_report.sets", &c.sets, len)?;
            }
        }
        Ok(())
    }
}

/// Inclusive ranges expanded to index lists.
pub fn expand_ranges(ranges: &[[usize; 2]]) -> Vec<Vec<usize>> {
    ranges.iter().map(|&[lo, hi]| (lo..=hi).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        for kind in [
            ExperimentKind::ToyBounds,
            ExperimentKind::SuccessProb,
            ExperimentKind::Masked2d,
            ExperimentKind::Offgrid1d,
            ExperimentKind::OffgridAdaptive,
            ExperimentKind::CoherenceReport,
        ] {
            cfg.validate(kind).unwrap();
        }
    }

    #[test]
    fn parses_sections() {
        let cfg = ExperimentConfig::from_toml(
            r#"
            kind = "success_prob"
            seed = 9
            trials = 20
            [success_prob]
            k_values = [5, 20]
            set_counts = [5]
            "#,
        )
        .unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.success_prob.k_values, vec![5, 20]);
        cfg.validate(ExperimentKind::SuccessProb).unwrap();
        assert!(cfg.validate(ExperimentKind::ToyBounds).is_err());
    }

    #[test]
    fn rejects_bad_values() {
        assert!(ExperimentConfig::from_toml("trials = \"many\"").is_err());
        assert!(ExperimentConfig::from_toml("unknown_key = 1").is_err());
        let cfg = ExperimentConfig::from_toml("trials = 0").unwrap();
        assert!(cfg.validate(ExperimentKind::ToyBounds).is_err());
        let cfg = ExperimentConfig::from_toml("[offgrid_1d]\nalpha = 3.0").unwrap();
        assert!(cfg.validate(ExperimentKind::Offgrid1d).is_err());
    }
}
