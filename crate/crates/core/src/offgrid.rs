//! Off-grid recovery by per-set grid refinement, with adaptive elimination of
//! sets that stop carrying signal.

use std::collections::HashSet;
use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use crate::coherence::coherence_table;
use crate::error::{Error, Result};
use crate::isp::{direction, distance, sensing_matrix_from_directions, AngleGrid, DetectorArray, GridShape, SourceSet, Vec3};
use crate::numerics::{norm2, sub, ComplexMatrix, ComplexVector};
use crate::solvers::{structured_iht_solve, SolveConfig};
use crate::thresholding::{hard_threshold, SparsityStructure};

pub const DEFAULT_ALPHA: f64 = 1.1;
pub const DEFAULT_C: f64 = 0.25;

/// Inner solver settings for refinement runs. Refined candidates sit close
/// together, and unit-step iterations over many kept atoms can grow without
/// bound, so the inner solve stops at the first residual increase.
pub fn offgrid_solve_config() -> SolveConfig {
    SolveConfig {
        stop_on_residual_increase: true,
        ..SolveConfig::default()
    }
}

const STABLE_DISPLACEMENT: f64 = 1e-10;
const STABLE_ITERATIONS: usize = 5;

/// Coordinates the candidate points live in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    /// Plain `R^d`, no wrapping.
    Euclidean,
    /// Azimuth only, on the equator; azimuth wraps.
    Circle,
    /// `(theta, phi)`; azimuth wraps, polar angle is clamped to `[0, pi]`.
    Sphere,
}

impl Domain {
    fn dim(self) -> Option<usize> {
        match self {
            Domain::Euclidean => None,
            Domain::Circle => Some(1),
            Domain::Sphere => Some(2),
        }
    }

    /// Unit direction of a point; only meaningful for angular domains.
    pub fn to_direction(self, p: &[f64]) -> Vec3 {
        match self {
            Domain::Circle => direction(p[0], PI / 2.0),
            _ => direction(p[0], p[1]),
        }
    }

    fn normalize(self, p: &mut [f64]) {
        match self {
            Domain::Euclidean => {}
            Domain::Circle => p[0] = wrap(p[0]),
            Domain::Sphere => {
                p[0] = wrap(p[0]);
                p[1] = p[1].clamp(0.0, PI);
            }
        }
    }

    fn key(self, p: &[f64]) -> Vec<i64> {
        let q = |v: f64| (v * 1e12).round() as i64;
        match self {
            Domain::Euclidean => p.iter().map(|&v| q(v)).collect(),
            _ => self.to_direction(p).iter().map(|&v| q(v)).collect(),
        }
    }
}

fn wrap(theta: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    if t >= TAU {
        0.0
    } else {
        t
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 1.0 && alpha <= 2.0 {
        Ok(())
    } else {
        Err(Error::BadAlpha(alpha))
    }
}

/// The `3^d` stencil `point + (a_1, ..., a_d)`, `a_i in {-h_i/alpha, 0, h_i/alpha}`,
/// first coordinate varying slowest. Angular coordinates are wrapped and
/// clamped, and points that then coincide are kept once.
pub fn refine_around(point: &[f64], spacings: &[f64], alpha: f64, domain: Domain) -> Result<Vec<Vec<f64>>> {
    check_alpha(alpha)?;
    let d = point.len();
    if d == 0 || spacings.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "point of dimension {d} with {} spacings",
            spacings.len()
        )));
    }
    if domain.dim().is_some_and(|want| want != d) {
        return Err(Error::DimensionMismatch(format!("{domain:?} points need a different dimension than {d}")));
    }
    let steps: Vec<f64> = spacings.iter().map(|h| h / alpha).collect();
    let mut out = Vec::with_capacity(3usize.pow(d as u32));
    let mut seen = HashSet::new();
    for code in 0..3usize.pow(d as u32) {
        let mut p = point.to_vec();
        let mut rest = code;
        for i in (0..d).rev() {
            p[i] += (rest % 3) as f64 * steps[i] - steps[i];
            rest /= 3;
        }
        domain.normalize(&mut p);
        if seen.insert(domain.key(&p)) {
            out.push(p);
        }
    }
    Ok(out)
}

/// Box a set's candidates must stay in: per coordinate `(lo, width)`.
/// Azimuth intervals are measured modulo `2 pi`.
pub type Region = Vec<(f64, f64)>;

fn in_region(domain: Domain, region: &Region, p: &[f64]) -> bool {
    const SLACK: f64 = 1e-12;
    p.iter().zip(region).enumerate().all(|(i, (&v, &(lo, width)))| {
        if i == 0 && domain != Domain::Euclidean {
            (v - lo).rem_euclid(TAU) <= width + SLACK || width >= TAU
        } else {
            v >= lo - SLACK && v <= lo + width + SLACK
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinementState {
    sets: Vec<Vec<Vec<f64>>>,
    /// Optional confinement of each set; refined candidates outside it are
    /// dropped.
    regions: Option<Vec<Region>>,
    spacings: Vec<f64>,
    alpha: f64,
    iteration: usize,
    domain: Domain,
}

impl RefinementState {
    /// State from explicit per-set candidate lists. Duplicates across sets are
    /// kept in the lowest-index set; sets left empty are dropped.
    pub fn new(sets: Vec<Vec<Vec<f64>>>, spacings: Vec<f64>, alpha: f64, domain: Domain) -> Result<Self> {
        check_alpha(alpha)?;
        if domain == Domain::Euclidean {
            return Err(Error::InvalidArgument("refinement state needs an angular domain".into()));
        }
        let dim = domain.dim().unwrap_or(0);
        if spacings.len() != dim || sets.iter().flatten().any(|p| p.len() != dim) {
            return Err(Error::DimensionMismatch(format!("{domain:?} points have dimension {dim}")));
        }
        if sets.iter().any(|s| s.is_empty()) {
            return Err(Error::EmptySet);
        }
        let (sets, _) = dedupe(sets, domain);
        Ok(Self {
            sets,
            regions: None,
            spacings,
            alpha,
            iteration: 0,
            domain,
        })
    }

    /// One set per grid point, each already refined with spacing `h/alpha`.
    pub fn seeded_from_grid(grid: &AngleGrid, alpha: f64) -> Result<Self> {
        let (domain, h) = match grid.shape() {
            GridShape::OneD { .. } => (Domain::Circle, vec![grid.spacing().0]),
            GridShape::TwoD { .. } => (Domain::Sphere, vec![grid.spacing().0, grid.spacing().1]),
            GridShape::Scattered => {
                return Err(Error::InvalidArgument("seeding needs a lattice grid".into()));
            }
        };
        let sets = grid
            .spherical_coords()
            .iter()
            .map(|&(t, p)| {
                let point = if domain == Domain::Circle { vec![t] } else { vec![t, p] };
                refine_around(&point, &h, alpha, domain)
            })
            .collect::<Result<Vec<_>>>()?;
        let spacings = h.iter().map(|v| v / alpha).collect();
        Self::new(sets, spacings, alpha, domain)
    }

    /// Blocks of a lattice grid as the initial sets, without refining them
    /// first. Each set stays confined to the lattice cells its block covers,
    /// widened by half a cell on every side.
    pub fn from_grid_blocks(grid: &AngleGrid, blocks: &[Vec<usize>], alpha: f64) -> Result<Self> {
        let (domain, spacings) = match grid.shape() {
            GridShape::OneD { .. } => (Domain::Circle, vec![grid.spacing().0]),
            GridShape::TwoD { .. } => (Domain::Sphere, vec![grid.spacing().0, grid.spacing().1]),
            GridShape::Scattered => {
                return Err(Error::InvalidArgument("blocks need a lattice grid".into()));
            }
        };
        let coords = grid.spherical_coords();
        let mut sets = Vec::with_capacity(blocks.len());
        for block in blocks {
            let mut set = Vec::with_capacity(block.len());
            for &j in block {
                let &(t, p) = coords.get(j).ok_or(Error::IndexOutOfRange { index: j, len: coords.len() })?;
                set.push(if domain == Domain::Circle { vec![t] } else { vec![t, p] });
            }
            sets.push(set);
        }
        let regions = blocks
            .iter()
            .map(|block| block_region(grid, block, &spacings))
            .collect::<Result<Vec<_>>>()?;
        let mut state = Self::new(sets, spacings, alpha, domain)?;
        if state.sets.len() != regions.len() {
            return Err(Error::InvalidArgument("blocks must not share grid points".into()));
        }
        state.regions = Some(regions);
        Ok(state)
    }

    pub fn regions(&self) -> Option<&[Region]> {
        self.regions.as_deref()
    }

    pub fn sets(&self) -> &[Vec<Vec<f64>>] {
        &self.sets
    }

    pub fn spacings(&self) -> &[f64] {
        &self.spacings
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn active_count(&self) -> usize {
        self.sets.len()
    }

    pub fn candidate_count(&self) -> usize {
        self.sets.iter().map(Vec::len).sum()
    }

    /// Directions of all candidates, sets concatenated in order.
    pub fn directions(&self) -> Vec<Vec3> {
        self.sets.iter().flatten().map(|p| self.domain.to_direction(p)).collect()
    }

    /// Column index blocks of the concatenated candidate list.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut start = 0;
        self.sets
            .iter()
            .map(|s| {
                let block = (start..start + s.len()).collect();
                start += s.len();
                block
            })
            .collect()
    }

    fn retain_sets(&mut self, keep: &[bool]) {
        let mut flags = keep.iter();
        self.sets.retain(|_| *flags.next().unwrap_or(&false));
        if let Some(regions) = &mut self.regions {
            let mut flags = keep.iter();
            regions.retain(|_| *flags.next().unwrap_or(&false));
        }
    }
}

/// Lattice cells covered by a block, as a region.
fn block_region(grid: &AngleGrid, block: &[usize], spacings: &[f64]) -> Result<Region> {
    if block.is_empty() {
        return Err(Error::EmptySet);
    }
    let coords = grid.spherical_coords();
    let mut ms = Vec::with_capacity(block.len());
    let mut ns = Vec::with_capacity(block.len());
    for &j in block {
        let (m, n) = grid
            .lattice_position(j)
            .ok_or(Error::IndexOutOfRange { index: j, len: grid.len() })?;
        ms.push(m);
        ns.push(n);
    }
    let (m_lo, m_hi) = (*ms.iter().min().unwrap(), *ms.iter().max().unwrap());
    let theta_lo = coords[grid.lattice_index(m_lo, ns[0]).unwrap()].0 - spacings[0] / 2.0;
    let mut region = vec![(theta_lo, (m_hi - m_lo + 1) as f64 * spacings[0])];
    if spacings.len() > 1 {
        let (n_lo, n_hi) = (*ns.iter().min().unwrap(), *ns.iter().max().unwrap());
        let phi_lo = coords[grid.lattice_index(ms[0], n_lo).unwrap()].1 - spacings[1] / 2.0;
        region.push((phi_lo, (n_hi - n_lo + 1) as f64 * spacings[1]));
    }
    Ok(region)
}

/// Drops repeated points, keeping the first occurrence, then drops empty
/// sets. Also returns the original index of every surviving set.
fn dedupe(sets: Vec<Vec<Vec<f64>>>, domain: Domain) -> (Vec<Vec<Vec<f64>>>, Vec<usize>) {
    let mut seen = HashSet::new();
    let mut kept = Vec::with_capacity(sets.len());
    let mut origin = Vec::with_capacity(sets.len());
    for (i, set) in sets.into_iter().enumerate() {
        let set: Vec<Vec<f64>> = set.into_iter().filter(|p| seen.insert(domain.key(p))).collect();
        if !set.is_empty() {
            kept.push(set);
            origin.push(i);
        }
    }
    (kept, origin)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OffgridMetrics {
    /// Refinement step this row describes, starting at 1.
    pub iteration: usize,
    /// `||b - A(Y) x|| / ||b||`.
    pub delta_r: f64,
    /// Largest `mu_{S, S'}` over pairs of distinct sets; zero with one set.
    pub coherence_between: f64,
    pub rho: f64,
    pub rho_tilde: f64,
    pub contractive: bool,
    /// Sets entering the step.
    pub active_count: usize,
    /// Threshold count of the adaptive variant, if it ran.
    pub k_threshold: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub state: RefinementState,
    pub x: ComplexVector,
    pub metrics: OffgridMetrics,
    /// Winning candidate per set, as `(column, point)`.
    pub winners: Vec<(usize, Vec<f64>)>,
    /// Solver output at each winner.
    pub winner_amplitudes: Vec<Complex64>,
}

/// `(rho, rho_tilde, contractive)` for budget one in every block:
/// `rho = 3 max mu_{S_n}`, `rho_tilde = 3 max_{m != n} mu_{S_n, S_m}`.
pub fn proposition_monitor(state: &RefinementState, a_t: &ComplexMatrix) -> Result<(f64, f64, bool)> {
    let table = coherence_table(a_t, &state.blocks())?;
    Ok(monitor_from_table(&table))
}

fn monitor_from_table(table: &[Vec<f64>]) -> (f64, f64, bool) {
    let l = table.len();
    let mut rho = 0.0_f64;
    let mut rho_tilde = 0.0_f64;
    for m in 0..l {
        rho = rho.max(3.0 * table[m][m]);
        for n in 0..l {
            if m != n {
                rho_tilde = rho_tilde.max(3.0 * table[m][n]);
            }
        }
    }
    let contractive = rho + l.saturating_sub(1) as f64 * rho_tilde < 1.0;
    (rho, rho_tilde, contractive)
}

/// Index of the largest magnitude in `block`, ties to the first.
fn block_argmax(x: &[Complex64], block: &[usize]) -> usize {
    let mut best = block[0];
    for &j in &block[1..] {
        if x[j].norm() > x[best].norm() {
            best = j;
        }
    }
    best
}

/// One round: solve with one atom per set on the current candidates, pick
/// each set's winner, and refine every set around its winner.
pub fn refinement_step(state: &RefinementState, b: &[Complex64], det: &DetectorArray, cfg: &SolveConfig) -> Result<StepOutput> {
    if state.sets.iter().any(|s| s.is_empty()) {
        return Err(Error::EmptySet);
    }
    let a = sensing_matrix_from_directions(det, &state.directions())?;
    let blocks = state.blocks();
    let ss = SparsityStructure::new(blocks.clone(), vec![1; blocks.len()], a.cols())?;
    let (x, _) = structured_iht_solve(&a, b, &ss, cfg, None)?;

    let resid = norm2(&sub(b, &a.apply(&x)?));
    let b_norm = norm2(b);
    let delta_r = if b_norm > 0.0 { resid / b_norm } else { resid };
    let table = coherence_table(&a, &blocks)?;
    let (rho, rho_tilde, contractive) = monitor_from_table(&table);
    let coherence_between = (0..table.len())
        .flat_map(|m| (0..table.len()).filter(move |&n| n != m).map(move |n| (m, n)))
        .map(|(m, n)| table[m][n])
        .fold(0.0, f64::max);

    let flat: Vec<&Vec<f64>> = state.sets.iter().flatten().collect();
    let winners: Vec<(usize, Vec<f64>)> = blocks
        .iter()
        .map(|block| {
            let j = block_argmax(&x, block);
            (j, flat[j].clone())
        })
        .collect();
    let winner_amplitudes = winners.iter().map(|(j, _)| x[*j]).collect();

    let mut new_sets = winners
        .iter()
        .map(|(_, p)| refine_around(p, &state.spacings, state.alpha, state.domain))
        .collect::<Result<Vec<_>>>()?;
    if let Some(regions) = &state.regions {
        for (set, region) in new_sets.iter_mut().zip(regions) {
            set.retain(|p| in_region(state.domain, region, p));
        }
    }
    let (sets, origin) = dedupe(new_sets, state.domain);
    let next = RefinementState {
        sets,
        regions: state.regions.as_ref().map(|r| origin.iter().map(|&i| r[i].clone()).collect()),
        spacings: state.spacings.iter().map(|h| h / state.alpha).collect(),
        alpha: state.alpha,
        iteration: state.iteration + 1,
        domain: state.domain,
    };
    Ok(StepOutput {
        state: next,
        x,
        metrics: OffgridMetrics {
            iteration: state.iteration + 1,
            delta_r,
            coherence_between,
            rho,
            rho_tilde,
            contractive,
            active_count: state.active_count(),
            k_threshold: None,
        },
        winners,
        winner_amplitudes,
    })
}

/// Result of a run of refinement steps.
#[derive(Debug, Clone, PartialEq)]
pub struct OffgridRun {
    pub sources: SourceSet,
    pub metrics: Vec<OffgridMetrics>,
    pub final_state: RefinementState,
}

fn winners_to_sources(domain: Domain, winners: &[(usize, Vec<f64>)], amps: &[Complex64]) -> Result<SourceSet> {
    SourceSet::new(winners.iter().map(|(_, p)| domain.to_direction(p)).collect(), amps.to_vec())
}

/// Fixed number of refinement steps with no set elimination.
pub fn refinement_solve(
    initial: RefinementState,
    b: &[Complex64],
    det: &DetectorArray,
    iterations: usize,
    cfg: &SolveConfig,
) -> Result<OffgridRun> {
    if iterations == 0 {
        return Err(Error::InvalidArgument("need at least one refinement step".into()));
    }
    let mut state = initial;
    let mut metrics = Vec::with_capacity(iterations);
    let mut last = None;
    for _ in 0..iterations {
        let step = refinement_step(&state, b, det, cfg)?;
        metrics.push(step.metrics.clone());
        state = step.state.clone();
        last = Some(step);
    }
    let last = last.expect("at least one step");
    Ok(OffgridRun {
        sources: winners_to_sources(state.domain, &last.winners, &last.winner_amplitudes)?,
        metrics,
        final_state: state,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveConfig {
    /// Lower bound on the number of kept sets; the expected source count when
    /// known.
    pub k_floor: usize,
    /// Relative cutoff against the mean winner magnitude.
    pub c: f64,
    pub alpha: f64,
    pub max_iters: usize,
    pub solve: SolveConfig,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        Self {
            k_floor: 1,
            c: DEFAULT_C,
            alpha: DEFAULT_ALPHA,
            max_iters: 100,
            solve: offgrid_solve_config(),
        }
    }
}

/// `K = max(#{l : |w_l| > c mean|w|}, k_floor)` for winner magnitudes `w`.
pub fn adaptive_count(winner_magnitudes: &[f64], c: f64, k_floor: usize) -> usize {
    if winner_magnitudes.is_empty() {
        return k_floor;
    }
    let m1 = winner_magnitudes.iter().sum::<f64>() / winner_magnitudes.len() as f64;
    let above = winner_magnitudes.iter().filter(|&&w| w > c * m1).count();
    above.max(k_floor)
}

/// Refinement with adaptive elimination. Starts from one set per grid point,
/// and after every step keeps only the sets whose winners survive a hard
/// threshold at the adaptive count. Stops after `max_iters` steps or once the
/// surviving sets and their winners have not changed for several steps.
pub fn adaptive_offgrid_solve(
    initial_grid: &AngleGrid,
    b: &[Complex64],
    det: &DetectorArray,
    cfg: &AdaptiveConfig,
) -> Result<OffgridRun> {
    if !(cfg.c > 0.0 && cfg.c < 1.0) {
        return Err(Error::InvalidArgument(format!("c must lie in (0, 1), got {}", cfg.c)));
    }
    if cfg.max_iters == 0 {
        return Err(Error::InvalidArgument("max_iters must be at least 1".into()));
    }
    let mut state = RefinementState::seeded_from_grid(initial_grid, cfg.alpha)?;
    let mut metrics = Vec::with_capacity(cfg.max_iters);
    let mut previous: Option<Vec<Vec3>> = None;
    let mut stable = 0;
    let mut result = None;
    for _ in 0..cfg.max_iters {
        let step = refinement_step(&state, b, det, &cfg.solve)?;
        let w: ComplexVector = step.winner_amplitudes.clone();
        let magnitudes: Vec<f64> = w.iter().map(|v| v.norm()).collect();
        let k_t = adaptive_count(&magnitudes, cfg.c, cfg.k_floor).min(w.len());
        let kept = hard_threshold(&w, k_t)?;
        let keep: Vec<bool> = kept.iter().map(|v| v.norm() > 0.0).collect();
        if !keep.iter().any(|&k| k) {
            return Err(Error::AllSetsEliminated);
        }

        let mut row = step.metrics.clone();
        row.k_threshold = Some(k_t);
        metrics.push(row);

        let mut next = step.state;
        next.retain_sets(&keep);
        let winners: Vec<(usize, Vec<f64>)> =
            step.winners.into_iter().zip(&keep).filter(|(_, &k)| k).map(|(w, _)| w).collect();
        let amps: Vec<Complex64> = w.iter().zip(&keep).filter(|(_, &k)| k).map(|(a, _)| *a).collect();
        let dirs: Vec<Vec3> = winners.iter().map(|(_, p)| state.domain.to_direction(p)).collect();

        stable = match &previous {
            Some(prev) if prev.len() == dirs.len()
                && prev.iter().zip(&dirs).all(|(p, d)| distance(p, d) < STABLE_DISPLACEMENT) =>
            {
                stable + 1
            }
            _ => 0,
        };
        previous = Some(dirs);
        state = next;
        result = Some((winners, amps));
        if stable >= STABLE_ITERATIONS {
            break;
        }
    }
    let (winners, amps) = result.expect("at least one step");
    Ok(OffgridRun {
        sources: winners_to_sources(state.domain, &winners, &amps)?,
        metrics,
        final_state: state,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryErrors {
    /// `sqrt(sum |a_rec - a_true|^2)` over matched pairs plus `|a|^2` of
    /// every unmatched source.
    pub a_err: f64,
    /// `sqrt(sum ||Theta_rec - Theta_true||^2)` over matched pairs plus one
    /// per unmatched source.
    pub theta_err: f64,
    pub matched: usize,
}

/// Errors after pairing recovered and true sources by a minimum total
/// direction distance assignment.
pub fn recovery_errors(recovered: &SourceSet, truth: &SourceSet) -> RecoveryErrors {
    let (nr, nt) = (recovered.len(), truth.len());
    let cost: Vec<Vec<f64>> = (0..nr)
        .map(|i| (0..nt).map(|j| distance(&recovered.angles[i], &truth.angles[j])).collect())
        .collect();
    let pairs = min_cost_assignment(&cost, nr, nt);
    let mut used_r = vec![false; nr];
    let mut used_t = vec![false; nt];
    let (mut a2, mut t2) = (0.0, 0.0);
    for &(i, j) in &pairs {
        used_r[i] = true;
        used_t[j] = true;
        a2 += (recovered.amplitudes[i] - truth.amplitudes[j]).norm_sqr();
        t2 += cost[i][j].powi(2);
    }
    for (i, _) in used_r.iter().enumerate().filter(|(_, &u)| !u) {
        a2 += recovered.amplitudes[i].norm_sqr();
        t2 += 1.0;
    }
    for (j, _) in used_t.iter().enumerate().filter(|(_, &u)| !u) {
        a2 += truth.amplitudes[j].norm_sqr();
        t2 += 1.0;
    }
    RecoveryErrors {
        a_err: a2.sqrt(),
        theta_err: t2.sqrt(),
        matched: pairs.len(),
    }
}

/// Hungarian method on an `nr x nt` cost table; returns `min(nr, nt)` pairs.
fn min_cost_assignment(cost: &[Vec<f64>], nr: usize, nt: usize) -> Vec<(usize, usize)> {
    if nr == 0 || nt == 0 {
        return Vec::new();
    }
    // Rows must be the smaller side.
    let transpose = nr > nt;
    let (n, m) = if transpose { (nt, nr) } else { (nr, nt) };
    let c = |i: usize, j: usize| if transpose { cost[j][i] } else { cost[i][j] };

    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = c(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut pairs: Vec<(usize, usize)> = (1..=m)
        .filter(|&j| p[j] != 0)
        .map(|j| if transpose { (j - 1, p[j] - 1) } else { (p[j] - 1, j - 1) })
        .collect();
    pairs.sort_unstable();
    pairs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coherence::mutual_coherence;
    use crate::isp::{fibonacci_sphere_detectors, grid_1d, synthesize_data};

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn stencil_examples() {
        let pts = refine_around(&[0.5], &[0.1], 2.0, Domain::Euclidean).unwrap();
        let flat: Vec<f64> = pts.iter().map(|p| p[0]).collect();
        assert!(close(&flat, &[0.45, 0.5, 0.55]));
        let pts = refine_around(&[0.5], &[0.1], 1.1, Domain::Euclidean).unwrap();
        assert!((pts[0][0] - 0.409091).abs() < 1e-6 && (pts[2][0] - 0.590909).abs() < 1e-6);
        let pts = refine_around(&[1.0, 2.0], &[0.3, 0.2], 1.5, Domain::Euclidean).unwrap();
        assert_eq!(pts.len(), 9);
        assert!(pts.iter().any(|p| close(p, &[1.0, 2.0])));
        assert_eq!(refine_around(&[0.0], &[0.1], 1.0, Domain::Euclidean), Err(Error::BadAlpha(1.0)));
        assert_eq!(refine_around(&[0.0], &[0.1], 2.5, Domain::Euclidean), Err(Error::BadAlpha(2.5)));
    }

    #[test]
    fn spherical_stencil_wraps_and_clamps() {
        let pts = refine_around(&[0.01, 1.0], &[0.1, 0.1], 2.0, Domain::Sphere).unwrap();
        assert_eq!(pts.len(), 9);
        assert!(pts.iter().all(|p| (0.0..TAU).contains(&p[0])));
        // At the pole every azimuth of the clamped row is the same direction.
        let pts = refine_around(&[1.0, PI], &[0.2, 0.2], 2.0, Domain::Sphere).unwrap();
        assert_eq!(pts.len(), 4);
        let pts = refine_around(&[TAU - 0.01], &[0.1], 2.0, Domain::Circle).unwrap();
        assert!(pts.iter().all(|p| (0.0..TAU).contains(&p[0])));
    }

    #[test]
    fn duplicates_go_to_first_set() {
        let st = RefinementState::new(
            vec![vec![vec![0.1], vec![0.2]], vec![vec![0.2], vec![0.3]], vec![vec![0.1 + TAU]]],
            vec![0.1],
            1.5,
            Domain::Circle,
        )
        .unwrap();
        assert_eq!(st.active_count(), 2);
        assert_eq!(st.sets()[1].len(), 1);
    }

    #[test]
    fn spacings_shrink_geometrically() {
        let det = fibonacci_sphere_detectors(40, 6.0).unwrap();
        let grid = grid_1d(12).unwrap();
        let src = SourceSet::new(vec![direction(1.0, PI / 2.0)], vec![Complex64::new(1.0, 0.0)]).unwrap();
        let (b, _) = synthesize_data(&det, &src, 0.0, 0).unwrap();
        let blocks = vec![(0..12).collect::<Vec<_>>()];
        let mut st = RefinementState::from_grid_blocks(&grid, &blocks, 1.3).unwrap();
        let h0 = st.spacings()[0];
        for t in 1..=20 {
            st = refinement_step(&st, &b, &det, &SolveConfig::default()).unwrap().state;
            let want = h0 * 1.3f64.powi(-t);
            assert!((st.spacings()[0] - want).abs() <= 1e-12 * want);
        }
    }

    #[test]
    fn on_grid_source_stays_the_winner() {
        let det = fibonacci_sphere_detectors(60, 8.0).unwrap();
        let grid = grid_1d(20).unwrap();
        let src = SourceSet::on_grid(&grid, &[6], &[Complex64::new(0.7, 0.0)]).unwrap();
        let (b, _) = synthesize_data(&det, &src, 0.0, 0).unwrap();
        let blocks = vec![(0..20).collect::<Vec<_>>()];
        let mut st = RefinementState::from_grid_blocks(&grid, &blocks, 1.1).unwrap();
        for _ in 0..10 {
            let out = refinement_step(&st, &b, &det, &SolveConfig::default()).unwrap();
            assert!(distance(&st.domain().to_direction(&out.winners[0].1), &grid.directions()[6]) < 1e-12);
            assert!(out.metrics.delta_r <= 1e-10);
            st = out.state;
        }
    }

    #[test]
    fn monitor_on_orthogonal_columns() {
        let st = RefinementState::new(
            vec![vec![vec![0.0]], vec![vec![1.0]], vec![vec![2.0]]],
            vec![0.1],
            2.0,
            Domain::Circle,
        )
        .unwrap();
        let (rho, rho_t, ok) = proposition_monitor(&st, &ComplexMatrix::identity(3).unwrap()).unwrap();
        assert_eq!((rho, rho_t, ok), (0.0, 0.0, true));
    }

    #[test]
    fn adaptive_count_example() {
        assert_eq!(adaptive_count(&[1.0, 0.9, 0.1, 0.05], 0.25, 1), 2);
        assert_eq!(adaptive_count(&[1.0, 0.9, 0.1, 0.05], 0.25, 3), 3);
    }

    fn sources(pts: &[(f64, f64)], amps: &[f64]) -> SourceSet {
        SourceSet::new(
            pts.iter().map(|&(t, p)| direction(t, p)).collect(),
            amps.iter().map(|&a| Complex64::new(a, 0.0)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn recovery_error_examples() {
        let truth = sources(&[(0.1, 1.0), (2.0, 2.0), (4.0, 0.5)], &[1.0, 0.5, 0.8]);
        let e = recovery_errors(&truth, &truth);
        assert_eq!((e.a_err, e.theta_err, e.matched), (0.0, 0.0, 3));
        let one = sources(&[(1.0, 1.0)], &[1.0]);
        let off = sources(&[(1.0, 1.0)], &[1.1]);
        assert!((recovery_errors(&off, &one).a_err - 0.1).abs() < 1e-12);
        let missing = sources(&[(0.1, 1.0), (2.0, 2.0)], &[1.0, 0.5]);
        let e = recovery_errors(&missing, &truth);
        assert!((e.a_err - 0.8).abs() < 1e-12 && (e.theta_err - 1.0).abs() < 1e-12);
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
    fn assignment_matches_permutation_oracle() {
        let mut rng = crate::rng::CounterRng::new(8, 8);
        for k in 1..=6 {
            for _ in 0..5 {
                let pts: Vec<(f64, f64)> = (0..k).map(|_| (rng.uniform_range(0.0, TAU), rng.uniform_range(0.0, PI))).collect();
                let rec: Vec<(f64, f64)> = (0..k).map(|_| (rng.uniform_range(0.0, TAU), rng.uniform_range(0.0, PI))).collect();
                let amps: Vec<f64> = (0..k).map(|_| rng.uniform()).collect();
                let truth = sources(&pts, &amps);
                let got = recovery_errors(&sources(&rec, &amps), &truth);
                let mut best = f64::INFINITY;
                let mut best_theta = 0.0;
                for perm in permutations(k) {
                    let total: f64 = (0..k).map(|i| distance(&direction(rec[i].0, rec[i].1), &truth.angles[perm[i]])).sum();
                    if total < best - 1e-12 {
                        best = total;
                        best_theta = (0..k)
                            .map(|i| distance(&direction(rec[i].0, rec[i].1), &truth.angles[perm[i]]).powi(2))
                            .sum::<f64>()
                            .sqrt();
                    }
                }
                assert!((got.theta_err - best_theta).abs() < 1e-9, "k={k}");

                let mut order: Vec<usize> = (0..k).collect();
                order.reverse();
                let shuffled = sources(&order.iter().map(|&i| rec[i]).collect::<Vec<_>>(), &order.iter().map(|&i| amps[i]).collect::<Vec<_>>());
                let again = recovery_errors(&shuffled, &truth);
                assert!((again.theta_err - got.theta_err).abs() < 1e-12);
                assert!((again.a_err - got.a_err).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn final_between_coherence_matches_recovered_angles() {
        let det = fibonacci_sphere_detectors(100, 40.0).unwrap();
        let truth_pts = [(0.6, PI / 2.0), (2.0, PI / 2.0), (3.4, PI / 2.0), (4.6, PI / 2.0), (5.7, PI / 2.0)];
        let truth = sources(&truth_pts, &[1.0, 0.8, 0.9, 0.7, 1.0]);
        let (b, _) = synthesize_data(&det, &truth, 0.0, 0).unwrap();
        let grid = grid_1d(15).unwrap();
        let blocks: Vec<Vec<usize>> = (0..5).map(|j| (3 * j..3 * j + 3).collect()).collect();
        let st = RefinementState::from_grid_blocks(&grid, &blocks, 1.1).unwrap();
        let run = refinement_solve(st, &b, &det, 60, &offgrid_solve_config()).unwrap();
        let a = sensing_matrix_from_directions(&det, &run.sources.angles).unwrap();
        let mu = mutual_coherence(&a).unwrap();
        let last = run.metrics.last().unwrap();
        // The last step's candidates are tight stencils around the winners, so
        // its between-set coherence approaches the winners' own coherence.
        assert!((last.coherence_between - mu).abs() < 1e-2, "{} vs {mu}", last.coherence_between);
        assert!(run.metrics.iter().all(|m| m.delta_r.is_finite()));
    }
}
