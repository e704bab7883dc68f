//! Mutual and restricted coherence, and the coherence-based error bounds for
//! IHT and structured IHT.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::ComplexMatrix;
use crate::thresholding::SparsityStructure;

const ZERO_COLUMN_NORM: f64 = 1e-300;

/// Unit-norm copies of the columns, stored contiguously.
struct UnitColumns {
    rows: usize,
    data: Vec<Complex64>,
}

impl UnitColumns {
    fn new(a: &ComplexMatrix) -> Result<Self> {
        let norms = a.column_norms();
        if let Some(j) = norms.iter().position(|&n| n < ZERO_COLUMN_NORM) {
            return Err(Error::ZeroColumn(j));
        }
        let rows = a.rows();
        let mut data = vec![Complex64::new(0.0, 0.0); rows * a.cols()];
        for i in 0..rows {
            for (j, v) in a.row(i).iter().enumerate() {
                data[j * rows + i] = v / norms[j];
            }
        }
        Ok(Self { rows, data })
    }

    fn col(&self, j: usize) -> &[Complex64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    fn cols(&self) -> usize {
        self.data.len() / self.rows
    }

    fn abs_inner(&self, i: usize, j: usize) -> f64 {
        self.col(i)
            .iter()
            .zip(self.col(j))
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            .norm()
    }

    fn max_over(&self, s: &[usize], s2: &[usize]) -> f64 {
        let mut best = 0.0_f64;
        for &i in s {
            for &j in s2 {
                if i != j {
                    best = best.max(self.abs_inner(i, j));
                }
            }
        }
        best
    }
}

/// `max_{i != j} |<A_i, A_j>| / (||A_i|| ||A_j||)`.
pub fn mutual_coherence(a: &ComplexMatrix) -> Result<f64> {
    if a.cols() < 2 {
        return Err(Error::InvalidArgument("coherence needs at least two columns".into()));
    }
    let cols = UnitColumns::new(a)?;
    let mut best = 0.0_f64;
    for i in 0..cols.cols() {
        for j in i + 1..cols.cols() {
            best = best.max(cols.abs_inner(i, j));
        }
    }
    Ok(best)
}

/// Coherence restricted to pairs `i in s`, `j in s2`, `i != j`.
pub fn restricted_coherence(a: &ComplexMatrix, s: &[usize], s2: &[usize]) -> Result<f64> {
    if s.is_empty() || s2.is_empty() {
        return Err(Error::EmptySet);
    }
    if s == s2 && s.len() < 2 {
        return Err(Error::SingletonSelf);
    }
    if let Some(&bad) = s.iter().chain(s2).find(|&&i| i >= a.cols()) {
        return Err(Error::IndexOutOfRange { index: bad, len: a.cols() });
    }
    Ok(UnitColumns::new(a)?.max_over(s, s2))
}

/// `L x L` table of `mu_{S_m, S_n}` over the given index sets. Diagonal
/// entries of singleton sets are zero.
pub fn coherence_table(a: &ComplexMatrix, sets: &[Vec<usize>]) -> Result<Vec<Vec<f64>>> {
    if let Some(&bad) = sets.iter().flatten().find(|&&i| i >= a.cols()) {
        return Err(Error::IndexOutOfRange { index: bad, len: a.cols() });
    }
    let cols = UnitColumns::new(a)?;
    let l = sets.len();
    let mut table = vec![vec![0.0; l]; l];
    for m in 0..l {
        for n in m..l {
            let v = cols.max_over(&sets[m], &sets[n]);
            table[m][n] = v;
            table[n][m] = v;
        }
    }
    Ok(table)
}

/// Normalized Gram magnitudes `|<A_j, A_l>| / (||A_j|| ||A_l||)` for `j < l`,
/// in row-major order of the upper triangle.
pub fn gram_magnitudes_upper(a: &ComplexMatrix) -> Result<Vec<(usize, usize, f64)>> {
    let cols = UnitColumns::new(a)?;
    let n = cols.cols();
    let mut out = Vec::with_capacity(n * (n - 1) / 2);
    for j in 0..n {
        for l in j + 1..n {
            out.push((j, l, cols.abs_inner(j, l)));
        }
    }
    Ok(out)
}

/// Small-argument coherence estimate `sin(omega_r h) / (omega_r h)` for
/// detectors spread uniformly over a sphere.
pub fn sinc_coherence_estimate(omega_r: f64, h: f64) -> f64 {
    let x = omega_r * h;
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceReport {
    pub mu: f64,
    /// `mu_{S_j}` per set; zero for singleton sets.
    pub mu_within: Vec<f64>,
    /// `L x L` table of `mu_{S_j, S_j'}`, diagonal equal to `mu_within`.
    pub mu_between: Vec<Vec<f64>>,
    /// `max_n 3 k_n mu_{S_n}`.
    pub rho: f64,
    /// `max_{m != n} 3 k_n mu_{S_n, S_m}`; zero when `L = 1`.
    pub rho_tilde: f64,
    budgets: Vec<usize>,
}

impl CoherenceReport {
    pub fn compute(a: &ComplexMatrix, ss: &SparsityStructure) -> Result<Self> {
        if ss.ambient_length() != a.cols() {
            return Err(Error::DimensionMismatch(format!(
                "structure over {} indices for a matrix with {} columns",
                ss.ambient_length(),
                a.cols()
            )));
        }
        let between = coherence_table(a, ss.sets())?;
        let mu = if a.cols() >= 2 { mutual_coherence(a)? } else { 0.0 };
        Ok(Self::from_parts(mu, between, ss.budgets().to_vec()))
    }

    /// Report from precomputed coherence values.
    pub fn from_parts(mu: f64, mu_between: Vec<Vec<f64>>, budgets: Vec<usize>) -> Self {
        let l = budgets.len();
        let mu_within: Vec<f64> = (0..l).map(|j| mu_between[j][j]).collect();
        let rho = (0..l).map(|n| 3.0 * budgets[n] as f64 * mu_within[n]).fold(0.0, f64::max);
        let mut rho_tilde = 0.0_f64;
        for n in 0..l {
            for m in 0..l {
                if m != n {
                    rho_tilde = rho_tilde.max(3.0 * budgets[n] as f64 * mu_between[n][m]);
                }
            }
        }
        Self {
            mu,
            mu_within,
            mu_between,
            rho,
            rho_tilde,
            budgets,
        }
    }

    pub fn set_count(&self) -> usize {
        self.budgets.len()
    }

    pub fn budgets(&self) -> &[usize] {
        &self.budgets
    }

    /// Structured IHT contraction factor `rho + (L - 1) rho_tilde`.
    pub fn corollary_rate(&self) -> f64 {
        self.rho + (self.set_count().saturating_sub(1)) as f64 * self.rho_tilde
    }

    /// Column-sum contraction factor
    /// `max_m (3 k_m mu_{S_m} + sum_{n != m} 3 k_n mu_{S_n, S_m})`.
    ///
    /// Summing the per-set recursion over all sets gives
    /// `||e^(t)||_1 <= max_m c_m ||e^(t-1)||_1 + ...`, so this is also a valid
    /// rate and never exceeds `corollary_rate`.
    pub fn column_sum_rate(&self) -> f64 {
        let l = self.set_count();
        (0..l)
            .map(|m| {
                let own = 3.0 * self.budgets[m] as f64 * self.mu_within[m];
                let cross: f64 = (0..l)
                    .filter(|&n| n != m)
                    .map(|n| 3.0 * self.budgets[n] as f64 * self.mu_between[n][m])
                    .sum();
                own + cross
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundCurve {
    /// Bound at `t = 0, 1, ..., t_max`.
    pub values: Vec<f64>,
    pub converges: bool,
    /// Additive term that remains as `t -> infinity`; infinite when the
    /// contraction factor is not below one.
    pub noise_floor: f64,
}

/// `q^t e0 + 3k/(1-q) nu` with `q` the contraction factor. When `q >= 1` only
/// the geometric term is emitted and the floor is infinite.
pub fn contraction_bound(rate: f64, k: usize, initial_l1: f64, noise_term: f64, t_max: usize) -> BoundCurve {
    let converges = rate < 1.0;
    let noise_floor = if converges {
        3.0 * k as f64 * noise_term / (1.0 - rate)
    } else {
        f64::INFINITY
    };
    let additive = if converges { noise_floor } else { 0.0 };
    let values = (0..=t_max).map(|t| rate.powi(t as i32) * initial_l1 + additive).collect();
    BoundCurve {
        values,
        converges,
        noise_floor,
    }
}

/// IHT bound with contraction `3 mu k`; `noise_term = ||A^* eps||_inf`.
pub fn theorem1_bound(mu: f64, k: usize, initial_l1: f64, noise_term: f64, t_max: usize) -> BoundCurve {
    contraction_bound(3.0 * mu * k as f64, k, initial_l1, noise_term, t_max)
}

/// Whole-vector structured IHT bound with contraction `rho + (L-1) rho_tilde`.
pub fn corollary1_bound(
    report: &CoherenceReport,
    l: usize,
    k: usize,
    initial_l1: f64,
    noise_inf_global: f64,
    t_max: usize,
) -> BoundCurve {
    let rate = report.rho + l.saturating_sub(1) as f64 * report.rho_tilde;
    contraction_bound(rate, k, initial_l1, noise_inf_global, t_max)
}

/// `E_s(n)` for `s = 0..=s_max`: sums over walks `n -> m_1 -> ... -> m_s`
/// with consecutive indices distinct, of `weights[m_s]`. Row `s` holds the
/// values for every `n`. Unscaled, so only suitable while `(L-1)^s` stays
/// well inside the `f64` range.
pub fn walk_sums(weights: &[f64], s_max: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(s_max + 1);
    let mut cur = weights.to_vec();
    out.push(cur.clone());
    for _ in 0..s_max {
        cur = apply_walk(&cur);
        out.push(cur.clone());
    }
    out
}

/// One application of the all-ones-minus-identity matrix.
fn apply_walk(v: &[f64]) -> Vec<f64> {
    let total: f64 = v.iter().sum();
    v.iter().map(|x| total - x).collect()
}

/// `ln` of the walk sums, tracked with a running scale so large `s` does not
/// overflow. Entry `[s][n]` is `ln E_s(n)` (negative infinity for zero).
fn log_walk_sums(weights: &[f64], s_max: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(s_max + 1);
    let mut cur = weights.to_vec();
    let mut log_scale = 0.0;
    out.push(cur.iter().map(|x| x.ln()).collect());
    for _ in 0..s_max {
        cur = apply_walk(&cur);
        let peak = cur.iter().copied().fold(0.0, f64::max);
        if peak > 0.0 {
            for x in cur.iter_mut() {
                *x /= peak;
            }
            log_scale += peak.ln();
        }
        out.push(cur.iter().map(|x| x.ln() + log_scale).collect());
    }
    out
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..=n {
        acc += (i as f64).ln();
        out.push(acc);
    }
    out
}

/// `C(t, s)`, exact below 61 and through log-factorials above.
fn ln_binomial(t: usize, s: usize, ln_fact: &[f64]) -> f64 {
    if t <= 60 {
        let mut c: u64 = 1;
        for i in 0..s.min(t - s) {
            c = c * (t - i) as u64 / (i + 1) as u64;
        }
        (c as f64).ln()
    } else {
        ln_fact[t] - ln_fact[s] - ln_fact[t - s]
    }
}

/// `exponent * ln(base)` with `0 * ln(0) = 0`.
fn ln_pow(base: f64, exponent: usize) -> f64 {
    if exponent == 0 {
        0.0
    } else {
        exponent as f64 * base.ln()
    }
}

/// Per-set structured IHT bound for set `n`.
///
/// `initial_set_l1[m] = ||x^(0)_{S_m} - x*_{S_m}||_1`,
/// `noise_inf_per_set[m] = ||[A^* eps]_{S_m}||_inf`.
pub fn theorem2_bound(
    report: &CoherenceReport,
    ss: &SparsityStructure,
    initial_set_l1: &[f64],
    noise_inf_per_set: &[f64],
    noise_inf_global: f64,
    n: usize,
    t_max: usize,
) -> Result<BoundCurve> {
    let l = ss.len();
    if report.set_count() != l || initial_set_l1.len() != l || noise_inf_per_set.len() != l {
        return Err(Error::DimensionMismatch(format!(
            "expected per-set inputs of length {l}"
        )));
    }
    if n >= l {
        return Err(Error::IndexOutOfRange { index: n, len: l });
    }
    let (rho, rho_t) = (report.rho, report.rho_tilde);
    if rho >= 1.0 {
        return Err(Error::RhoNotContractive(rho));
    }
    let k_n = ss.budgets()[n] as f64;
    let q_n = 3.0 * report.mu_within[n] * k_n;
    let leading_floor = 3.0 * k_n / (1.0 - q_n) * noise_inf_per_set[n];

    let three_k: Vec<f64> = ss.budgets().iter().map(|&k| 3.0 * k as f64).collect();
    let ln_e = log_walk_sums(initial_set_l1, t_max);
    let ln_k = log_walk_sums(&three_k, t_max);
    let ln_fact = ln_factorials(t_max);

    // The noise part of the recursive sum does not depend on t beyond its
    // upper limit, so accumulate it as a running prefix sum.
    let mut noise_prefix = 0.0;
    let mut values = Vec::with_capacity(t_max + 1);
    for t in 0..=t_max {
        if t > 0 && noise_inf_global > 0.0 {
            let s = t;
            noise_prefix += (ln_pow(rho_t, s) - (s + 1) as f64 * (1.0 - rho).ln() + ln_k[s][n]).exp() * noise_inf_global;
        }
        let mut v = q_n.powi(t as i32) * initial_set_l1[n] + leading_floor + noise_prefix;
        for s in 1..=t {
            let ln_term = ln_binomial(t, s, &ln_fact) + ln_pow(rho_t, s) + ln_pow(rho, t - s) + ln_e[s][n];
            v += ln_term.exp();
        }
        values.push(v);
    }

    let mut noise_floor = leading_floor;
    if noise_inf_global > 0.0 {
        // Remaining noise series converges when rho_tilde (L-1) < 1 - rho.
        let ratio = rho_t * l.saturating_sub(1) as f64 / (1.0 - rho);
        noise_floor = if ratio < 1.0 {
            leading_floor + noise_prefix.max(0.0) + tail_estimate(ratio, values.len())
        } else {
            f64::INFINITY
        };
    }
    let converges = rho + l.saturating_sub(1) as f64 * rho_t < 1.0;
    Ok(BoundCurve {
        values,
        converges,
        noise_floor,
    })
}

fn tail_estimate(ratio: f64, from: usize) -> f64 {
    ratio.powi(from as i32) / (1.0 - ratio)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::normalize_columns;
    use crate::rng::CounterRng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn identity_has_zero_coherence() {
        let id = ComplexMatrix::identity(4).unwrap();
        assert_eq!(mutual_coherence(&id).unwrap(), 0.0);
        assert_eq!(restricted_coherence(&id, &[0], &[3]).unwrap(), 0.0);
    }

    #[test]
    fn duplicate_columns_have_unit_coherence() {
        let a = ComplexMatrix::from_row_major(2, 3, vec![c(1.0, 0.0), c(2.0, 0.0), c(0.0, 1.0), c(1.0, 1.0), c(2.0, 2.0), c(0.0, 0.0)]).unwrap();
        assert!((mutual_coherence(&a).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn restricted_errors_and_full_reduction() {
        let mut rng = CounterRng::new(2, 2);
        let a = ComplexMatrix::from_fn(5, 9, |_, _| rng.complex_normal()).unwrap();
        let all: Vec<usize> = (0..9).collect();
        assert_eq!(restricted_coherence(&a, &all, &all).unwrap(), mutual_coherence(&a).unwrap());
        assert_eq!(restricted_coherence(&a, &[], &all), Err(Error::EmptySet));
        assert_eq!(restricted_coherence(&a, &[3], &[3]), Err(Error::SingletonSelf));
        let zero = ComplexMatrix::from_row_major(2, 2, vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert_eq!(mutual_coherence(&zero), Err(Error::ZeroColumn(1)));
    }

    #[test]
    fn restricted_never_exceeds_mutual() {
        let mut rng = CounterRng::new(3, 3);
        for _ in 0..20 {
            let a = ComplexMatrix::from_fn(4, 10, |_, _| rng.complex_normal()).unwrap();
            let mu = mutual_coherence(&a).unwrap();
            let s = rng.sample_indices(10, 3);
            let s2 = rng.sample_indices(10, 4);
            assert!(restricted_coherence(&a, &s, &s2).unwrap() <= mu);
        }
    }

    #[test]
    fn sinc_estimate_values() {
        assert_eq!(sinc_coherence_estimate(1.0, 1e-12), 1.0);
        assert!(sinc_coherence_estimate(1.0, std::f64::consts::PI).abs() < 1e-15);
        let chord = 2.0 * (std::f64::consts::PI / 200.0).sin();
        let est = sinc_coherence_estimate(275.0, chord);
        assert!((est - 0.081879).abs() < 1e-6, "{est}");
    }

    #[test]
    fn theorem1_examples() {
        let b = theorem1_bound(0.081885, 3, 3.0, 0.0, 20);
        assert!(b.converges);
        assert!((3.0 * 0.081885 * 3.0 - 0.736965_f64).abs() < 1e-6);
        assert!(b.values.windows(2).all(|w| w[1] < w[0]));
        assert!(b.values[20] < 0.01);

        let diverging = theorem1_bound(0.133, 3, 3.0, 0.1, 5);
        assert!(!diverging.converges);
        assert!((3.0 * 0.133 * 3.0 - 1.197_f64).abs() < 1e-12);
        assert_eq!(diverging.noise_floor, f64::INFINITY);
        assert_eq!(diverging.values[2], 1.197_f64.powi(2) * 3.0);
    }

    #[test]
    fn corollary_examples_from_reported_coherences() {
        let report = CoherenceReport::from_parts(
            0.081885,
            vec![vec![0.081881, 0.019788], vec![0.019788, 0.081884]],
            vec![2, 1],
        );
        // Rate with rho_tilde taken at face value.
        assert!((report.corollary_rate() - (6.0 * 0.081881 + 6.0 * 0.019788)).abs() < 1e-12);
        // Column sums reproduce the displayed condition value 0.550668.
        let col = report.column_sum_rate();
        assert!((col - (6.0 * 0.081881 + 3.0 * 0.019788)).abs() < 1e-12);
        assert!((col - 0.550668).abs() < 1e-4);
        assert!(col <= report.corollary_rate());
    }

    #[test]
    fn corollary_reduces_to_iht_rate_when_uniform() {
        let mu = 0.05;
        let report = CoherenceReport::from_parts(mu, vec![vec![mu; 3]; 3], vec![2, 2, 2]);
        assert!((report.corollary_rate() - 3.0 * 6.0 * mu).abs() < 1e-12);
        let a = corollary1_bound(&report, 3, 6, 4.0, 0.01, 10);
        let b = theorem1_bound(mu, 6, 4.0, 0.01, 10);
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    fn nested_walk_oracle(weights: &[f64], n: usize, s: usize) -> f64 {
        if s == 0 {
            return weights[n];
        }
        (0..weights.len())
            .filter(|&m| m != n)
            .map(|m| nested_walk_oracle(weights, m, s - 1))
            .sum()
    }

    #[test]
    fn walk_sums_match_nested_loops() {
        for l in 1..=5 {
            let weights: Vec<f64> = (0..l).map(|i| (i * 7 % 5 + 1) as f64).collect();
            let sums = walk_sums(&weights, 6);
            for s in 0..=6 {
                for n in 0..l {
                    assert_eq!(sums[s][n], nested_walk_oracle(&weights, n, s));
                }
            }
        }
        let uniform = walk_sums(&[2.5; 3], 2);
        assert!(uniform[2].iter().all(|&e| e == 4.0 * 2.5));
    }

    #[test]
    fn walk_counting_identity() {
        for l in 1..=6 {
            let weights: Vec<f64> = (0..l).map(|i| (3 * i + 1) as f64).collect();
            let total: f64 = weights.iter().sum();
            let sums = walk_sums(&weights, 10);
            for (s, row) in sums.iter().enumerate() {
                let lhs: f64 = row.iter().sum();
                let rhs = ((l - 1) as f64).powi(s as i32) * total;
                assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1.0), "L={l} s={s}");
            }
        }
    }

    fn random_isp_like(seed: u64, m: usize, n: usize) -> ComplexMatrix {
        let mut rng = CounterRng::new(seed, 0);
        normalize_columns(&ComplexMatrix::from_fn(m, n, |_, _| rng.complex_normal()).unwrap()).unwrap()
    }

    #[test]
    fn single_set_theorem2_collapses_to_theorem1() {
        let a = random_isp_like(5, 200, 10);
        let ss = SparsityStructure::full_cover(10, 1).unwrap();
        let report = CoherenceReport::compute(&a, &ss).unwrap();
        let t2 = theorem2_bound(&report, &ss, &[2.0], &[0.01], 0.01, 0, 30).unwrap();
        let t1 = theorem1_bound(report.mu, 1, 2.0, 0.01, 30);
        let cor = corollary1_bound(&report, 1, 1, 2.0, 0.01, 30);
        for ((x, y), z) in t2.values.iter().zip(&t1.values).zip(&cor.values) {
            assert!((x - y).abs() < 1e-12);
            assert!((y - z).abs() < 1e-12);
        }
    }

    #[test]
    fn theorem2_rejects_noncontractive_rho() {
        let report = CoherenceReport::from_parts(0.5, vec![vec![0.5, 0.1], vec![0.1, 0.5]], vec![1, 1]);
        let ss = SparsityStructure::new(vec![vec![0, 1], vec![2, 3]], vec![1, 1], 4).unwrap();
        assert_eq!(
            theorem2_bound(&report, &ss, &[1.0, 1.0], &[0.0, 0.0], 0.0, 0, 5),
            Err(Error::RhoNotContractive(1.5))
        );
    }

    #[test]
    fn theorem2_matches_direct_sum_for_small_t() {
        let report = CoherenceReport::from_parts(0.1, vec![vec![0.05, 0.02, 0.01], vec![0.02, 0.06, 0.03], vec![0.01, 0.03, 0.04]], vec![1, 2, 1]);
        let ss = SparsityStructure::new(vec![vec![0, 1], vec![2, 3, 4], vec![5, 6]], vec![1, 2, 1], 7).unwrap();
        let e0 = [1.0, 2.0, 0.5];
        let nu_set = [0.01, 0.02, 0.03];
        let nu = 0.03;
        for n in 0..3 {
            let curve = theorem2_bound(&report, &ss, &e0, &nu_set, nu, n, 8).unwrap();
            for t in 0..=8usize {
                let k_n = ss.budgets()[n] as f64;
                let q = 3.0 * report.mu_within[n] * k_n;
                let mut want = q.powi(t as i32) * e0[n] + 3.0 * k_n / (1.0 - q) * nu_set[n];
                let three_k: Vec<f64> = ss.budgets().iter().map(|&k| 3.0 * k as f64).collect();
                for s in 1..=t {
                    let binom = (1..=s).fold(1.0, |acc, i| acc * (t - s + i) as f64 / i as f64);
                    want += binom * report.rho_tilde.powi(s as i32) * report.rho.powi((t - s) as i32) * nested_walk_oracle(&e0, n, s);
                    want += report.rho_tilde.powi(s as i32) / (1.0 - report.rho).powi(s as i32 + 1) * nu * nested_walk_oracle(&three_k, n, s);
                }
                assert!((curve.values[t] - want).abs() <= 1e-12 * want.max(1.0), "n={n} t={t}");
            }
        }
    }

    #[test]
    fn theorem2_handles_long_horizons() {
        let report = CoherenceReport::from_parts(0.01, vec![vec![0.01; 6]; 6], vec![1; 6]);
        let ss = SparsityStructure::new((0..6).map(|j| vec![2 * j, 2 * j + 1]).collect(), vec![1; 6], 12).unwrap();
        let curve = theorem2_bound(&report, &ss, &[1.0; 6], &[0.0; 6], 0.0, 0, 1000).unwrap();
        assert!(curve.values.iter().all(|v| v.is_finite()));
        assert!(curve.values[1000] < 1e-10);
    }
}
