use num_complex::Complex64;
use proptest::prelude::*;
use siht::coherence::{corollary1_bound, CoherenceReport};
use siht::numerics::{norm2, normalize_columns, sub, ComplexMatrix};
use siht::rng::CounterRng;
use siht::thresholding::{local_threshold, structured_threshold, support};
use siht::{iht_solve, structured_iht_solve, SolveConfig, SparsityStructure};

fn gaussian(rng: &mut CounterRng, m: usize, n: usize) -> ComplexMatrix {
    normalize_columns(&ComplexMatrix::from_fn(m, n, |_, _| rng.complex_normal()).unwrap()).unwrap()
}

fn sparse(rng: &mut CounterRng, n: usize, idx: &[usize]) -> Vec<Complex64> {
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for &j in idx {
        x[j] = rng.complex_normal();
    }
    x
}

/// Least-squares residual of `b` on the two columns `i`, `j`.
fn pair_residual(a: &ComplexMatrix, b: &[Complex64], i: usize, j: usize) -> f64 {
    let (ci, cj) = (a.column(i), a.column(j));
    let dot = |u: &[Complex64], v: &[Complex64]| u.iter().zip(v).map(|(p, q)| p.conj() * q).sum::<Complex64>();
    let (g11, g12, g22) = (dot(&ci, &ci), dot(&ci, &cj), dot(&cj, &cj));
    let (r1, r2) = (dot(&ci, b), dot(&cj, b));
    let det = g11 * g22 - g12 * g12.conj();
    let y1 = (g22 * r1 - g12 * r2) / det;
    let y2 = (g11 * r2 - g12.conj() * r1) / det;
    let fit: Vec<Complex64> = ci.iter().zip(&cj).map(|(p, q)| p * y1 + q * y2).collect();
    norm2(&sub(b, &fit))
}

#[test]
fn iht_support_matches_exhaustive_pair_search() {
    let (m, n, k) = (8, 12, 2);
    let mut converged = 0;
    for seed in 0..50 {
        let mut rng = CounterRng::new(seed, 6);
        let a = gaussian(&mut rng, m, n);
        let truth = rng.sample_indices(n, k);
        let mut x = vec![Complex64::new(0.0, 0.0); n];
        for &j in &truth {
            x[j] = Complex64::from_polar(1.0, std::f64::consts::TAU * rng.uniform());
        }
        let b = a.apply(&x).unwrap();
        let (xh, trace) = iht_solve(&a, &b, k, &SolveConfig::default(), None).unwrap();
        let rel = trace.residual_history.last().copied().unwrap();
        if rel >= 1e-8 {
            continue;
        }
        converged += 1;
        let mut best = (f64::INFINITY, 0, 0);
        for i in 0..n {
            for j in i + 1..n {
                let r = pair_residual(&a, &b, i, j);
                if r < best.0 {
                    best = (r, i, j);
                }
            }
        }
        assert_eq!(support(&xh), vec![best.1, best.2], "seed {seed}");
    }
    // Unit-step IHT does not converge on every draw; how many do is
    // reported by the acceptance target.
    assert!(converged > 0);
}

#[test]
fn full_cover_structure_is_bitwise_iht() {
    for seed in 0..50 {
        let mut rng = CounterRng::new(seed, 5);
        let (m, n) = (10 + (seed as usize % 7), 30);
        let k = 1 + seed as usize % 4;
        let a = gaussian(&mut rng, m, n);
        let truth = rng.sample_indices(n, k);
        let x = sparse(&mut rng, n, &truth);
        let b = a.apply(&x).unwrap();
        let cfg = SolveConfig {
            max_iters: 200,
            record_trace: true,
            ..SolveConfig::default()
        };
        let (xi, ti) = iht_solve(&a, &b, k, &cfg, Some(&x)).unwrap();
        let ss = SparsityStructure::full_cover(n, k).unwrap();
        let (xs, ts) = structured_iht_solve(&a, &b, &ss, &cfg, Some(&x)).unwrap();
        let bits = |v: &[Complex64]| v.iter().flat_map(|z| [z.re.to_bits(), z.im.to_bits()]).collect::<Vec<_>>();
        assert_eq!(bits(&xi), bits(&xs), "seed {seed}");
        assert_eq!(ti, ts);
    }
}

fn permutations(l: usize) -> Vec<Vec<usize>> {
    if l == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(l - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, l - 1);
            out.push(q);
        }
    }
    out
}

#[test]
fn local_thresholds_commute_in_every_order() {
    for l in 1..=4 {
        for seed in 0..25 {
            let mut rng = CounterRng::new(seed, 50 + l as u64);
            let n = 16;
            let v: Vec<Complex64> = (0..n).map(|_| rng.complex_normal()).collect();
            let cut: Vec<usize> = {
                let mut c = rng.sample_indices(n - 1, l - 1).into_iter().map(|i| i + 1).collect::<Vec<_>>();
                c.insert(0, 0);
                c.push(n);
                c
            };
            let sets: Vec<Vec<usize>> = (0..l).map(|j| (cut[j]..cut[j + 1]).collect()).collect();
            let budgets: Vec<usize> = sets.iter().map(|s| rng.below(s.len() as u64 + 1) as usize).collect();
            let ss = SparsityStructure::new(sets.clone(), budgets.clone(), n).unwrap();
            let reference = structured_threshold(&v, &ss, false).unwrap();
            for order in permutations(l) {
                let mut w = v.clone();
                for &j in &order {
                    w = local_threshold(&w, &sets[j], budgets[j]).unwrap();
                }
                assert_eq!(w, reference, "L={l} seed {seed} order {order:?}");
            }
        }
    }
}

/// Noiseless structured instances with a contractive corollary rate, as
/// `(a, structure, truth)`; draws are skipped until the rate is below one.
fn contractive_instances(count: usize) -> Vec<(ComplexMatrix, SparsityStructure, Vec<Complex64>)> {
    let mut out = Vec::new();
    let mut seed = 0;
    while out.len() < count {
        seed += 1;
        assert!(seed < 20 * count as u64, "too few contractive draws");
        let mut rng = CounterRng::new(seed, 3);
        let l = 2 + (seed as usize % 2);
        let n = 8 * l;
        let a = gaussian(&mut rng, 1024, n);
        let sets: Vec<Vec<usize>> = (0..l).map(|j| (8 * j..8 * (j + 1)).collect()).collect();
        let truth: Vec<usize> = sets.iter().map(|s| s[rng.below(8) as usize]).collect();
        let ss = SparsityStructure::new(sets, vec![1; l], n).unwrap();
        let report = CoherenceReport::compute(&a, &ss).unwrap();
        if report.corollary_rate() >= 1.0 {
            continue;
        }
        let x = sparse(&mut rng, n, &truth);
        out.push((a, ss, x));
    }
    out
}

#[test]
fn structured_error_stays_below_corollary_bound() {
    let t_max = 40;
    for (i, (a, ss, x)) in contractive_instances(100).into_iter().enumerate() {
        let b = a.apply(&x).unwrap();
        let cfg = SolveConfig {
            max_iters: t_max,
            residual_tol: 0.0,
            ..SolveConfig::default()
        };
        let (_, trace) = structured_iht_solve(&a, &b, &ss, &cfg, Some(&x)).unwrap();
        let errs = trace.l1_errors_from_start().unwrap();
        let report = CoherenceReport::compute(&a, &ss).unwrap();
        let bound = corollary1_bound(&report, ss.len(), ss.total_budget(), errs[0], 0.0, t_max);
        for (t, e) in errs.iter().enumerate() {
            assert!(*e <= bound.values[t] * (1.0 + 1e-12), "instance {i} t={t}: {e} > {}", bound.values[t]);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exact_solution_is_a_fixed_point(seed in 0u64..10_000, l in 1usize..4) {
        let mut rng = CounterRng::new(seed, 9);
        let n = 6 * l;
        let a = gaussian(&mut rng, 20, n);
        let sets: Vec<Vec<usize>> = (0..l).map(|j| (6 * j..6 * (j + 1)).collect()).collect();
        let truth: Vec<usize> = sets.iter().map(|s| s[rng.below(6) as usize]).collect();
        let x = sparse(&mut rng, n, &truth);
        let b = a.apply(&x).unwrap();
        let ss = SparsityStructure::new(sets, vec![1; l], n).unwrap();
        // One step from the truth: A*(b - Ax*) = 0, so the threshold returns x*.
        let x1 = one_step(&a, &b, &ss, &x);
        for (p, q) in x1.iter().zip(&x) {
            prop_assert!((p - q).norm() <= 1e-12);
        }
    }

    #[test]
    fn budgets_hold_at_every_iterate(seed in 0u64..10_000) {
        let mut rng = CounterRng::new(seed, 10);
        let a = gaussian(&mut rng, 12, 24);
        let ss = SparsityStructure::new(vec![(0..10).collect(), (10..16).collect(), (16..24).collect()], vec![2, 1, 3], 24).unwrap();
        let truth = [1usize, 4, 12, 17, 20, 23];
        let x = sparse(&mut rng, 24, &truth);
        let b = a.apply(&x).unwrap();
        let cfg = SolveConfig { max_iters: 30, record_trace: true, ..SolveConfig::default() };
        let (_, trace) = structured_iht_solve(&a, &b, &ss, &cfg, None).unwrap();
        for it in trace.iterates.unwrap() {
            for (set, &k) in ss.sets().iter().zip(ss.budgets()) {
                prop_assert!(set.iter().filter(|&&j| it[j].norm() > 0.0).count() <= k);
            }
            prop_assert!(support(&it).iter().all(|&j| j < 24));
        }
    }
}

/// `H(x + A^*(b - A x))` for a single step from `x`.
fn one_step(a: &ComplexMatrix, b: &[Complex64], ss: &SparsityStructure, x: &[Complex64]) -> Vec<Complex64> {
    let r = sub(b, &a.apply(x).unwrap());
    let g = a.apply_adjoint(&r).unwrap();
    let z: Vec<Complex64> = x.iter().zip(&g).map(|(p, q)| p + q).collect();
    structured_threshold(&z, ss, true).unwrap()
}
