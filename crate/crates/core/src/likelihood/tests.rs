use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::copula::CopulaFactor;
use crate::model::{chain_model, Exponents, FactorSpec};

fn example_chain(t1: f64, t2: f64) -> CdnModel {
    chain_model(3, &[t1, t2]).unwrap()
}

fn random_model(rng: &mut ChaCha8Rng, max_p: usize, max_k: usize) -> CdnModel {
    let p = rng.random_range(2..=max_p);
    let k = rng.random_range(1..=max_k);
    let mut specs: Vec<FactorSpec> = (0..k)
        .map(|_| {
            let size = rng.random_range(1..=3.min(p));
            let mut scope: Vec<usize> = (0..p).collect();
            for a in 0..size {
                let b = rng.random_range(a..p);
                scope.swap(a, b);
            }
            scope.truncate(size);
            FactorSpec::clayton(rng.random_range(0.1..5.0), scope)
        })
        .collect();
    for i in 0..p {
        if !specs.iter().any(|s| s.scope.contains(&i)) {
            specs.push(FactorSpec::clayton(rng.random_range(0.1..5.0), vec![i]));
        }
    }
    CdnModel::new(p, specs, Exponents::Uniform).unwrap()
}

/// Mixed central difference of `f` in every coordinate listed.
fn mixed_fd(f: &dyn Fn(&[f64]) -> f64, x: &[f64], coords: &[usize], h: f64) -> f64 {
    let m = coords.len();
    let mut total = 0.0;
    for signs in 0..(1u32 << m) {
        let mut w = x.to_vec();
        let mut sign = 1.0;
        for (b, &i) in coords.iter().enumerate() {
            if signs & (1 << b) != 0 {
                w[i] += h;
            } else {
                w[i] -= h;
                sign = -sign;
            }
        }
        total += sign * f(&w);
    }
    total / (2.0 * h).powi(m as i32)
}

#[test]
fn single_factor_density() {
    let m = CdnModel::new(2, vec![FactorSpec::clayton(1.0, vec![0, 1])], Exponents::Uniform).unwrap();
    let bf = density_brute_force(&m, &[0.5, 0.5]).unwrap();
    assert!((bf - 32.0 / 27.0).abs() < 1e-13);
    let ve = density_ve(&m, &[0.5, 0.5], &min_fill_order(&m)).unwrap();
    assert!((ve - 32.0 / 27.0).abs() < 1e-13);
}

#[test]
fn independent_unary_structure_has_unit_density() {
    let m = CdnModel::new(
        4,
        (0..4).map(|i| FactorSpec::clayton(2.0, vec![i])).collect(),
        Exponents::Uniform,
    )
    .unwrap();
    let o = min_fill_order(&m);
    for u in [[0.1, 0.5, 0.9, 0.3], [0.99, 0.01, 0.5, 0.5]] {
        assert!(density_brute_force(&m, &u).unwrap().ln().abs() < 1e-14);
        assert!(log_density_ve(&m, &u, &o).unwrap().abs() < 1e-14);
    }
    let ind = CdnModel::new(2, vec![FactorSpec::independence(vec![0, 1])], Exponents::Uniform).unwrap();
    assert_eq!(phi(&ind, 0, &[0.3, 0.8], &[0, 0]).unwrap(), 1.0);
}

#[test]
fn phi_matches_example_terms() {
    let (t1, t2) = (1.3, 0.7);
    let m = example_chain(t1, t2);
    let c1 = CopulaFactor::clayton(t1, 2).unwrap();
    let g = |x: &[f64]| c1.cdf(&[x[0], x[1].sqrt()]).unwrap();
    let u = [0.5, 0.49, 0.7];
    // both derivatives land on factor 0
    let exact = phi(&m, 0, &u, &[0, 0]).unwrap();
    let fd = mixed_fd(&g, &u[..2], &[0, 1], 1e-4);
    assert!(((exact - fd) / fd).abs() < 1e-6, "{exact} vs {fd}");
    // u_2 is differentiated in factor 1 instead
    let exact = phi(&m, 0, &u, &[0, 1]).unwrap();
    let fd = mixed_fd(&g, &u[..2], &[0], 1e-5);
    assert!(((exact - fd) / fd).abs() < 1e-7, "{exact} vs {fd}");
    // factor 1 with nothing differentiated is the CDF itself
    let c2 = CopulaFactor::clayton(t2, 2).unwrap();
    let exact = phi(&m, 1, &u, &[0, 1]).unwrap();
    let fd = mixed_fd(&|x: &[f64]| c2.cdf(&[x[0].sqrt(), x[1]]).unwrap(), &u[1..], &[1], 1e-5);
    assert!(((exact - fd) / fd).abs() < 1e-7);
    assert!(phi(&m, 1, &u, &[1, 1]).is_ok());
    assert!(phi(&m, 0, &u, &[1, 0]).is_err());
    assert!(phi(&m, 2, &u, &[0, 0]).is_err());
    assert!(matches!(
        phi(&m, 0, &[0.0, 0.5, 0.5], &[0, 0]),
        Err(CdfError::Domain(_))
    ));
}

#[test]
fn chain_density_equals_two_term_expansion() {
    let (t1, t2) = (1.0, 2.0);
    let m = example_chain(t1, t2);
    let u = [0.3, 0.6, 0.9];
    let c1 = CopulaFactor::clayton(t1, 2).unwrap();
    let c2 = CopulaFactor::clayton(t2, 2).unwrap();
    let f1 = |x: &[f64]| c1.cdf(&[x[0], x[1].sqrt()]).unwrap();
    let f2 = |x: &[f64]| c2.cdf(&[x[0].sqrt(), x[1]]).unwrap();
    let h = 1e-4;
    let term_a = mixed_fd(&f1, &u[..2], &[0, 1], h) * mixed_fd(&f2, &u[1..], &[1], h);
    let term_b = mixed_fd(&f1, &u[..2], &[0], h) * mixed_fd(&f2, &u[1..], &[0, 1], h);
    let expected = term_a + term_b;
    let bf = density_brute_force(&m, &u).unwrap();
    let ve = density_ve(&m, &u, &min_fill_order(&m)).unwrap();
    assert!(((bf - expected) / expected).abs() < 1e-6, "{bf} vs {expected}");
    assert!(((ve - bf) / bf).abs() < 1e-12);
    let cdf = |x: &[f64]| m.cdf(x).unwrap();
    let fd = mixed_fd(&cdf, &u, &[0, 1, 2], 1e-4);
    assert!(((ve - fd) / fd).abs() < 1e-3);
}

#[test]
fn singleton_domains_need_no_summation() {
    let m = CdnModel::new(
        5,
        vec![
            FactorSpec::clayton(1.5, vec![0, 1, 2]),
            FactorSpec::clayton(0.5, vec![3, 4]),
        ],
        Exponents::Uniform,
    )
    .unwrap();
    let u = [0.2, 0.4, 0.6, 0.3, 0.9];
    let direct = m.factor(0).copula().log_mixed_partial(&u[..3], &[0, 1, 2]).unwrap()
        + m.factor(1).copula().log_mixed_partial(&u[3..], &[0, 1]).unwrap();
    let ve = log_density_ve(&m, &u, &min_fill_order(&m)).unwrap();
    assert!((ve - direct).abs() < 1e-12);
}

#[test]
fn ve_matches_oracle_on_random_models() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..60 {
        let m = random_model(&mut rng, 7, 7);
        let o = min_fill_order(&m);
        for _ in 0..5 {
            let u: Vec<f64> = (0..m.p()).map(|_| rng.random_range(0.02..0.98)).collect();
            let bf = log_density_brute_force(&m, &u).unwrap();
            let ve = log_density_ve(&m, &u, &o).unwrap();
            assert!(((ve - bf).exp_m1()).abs() < 1e-9, "ve {ve} bf {bf}");
        }
        // any permutation gives the same answer
        let mut perm: Vec<usize> = (0..m.p()).collect();
        perm.reverse();
        let o2 = EliminationOrder::new(&m, perm).unwrap();
        let u: Vec<f64> = (0..m.p()).map(|_| rng.random_range(0.02..0.98)).collect();
        let a = log_density_ve(&m, &u, &o).unwrap();
        let b = log_density_ve(&m, &u, &o2).unwrap();
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn density_matches_cdf_differences_for_small_models() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let grid = [0.25, 0.5, 0.75];
    for _ in 0..10 {
        let m = random_model(&mut rng, 3, 3);
        let o = min_fill_order(&m);
        let cdf = |x: &[f64]| m.cdf(x).unwrap();
        let coords: Vec<usize> = (0..m.p()).collect();
        for &a in &grid {
            for &b in &grid {
                let u: Vec<f64> = [a, b, 0.6][..m.p()].to_vec();
                let ve = density_ve(&m, &u, &o).unwrap();
                let fd = mixed_fd(&cdf, &u, &coords, 1e-4);
                assert!(ve > 0.0);
                assert!(((ve - fd) / fd).abs() < 1e-3, "ve {ve} fd {fd}");
            }
        }
    }
}

#[test]
fn density_integrates_to_one() {
    let models = [
        chain_model(3, &[0.8, 0.5]).unwrap(),
        CdnModel::new(
            4,
            vec![
                FactorSpec::clayton(0.6, vec![0, 1, 2]),
                FactorSpec::clayton(0.9, vec![2, 3]),
                FactorSpec::clayton(0.4, vec![0, 3]),
            ],
            Exponents::Uniform,
        )
        .unwrap(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for m in &models {
        let plan = EliminationPlan::new(m, &min_fill_order(m), DEFAULT_TREEWIDTH_CAP).unwrap();
        let mut ws = Workspace::new();
        let n = 1_000_000;
        let mut sum = 0.0;
        let mut u = vec![0.0; m.p()];
        for _ in 0..n {
            for x in u.iter_mut() {
                *x = rng.random::<f64>().max(1e-300);
            }
            sum += plan.log_density(m, &u, &mut ws).unwrap().exp();
        }
        let mean = sum / n as f64;
        assert!((mean - 1.0).abs() < 0.01, "integral {mean}");
    }
}

#[test]
fn loglik_examples() {
    let m = example_chain(1.2, 0.4);
    assert_eq!(loglik(&m, &[]).unwrap(), 0.0);
    let ind = CdnModel::new(2, vec![FactorSpec::independence(vec![0, 1])], Exponents::Uniform).unwrap();
    assert_eq!(loglik(&ind, &[vec![0.3, 0.4]]).unwrap(), 0.0);
    let rows = vec![
        vec![0.1, 0.2, 0.3],
        vec![0.9, 0.8, 0.7],
        vec![0.5, 0.5, 0.5],
        vec![0.05, 0.95, 0.5],
        vec![0.33, 0.66, 0.99],
    ];
    let oracle: f64 = rows.iter().map(|r| log_density_brute_force(&m, r).unwrap()).sum();
    assert!((loglik(&m, &rows).unwrap() - oracle).abs() < 1e-10);
    let bad = vec![vec![0.1, 0.2, 0.3], vec![0.1, 0.0, 0.3]];
    match loglik(&m, &bad) {
        Err(CdfError::AtRow { row, .. }) => assert_eq!(row, 1),
        other => panic!("{other:?}"),
    }
}

#[test]
fn parallel_and_sequential_loglik_agree_exactly() {
    let m = chain_model(6, &[1.0, 0.5, 2.0, 1.5, 0.3]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let rows: Vec<Vec<f64>> = (0..1000)
        .map(|_| (0..6).map(|_| rng.random_range(0.01..0.99)).collect())
        .collect();
    let plan = EliminationPlan::new(&m, &min_fill_order(&m), DEFAULT_TREEWIDTH_CAP).unwrap();
    let par = loglik_with_plan(&m, &plan, &rows).unwrap();
    let mut ws = Workspace::new();
    let seq: f64 = rows.iter().map(|r| plan.log_density(&m, r, &mut ws).unwrap()).sum();
    assert_eq!(par, seq);
}

#[test]
fn caps_fail_loudly() {
    let p = 15;
    let mut specs = Vec::new();
    for a in 0..p {
        for b in a + 1..p {
            specs.push(FactorSpec::clayton(1.0, vec![a, b]));
        }
    }
    let m = CdnModel::new(p, specs, Exponents::Uniform).unwrap();
    let u = vec![0.5; p];
    match log_density_ve(&m, &u, &min_fill_order(&m)) {
        Err(CdfError::TreewidthTooLarge { width, cap, clique, .. }) => {
            assert!(width > cap);
            assert_eq!(clique.len(), width + 1);
        }
        other => panic!("{other:?}"),
    }
    assert!(matches!(
        log_density_brute_force(&m, &u),
        Err(CdfError::OracleTooLarge { .. })
    ));
}

#[test]
fn gibbs_weights_match_joint_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..20 {
        let m = random_model(&mut rng, 5, 5);
        let u: Vec<f64> = (0..m.p()).map(|_| rng.random_range(0.05..0.95)).collect();
        let mut ln_u = Vec::new();
        ln_interior(&u, &mut ln_u).unwrap();
        let z: Vec<usize> = (0..m.p())
            .map(|i| {
                let d = m.z_domains().domain(i);
                d[rng.random_range(0..d.len())]
            })
            .collect();
        for i in 0..m.p() {
            let w = gibbs_local_weights(&m, &u, &z, i).unwrap();
            // full joint over all factors for each candidate, renormalized
            let domain = m.z_domains().domain(i);
            let full: Vec<f64> = domain
                .iter()
                .map(|&cand| {
                    let mut zz = z.clone();
                    zz[i] = cand;
                    m.factors()
                        .iter()
                        .enumerate()
                        .map(|(j, f)| log_phi_full(f, j, &ln_u, &zz, &mut Vec::new()))
                        .sum::<f64>()
                })
                .collect();
            let oracle = normalize_log_weights(&full, i).unwrap();
            for (a, b) in w.iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-12);
            }
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn gibbs_weights_two_term_case() {
    let m = example_chain(1.0, 2.0);
    let u = [0.3, 0.6, 0.9];
    let w = gibbs_local_weights(&m, &u, &[0, 0, 1], 1).unwrap();
    let a = phi(&m, 0, &u, &[0, 0]).unwrap() * phi(&m, 1, &u, &[0, 1]).unwrap();
    let b = phi(&m, 0, &u, &[0, 1]).unwrap() * phi(&m, 1, &u, &[1, 1]).unwrap();
    assert!((w[0] - a / (a + b)).abs() < 1e-12);
    assert!((w[1] - b / (a + b)).abs() < 1e-12);
    assert_eq!(gibbs_local_weights(&m, &u, &[0, 0, 1], 0).unwrap(), vec![1.0]);
    assert!(gibbs_local_weights(&m, &u, &[1, 0, 1], 1).is_err());
    assert!(matches!(
        normalize_log_weights(&[f64::NEG_INFINITY; 2], 3),
        Err(CdfError::DegenerateConditional { variable: 3 })
    ));
}
