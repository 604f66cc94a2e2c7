#![allow(dead_code)]

use cdfield::{CdnModel, Exponents, FactorSpec};
use rand::Rng;

/// Random all-Clayton model with `2 <= p <= max_p`, at most `max_k` factors,
/// scopes of 1 to 3 variables, parameters in [0.1, 5] and uniform exponents.
pub fn random_model<R: Rng>(rng: &mut R, max_p: usize, max_k: usize) -> CdnModel {
    loop {
        let p = rng.random_range(2..=max_p);
        let k = rng.random_range(1..=max_k);
        let mut scopes: Vec<Vec<usize>> = (0..k)
            .map(|_| {
                let size = rng.random_range(1..=3.min(p));
                let mut all: Vec<usize> = (0..p).collect();
                for a in 0..size {
                    let b = rng.random_range(a..p);
                    all.swap(a, b);
                }
                all.truncate(size);
                all
            })
            .collect();
        let mut ok = true;
        for i in 0..p {
            if scopes.iter().any(|s| s.contains(&i)) {
                continue;
            }
            let open: Vec<usize> = (0..scopes.len()).filter(|&j| scopes[j].len() < 3).collect();
            if !open.is_empty() {
                let j = open[rng.random_range(0..open.len())];
                scopes[j].push(i);
            } else if scopes.len() < max_k {
                scopes.push(vec![i]);
            } else {
                ok = false;
                break;
            }
        }
        if !ok {
            continue;
        }
        let specs = scopes
            .into_iter()
            .map(|s| FactorSpec::clayton(rng.random_range(0.1..5.0), s))
            .collect();
        return CdnModel::new(p, specs, Exponents::Uniform).expect("generated model is valid");
    }
}

/// Uniform point in `[lo, hi]^p`.
pub fn random_point<R: Rng>(rng: &mut R, p: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..p).map(|_| rng.random_range(lo..hi)).collect()
}

/// Kolmogorov-Smirnov distance between a sample and the uniform law.
pub fn ks_uniform(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(k, &x)| (x - k as f64 / n).max((k + 1) as f64 / n - x))
        .fold(0.0, f64::max)
}
