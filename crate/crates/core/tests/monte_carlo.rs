use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use unirec::oracle::{subgaussian_std_for_proxy, NoisyQuadratic};
use unirec::optimizer::{configure_from_table, mirror_descent_run};
use unirec::{Case, Domain, Family, GeometrySpec, StochasticOracle, StreamKey};

/// E exp(|Z|^2 / sigma^2) for Z ~ N(0, s^2 I_d) with s from the calibration.
fn moment(d: usize, draws: u64) -> f64 {
    let sigma = 1.7;
    let s = subgaussian_std_for_proxy(sigma, d);
    let key = StreamKey::new(3, d as u64);
    let chunks: Vec<f64> = (0..100u64)
        .into_par_iter()
        .map(|c| {
            let mut rng = key.rng(Domain::Aux, c, 0);
            (0..draws / 100)
                .map(|_| {
                    let sq: f64 = (0..d).map(|_| (s * rng.sample::<f64, _>(StandardNormal)).powi(2)).sum();
                    (sq / (sigma * sigma)).exp()
                })
                .sum()
        })
        .collect();
    chunks.iter().sum::<f64>() / draws as f64
}

#[test]
fn calibrated_gaussian_meets_the_moment_condition() {
    for d in [1, 10] {
        let m = moment(d, 1_000_000);
        assert!(m <= 2.02, "d = {d}: {m}");
        assert!(m >= 1.9, "calibration is far from tight at d = {d}: {m}");
    }
}

fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    let rank = |v: &[f64]| {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|a, b| v[*a].total_cmp(&v[*b]));
        let mut r = vec![0.0; v.len()];
        for (k, i) in idx.into_iter().enumerate() {
            r[i] = k as f64;
        }
        r
    };
    let (rx, ry) = (rank(xs), rank(ys));
    let n = xs.len() as f64;
    let d2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b).powi(2)).sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}

#[test]
fn average_witness_falls_with_the_horizon() {
    let start = vec![0.8, -0.6, 0.4, -0.9];
    let oracle = NoisyQuadratic::diagonal(&[1.0, 0.7, 0.4, 0.2], 0.05, 0.01, 2.0, 1.0).unwrap();
    let oracle = oracle.clone().with_delta_f(oracle.value(&start));
    let geometry = GeometrySpec::cube(4, -1.0, 1.0).unwrap();
    for (family, case) in [(Family::ZerothOrder, Case::Recursive), (Family::FirstOrder, Case::Recursive), (Family::FirstOrder, Case::Periodic)] {
        let horizons: Vec<f64> = (8..=12).map(|e| (1u64 << e) as f64).collect();
        let witness: Vec<f64> = horizons
            .iter()
            .map(|&t| {
                let table = configure_from_table(family, case, oracle.constants(), t as usize, 0.1, 1.0).unwrap();
                let runs: Vec<f64> = (0..8)
                    .map(|i| {
                        mirror_descent_run(&oracle, &geometry, &table.config, &start, &StreamKey::new(9, i).fork(t as u64))
                            .unwrap()
                            .average_witness
                    })
                    .collect();
                runs.iter().sum::<f64>() / runs.len() as f64
            })
            .collect();
        let rho = spearman(&horizons, &witness);
        assert!(rho < 0.0, "{family:?} {case:?}: {witness:?}");
    }
}
