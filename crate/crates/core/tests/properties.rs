use proptest::prelude::*;

use unirec::bounds::{lemma_objective, min_horizon, select_params_case1, select_params_case23};
use unirec::optimizer::normalized_update;
use unirec::{BoundEnvelope, Case, Domain, EnvelopeParams, Family, GeometrySpec, ProblemConstants, StreamKey};

fn family() -> impl Strategy<Value = Family> {
    prop_oneof![Just(Family::ZerothOrder), Just(Family::FirstOrder), Just(Family::SecondOrder)]
}

fn case() -> impl Strategy<Value = Case> {
    prop_oneof![Just(Case::Recursive), Just(Case::Probabilistic), Just(Case::Periodic)]
}

fn constants() -> impl Strategy<Value = ProblemConstants> {
    (0.0..3.0f64, 0.0..3.0f64, 0.0..3.0f64, 0.0..3.0f64, 0.0..3.0f64, 0.1..3.0f64).prop_map(|(sigma, lipschitz, ell, gamma, alpha, g_update)| {
        ProblemConstants { sigma, lipschitz, ell, gamma, alpha, g_update, delta_f: 1.0 }
    })
}

#[allow(clippy::too_many_arguments)]
fn params(family: Family, case: Case, beta: f64, p: f64, period: usize, eta: f64, horizon: usize, delta: f64) -> EnvelopeParams {
    EnvelopeParams {
        family,
        case,
        beta: if case == Case::Recursive { beta } else { 1.0 },
        p,
        period: period.min(horizon),
        eta,
        batch_size: 4,
        horizon,
        delta,
        kappa: 1.0,
    }
}

fn envelope(p: EnvelopeParams, k: &ProblemConstants) -> Vec<f64> {
    let env = BoundEnvelope::new(p.clone(), k).unwrap();
    (0..=p.horizon.min(40)).map(|t| env.eval(t)).collect()
}

fn dominated(lo: &[f64], hi: &[f64]) -> bool {
    lo.iter().zip(hi).all(|(a, b)| *a <= *b * (1.0 + 1e-12))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn envelope_shrinks_as_delta_grows(
        f in family(), c in case(), k in constants(),
        beta in 0.0..0.99f64, p in 0.01..1.0f64, period in 1usize..200, eta in 1e-4..0.3f64,
        horizon in 2usize..3000, d1 in 1e-4..0.5f64, ratio in 1.0..1.9f64,
    ) {
        let loose = envelope(params(f, c, beta, p, period, eta, horizon, d1 * ratio), &k);
        let tight = envelope(params(f, c, beta, p, period, eta, horizon, d1), &k);
        prop_assert!(dominated(&loose, &tight));
    }

    #[test]
    fn envelope_grows_with_every_constant_and_the_step(
        f in family(), c in case(), k in constants(),
        beta in 0.0..0.99f64, p in 0.01..1.0f64, period in 1usize..200, eta in 1e-4..0.3f64,
        horizon in 2usize..3000, delta in 1e-3..0.5f64, which in 0usize..6, bump in 1.0..3.0f64,
    ) {
        let mut big = k;
        let mut eta_big = eta;
        match which {
            0 => big.sigma *= bump,
            1 => big.ell *= bump,
            2 => big.gamma *= bump,
            3 => big.alpha *= bump,
            4 => big.lipschitz *= bump,
            _ => eta_big *= bump,
        }
        let small = envelope(params(f, c, beta, p, period, eta, horizon, delta), &k);
        let large = envelope(params(f, c, beta, p, period, eta_big, horizon, delta), &big);
        prop_assert!(dominated(&small, &large));
    }

    #[test]
    fn envelope_is_nonincreasing_in_t(f in family(), c in case(), k in constants(), beta in 0.0..0.99f64, horizon in 2usize..500) {
        let env = envelope(params(f, c, beta, 0.1, 10, 0.01, horizon, 0.1), &k);
        prop_assert!(env.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn normalized_update_has_unit_dual_norm(v in prop::collection::vec(-1e3..1e3f64, 1..10), simplex in any::<bool>()) {
        prop_assume!(v.iter().any(|x| x.abs() > 1e-6));
        let g = if simplex { GeometrySpec::simplex(v.len()).unwrap() } else { GeometrySpec::euclidean(v.len()).unwrap() };
        let u = normalized_update(&v, &g).unwrap();
        prop_assert!((g.dual_norm(&u).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn prox_steps_stay_feasible(
        raw in prop::collection::vec(0.01..1.0f64, 2..8), seed in any::<u64>(), eta in 1e-3..50.0f64,
    ) {
        let d = raw.len();
        let s: f64 = raw.iter().sum();
        let w: Vec<f64> = raw.iter().map(|x| x / s).collect();
        let mut rng = StreamKey::new(seed, 0).rng(Domain::Aux, 0, 0);
        let u: Vec<f64> = (0..d).map(|_| rand::Rng::random_range(&mut rng, -10.0..10.0)).collect();
        let simplex = GeometrySpec::simplex(d).unwrap();
        let next = simplex.prox_step(&w, &u, eta).unwrap();
        prop_assert!(simplex.check_feasible(&next).is_ok());
        prop_assert!(simplex.bregman(&next, &w).unwrap() >= 0.0);
        let cube = GeometrySpec::cube(d, -1.0, 1.0).unwrap();
        let inside: Vec<f64> = w.iter().map(|x| 2.0 * x - 1.0).collect();
        prop_assert!(cube.check_feasible(&cube.prox_step(&inside, &u, eta).unwrap()).is_ok());
    }

    #[test]
    fn min_horizon_is_sufficient(q in 0.25..4.0f64, le in -5.0..-0.1f64, ld in -5.0..-0.1f64) {
        let (eps, delta) = (10f64.powf(le), 10f64.powf(ld));
        let t = min_horizon(eps, delta, q) as f64;
        prop_assert!((t / delta).ln().powf(q) / t <= eps);
    }

    #[test]
    fn selected_parameters_meet_the_stated_bound(
        f in family(), reset in any::<bool>(), periodic in any::<bool>(),
        logs in prop::array::uniform6(-3.0..3.0f64), lt in 0.0..7.0f64,
    ) {
        let mut c = logs.map(|x| 10f64.powf(x));
        if f != Family::SecondOrder {
            c[5] = 0.0;
        }
        let horizon = 10f64.powf(lt).ceil() as usize;
        let sel = if reset {
            c[2] = 0.0;
            select_params_case23(&c, f, if periodic { Case::Periodic } else { Case::Probabilistic }, horizon).unwrap()
        } else {
            select_params_case1(&c, f, horizon).unwrap()
        };
        prop_assume!(sel.admissible);
        prop_assert!(lemma_objective(f, &c, sel.eta, sel.rate, horizon as f64) <= sel.predicted_bound);
    }

    #[test]
    fn streams_depend_only_on_their_address(seed in any::<u64>(), trial in any::<u64>(), t in any::<u64>(), i in any::<u64>()) {
        let a = StreamKey::new(seed, trial);
        prop_assert_eq!(a.uniform(Domain::Sample, t, i), StreamKey::new(seed, trial).uniform(Domain::Sample, t, i));
        prop_assert_ne!(a.counter(Domain::Sample, t, i), a.counter(Domain::Batch, t, i));
    }
}
