use proptest::prelude::*;

use pvtcell::coupling::{SweepMap, TrafficParams};
use pvtcell::experiments::{db_to_linear, Scenario};
use pvtcell::interference::{outage_evaluation, DiskRule, FadingModel, Interferers, LinkParams};
use pvtcell::markov::{blocking_probability, stationary_distribution, ChainParams};
use pvtcell::numerics::QuadratureSpec;

fn blocking(c: u32, load: f64, ratio: f64) -> f64 {
    blocking_probability(&stationary_distribution(&ChainParams::from_ratios(c, load, ratio)).unwrap())
}

#[test]
fn blocking_monotone_over_grid() {
    let channels: Vec<u32> = (1..=10).map(|i| 2 * i).collect();
    let ratios: Vec<f64> = (0..10).map(|i| 10f64.powf(-1.0 + 0.5 * i as f64)).collect();
    for load in [0.5, 4.0, 15.0] {
        for &r in &ratios {
            let col: Vec<f64> = channels.iter().map(|&c| blocking(c, load, r)).collect();
            assert!(col.windows(2).all(|w| w[1] <= w[0]), "load {load}, ratio {r}: {col:?}");
        }
        for &c in &channels {
            let row: Vec<f64> = ratios.iter().map(|&r| blocking(c, load, r)).collect();
            assert!(row.windows(2).all(|w| w[1] <= w[0]), "load {load}, C {c}: {row:?}");
        }
    }
}

fn link() -> LinkParams {
    Scenario::default().link
}

fn outage(gamma0: f64, who: Interferers, link: &LinkParams) -> f64 {
    outage_evaluation(gamma0, who, link, FadingModel::Rayleigh, &QuadratureSpec::default()).unwrap().probability
}

#[test]
fn outage_non_decreasing_in_threshold() {
    let link = link();
    for delta in [0, 1, 2, 5] {
        let v: Vec<f64> = (0..20)
            .map(|i| outage(db_to_linear(-10.0 + 40.0 * i as f64 / 19.0), Interferers::Count(delta), &link))
            .collect();
        assert!(v.windows(2).all(|w| w[1] >= w[0] - 1e-9), "Δ = {delta}: {v:?}");
    }
}

#[test]
fn outage_non_decreasing_in_interferer_count() {
    // all counts share the disk that holds six base stations, so each extra
    // interferer only adds power
    let link = LinkParams { disk: DiskRule::Pool { size: 6 }, ..link() };
    for db in [-10.0, 0.0, 10.0, 20.0] {
        let v: Vec<f64> = (0..=6).map(|d| outage(db_to_linear(db), Interferers::Count(d), &link)).collect();
        assert!(v.windows(2).all(|w| w[1] >= w[0] - 1e-9), "{db} dB: {v:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distribution_is_normalized(c in 1u32..60, load in 0.01f64..50.0, ratio in 1e-3f64..1e4) {
        let d = stationary_distribution(&ChainParams::from_ratios(c, load, ratio)).unwrap();
        prop_assert!((d.total() - 1.0).abs() < 1e-12);
        prop_assert!(d.as_slice().iter().all(|&p| (0.0..=1.0).contains(&p)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn outage_stays_a_probability(
        db in -20.0f64..40.0,
        b in 2.5f64..6.0,
        density in 0.05f64..2.0,
        delta in 0u32..8,
    ) {
        let link = LinkParams { bs_density: density, path_loss_exponent: b, ..link() };
        let ev = outage_evaluation(db_to_linear(db), Interferers::Count(delta), &link, FadingModel::Rayleigh, &QuadratureSpec::default()).unwrap();
        prop_assert!((0.0..=1.0).contains(&ev.probability));
        prop_assert!((ev.raw - ev.probability).abs() < 1e-3);
    }

    #[test]
    fn coupled_map_keeps_unit_interval(
        db in -10.0f64..20.0,
        load in 0.5f64..30.0,
        c in 1u32..30,
        p in 0.0f64..=1.0,
    ) {
        let sc = Scenario::default();
        let link = sc.link;
        let traffic = TrafficParams { channels: c, arrival_rate: load * sc.traffic.holding_rate, ..sc.traffic };
        let mut map = SweepMap::new(traffic, |q: f64| {
            pvtcell::interference::unavailable_probability_unbounded(
                q,
                &link.with_gamma0(db_to_linear(db)),
                FadingModel::Rayleigh,
                &QuadratureSpec::default(),
            )
            .map_err(Into::into)
        });
        for q in [0.0, p, 1.0] {
            let s = map.sweep(q).unwrap();
            prop_assert!((0.0..=1.0).contains(&s.p_next));
            prop_assert!((0.0..=1.0).contains(&s.epsilon));
        }
    }
}
