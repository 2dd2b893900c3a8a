use mminf_qsd::sim::{self, SimConfig};
use mminf_qsd::{laplace, ModelParams};

fn p(a: f64, q: f64) -> ModelParams {
    ModelParams::new(a, q).unwrap()
}

#[test]
fn time_change_rescales_paths() {
    let c = 4.0;
    let base = sim::run(
        &SimConfig::new(p(1.5, 1.0), 5_000)
            .seed(7)
            .t_max(50.0)
            .probes(vec![1.0, 3.0]),
    )
    .unwrap();
    let fast = sim::run(
        &SimConfig::new(p(1.5 * c, c), 5_000)
            .seed(7)
            .t_max(50.0 / c)
            .probes(vec![1.0 / c, 3.0 / c]),
    )
    .unwrap();
    for (&t, &tc) in base.absorption_times.iter().zip(&fast.absorption_times) {
        assert!(
            (t - c * tc).abs() <= 1e-12 * t.max(1.0),
            "{t} vs {}",
            c * tc
        );
    }
    assert_eq!(base.censored, fast.censored);
    assert_eq!(base.states_at, fast.states_at);
}

#[test]
fn censoring_truncates_the_same_paths() {
    let cfg = SimConfig::new(p(1.0, 1.0), 20_000).seed(3);
    let full = sim::run(&cfg.clone().t_max(200.0)).unwrap();
    let short = sim::run(&cfg.t_max(2.0)).unwrap();
    assert_eq!(full.n_censored, 0);
    let mut censored = 0;
    for i in 0..full.len() {
        if full.absorption_times[i] > 2.0 {
            assert!(short.censored[i]);
            assert_eq!(short.absorption_times[i], 2.0);
            censored += 1;
        } else {
            assert!(!short.censored[i]);
            assert_eq!(short.absorption_times[i], full.absorption_times[i]);
        }
    }
    assert_eq!(short.n_censored, censored);
    assert_eq!(short.survivors_at(2.0), censored);
}

#[test]
fn probe_snapshots_count_survivors() {
    let probes = vec![0.0, 0.5, 1.0, 2.5, 4.0];
    let stats = sim::run(&SimConfig::new(p(2.0, 1.0), 10_000).probes(probes.clone())).unwrap();
    for (i, &t) in probes.iter().enumerate() {
        assert_eq!(stats.states_at[i].len(), stats.survivors_at(t));
        assert!(stats.states_at[i].iter().all(|&s| s >= 1));
    }
}

#[test]
fn mean_from_higher_start_is_larger() {
    let params = p(1.0, 1.0);
    let one = sim::run(&SimConfig::new(params, 50_000)).unwrap();
    let three = sim::run(&SimConfig::new(params, 50_000).initial_state(3)).unwrap();
    let m1 = one.mean_absorption_time().unwrap();
    let m3 = three.mean_absorption_time().unwrap();
    assert!(m3.mean > m1.mean + 5.0 * m3.stderr);
    let exact = laplace::mean_absorption_time(&params);
    assert!((m1.mean - exact).abs() < 4.0 * m1.stderr);
}

#[test]
fn seeds_change_the_sample() {
    let cfg = SimConfig::new(p(1.0, 1.0), 1_000);
    let a = sim::run(&cfg.clone().seed(1)).unwrap();
    let b = sim::run(&cfg.seed(2)).unwrap();
    assert_ne!(a.absorption_times, b.absorption_times);
}

#[test]
fn prefix_of_a_larger_run_is_stable() {
    let small = sim::run(&SimConfig::new(p(1.0, 1.0), 5_000).seed(11)).unwrap();
    let large = sim::run(&SimConfig::new(p(1.0, 1.0), 12_345).seed(11)).unwrap();
    assert_eq!(small.absorption_times[..], large.absorption_times[..5_000]);
}
