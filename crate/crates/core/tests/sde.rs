use curvediff::brownian::{ensemble, simulate, simulate_field, SimulationConfig};
use curvediff::calculus::FlatMetric;
use curvediff::curve::{DiscreteCurve, MetricOrder};
use curvediff::rng::gaussian_block;

fn variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

fn flat_config(c: DiscreteCurve, dt: f64, steps: usize, seed: u64) -> SimulationConfig {
    let mut cfg = SimulationConfig::new(c, MetricOrder(0));
    cfg.dt = dt;
    cfg.n_steps = steps;
    cfg.record_every = 1;
    cfg.seed = seed;
    cfg
}

#[test]
fn flat_centroid_is_an_exact_random_walk() {
    let c = DiscreteCurve::square();
    let (d, n, dt) = (2, 4, 0.01);
    let cfg = flat_config(c, dt, 5, 77);
    let rec = simulate_field(&FlatMetric { dim: d * n }, &cfg, 0).unwrap();
    for k in 0..5 {
        let xi = gaussian_block(77, 0, k as u64, d * n);
        for a in 0..d {
            let mean = (0..n).map(|i| xi[i * d + a]).sum::<f64>() / n as f64;
            let inc = rec.centroid_series[k + 1][a] - rec.centroid_series[k][a];
            assert!((inc - dt.sqrt() * mean).abs() < 1e-14);
        }
    }
}

#[test]
fn flat_centroid_step_variance_is_dt_over_n() {
    let c = DiscreteCurve::square();
    let (d, n, dt, steps, runs) = (2, 4, 0.01, 10, 10_000);
    let cfg = flat_config(c, dt, steps, 5);
    let metric = FlatMetric { dim: d * n };
    let mut disp = vec![Vec::with_capacity(runs); d];
    for r in 0..runs as u64 {
        let rec = simulate_field(&metric, &cfg, r).unwrap();
        let (first, last) = (&rec.centroid_series[0], rec.centroid_series.last().unwrap());
        for a in 0..d {
            disp[a].push(last[a] - first[a]);
        }
    }
    let expect = steps as f64 * dt / n as f64;
    for a in 0..d {
        let v = variance(&disp[a]);
        assert!((v / expect - 1.0).abs() < 0.05, "coordinate {a}: {v} vs {expect}");
    }
}

#[test]
fn single_run_ensemble_reproduces_simulate() {
    let mut cfg = SimulationConfig::new(DiscreteCurve::circle(6, 1.0, 2).unwrap(), MetricOrder(2));
    cfg.n_steps = 50;
    cfg.seed = 9;
    let one = ensemble(&cfg, 1).unwrap();
    assert_eq!(one.runs[0], simulate(&cfg).unwrap());
    let a = ensemble(&cfg, 6).unwrap();
    let b = ensemble(&cfg, 6).unwrap();
    assert_eq!(a, b);
}

#[test]
fn zero_steps_record_only_the_initial_state() {
    let mut cfg = SimulationConfig::new(DiscreteCurve::circle(5, 1.0, 2).unwrap(), MetricOrder(1));
    cfg.n_steps = 0;
    let rec = simulate(&cfg).unwrap();
    assert_eq!(rec.curves.len(), 1);
    assert_eq!(rec.curves[0], cfg.initial);
    assert!(rec.events.is_empty());
}

#[test]
fn higher_order_has_narrower_min_edge_spread() {
    let spread = |m: u32| {
        let mut cfg = SimulationConfig::new(DiscreteCurve::circle(8, 1.0, 2).unwrap(), MetricOrder(m));
        cfg.n_steps = 500;
        cfg.record_every = 50;
        cfg.seed = 31;
        let res = ensemble(&cfg, 20).unwrap();
        assert!(res.events().iter().all(|(_, e)| !e.is_terminal()));
        let q = res.stats.min_edge.last().unwrap();
        (q.q90 - q.q10) / q.q50
    };
    let (s2, s4) = (spread(2), spread(4));
    assert!(s4 < s2, "m = 4 spread {s4} vs m = 2 spread {s2}");
}
