use chrono::{Duration, NaiveDate};
use ivnet_core::cycles::{classify_hubs, phase_averages, HubRule, Period as Block, PhaseCalendar};
use ivnet_core::forecast::{
    predictive_regression, threshold_decompose, Frequency, MacroSeries, Period, RegressionOptions,
};
use ivnet_core::industry_panel::{build_panel, CalendarPolicy, CapObservation, MembershipInterval};
use ivnet_core::network::{default_labels, draw_connectedness, ConnectednessPoint, ConnectednessSeries, StatSummary};
use ivnet_core::options_iv::{firm_vix, forward_price, implied_variance, FirmVixPoint, IvConfig};
use ivnet_core::sim::{bs_chain, simulate_var, ChainGrid, ParamPath, VarParams, VarSimSpec};
use ivnet_core::tvp_var::{estimate_path, kernel_weights, TvpVarSpec, WeightNormalization};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn d0() -> NaiveDate {
    NaiveDate::from_ymd_opt(2020, 1, 2).unwrap()
}

/// Stable VAR(1) and SPD covariance from unconstrained draws.
fn var_system(n: usize) -> impl Strategy<Value = (DMatrix<f64>, DMatrix<f64>)> {
    (prop::collection::vec(-1.0f64..1.0, n * n), prop::collection::vec(-1.0f64..1.0, n * n), 0.1f64..0.95).prop_map(
        move |(a, b, target)| {
            let phi = DMatrix::from_vec(n, n, a);
            let rho = ivnet_core::linalg::spectral_radius(&phi);
            let phi = if rho > 0.0 { phi * (target / rho) } else { phi };
            let l = DMatrix::from_vec(n, n, b);
            let sigma = &l * l.transpose() + DMatrix::identity(n, n) * 0.1;
            (phi, sigma)
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn connectedness_identities((phi, sigma) in (2usize..6).prop_flat_map(var_system), h in 1usize..15) {
        let n = phi.nrows();
        let (adj, s) = draw_connectedness(&[phi], &sigma, h, &default_labels(n)).unwrap();
        for row in adj.theta_tilde.row_iter() {
            prop_assert!((row.sum() - 1.0).abs() <= 1e-10);
        }
        prop_assert!(s.net.iter().sum::<f64>().abs() <= 1e-8);
        prop_assert!((s.to.iter().sum::<f64>() - s.total).abs() <= 1e-8);
        prop_assert!((s.from.iter().sum::<f64>() - s.total).abs() <= 1e-8);
        for j in 0..n {
            prop_assert!(s.agg[j] >= s.net[j].abs() - 1e-12);
        }
    }

    #[test]
    fn relabeling_permutes_node_statistics((phi, sigma) in var_system(4), shift in 1usize..4) {
        let n = 4;
        let perm: Vec<usize> = (0..n).map(|i| (i + shift) % n).collect();
        let p = DMatrix::from_fn(n, n, |i, j| if perm[i] == j { 1.0 } else { 0.0 });
        let phi_p = &p * &phi * p.transpose();
        let sigma_p = &p * &sigma * p.transpose();
        let labels = default_labels(n);
        let (_, a) = draw_connectedness(&[phi], &sigma, 10, &labels).unwrap();
        let (_, b) = draw_connectedness(&[phi_p], &sigma_p, 10, &labels).unwrap();
        prop_assert!((a.total - b.total).abs() <= 1e-9);
        for (i, &src) in perm.iter().enumerate() {
            prop_assert!((b.net[i] - a.net[src]).abs() <= 1e-9);
            prop_assert!((b.agg[i] - a.agg[src]).abs() <= 1e-9);
        }
    }

    #[test]
    fn kernel_weights_symmetric_and_normalized(t_len in 5usize..300, frac in 0.0f64..1.0, h in 1.0f64..40.0) {
        let target = ((t_len - 1) as f64 * frac) as usize;
        let w = kernel_weights(t_len, target, h, WeightNormalization::SampleSize);
        prop_assert!((w.total() - t_len as f64).abs() <= 1e-8 * t_len as f64);
        for k in 1..=target.min(t_len - 1 - target) {
            prop_assert!((w.weights[target - k] - w.weights[target + k]).abs() <= 1e-12 * w.weights[target]);
        }
        let e = kernel_weights(t_len, target, h, WeightNormalization::EffectiveSampleSize);
        let kish = e.weights.iter().sum::<f64>().powi(2) / e.weights.iter().map(|x| x * x).sum::<f64>();
        prop_assert!((e.total() - kish).abs() <= 1e-8 * kish);
        prop_assert!(e.total() <= t_len as f64 + 1e-8);
    }

    #[test]
    fn implied_variance_is_scale_free(lambda in 0.01f64..100.0, vol in 0.1f64..0.6) {
        let base = bs_chain("X", d0(), 30, 100.0, 0.01, vol, &ChainGrid::default());
        let scaled = bs_chain("X", d0(), 30, 100.0 * lambda, 0.01, vol, &ChainGrid::default());
        prop_assume!(base.quotes().len() == scaled.quotes().len());
        let a = implied_variance(&base, &IvConfig::default()).unwrap();
        let b = implied_variance(&scaled, &IvConfig::default()).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * a.max(1e-3), "{a} vs {b}");
    }

    #[test]
    fn forward_exact_on_parity_chains(spot in 10.0f64..500.0, rate in -0.01f64..0.08, vol in 0.1f64..0.8, days in 7i64..90) {
        let c = bs_chain("X", d0(), days, spot, rate, vol, &ChainGrid::default());
        let f = forward_price(&c).unwrap();
        let exact = spot * (rate * days as f64 / 365.0).exp();
        prop_assert!((f / exact - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn panel_ignores_row_order(seed in any::<u64>()) {
        let (vix, caps, members) = panel_fixture();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        let mut v2 = vix.clone();
        let mut c2 = caps.clone();
        let mut m2 = members.clone();
        use rand::seq::SliceRandom;
        v2.shuffle(&mut rng);
        c2.shuffle(&mut rng);
        m2.shuffle(&mut rng);
        let a = build_panel(&vix, &caps, &members, &CalendarPolicy::default()).unwrap();
        let b = build_panel(&v2, &c2, &m2, &CalendarPolicy::default()).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn hub_classification_is_scale_free(values in prop::collection::vec(0.1f64..50.0, 9..14), c in 0.01f64..100.0) {
        let agg: Vec<(String, f64)> = values.iter().enumerate().map(|(i, v)| (format!("I{i:02}"), *v)).collect();
        let scaled: Vec<(String, f64)> = agg.iter().map(|(s, v)| (s.clone(), v * c)).collect();
        let a = classify_hubs(&agg, &HubRule::default()).unwrap();
        let b = classify_hubs(&scaled, &HubRule::default()).unwrap();
        prop_assert_eq!(&a.hubs, &b.hubs);
        prop_assert_eq!(&a.non_hubs, &b.non_hubs);
        prop_assert_eq!(a.hubs.len() + a.middle.len() + a.non_hubs.len(), values.len());
    }

    #[test]
    fn phase_means_recombine(values in prop::collection::vec(0.0f64..60.0, 40), start in 0i64..4000, step in 1i64..40) {
        let first = NaiveDate::from_ymd_opt(1999, 1, 1).unwrap() + Duration::days(start);
        let points: Vec<ConnectednessPoint> = values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let s = vec![StatSummary::point(*v), StatSummary::point(60.0 - v)];
                ConnectednessPoint {
                    date: first + Duration::days(step * i as i64),
                    total: StatSummary::point(*v),
                    to: s.clone(),
                    from: s.clone(),
                    net: vec![StatSummary::point(v - 30.0), StatSummary::point(30.0 - v)],
                    agg: s,
                    draws_used: 1,
                    used_unstable: false,
                }
            })
            .collect();
        let series = ConnectednessSeries { labels: default_labels(2), horizon: 10, points };
        let table = phase_averages(&series, &PhaseCalendar::bundled()).unwrap();
        let total = table.block(Block::Total).unwrap();
        for j in 0..2 {
            let (mut num, mut days) = (0.0, 0usize);
            for b in table.blocks.iter().filter(|b| b.period != Block::Total) {
                num += b.days as f64 * b.nodes[j].agg;
                days += b.days;
            }
            prop_assert_eq!(days, total.days);
            prop_assert!((num / days as f64 - total.nodes[j].agg).abs() <= 1e-8);
        }
    }

    #[test]
    fn adjusted_r2_invariant_to_affine_regressor(a in prop::sample::select(vec![-50.0, -0.5, 0.01, 3.0, 1e3]), b in -10.0f64..10.0, seed in 0u64..1000) {
        let n: usize = 120;
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        use rand::Rng;
        let x: Vec<f64> = (0..n).map(|_| rng.sample(rand_distr::StandardNormal)).collect();
        let y: Vec<f64> = (0..n).map(|i| 0.3 * x[i.saturating_sub(1)] + rng.sample::<f64, _>(rand_distr::StandardNormal)).collect();
        let series = |id: &str, v: &[f64]| MacroSeries::new(id, Frequency::Monthly, v.iter().enumerate().map(|(i, z)| (Period::month(2000, 1).offset(i as i32), *z)).collect()).unwrap();
        let xs = series("x", &x);
        let xt = series("x", &x.iter().map(|v| a * v + b).collect::<Vec<_>>());
        let ys = series("y", &y);
        let r1 = predictive_regression(&ys, &[xs], 1, &RegressionOptions::default()).unwrap();
        let r2 = predictive_regression(&ys, &[xt], 1, &RegressionOptions::default()).unwrap();
        prop_assert!((r1.adj_r2 - r2.adj_r2).abs() <= 1e-9);
        let (c1, c2) = (r1.coefficient("x").unwrap(), r2.coefficient("x").unwrap());
        prop_assert!((c2.estimate * a - c1.estimate).abs() <= 1e-9 * c1.estimate.abs().max(1e-6));
        prop_assert!((c2.se * a.abs() - c1.se).abs() <= 1e-9 * c1.se);
    }

    #[test]
    fn threshold_split_is_exact(values in prop::collection::vec(-5.0f64..5.0, 1..50), tau in -2.0f64..1.0) {
        let y = MacroSeries::new("y", Frequency::Monthly, values.iter().enumerate().map(|(i, v)| (Period::month(2000, 1).offset(i as i32), *v)).collect()).unwrap();
        let (e, r) = threshold_decompose(&y, tau);
        for (i, v) in values.iter().enumerate() {
            let (ev, rv) = (e.observations[i].1, r.observations[i].1);
            prop_assert_eq!(ev + rv, v + tau);
            prop_assert!(ev >= tau && rv <= tau);
        }
    }
}

fn panel_fixture() -> (Vec<FirmVixPoint>, Vec<CapObservation>, Vec<MembershipInterval>) {
    let days: Vec<NaiveDate> = ivnet_core::sim::weekdays_from(d0(), 15);
    let firms = [("A", "IT"), ("B", "IT"), ("C", "F"), ("D", "F"), ("E", "F")];
    let mut vix = Vec::new();
    let mut caps = Vec::new();
    for (k, (f, _)) in firms.iter().enumerate() {
        for (t, d) in days.iter().enumerate() {
            if (t + k) % 7 == 3 {
                continue;
            }
            vix.push(FirmVixPoint {
                firm_id: f.to_string(),
                date: *d,
                vix: 0.1 + 0.01 * ((t * 3 + k * 5) % 11) as f64,
            });
            caps.push(CapObservation { firm_id: f.to_string(), date: *d, market_cap: 10.0 + (t * k) as f64 });
        }
    }
    let members = firms
        .iter()
        .map(|(f, i)| MembershipInterval {
            firm_id: f.to_string(),
            industry_id: i.to_string(),
            start: d0(),
            end: NaiveDate::MAX,
        })
        .collect();
    (vix, caps, members)
}

#[test]
fn panel_values_within_member_range_and_weights_sum_to_one() {
    let (vix, caps, members) = panel_fixture();
    let b = build_panel(&vix, &caps, &members, &CalendarPolicy::default()).unwrap();
    let lookup = |f: &str, d: NaiveDate| {
        vix.iter().filter(|p| p.firm_id == f && p.date <= d).max_by_key(|p| p.date).unwrap().vix
    };
    for (t, d) in b.panel.dates.iter().enumerate() {
        for j in 0..b.panel.n_industries() {
            let w = &b.weights[t][j];
            assert!((w.iter().map(|(_, x)| x).sum::<f64>() - 1.0).abs() < 1e-12);
            let vals: Vec<f64> = w.iter().map(|(f, _)| lookup(f, *d)).collect();
            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let v = b.panel.values[(t, j)];
            assert!(v >= lo - 1e-15 && v <= hi + 1e-15);
        }
    }
}

#[test]
fn vix_error_shrinks_with_finer_grids() {
    let mut errors = Vec::new();
    for frac in [1.0 / 25.0, 1.0 / 50.0, 1.0 / 100.0, 1.0 / 200.0, 1.0 / 400.0] {
        let grid = ChainGrid { spacing_frac: frac, ..ChainGrid::default() };
        let c = bs_chain("X", d0(), 30, 100.0, 0.01, 0.2, &grid);
        errors.push((firm_vix(&c, &IvConfig::default()).unwrap().vix - 0.2).abs());
    }
    assert!(errors[3] <= 0.01);
    for w in errors.windows(2) {
        assert!(w[1] <= w[0], "{errors:?}");
    }
}

#[test]
fn estimation_is_independent_of_thread_count() {
    let phi = DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.2, 0.3]);
    let spec_sim = VarSimSpec {
        path: ParamPath::Constant(VarParams::var1(phi, DMatrix::identity(2, 2))),
        t_len: 120,
        burn_in: 50,
    };
    let data = simulate_var(&spec_sim, 5).unwrap();
    let spec = TvpVarSpec { lags: 1, n_draws: 30, seed: 9, ..Default::default() };
    let idx: Vec<usize> = (1..120).step_by(7).collect();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| estimate_path(&data, &spec, &idx).unwrap())
    };
    assert_eq!(run(1), run(4));
}
