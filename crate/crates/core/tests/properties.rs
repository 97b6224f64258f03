use proptest::prelude::*;

use rmlab_core::algorithms::{averaged_step, run, RunOptions, Scheme, SchemeKind, SchemeSpec};
use rmlab_core::analysis::{abelian_integral, predict_cycle_radius};
use rmlab_core::dynamics::interpolate;
use rmlab_core::io::{parse_trajectory_csv, write_trajectory_csv};
use rmlab_core::problems::{make_bilinear, make_forsaken, PolynomialPerturbation};
use rmlab_core::{NoiseModel, NoiseStream, Point, StepSchedule, StepValue, Trajectory};

fn first_order() -> impl Strategy<Value = SchemeKind> {
    prop_oneof![
        Just(SchemeKind::Sgda),
        Just(SchemeKind::Ppm),
        Just(SchemeKind::Seg),
        Just(SchemeKind::Peg),
    ]
}

fn step(gamma: f64) -> StepValue {
    StepValue { gamma, delta: None }
}

fn quiet() -> NoiseStream {
    NoiseStream::new(NoiseModel::None, 0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn sgda_bilinear_norm_growth(x in -5.0..5.0f64, y in -5.0..5.0f64, g in 1e-4..0.5f64) {
        let z = Point::xy(x, y);
        let mut s = Scheme::new(SchemeSpec::plain(SchemeKind::Sgda)).unwrap();
        let out = s.step(&make_bilinear(), &z, step(g), &mut quiet()).unwrap();
        let want = (1.0 + g * g) * z.norm().powi(2);
        prop_assert!((out.next.norm().powi(2) - want).abs() <= 1e-12 * want.max(1e-300));
    }

    #[test]
    fn seg_bilinear_norm_contraction(x in -5.0..5.0f64, y in -5.0..5.0f64, g in 1e-4..0.5f64) {
        let z = Point::xy(x, y);
        let mut s = Scheme::new(SchemeSpec::plain(SchemeKind::Seg)).unwrap();
        let out = s.step(&make_bilinear(), &z, step(g), &mut quiet()).unwrap();
        let want = (1.0 - g * g + g.powi(4)) * z.norm().powi(2);
        prop_assert!((out.next.norm().powi(2) - want).abs() <= 1e-12 * want.max(1e-300));
    }

    #[test]
    fn ppm_bilinear_norm_contraction(x in -5.0..5.0f64, y in -5.0..5.0f64, g in 1e-4..0.5f64) {
        let z = Point::xy(x, y);
        let mut s = Scheme::new(SchemeSpec::plain(SchemeKind::Ppm)).unwrap();
        let out = s.step(&make_bilinear(), &z, step(g), &mut quiet()).unwrap();
        let want = z.norm().powi(2) / (1.0 + g * g);
        prop_assert!((out.next.norm().powi(2) - want).abs() <= 1e-12 * want.max(1e-300));
    }

    #[test]
    fn averaged_wrapper_is_a_shorter_step(
        kind in first_order(),
        x in -1.0..1.0f64,
        y in -1.0..1.0f64,
        g in 1e-3..0.1f64,
        alpha in 0.05..0.95f64,
        seed in any::<u64>(),
    ) {
        let f = make_forsaken();
        let z = Point::xy(x, y);
        let noise = NoiseModel::Gaussian { sigma: 0.1 };
        let base = Scheme::new(SchemeSpec::plain(kind))
            .unwrap()
            .step(&f, &z, step(g), &mut NoiseStream::new(noise, seed))
            .unwrap();
        let mut wrapped = Scheme::new(SchemeSpec::plain(kind)).unwrap();
        let out = averaged_step(&mut wrapped, &f, &z, step(g), alpha, &mut NoiseStream::new(noise, seed)).unwrap();
        let want = z.coords() + &base.signal * (alpha * g);
        prop_assert!((out.next.coords() - want).norm() <= 1e-12 * (1.0 + z.norm()));
    }

    #[test]
    fn interpolation_hits_knots_and_midpoints(gammas in prop::collection::vec(1e-3..1.0f64, 2..30), seed in any::<u64>()) {
        let sched = StepSchedule::sequence(gammas.clone()).unwrap();
        let mut stream = NoiseStream::new(NoiseModel::Gaussian { sigma: 0.3 }, seed);
        let mut scheme = Scheme::new(SchemeSpec::plain(SchemeKind::Sgda)).unwrap();
        let traj = run(&mut scheme, &make_bilinear(), &Point::xy(1.0, 0.5), &sched, &mut stream,
            RunOptions::new(gammas.len() as u64, 1)).unwrap().trajectory;
        let t = traj.effective_times();
        let z = traj.iterates();
        for i in 0..t.len() {
            prop_assert_eq!(&interpolate(&traj, t[i]).unwrap(), &z[i]);
        }
        for i in 0..t.len() - 1 {
            let mid = interpolate(&traj, 0.5 * (t[i] + t[i + 1])).unwrap();
            let want = (z[i].coords() + z[i + 1].coords()) * 0.5;
            prop_assert!((mid.coords() - &want).norm() <= 1e-12 * (1.0 + want.norm()));
        }
        prop_assert!(interpolate(&traj, t[t.len() - 1] + 1e-6).is_err());
    }

    #[test]
    fn csv_round_trip_is_bit_exact(rows in prop::collection::vec((any::<f64>(), any::<f64>()), 1..20)) {
        let mut traj = Trajectory::new();
        let mut tau = 0.0;
        for (n, (x, y)) in rows.iter().enumerate() {
            prop_assume!(x.is_finite() && y.is_finite());
            traj.push(n as u64, tau, 0.1, Point::xy(*x, *y));
            tau += 0.1;
        }
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &traj).unwrap();
        let back = parse_trajectory_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
        for (a, b) in back.points.iter().zip(traj.iterates()) {
            prop_assert_eq!(a[0].to_bits(), b[0].to_bits());
            prop_assert_eq!(a[1].to_bits(), b[1].to_bits());
        }
    }

    #[test]
    fn predicted_radius_is_a_zero(a2 in 0.1..2.0f64, a4 in -2.0..-0.1f64, eps in 1e-3..0.5f64) {
        let pert = PolynomialPerturbation::from_terms(&[(2, a2), (4, a4)], eps).unwrap();
        let h = predict_cycle_radius(&pert).root().expect("a2 > 0 > a4 has a positive root");
        // closed form for the quartic: h² = -a2·2 / (a4·3)
        prop_assert!((h * h - (-2.0 * a2 / (3.0 * a4))).abs() <= 1e-9 * h * h);
        prop_assert!(abelian_integral(&pert, h).abs() <= 1e-9 * abelian_integral(&pert, 2.0 * h).abs().max(1.0));
    }
}

#[test]
fn identical_seeds_identical_runs_for_every_scheme() {
    let sched = StepSchedule::power(0.01, 0.7).unwrap().with_sampling_radius(0.5, 0.25).unwrap();
    let kinds = [
        SchemeKind::Sgda,
        SchemeKind::Ppm,
        SchemeKind::Seg,
        SchemeKind::Peg,
        SchemeKind::Spsa,
        SchemeKind::Hd,
        SchemeKind::Sga { lambda: 0.5 },
        SchemeKind::Cono { lambda: 0.5 },
        SchemeKind::Adam(Default::default()),
        SchemeKind::ExtraAdam(Default::default()),
    ];
    for kind in kinds {
        let go = || {
            let mut s = Scheme::new(SchemeSpec::plain(kind)).unwrap();
            let mut stream = NoiseStream::new(NoiseModel::Gaussian { sigma: 0.05 }, 42);
            run(&mut s, &make_forsaken(), &Point::xy(0.8, 0.2), &sched, &mut stream, RunOptions::new(300, 1))
                .map(|r| r.trajectory)
                .unwrap_or_else(|e| panic!("{}: {e}", kind.name()))
        };
        assert_eq!(go(), go(), "{}", kind.name());
    }
}
