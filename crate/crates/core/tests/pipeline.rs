use rmlab_core::algorithms::{run, RunOptions, Scheme, SchemeKind, SchemeSpec};
use rmlab_core::analysis::{
    detect_cycle, find_critical_points, monte_carlo, predict_cycle_radius, Classification, CycleDetection,
    CycleOptions, CycleStability, InitSampler, MonteCarloConfig, SearchBox, TargetSet,
};
use rmlab_core::dynamics::{apt_deviation, integrate_flow_strided};
use rmlab_core::io::{parse_trajectory_csv, write_path_csv, write_trajectory_csv};
use rmlab_core::problems::{make_almost_bilinear, make_bilinear, GradientWell, PolynomialPerturbation};
use rmlab_core::{NoiseModel, NoiseStream, Point, ProblemSpec, SampledPath, StepSchedule};

#[test]
fn almost_bilinear_flow_settles_on_the_predicted_cycle() {
    let pert = PolynomialPerturbation::default_quartic(0.1);
    let h = predict_cycle_radius(&pert).root().unwrap();
    let p = make_almost_bilinear(pert);
    for r0 in [0.4, 2.0] {
        let flow = integrate_flow_strided(&p, &Point::xy(r0, 0.0), 400.0, 1e-3, 10).unwrap();
        let c = detect_cycle(&flow, CycleOptions::flow());
        let c = c.cycle().unwrap_or_else(|| panic!("no cycle from r0 = {r0}: {c:?}"));
        assert!((c.radius_mean - h).abs() < 0.05, "{} vs {h}", c.radius_mean);
        assert!((c.period - 2.0 * std::f64::consts::PI).abs() < 0.1, "{}", c.period);
        assert_eq!(c.stability, CycleStability::Attracting);
    }
}

#[test]
fn bilinear_has_one_center() {
    let scan = find_critical_points(&make_bilinear(), &SearchBox::square(2, 3.0).unwrap(), 7).unwrap();
    assert_eq!(scan.points.len(), 1);
    let cp = &scan.points[0];
    assert!(cp.distance_to(&[0.0, 0.0]) < 1e-10);
    assert_eq!(cp.classification, Classification::Center);
}

#[test]
fn gradient_well_settles_without_cycling() {
    let p = GradientWell::new(1.0).unwrap();
    let flow = integrate_flow_strided(&p, &Point::xy(0.2, -0.1), 50.0, 1e-3, 10).unwrap();
    assert!((flow.last().norm() - 1.0).abs() < 1e-6);
    assert!(!matches!(detect_cycle(&flow, CycleOptions::flow()), CycleDetection::Cycle(_)));
}

#[test]
fn csv_export_preserves_the_analysis() {
    let p = make_bilinear();
    let sched = StepSchedule::power(0.3, 0.6).unwrap();
    let mut stream = NoiseStream::new(NoiseModel::Gaussian { sigma: 0.05 }, 11);
    let mut scheme = Scheme::new(SchemeSpec::plain(SchemeKind::Seg)).unwrap();
    let traj = run(&mut scheme, &p, &Point::xy(1.0, 0.0), &sched, &mut stream, RunOptions::new(400, 1))
        .unwrap()
        .trajectory;
    let mut buf = Vec::new();
    write_trajectory_csv(&mut buf, &traj).unwrap();
    let back = parse_trajectory_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
    let a = apt_deviation(&traj, &p, 2.0, 3.0).unwrap();
    let b = apt_deviation(&back, &p, 2.0, 3.0).unwrap();
    assert_eq!(a, b);

    let flow = integrate_flow_strided(&p, &Point::xy(1.0, 0.0), 3.0, 1e-3, 100).unwrap();
    let mut buf = Vec::new();
    write_path_csv(&mut buf, &flow).unwrap();
    let back = parse_trajectory_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
    assert_eq!(back.times(), flow.times());
}

#[test]
fn monte_carlo_config_round_trips_with_its_fingerprint() {
    let cfg = MonteCarloConfig {
        problem: ProblemSpec::AlmostBilinear {
            epsilon: 0.1,
            coefficients: PolynomialPerturbation::default_quartic(0.0).coefficient_map(),
        },
        scheme: SchemeSpec::averaged(SchemeKind::Seg, 0.5),
        schedule: StepSchedule::power(0.5, 0.7).unwrap(),
        noise: NoiseModel::Gaussian { sigma: 0.01 },
        init: InitSampler::Ball {
            center: vec![0.0, 0.0],
            radius: 2.0,
        },
        runs: 6,
        horizon: 3000,
        target: TargetSet::Annulus {
            center: vec![0.0, 0.0],
            inner: 1.0,
            outer: 1.3,
        },
        threshold: 0.05,
        seed: 3,
    };
    let json = serde_json::to_string(&cfg).unwrap();
    let back: MonteCarloConfig = serde_json::from_str(&json).unwrap();
    assert_eq!(back, cfg);
    assert_eq!(back.fingerprint(), cfg.fingerprint());
    assert_eq!(cfg.fingerprint().len(), 64);

    let a = monte_carlo(&cfg).unwrap();
    assert_eq!(a, monte_carlo(&back).unwrap());
    assert_eq!(a.terminal_distances.len(), 6);
    assert_eq!(a.diverged, 0);
}
