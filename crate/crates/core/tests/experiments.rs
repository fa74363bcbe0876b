//! End-to-end checks of the estimators and experiments against closed-form oracles.

use dimprofile::pointcloud::{Generator, PointSet};
use dimprofile::projection::{project, projection_experiment, sample_subspace, tube_fraction, Subspace};
use dimprofile::stochastic::{image_dimension_experiment, increment_statistics, FbmSampler, HolderSpec, ImageMap};
use dimprofile::{
    box_dimension, capacity_sweep, inequality_report, profile_estimate, CheckStatus, ScaleGrid, SolverOptions,
};

const CANTOR_DIM: f64 = 0.630_929_753_571_457_4;

fn gen() -> Generator {
    Generator::default()
}

fn sweep_opts() -> SolverOptions<f64> {
    SolverOptions::with_tol(1e-4)
}

fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[test]
fn interval_profile_below_one() {
    let p: PointSet<f64> = gen().grid(1, 4097).unwrap();
    let g = ScaleGrid::new(0.125, 7).unwrap();
    let est = profile_estimate(&capacity_sweep(&p, 0.5, &g, &sweep_opts()).unwrap()).unwrap();
    assert!((est.slope - 0.5).abs() <= 0.05, "d(0.5) = {}", est.slope);
    assert!(est.lower <= est.slope && est.slope <= est.upper);
}

#[test]
fn interval_capacity_slope_allows_log_factor() {
    let p: PointSet<f64> = gen().grid(1, 4097).unwrap();
    let g = ScaleGrid::new(0.125, 7).unwrap();
    let sweep = capacity_sweep(&p, 1.0, &g, &sweep_opts()).unwrap();
    let x: Vec<f64> = sweep.entries.iter().map(|e| -e.r.ln()).collect();
    let y: Vec<f64> = sweep.entries.iter().map(|e| e.capacity.ln()).collect();
    let raw = ols_slope(&x, &y);
    // Lebesgue measure has energy of order r ln(1/r), so C_r ln(1/r) carries slope 1.
    let corrected: Vec<f64> = sweep
        .entries
        .iter()
        .map(|e| (e.capacity * (1.0 / e.r).ln()).ln())
        .collect();
    let slope = ols_slope(&x, &corrected);
    assert!(raw < slope, "raw {raw} corrected {slope}");
    assert!((slope - 1.0).abs() <= 0.07, "corrected slope {slope}");
}

#[test]
fn cantor_profile_at_s_one() {
    let p: PointSet<f64> = gen().cantor(1.0 / 3.0, 12).unwrap();
    let g = ScaleGrid::new(0.125, 12).unwrap();
    let est = profile_estimate(&capacity_sweep(&p, 1.0, &g, &sweep_opts()).unwrap()).unwrap();
    assert!((est.slope - CANTOR_DIM).abs() <= 0.05, "d(1) = {}", est.slope);
}

#[test]
fn box_dimension_oracles() {
    let interval: PointSet<f64> = gen().grid(1, 4097).unwrap();
    let est = box_dimension(&interval, &ScaleGrid::new(1.0, 8).unwrap()).unwrap();
    assert!((est.slope - 1.0).abs() <= 0.05, "interval {}", est.slope);

    let cantor: PointSet<f64> = gen().cantor(1.0 / 3.0, 12).unwrap();
    let est = box_dimension(&cantor, &ScaleGrid::new(1.0, 10).unwrap()).unwrap();
    assert!((est.slope - CANTOR_DIM).abs() <= 0.05, "cantor {}", est.slope);
}

#[test]
fn singleton_inequalities_never_fail() {
    let p = PointSet::new(1, vec![vec![0.25]], "one").unwrap();
    let g = ScaleGrid::new(0.5, 5).unwrap();
    let rep = inequality_report(&p, &[0.5, 1.0, 2.0], &g, &sweep_opts()).unwrap();
    for e in &rep.estimates {
        assert_eq!(e.slope, 0.0);
    }
    assert!(
        rep.checks.iter().all(|c| c.status != CheckStatus::Fail),
        "{:?}",
        rep.checks
    );
}

#[test]
fn line_directions_are_uniform_on_the_circle() {
    let seeds = 10_000u64;
    let mut u: Vec<f64> = (0..seeds)
        .map(|seed| {
            let v = sample_subspace::<f64>(2, 1, seed).unwrap();
            let b = &v.basis()[0];
            (b[1].atan2(b[0]) + std::f64::consts::PI) / (2.0 * std::f64::consts::PI)
        })
        .collect();
    u.sort_by(f64::total_cmp);
    let n = u.len() as f64;
    let ks = u
        .iter()
        .enumerate()
        .map(|(i, &x)| (x - i as f64 / n).max((i + 1) as f64 / n - x))
        .fold(0.0, f64::max);
    assert!(ks < 0.02, "KS statistic {ks}");
}

#[test]
fn tube_fractions_match_exact_laws() {
    let trials = 100_000;
    let r = 0.2;
    let three = tube_fraction(3, 1, &[0.0, 0.0, 1.0], r, trials, 5).unwrap();
    assert!((three.fraction - r).abs() <= 0.005, "n=3: {}", three.fraction);
    let exact = 2.0 / std::f64::consts::PI * r.asin();
    let two = tube_fraction(2, 1, &[0.6, 0.8], r, trials, 6).unwrap();
    assert!(
        (two.fraction - exact).abs() <= 0.004,
        "n=2: {} vs {exact}",
        two.fraction
    );
    let inside = tube_fraction(2, 1, &[0.1, 0.0], 0.5, 10_000, 7).unwrap();
    assert_eq!(inside.fraction, 1.0);
    assert_eq!(inside.kernel, 1.0);
}

#[test]
fn segment_projects_to_a_point_on_the_orthogonal_axis() {
    let segment: PointSet<f64> = gen()
        .grid(1, 1025)
        .unwrap()
        .map_points(
            2,
            |x, out| {
                out[0] = x[0];
                out[1] = 0.0;
            },
            "segment",
        )
        .unwrap();
    let y_axis = Subspace::new(2, vec![vec![0.0, 1.0]]).unwrap();
    let shadow = project(&segment, &y_axis).unwrap();
    let est = box_dimension(&shadow, &ScaleGrid::new(0.5, 5).unwrap()).unwrap();
    assert_eq!(est.slope, 0.0);
}

#[test]
fn circle_projections_agree_with_profile() {
    let p: PointSet<f64> = gen().circle(4096).unwrap();
    let g = ScaleGrid::new(0.25, 5).unwrap();
    let rep = projection_experiment(&p, 1, 10, &g, 11, &sweep_opts()).unwrap();
    assert!((rep.profile.slope - 1.0).abs() <= 0.1, "d(1) = {}", rep.profile.slope);
    assert_eq!(rep.agreement_fraction, 1.0);
    assert!(rep.checks.iter().all(|c| !c.failed()));
}

#[test]
fn fbm_increments_have_the_power_law_variance() {
    let p: PointSet<f64> = gen().grid(1, 257).unwrap();
    let pairs = [(0, 256), (10, 20), (100, 101), (50, 200)];
    for alpha in [0.5, 0.8] {
        let sampler = FbmSampler::new(&p, alpha).unwrap();
        let stats = increment_statistics(&sampler, &p, &pairs, 2000, 1).unwrap();
        for st in stats {
            let d = (p.point(st.i)[0] - p.point(st.j)[0]).abs();
            assert!((st.expected_variance - d.powf(2.0 * alpha)).abs() < 1e-12);
            assert!(
                st.z_score().abs() <= 3.0,
                "alpha {alpha} pair ({}, {}): z {}",
                st.i,
                st.j,
                st.z_score()
            );
            assert!(st.skewness.abs() < 0.15, "skewness {}", st.skewness);
            assert!(st.excess_kurtosis.abs() < 0.3, "kurtosis {}", st.excess_kurtosis);
        }
    }
}

#[test]
fn fbm_covariance_matches_the_structure_function() {
    let p: PointSet<f64> = gen().grid(1, 65).unwrap();
    let alpha = 0.5;
    let sampler = FbmSampler::new(&p, alpha).unwrap();
    let (i, j) = (16usize, 48usize);
    let (x, y) = (p.point(i)[0], p.point(j)[0]);
    let seeds = 4000;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for seed in 0..seeds {
        let f = sampler.sample_fields(1, seed);
        let (a, b) = (f[i][0], f[j][0]);
        sxx += a * a;
        syy += b * b;
        sxy += a * b;
    }
    let cov = sxy / seeds as f64;
    let exact = 0.5 * (x.powf(2.0 * alpha) + y.powf(2.0 * alpha) - (y - x).powf(2.0 * alpha));
    let se = ((sxx / seeds as f64) * (syy / seeds as f64) + cov * cov).sqrt() / (seeds as f64).sqrt();
    assert!((cov - exact).abs() <= 3.0 * se, "cov {cov} exact {exact} se {se}");
}

#[test]
fn square_root_image_respects_the_holder_bound() {
    let p: PointSet<f64> = gen().grid(1, 2049).unwrap();
    let map = ImageMap::Holder(HolderSpec::new(0.5).unwrap());
    let rep = image_dimension_experiment(
        &p,
        map,
        1,
        &ScaleGrid::new(0.125, 6).unwrap(),
        &ScaleGrid::new(0.5, 5).unwrap(),
        &sweep_opts(),
    )
    .unwrap();
    assert!((rep.predicted - 1.0).abs() <= 0.1, "predicted {}", rep.predicted);
    assert!(rep.per_seed_dimensions[0] <= rep.predicted + 0.1);
    assert!(rep.holder_constant.unwrap() <= 1.0 + 1e-9);
    assert!(rep.checks.iter().all(|c| !c.failed()));
}
