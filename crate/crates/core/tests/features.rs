use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use vecset_core::{evaluate_grid, fit_weights, seeds, FeatureBasis, GridSpec, MhConfig, NoiseConfig, PhaseRange};

fn mean_kernel_error(k: usize, seed: u64) -> f64 {
    let basis = FeatureBasis::sample(2, k, 1.0, PhaseRange::TwoPi, seed).unwrap();
    let mut rng = seeds::rng(seed ^ 0xabc);
    let mut total = 0.0;
    for _ in 0..200 {
        let x = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
        let y = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
        let fx = basis.eval_features(&x).unwrap();
        let fy = basis.eval_features(&y).unwrap();
        let dot: f64 = fx.iter().zip(&fy).map(|(a, b)| a * b).sum();
        let d2 = (x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2);
        total += (dot - (-d2 / 2.0).exp()).abs();
    }
    total / 200.0
}

#[test]
fn feature_inner_products_approach_gaussian_kernel() {
    // Monte Carlo error shrinks like 1/sqrt(K); averaged over pairs it is well
    // below the worst-pair error.
    let small: f64 = (0..5).map(|s| mean_kernel_error(128, s)).sum::<f64>() / 5.0;
    let large: f64 = (0..5).map(|s| mean_kernel_error(8192, s)).sum::<f64>() / 5.0;
    assert!(large < 0.012, "K=8192 mean error {large}");
    assert!(large < small / 4.0, "{small} vs {large}");
}

#[test]
fn unit_phase_range_is_a_biased_kernel_estimate() {
    // Phases on [0, 1) do not average out the cos(ω·(x+x') + 2b) term, so the
    // inner product keeps an x+x'-dependent bias that more features cannot remove.
    let basis = FeatureBasis::sample(1, 20000, 1.0, PhaseRange::PaperUnit, 4).unwrap();
    let f = basis.eval_features(&[0.0]).unwrap();
    let dot: f64 = f.iter().map(|v| v * v).sum();
    assert!((dot - 1.0).abs() > 0.1, "{dot}");
}

#[test]
fn tight_cloud_argmax_matches_histogram() {
    let mut rng = seeds::rng(31);
    let pts = DMatrix::from_fn(400, 2, |_, c| [0.8, -0.6][c] + 0.3 * rng.sample::<f64, _>(StandardNormal));
    let bounds = vec![(-3.0, 3.0), (-3.0, 3.0)];
    let spec = GridSpec::new(bounds.clone(), vec![15, 15]).unwrap();
    let mut hist = vec![0usize; 225];
    for r in 0..pts.nrows() {
        let ix = ((pts[(r, 0)] + 3.0) / 0.4).floor() as usize;
        let iy = ((pts[(r, 1)] + 3.0) / 0.4).floor() as usize;
        hist[iy * 15 + ix] += 1;
    }
    let best = (0..225).max_by_key(|&i| hist[i]).unwrap();
    let basis = FeatureBasis::sample(2, 30, 1.0, PhaseRange::TwoPi, 8).unwrap();
    let noise = NoiseConfig { ratio: 1.0, bounds, seed: 9 };
    let mh = MhConfig { seed: 10, ..MhConfig::default() };
    let fit = fit_weights(&pts, &basis, &noise, &mh).unwrap();
    let grid = evaluate_grid(&fit, &basis, &spec).unwrap();
    let found = grid.argmax();
    let expect = spec.cell_center(best);
    for c in 0..2 {
        assert!((found[c] - expect[c]).abs() <= 2.0 * 0.4 + 1e-9, "{found:?} vs {expect:?}");
    }
}
