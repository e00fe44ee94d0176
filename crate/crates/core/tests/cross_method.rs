use jsqps::oracle;
use jsqps::pipeline::{SpectralConfig, SpectralModel};
use jsqps::ModelParams;
use num_complex::Complex64 as C64;

fn medium() -> ModelParams {
    ModelParams::new(1.0, 0.9, 1.1, 0.0).unwrap()
}

#[test]
fn transform_matches_truncated_chain() {
    let p = medium();
    let model = SpectralModel::build(&p, SpectralConfig { n: 64, ..Default::default() }).unwrap();
    for s in [C64::new(0.0, 0.0), C64::new(0.5, 0.0), C64::new(1.0, 1.0)] {
        let n = oracle::settled_truncation(&p, s).unwrap();
        let direct = oracle::wstar_direct(&p, s, n).unwrap();
        let spectral = model.wstar(s).unwrap();
        assert!((direct - spectral).norm() <= 1e-3, "s={s}: {direct} vs {spectral}");
    }
}

#[test]
fn low_order_coefficients_match() {
    let p = ModelParams::new(1.0, 0.9, 1.1, 0.5).unwrap();
    let model = SpectralModel::build(&p, SpectralConfig { n: 64, ..Default::default() }).unwrap();
    let s = C64::new(0.5, 0.25);
    let cs = model.conditional(s).unwrap();
    let field = oracle::solve_truncated(&p, s, 64, oracle::REFINE_TOL).unwrap();
    for k in 0..=5 {
        for l in 0..=5 {
            assert!((cs.u(k, l) - field.u(k, l)).norm() <= 1e-3, "U[{k}][{l}]");
            assert!((cs.v(k, l) - field.v(k, l)).norm() <= 1e-3, "V[{k}][{l}]");
        }
    }
}

#[test]
fn symmetric_queues_give_transposed_fields() {
    let p = ModelParams::new(1.2, 1.0, 1.0, 0.5).unwrap();
    let model = SpectralModel::build(&p, SpectralConfig { n: 24, ..Default::default() }).unwrap();
    let cs = model.conditional(C64::new(0.3, 0.7)).unwrap();
    for k in 0..24 {
        for l in 0..24 {
            assert!((cs.u(k, l) - cs.v(l, k)).norm() <= 1e-10);
        }
    }
}

#[test]
fn moments_agree_with_direct_sum() {
    let p = ModelParams::new(2.0, 1.0, 3.0, 0.5).unwrap();
    let model = SpectralModel::build(&p, SpectralConfig { n: 64, ..Default::default() }).unwrap();
    let spectral = model.moments(4).unwrap();
    let (_, direct) = oracle::moments_refined(&p, 4, 1e-10).unwrap();
    for (a, b) in spectral.m.iter().zip(&direct[1..]) {
        assert!((a - b).abs() <= 1e-6 * b, "{a} vs {b}");
    }
}
