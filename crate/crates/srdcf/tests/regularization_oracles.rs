//! The transformed penalty operator against direct spatial-domain
//! evaluation of the weighted filter norm.

mod common;

use common::{random_map, rng};
use srdcf::regularization::{
    build_operator, sparsify_spectrum, uniform_spectrum, weights_from_spectrum, SpatialWeights,
};
use srdcf::signal::{dft2, partition_domain, to_real_spectrum, GridDomain};

/// `||C~ f~||^2` must equal `MN * sum (w(m,n) f(m,n))^2` when the spectrum
/// keeps every coefficient, because the operator is exactly the weighted
/// pointwise product conjugated through the transforms.
#[test]
fn untruncated_penalty_matches_spatial_norm() {
    let mut rng = rng(21);
    for (rows, cols) in [(3, 3), (4, 5), (6, 6), (5, 7)] {
        let dom = GridDomain::new(rows, cols).unwrap();
        let basis = partition_domain(dom);
        let w = ndarray::Array2::from_shape_fn((rows, cols), |_| {
            use rand::Rng;
            rng.gen_range(0.1..2.0)
        });
        let spectrum = sparsify_spectrum(&w, dom.len());
        let op = build_operator(&spectrum, &basis).unwrap();

        let f = random_map(&mut rng, rows, cols);
        let f_real = to_real_spectrum(&dft2(&f), &basis).unwrap();
        let cf = op.real_conv.matvec(&f_real);
        let transformed: f64 = cf.iter().map(|v| v * v).sum();

        let spatial: f64 = f
            .iter()
            .zip(w.iter())
            .map(|(fv, wv)| (wv * fv).powi(2))
            .sum::<f64>()
            * dom.len() as f64;
        assert!(
            (transformed - spatial).abs() < 1e-8 * spatial.max(1.0),
            "{rows}x{cols}: {transformed} vs {spatial}"
        );
    }
}

/// After truncation the operator must still agree with the spatial norm
/// computed from the *truncated* weights, which are what the solver sees.
#[test]
fn truncated_penalty_matches_its_own_weights() {
    let mut rng = rng(22);
    let dom = GridDomain::new(9, 9).unwrap();
    let basis = partition_domain(dom);
    let weights = SpatialWeights::<f64>::quadratic(dom, (3.0, 3.0), 0.1, 3.0, 10);
    let op = build_operator(&weights.sparse_spectrum, &basis).unwrap();
    let w_eff = weights_from_spectrum(&weights.sparse_spectrum, dom);

    let f = random_map(&mut rng, 9, 9);
    let f_real = to_real_spectrum(&dft2(&f), &basis).unwrap();
    let cf = op.real_conv.matvec(&f_real);
    let transformed: f64 = cf.iter().map(|v| v * v).sum();
    let spatial: f64 = f
        .iter()
        .zip(w_eff.iter())
        .map(|(fv, wv)| (wv * fv).powi(2))
        .sum::<f64>()
        * dom.len() as f64;
    assert!((transformed - spatial).abs() < 1e-8 * spatial.max(1.0));
}

#[test]
fn gram_is_positive_semidefinite() {
    let mut rng = rng(23);
    let dom = GridDomain::new(8, 8).unwrap();
    let basis = partition_domain(dom);
    let weights = SpatialWeights::<f64>::quadratic(dom, (2.0, 2.0), 0.1, 3.0, 10);
    let op = build_operator(&weights.sparse_spectrum, &basis).unwrap();
    for _ in 0..20 {
        let v: Vec<f64> = (0..dom.len())
            .map(|_| {
                use rand::Rng;
                rng.gen_range(-1.0..1.0)
            })
            .collect();
        let gv = op.gram.matvec(&v);
        let quad: f64 = v.iter().zip(&gv).map(|(a, b)| a * b).sum();
        assert!(quad >= -1e-10, "negative quadratic form {quad}");
    }
}

/// Gram of the operator equals the norm identity: `v' G v = ||C~ v||^2`.
#[test]
fn gram_matches_operator_norm() {
    let mut rng = rng(24);
    let dom = GridDomain::new(7, 6).unwrap();
    let basis = partition_domain(dom);
    let weights = SpatialWeights::<f64>::quadratic(dom, (2.0, 2.0), 0.1, 3.0, 10);
    let op = build_operator(&weights.sparse_spectrum, &basis).unwrap();
    for _ in 0..10 {
        let v: Vec<f64> = (0..dom.len())
            .map(|_| {
                use rand::Rng;
                rng.gen_range(-1.0..1.0)
            })
            .collect();
        let gv = op.gram.matvec(&v);
        let quad: f64 = v.iter().zip(&gv).map(|(a, b)| a * b).sum();
        let cv = op.real_conv.matvec(&v);
        let norm: f64 = cv.iter().map(|x| x * x).sum();
        assert!((quad - norm).abs() < 1e-8 * norm.max(1.0));
    }
}

#[test]
fn uniform_weights_round_trip_to_constant() {
    let dom = GridDomain::new(6, 9).unwrap();
    let lambda = 0.04;
    let spec = uniform_spectrum::<f64>(dom, lambda);
    let w = weights_from_spectrum(&spec, dom);
    for v in w.iter() {
        assert!((v - lambda.sqrt()).abs() < 1e-12);
    }
}
