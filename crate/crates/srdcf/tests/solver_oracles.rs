//! The sparse normal equations against dense oracles: assembled matrix
//! entries, the online update rule, the first-frame direct solve, and
//! Gauss-Seidel convergence.

mod common;

use common::{dense_from_matvec, random_feature_map, random_label, rel_err_vec, rng, solve_dense};
use ndarray::Array2;
use num_complex::Complex;
use srdcf::features::{FeatureMap, LabelMap};
use srdcf::regularization::{build_operator, uniform_spectrum, SpatialWeights};
use srdcf::signal::{dft2, from_real_spectrum, partition_domain, to_real_spectrum, GridDomain};
use srdcf::solver::{build_data_operator, initial_solve, AssemblyPattern, ModelState};
use std::sync::Arc;

fn make_state(
    seed: u64,
    rows: usize,
    cols: usize,
    d: usize,
    gamma: f64,
) -> (ModelState<f64>, FeatureMap<f64>, LabelMap<f64>) {
    let mut rng = rng(seed);
    let dom = GridDomain::new(rows, cols).unwrap();
    let basis = Arc::new(partition_domain(dom));
    let weights = SpatialWeights::<f64>::quadratic(dom, (2.0, 2.0), 0.1, 3.0, 10);
    let reg = build_operator(&weights.sparse_spectrum, &basis).unwrap();
    let pattern = Arc::new(AssemblyPattern::build(d, &basis, &reg));
    let sample = random_feature_map(&mut rng, dom, d);
    let label = random_label(&mut rng, dom);
    let state = ModelState::init(&sample, &label, pattern, basis, gamma).unwrap();
    (state, sample, label)
}

/// Dense `D'D + W'W` and `D'y` built from the operator applications alone,
/// without the scatter plans used by the fast assembly.
fn dense_normal_equations(
    sample: &FeatureMap<f64>,
    label: &LabelMap<f64>,
    weights: &SpatialWeights<f64>,
    dom: GridDomain,
) -> (Vec<f64>, Vec<f64>, usize) {
    let basis = partition_domain(dom);
    let reg = build_operator(&weights.sparse_spectrum, &basis).unwrap();
    let dop = build_data_operator(sample, &basis).unwrap();
    let d = sample.num_channels();
    let mn = dom.len();
    let n = d * mn;
    let a = dense_from_matvec(n, |x| {
        let mut out = dop.apply_adjoint(&basis, &dop.apply(&basis, x));
        for l in 0..d {
            let gx = reg.gram.matvec(&x[l * mn..(l + 1) * mn]);
            for (o, g) in out[l * mn..(l + 1) * mn].iter_mut().zip(gx) {
                *o += g;
            }
        }
        out
    });
    let y = to_real_spectrum(&dft2(&label.values), &basis).unwrap();
    let b = dop.apply_adjoint(&basis, &y);
    (a, b, n)
}

#[test]
fn assembled_matrix_matches_dense_oracle() {
    for (seed, rows, cols, d) in [(31u64, 4, 4, 1), (32, 5, 4, 2), (33, 3, 5, 3)] {
        let (state, sample, label) = make_state(seed, rows, cols, d, 0.025);
        let dom = GridDomain::new(rows, cols).unwrap();
        let weights = SpatialWeights::<f64>::quadratic(dom, (2.0, 2.0), 0.1, 3.0, 10);
        let (a_oracle, b_oracle, n) = dense_normal_equations(&sample, &label, &weights, dom);
        let a_fast = dense_from_matvec(n, |x| state.a_matvec(x));
        let scale = a_oracle.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for (f, o) in a_fast.iter().zip(&a_oracle) {
            assert!((f - o).abs() < 1e-10 * scale, "{f} vs {o}");
        }
        for (f, o) in state.b.iter().zip(&b_oracle) {
            assert!((f - o).abs() < 1e-10 * scale);
        }
    }
}

#[test]
fn assembled_matrix_is_symmetric() {
    let (state, _, _) = make_state(34, 5, 5, 2, 0.025);
    let n = 2 * 25;
    let a = dense_from_matvec(n, |x| state.a_matvec(x));
    for i in 0..n {
        for j in 0..n {
            assert!((a[i * n + j] - a[j * n + i]).abs() < 1e-12);
        }
    }
}

/// The exponential-forgetting update against explicit interpolation of two
/// dense single-frame systems.
#[test]
fn update_interpolates_single_frame_systems() {
    let gamma = 0.3;
    let mut rng = rng(35);
    let dom = GridDomain::new(4, 5).unwrap();
    let basis = Arc::new(partition_domain(dom));
    let weights = SpatialWeights::<f64>::quadratic(dom, (2.0, 2.0), 0.1, 3.0, 10);
    let reg = build_operator(&weights.sparse_spectrum, &basis).unwrap();
    let pattern = Arc::new(AssemblyPattern::build(2, &basis, &reg));

    let sample1 = random_feature_map(&mut rng, dom, 2);
    let label1 = random_label(&mut rng, dom);
    let sample2 = random_feature_map(&mut rng, dom, 2);
    let label2 = random_label(&mut rng, dom);

    let mut state = ModelState::init(&sample1, &label1, pattern.clone(), basis.clone(), gamma)
        .unwrap();
    state.update(&sample2, &label2).unwrap();

    let (a1, b1, n) = dense_normal_equations(&sample1, &label1, &weights, dom);
    let (a2, b2, _) = dense_normal_equations(&sample2, &label2, &weights, dom);
    let a_fast = dense_from_matvec(n, |x| state.a_matvec(x));
    for i in 0..n * n {
        let expect = (1.0 - gamma) * a1[i] + gamma * a2[i];
        assert!((a_fast[i] - expect).abs() < 1e-10);
    }
    for i in 0..n {
        let expect = (1.0 - gamma) * b1[i] + gamma * b2[i];
        assert!((state.b[i] - expect).abs() < 1e-10);
    }
    assert_eq!(state.frame_count, 2);
}

#[test]
fn gauss_seidel_reaches_direct_solution() {
    let (mut state, _, _) = make_state(36, 5, 5, 2, 0.025);
    let n = 2 * 25;
    let a = dense_from_matvec(n, |x| state.a_matvec(x));
    let exact = solve_dense(&a, n, &state.b);
    state.gauss_seidel(300).unwrap();
    assert!(
        rel_err_vec(&state.f_real, &exact) < 1e-8,
        "relative error {}",
        rel_err_vec(&state.f_real, &exact)
    );
}

#[test]
fn initial_solve_satisfies_normal_equations() {
    for (seed, rows, cols, d) in [(37u64, 5, 5, 1), (38, 4, 6, 3)] {
        let mut rng = rng(seed);
        let dom = GridDomain::new(rows, cols).unwrap();
        let basis = partition_domain(dom);
        let weights = SpatialWeights::<f64>::quadratic(dom, (2.0, 2.0), 0.1, 3.0, 10);
        let reg = build_operator(&weights.sparse_spectrum, &basis).unwrap();
        let sample = random_feature_map(&mut rng, dom, d);
        let label = random_label(&mut rng, dom);
        let f = initial_solve(&sample, &label, &reg, &basis).unwrap();

        // Residual of the decoupled per-layer system the direct solve
        // targets: every layer shares `sum_p D_p'D_p + d W'W` on the left.
        let y = to_real_spectrum(&dft2(&label.values), &basis).unwrap();
        let mn = dom.len();
        let layer_ops: Vec<_> = sample
            .channels
            .iter()
            .map(|ch| {
                let fm = FeatureMap {
                    channels: vec![ch.clone()],
                    cell_size: 1,
                    domain: dom,
                };
                build_data_operator(&fm, &basis).unwrap()
            })
            .collect();
        let mut lhs = vec![0.0f64; d * mn];
        let mut rhs = vec![0.0f64; d * mn];
        for l in 0..d {
            let fl = &f[l * mn..(l + 1) * mn];
            for op in &layer_ops {
                let dtdf = op.apply_adjoint(&basis, &op.apply(&basis, fl));
                for (o, v) in lhs[l * mn..(l + 1) * mn].iter_mut().zip(dtdf) {
                    *o += v;
                }
            }
            let gx = reg.gram.matvec(fl);
            for (o, g) in lhs[l * mn..(l + 1) * mn].iter_mut().zip(gx) {
                *o += d as f64 * g;
            }
            rhs[l * mn..(l + 1) * mn].copy_from_slice(&layer_ops[l].apply_adjoint(&basis, &y));
        }
        assert!(rel_err_vec(&lhs, &rhs) < 1e-9, "residual {}", rel_err_vec(&lhs, &rhs));
    }
}

/// With uniform weights, one layer and a single frame the solution has the
/// textbook closed form `f^ = conj(x^) y^ / (|x^|^2 + lambda)`.
#[test]
fn uniform_single_layer_closed_form() {
    let mut rng = rng(39);
    let lambda = 0.01;
    let dom = GridDomain::new(6, 6).unwrap();
    let basis = partition_domain(dom);
    let reg = build_operator(&uniform_spectrum::<f64>(dom, lambda), &basis).unwrap();
    let sample = random_feature_map(&mut rng, dom, 1);
    let label = random_label(&mut rng, dom);
    let f = initial_solve(&sample, &label, &reg, &basis).unwrap();
    let f_spec = from_real_spectrum(&f, &basis);

    let xhat = dft2(&sample.channels[0]);
    let yhat = dft2(&label.values);
    let scale: f64 = yhat.iter().map(|c| c.norm()).fold(1.0, f64::max);
    for ((a, x), y) in f_spec.iter().zip(xhat.iter()).zip(yhat.iter()) {
        let expect = x.conj() * y / (x.norm_sqr() + lambda);
        assert!(
            (a - expect).norm() < 1e-8 * scale,
            "{a} vs {expect}"
        );
    }
}

#[test]
fn sparsity_stays_under_bound_through_updates() {
    for (seed, rows, cols, d) in [(41u64, 8, 8, 2), (42, 10, 9, 3), (43, 12, 12, 1)] {
        let (mut state, _, _) = make_state(seed, rows, cols, d, 0.1);
        assert!(state.nnz_fraction() < state.sparsity_bound());
        let mut rng = rng(seed ^ 0xff);
        let dom = GridDomain::new(rows, cols).unwrap();
        for _ in 0..10 {
            let sample = random_feature_map(&mut rng, dom, d);
            let label = random_label(&mut rng, dom);
            state.update(&sample, &label).unwrap();
        }
        assert!(state.nnz_fraction() < state.sparsity_bound());
    }
}

#[test]
fn singular_diagonal_is_reported() {
    let dom = GridDomain::new(4, 4).unwrap();
    let basis = Arc::new(partition_domain(dom));
    // A spectrum with zero DC gives the regularizer a zero row, and with a
    // zero sample the whole diagonal vanishes.
    let spec = vec![(0usize, Complex::new(0.0f64, 0.0))];
    let reg = build_operator(&spec, &basis).unwrap();
    let pattern = Arc::new(AssemblyPattern::build(1, &basis, &reg));
    let sample = FeatureMap {
        channels: vec![Array2::<f64>::zeros((4, 4))],
        cell_size: 1,
        domain: dom,
    };
    let label = LabelMap {
        values: Array2::<f64>::zeros((4, 4)),
        sigma: 1.0,
    };
    let mut state = ModelState::init(&sample, &label, pattern, basis, 0.025).unwrap();
    assert!(state.gauss_seidel(1).is_err());
}
