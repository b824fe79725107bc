//! Every solver against a dense LU factorisation of the assembled matrix.

use nalgebra::{DMatrix, DVector};

use trilayer::direct::{solve_cyclic_reduction, solve_nested_rnn, solve_substitution, InnerSolver};
use trilayer::experiment::{generate_data, generate_network, output_error, ExperimentSpec, Network};
use trilayer::iterative::{
    bicgstab_solve, hybrid_solve_rnn, jacobi_solve, richardson_solve, IterationConfig, OuterMethod,
};
use trilayer::linalg::{flatten, Blocks};
use trilayer::system::{
    assemble_dense, assemble_dense_nested, build_backward_system, build_forward_system,
    build_rnn_backward_system, build_rnn_forward_system, BlockChainSystem, Mode, NestedBlockSystem,
};
use trilayer::{ActivationKind, Matrix};

const TOL: f64 = 1e-9;

fn lu_solve(m: &Matrix, rhs: &[f64]) -> Vec<f64> {
    let a = DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice());
    let b = DVector::from_column_slice(rhs);
    a.lu().solve(&b).expect("nonsingular").as_slice().to_vec()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn fnn_system(spec: &ExperimentSpec, mode: Mode) -> (BlockChainSystem, Vec<f64>) {
    let Network::Fnn(net) = generate_network(spec).unwrap() else {
        unreachable!()
    };
    let d = &generate_data(spec)[0];
    let trace = net.forward(&d.inputs[0]).unwrap();
    match mode {
        Mode::Forward => {
            let sys = build_forward_system(&net, &d.inputs[0], &trace).unwrap();
            (sys, flatten(&trace.activations))
        }
        Mode::Backward => {
            let eps = output_error(trace.output(), &d.targets[0]).unwrap();
            let grads = net.backward(&trace, &eps).unwrap();
            let sys = build_backward_system(&net, &trace, &eps).unwrap();
            (sys, flatten(&grads.layer_errors))
        }
    }
}

fn check_chain(sys: &BlockChainSystem, label: &str) {
    let (m, rhs) = assemble_dense(sys).unwrap();
    let lu = lu_solve(&m, &rhs);
    let cfg = IterationConfig::default().with_tol(1e-13);
    let answers: Vec<(&str, Blocks)> = vec![
        ("substitution", solve_substitution(sys).unwrap().solution),
        ("cyclic", solve_cyclic_reduction(sys, 2).unwrap().solution),
        ("cyclic leaf 5", solve_cyclic_reduction(sys, 5).unwrap().solution),
        ("jacobi", jacobi_solve(sys, &cfg).unwrap().solution),
        ("richardson", richardson_solve(sys, &cfg.with_omega(0.9).with_max_iters(200)).unwrap().solution),
        ("bicgstab", bicgstab_solve(sys, &cfg).unwrap().solution),
    ];
    for (name, x) in answers {
        let err = max_diff(&flatten(&x), &lu);
        assert!(err < TOL, "{label} {name}: {err:e}");
    }
}

// ReLU is left out of the dense checks: a dead unit stores d = 0, which has no
// finite unscaled diagonal.

#[test]
fn assembled_matrix_reproduces_reference_passes() {
    for act in [ActivationKind::Tanh, ActivationKind::LeakyRelu { slope: 0.1 }, ActivationKind::Sigmoid] {
        for mode in [Mode::Forward, Mode::Backward] {
            let spec = ExperimentSpec::fnn(5, 4, act, 31);
            let (sys, z) = fnn_system(&spec, mode);
            let (m, rhs) = assemble_dense(&sys).unwrap();
            let lz = m.matvec(&z);
            let err = max_diff(&lz, &rhs);
            assert!(err < 1e-12, "{act:?} {mode:?}: {err:e}");
        }
    }
}

#[test]
fn feed_forward_solvers_match_lu() {
    let acts = [
        ActivationKind::Identity,
        ActivationKind::Tanh,
        ActivationKind::Sigmoid,
        ActivationKind::LeakyRelu { slope: 0.1 },
    ];
    for (i, act) in acts.into_iter().enumerate() {
        for layers in [1, 2, 6, 9] {
            for mode in [Mode::Forward, Mode::Backward] {
                let spec = ExperimentSpec::fnn(layers, 3 + i, act, 50 + layers as u64);
                let (sys, _) = fnn_system(&spec, mode);
                check_chain(&sys, &format!("{act:?} l{layers} {mode:?}"));
            }
        }
    }
}

#[test]
fn uneven_widths_match_lu() {
    let mut spec = ExperimentSpec::fnn(5, 1, ActivationKind::Tanh, 8);
    spec.widths = vec![6, 2, 7, 3, 5, 4];
    for mode in [Mode::Forward, Mode::Backward] {
        let (sys, _) = fnn_system(&spec, mode);
        check_chain(&sys, &format!("uneven {mode:?}"));
    }
}

fn rnn_system(spec: &ExperimentSpec, mode: Mode) -> NestedBlockSystem {
    let Network::Rnn(net) = generate_network(spec).unwrap() else {
        unreachable!()
    };
    let d = &generate_data(spec)[0];
    let trace = net.forward(&d.inputs).unwrap();
    match mode {
        Mode::Forward => build_rnn_forward_system(&net, &d.inputs, &trace).unwrap(),
        Mode::Backward => {
            let errs: Vec<Vec<f64>> = trace
                .steps
                .iter()
                .zip(&d.targets)
                .map(|(s, t)| output_error(s.output(), t).unwrap())
                .collect();
            build_rnn_backward_system(&net, &trace, &errs).unwrap()
        }
    }
}

fn flat_nested(x: &[Blocks]) -> Vec<f64> {
    x.iter().flat_map(|b| flatten(b)).collect()
}

#[test]
fn recurrent_solvers_match_lu() {
    let cfg = IterationConfig::default().with_tol(1e-13);
    for tau in [1, 3, 6] {
        for mode in [Mode::Forward, Mode::Backward] {
            let spec = ExperimentSpec::rnn(3, 3, tau, ActivationKind::Tanh, 90 + tau as u64);
            let sys = rnn_system(&spec, mode);
            let (m, rhs) = assemble_dense_nested(&sys).unwrap();
            let lu = lu_solve(&m, &rhs);
            let label = format!("tau {tau} {mode:?}");
            for inner in [InnerSolver::Substitution, InnerSolver::CyclicReduction { leaf_threshold: 2 }] {
                let x = solve_nested_rnn(&sys, inner).unwrap().solution;
                let err = max_diff(&flat_nested(&x), &lu);
                assert!(err < TOL, "{label} nested {inner:?}: {err:e}");
                for outer in [OuterMethod::Jacobi, OuterMethod::BiCgStab] {
                    let r = hybrid_solve_rnn(&sys, outer, inner, &cfg).unwrap();
                    let err = max_diff(&flat_nested(&r.solution), &lu);
                    assert!(err < TOL, "{label} hybrid {outer:?} {inner:?}: {err:e}");
                }
            }
        }
    }
}
