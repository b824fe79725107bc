use crate::error::Result;
use crate::linalg::Blocks;
use crate::system::BlockChainSystem;
use crate::work::WorkCounters;

use super::SolveReport;

/// Block forward (lower) or backward (upper) substitution.
///
/// Each block is `x_k = D_k⁻¹ (A x_nbr + r_k)`: one coupling product, one add,
/// one diagonal multiply. Nothing is ever divided.
pub fn solve_substitution(system: &BlockChainSystem) -> Result<SolveReport> {
    let (solution, work) = substitute(system);
    let residual_norm = system.scaled_residual(&solution)?;
    Ok(SolveReport {
        solution,
        residual_norm,
        recursion_depth: 0,
        work,
    })
}

pub(crate) fn substitute(system: &BlockChainSystem) -> (Blocks, WorkCounters) {
    let mut x: Blocks = vec![Vec::new(); system.block_count()];
    let mut work = WorkCounters::default();
    for k in system.solve_order() {
        let rhs = &system.rhs()[k];
        let mut u = match system.coupling_into(k) {
            Some((nbr, op)) => {
                work.fma += op.cost();
                let mut u = op.apply(&x[nbr]);
                for (ui, ri) in u.iter_mut().zip(rhs) {
                    *ui += ri;
                }
                u
            }
            None => rhs.clone(),
        };
        work.activation += system.inv_diagonal(k).scale(&mut u);
        x[k] = u;
    }
    work.parallel_steps = work.fma;
    (x, work)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::ActivationKind;
    use crate::linalg::Matrix;
    use crate::net::{FeedForwardNet, Layer};
    use crate::system::{build_backward_system, build_forward_system};

    fn scalar_identity_net() -> FeedForwardNet {
        let w = Matrix::from_row_major(1, 1, vec![2.0]).unwrap();
        FeedForwardNet::new(vec![Layer::new(w, vec![1.0], ActivationKind::Identity).unwrap()])
            .unwrap()
    }

    #[test]
    fn single_layer_forward_and_backward() {
        let net = scalar_identity_net();
        let trace = net.forward(&[3.0]).unwrap();
        let fwd = solve_substitution(&build_forward_system(&net, &[3.0], &trace).unwrap()).unwrap();
        assert_eq!(fwd.solution, vec![vec![3.0], vec![7.0]]);
        assert_eq!(fwd.residual_norm, 0.0);

        let bwd = solve_substitution(&build_backward_system(&net, &trace, &[1.0]).unwrap()).unwrap();
        assert_eq!(bwd.solution, vec![vec![2.0], vec![1.0]]);
    }

    #[test]
    fn counts_one_product_per_layer() {
        let net = scalar_identity_net();
        let trace = net.forward(&[3.0]).unwrap();
        let report =
            solve_substitution(&build_forward_system(&net, &[3.0], &trace).unwrap()).unwrap();
        assert_eq!(report.work.fma, 1);
        assert_eq!(report.work.activation, 1);
        assert_eq!(report.work.parallel_steps, 1);
    }
}
