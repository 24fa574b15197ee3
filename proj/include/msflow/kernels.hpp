#pragma once

#include <Eigen/Dense>

#include "msflow/network.hpp"

// Dense per-bus kernels behind the load-flow equations.
//
// Two implementations of each kernel are kept. The `_serial` versions follow
// the polar form of the nodal equations term by term and serve as the
// reference in tests. The default versions evaluate the same quantities in
// rectangular form (G, B and precomputed sin/cos of the bus angles) with the
// outer bus loop split across OpenMP threads.
//
// Sign conventions: `sp(k)` is the active power the network draws out of bus k
// and `sq(k)` the cosine-sum term, so that with load-convention injections
//   dP_k = P_k + sp(k),   dQ_k = Q_k - sq(k).
namespace msflow::kernels {

void power_terms_serial(const AdmittanceMatrix& y, const Eigen::VectorXd& delta,
                        const Eigen::VectorXd& v, Eigen::VectorXd& sp, Eigen::VectorXd& sq);

void power_terms(const AdmittanceMatrix& y, const Eigen::VectorXd& delta,
                 const Eigen::VectorXd& v, Eigen::VectorXd& sp, Eigen::VectorXd& sq);

/// Full 2n x 2n Jacobian of (dP, dQ) with respect to (delta, V); rows are
/// [dP_0..dP_{n-1}, dQ_0..dQ_{n-1}], columns [delta_0.., V_0..].
void full_jacobian_serial(const AdmittanceMatrix& y, const Eigen::VectorXd& delta,
                          const Eigen::VectorXd& v, Eigen::MatrixXd& jf);

void full_jacobian(const AdmittanceMatrix& y, const Eigen::VectorXd& delta,
                   const Eigen::VectorXd& v, Eigen::MatrixXd& jf);

/// Number of threads the parallel kernels will use (1 without OpenMP).
int max_threads();

}  // namespace msflow::kernels
