#ifndef GRADFIELD_LINALG_HPP
#define GRADFIELD_LINALG_HPP

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace gradfield {

// Cholesky with escalating jitter: start at 1e-8 * mean(diag), multiply by 10
// up to 1e-4 * mean(diag), then give up.
inline Eigen::LLT<Eigen::MatrixXd> ridge_cholesky(const Eigen::MatrixXd& m,
                                                  double* ridge_used = nullptr) {
  const double scale = m.rows() > 0 ? m.trace() / static_cast<double>(m.rows()) : 1.0;
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  double ridge = 0.0;
  if (llt.info() != Eigen::Success) {
    for (double rel = 1e-8; rel <= 1e-4 * 1.0000001; rel *= 10.0) {
      ridge = rel * scale;
      Eigen::MatrixXd jittered = m;
      jittered.diagonal().array() += ridge;
      llt.compute(jittered);
      if (llt.info() == Eigen::Success) break;
    }
  }
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("ridge_cholesky: matrix not positive definite after jitter up to 1e-4");
  if (ridge_used) *ridge_used = ridge;
  return llt;
}

inline double gaussian_log_density(const Eigen::VectorXd& resid,
                                   const Eigen::LLT<Eigen::MatrixXd>& llt) {
  const double n = static_cast<double>(resid.size());
  const Eigen::VectorXd alpha = llt.solve(resid);
  double log_det = 0.0;
  for (Eigen::Index i = 0; i < resid.size(); ++i)
    log_det += std::log(llt.matrixL()(i, i));
  return -0.5 * n * std::log(2.0 * M_PI) - log_det - 0.5 * resid.dot(alpha);
}

}  // namespace gradfield

#endif
