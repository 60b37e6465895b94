#ifndef GRADFIELD_KERNEL_HPP
#define GRADFIELD_KERNEL_HPP

// Matern nu=3/2 covariance analytics and the joint cross-covariance of a
// bivariate surface pair (Y, X) together with their gradient fields.

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "gradfield/geometry.hpp"
#include "gradfield/linalg.hpp"

namespace gradfield {

struct MaternParams {
  double sigma2 = 1.0;  // marginal variance
  double phi = 1.0;     // decay (inverse spatial units); smoothness fixed at 3/2

  void validate() const {
    if (!(sigma2 > 0.0) || !std::isfinite(sigma2))
      throw std::invalid_argument("MaternParams: sigma2 must be positive and finite");
    if (!(phi > 0.0) || !std::isfinite(phi))
      throw std::invalid_argument("MaternParams: phi must be positive and finite");
  }
};

// One posterior draw of the bivariate GP model parameters.
struct ThetaSample {
  double alpha0 = 0.0;   // E[X]
  double beta0 = 0.0;    // Y intercept
  double beta1 = 0.0;    // regression slope
  double sigma2_x = 1.0;
  double sigma2_y = 1.0;
  double phi_x = 1.0;
  double phi_y = 1.0;

  MaternParams x_params() const { return {sigma2_x, phi_x}; }
  MaternParams y_params() const { return {sigma2_y, phi_y}; }

  void validate() const {
    x_params().validate();
    y_params().validate();
    if (!std::isfinite(alpha0) || !std::isfinite(beta0) || !std::isfinite(beta1))
      throw std::invalid_argument("ThetaSample: mean parameters must be finite");
  }
};

// sigma^2 (1 + phi r) exp(-phi r)
inline double cov_matern32(const SeparationVector& delta, const MaternParams& p) {
  delta.validate();
  p.validate();
  const double t = p.phi * delta.length();
  return p.sigma2 * (1.0 + t) * std::exp(-t);
}

inline double corr_matern32(double r, double phi) {
  const double t = phi * r;
  return (1.0 + t) * std::exp(-t);
}

// grad K(delta) = -sigma^2 phi^2 exp(-phi r) delta
inline Eigen::Vector2d grad_matern32(const SeparationVector& delta, const MaternParams& p) {
  delta.validate();
  p.validate();
  const double f = -p.sigma2 * p.phi * p.phi * std::exp(-p.phi * delta.length());
  return {f * delta.d1, f * delta.d2};
}

// Hessian of K; the delta -> 0 limit is -sigma^2 phi^2 I.
inline Eigen::Matrix2d hess_matern32(const SeparationVector& delta, const MaternParams& p) {
  delta.validate();
  p.validate();
  const double r = delta.length();
  const double s2p2 = p.sigma2 * p.phi * p.phi;
  Eigen::Matrix2d h;
  if (r < 1e-10) {
    h = -s2p2 * Eigen::Matrix2d::Identity();
    return h;
  }
  const double e = std::exp(-p.phi * r);
  h(0, 0) = -s2p2 * e * (1.0 - p.phi * delta.d1 * delta.d1 / r);
  h(1, 1) = -s2p2 * e * (1.0 - p.phi * delta.d2 * delta.d2 / r);
  h(0, 1) = s2p2 * p.phi * e * delta.d1 * delta.d2 / r;
  h(1, 0) = h(0, 1);
  return h;
}

// 6x6 local covariance of Z(s) = (Y, X, grad_Y, grad_X) at a single location,
// i.e. V_Z(0): block-diagonal across levels and gradients.
struct JointCovBlock {
  Eigen::Matrix2d level;       // (Y, X)
  Eigen::Matrix4d gradient;    // (dY1, dY2, dX1, dX2)

  Eigen::Matrix<double, 6, 6> full() const {
    Eigen::Matrix<double, 6, 6> m = Eigen::Matrix<double, 6, 6>::Zero();
    m.topLeftCorner<2, 2>() = level;
    m.bottomRightCorner<4, 4>() = gradient;
    return m;
  }
};

inline JointCovBlock local_cov_block(const ThetaSample& theta) {
  theta.validate();
  const double b = theta.beta1;
  const double gx = theta.sigma2_x * theta.phi_x * theta.phi_x;
  const double gy = theta.sigma2_y * theta.phi_y * theta.phi_y;

  JointCovBlock blk;
  blk.level << theta.sigma2_y + b * b * theta.sigma2_x, b * theta.sigma2_x,
               b * theta.sigma2_x, theta.sigma2_x;
  blk.gradient = Eigen::Matrix4d::Zero();
  blk.gradient.topLeftCorner<2, 2>() = (gy + b * b * gx) * Eigen::Matrix2d::Identity();
  blk.gradient.topRightCorner<2, 2>() = (b * gx) * Eigen::Matrix2d::Identity();
  blk.gradient.bottomLeftCorner<2, 2>() = (b * gx) * Eigen::Matrix2d::Identity();
  blk.gradient.bottomRightCorner<2, 2>() = gx * Eigen::Matrix2d::Identity();
  return blk;
}

constexpr double kDuplicateLocationTol = 1e-9;

inline void check_distinct(const std::vector<Location>& a, const std::vector<Location>& b,
                           const char* a_name, const char* b_name) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      if (a_name == b_name && j <= i) continue;
      if (distance(a[i], b[j]) < kDuplicateLocationTol) {
        std::ostringstream msg;
        msg << "duplicate locations: " << a_name << "[" << i << "]=(" << a[i].s1 << ","
            << a[i].s2 << ") coincides with " << b_name << "[" << j << "]";
        throw std::invalid_argument(msg.str());
      }
    }
  }
}

// Covariance of the stacked vector
//   (Y(obs), X(obs), Y(targets), X(targets), gradY(targets), gradX(targets)).
// Entries follow V_Z(delta) with delta = s_row - s_col:
//   Cov(Y(s), Y(s'))      = K(delta) + b^2 G(delta)
//   Cov(Y(s), X(s'))      = b G(delta)
//   Cov(level(s), grad(s')) = -grad of the matching covariance at delta
//   Cov(grad(s), grad(s'))  = -Hessian of the matching covariance at delta
inline Eigen::MatrixXd joint_cov_matrix(const std::vector<Location>& obs,
                                        const std::vector<Location>& targets,
                                        const ThetaSample& theta) {
  theta.validate();
  for (const auto& s : obs) s.validate();
  for (const auto& s : targets) s.validate();
  check_distinct(obs, obs, "obs", "obs");
  check_distinct(targets, targets, "targets", "targets");
  check_distinct(obs, targets, "obs", "targets");

  const Eigen::Index n = static_cast<Eigen::Index>(obs.size());
  const Eigen::Index m = static_cast<Eigen::Index>(targets.size());
  const Eigen::Index dim = 2 * n + 2 * m + 4 * m;
  const double b = theta.beta1;
  const MaternParams pk = theta.y_params();  // K: w_y process
  const MaternParams pg = theta.x_params();  // G: w_x process

  std::vector<Location> all;
  all.reserve(obs.size() + targets.size());
  all.insert(all.end(), obs.begin(), obs.end());
  all.insert(all.end(), targets.begin(), targets.end());

  // Index helpers into the stacked vector.
  auto iy = [&](Eigen::Index i) { return i < n ? i : 2 * n + (i - n); };
  auto ix = [&](Eigen::Index i) { return i < n ? n + i : 2 * n + m + (i - n); };
  const Eigen::Index g0 = 2 * n + 2 * m;
  auto igy = [&](Eigen::Index t) { return g0 + 2 * t; };
  auto igx = [&](Eigen::Index t) { return g0 + 2 * m + 2 * t; };

  Eigen::MatrixXd v(dim, dim);

  const Eigen::Index total = n + m;
  for (Eigen::Index i = 0; i < total; ++i) {
    for (Eigen::Index j = 0; j < total; ++j) {
      const SeparationVector d = separation(all[i], all[j]);
      const double k = cov_matern32(d, pk);
      const double g = cov_matern32(d, pg);
      v(iy(i), iy(j)) = k + b * b * g;
      v(iy(i), ix(j)) = b * g;
      v(ix(i), iy(j)) = b * g;
      v(ix(i), ix(j)) = g;
    }
  }

  // Level-gradient and gradient-gradient blocks (gradients only at targets).
  for (Eigen::Index t = 0; t < m; ++t) {
    const Eigen::Index jt = n + t;  // position of target t within `all`
    for (Eigen::Index i = 0; i < total; ++i) {
      const SeparationVector d = separation(all[i], all[jt]);
      const Eigen::Vector2d gk = grad_matern32(d, pk);
      const Eigen::Vector2d gg = grad_matern32(d, pg);
      const Eigen::Vector2d gkt = gk + b * b * gg;  // grad of Ktilde
      // Cov(level at i, gradient at target t): -grad(delta)'
      for (int c = 0; c < 2; ++c) {
        v(iy(i), igy(t) + c) = -gkt(c);
        v(igy(t) + c, iy(i)) = -gkt(c);
        v(iy(i), igx(t) + c) = -b * gg(c);
        v(igx(t) + c, iy(i)) = -b * gg(c);
        v(ix(i), igy(t) + c) = -b * gg(c);
        v(igy(t) + c, ix(i)) = -b * gg(c);
        v(ix(i), igx(t) + c) = -gg(c);
        v(igx(t) + c, ix(i)) = -gg(c);
      }
    }
    for (Eigen::Index u = 0; u < m; ++u) {
      const SeparationVector d = separation(targets[t], targets[u]);
      const Eigen::Matrix2d hk = hess_matern32(d, pk);
      const Eigen::Matrix2d hg = hess_matern32(d, pg);
      const Eigen::Matrix2d hkt = hk + b * b * hg;
      v.block<2, 2>(igy(t), igy(u)) = -hkt;
      v.block<2, 2>(igy(t), igx(u)) = -b * hg;
      v.block<2, 2>(igx(t), igy(u)) = -b * hg;
      v.block<2, 2>(igx(t), igx(u)) = -hg;
    }
  }

  return v;
}

}  // namespace gradfield

#endif
