#ifndef GRADFIELD_PROCESSES_HPP
#define GRADFIELD_PROCESSES_HPP

// Derived sensitivity processes: directional derivatives, the local
// directional sensitivity ratio (Cauchy around beta1), maximum-gradient
// angles and the angular discrepancy, the closed-form joint angle density,
// and the joint ratio CDF used as a numerical validation oracle.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gradfield/geometry.hpp"
#include "gradfield/kernel.hpp"

namespace gradfield {

inline double directional_derivative(const Eigen::Vector2d& grad, const UnitVector& u) {
  u.validate();
  return grad(0) * u.u1 + grad(1) * u.u2;
}

constexpr double kDenominatorFloor = 1e-300;

// D_u Y / D_u X. A vanishing denominator with nonzero numerator yields signed
// infinity (order statistics downstream absorb the heavy tails); 0/0 is NaN,
// the missing-value flag.
inline double lds_ratio(const Eigen::Vector2d& grad_y, const Eigen::Vector2d& grad_x,
                        const UnitVector& u) {
  const double num = directional_derivative(grad_y, u);
  const double den = directional_derivative(grad_x, u);
  if (std::abs(den) < kDenominatorFloor) {
    if (std::abs(num) < kDenominatorFloor) return std::numeric_limits<double>::quiet_NaN();
    return num > 0.0 ? std::numeric_limits<double>::infinity()
                     : -std::numeric_limits<double>::infinity();
  }
  return num / den;
}

// Scale of the Cauchy noise around beta1: sigma_y phi_y / (sigma_x phi_x).
inline double cauchy_scale(const ThetaSample& theta) {
  theta.validate();
  return std::sqrt(theta.sigma2_y) * theta.phi_y / (std::sqrt(theta.sigma2_x) * theta.phi_x);
}

// Maximum-gradient direction as an angle in (-pi, pi]. The circular-statistics
// arctan* convention differs only by a 2pi shift; everything downstream
// depends on angle differences through cos, which is invariant to that.
inline double angle_of(const Eigen::Vector2d& grad) {
  if (grad.norm() < kDenominatorFloor) return std::numeric_limits<double>::quiet_NaN();
  double a = std::atan2(grad(1), grad(0));
  if (a == -M_PI) a = M_PI;
  return a;
}

struct AngleSample {
  double theta_x = 0.0;
  double theta_y = 0.0;

  void validate() const {
    if (!std::isfinite(theta_x) || !std::isfinite(theta_y))
      throw std::invalid_argument("AngleSample: angles must be finite");
  }
};

// disc(s) = 1 - cos(theta_X - theta_Y), in [0, 2].
inline double disc(const AngleSample& angles) {
  angles.validate();
  return 1.0 - std::cos(angles.theta_x - angles.theta_y);
}

inline double std_normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
}

inline double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Standard bivariate normal CDF at (h, k) with correlation rho, via the
// Plackett identity: Phi2 = Phi(h)Phi(k) + integral of the bivariate density
// over correlations [0, rho]; Simpson on a fixed fine grid.
inline double bivariate_normal_cdf(double h, double k, double rho) {
  if (!(rho >= -1.0 && rho <= 1.0))
    throw std::invalid_argument("bivariate_normal_cdf: correlation outside [-1, 1]");
  if (std::isinf(h) || std::isinf(k)) {
    if (h == -std::numeric_limits<double>::infinity() ||
        k == -std::numeric_limits<double>::infinity())
      return 0.0;
    if (std::isinf(h)) return std_normal_cdf(k);
    return std_normal_cdf(h);
  }
  const double cap = 1.0 - 1e-12;
  rho = std::clamp(rho, -cap, cap);
  const int n = 256;  // Simpson panels over t in [0, rho]
  auto integrand = [&](double t) {
    const double om = 1.0 - t * t;
    return std::exp(-(h * h - 2.0 * t * h * k + k * k) / (2.0 * om)) / (2.0 * M_PI * std::sqrt(om));
  };
  double integral = 0.0;
  const double step = rho / n;
  if (step != 0.0) {
    double sum = integrand(0.0) + integrand(rho);
    for (int i = 1; i < n; ++i) sum += (i % 2 == 1 ? 4.0 : 2.0) * integrand(i * step);
    integral = sum * step / 3.0;
  }
  return std_normal_cdf(h) * std_normal_cdf(k) + integral;
}

// L(0, 0, rho): orthant probability of a standard bivariate normal.
inline double bvn_orthant(double rho) { return 0.25 + std::asin(std::clamp(rho, -1.0, 1.0)) / (2.0 * M_PI); }

struct AngleDensityParams {
  double a = 0.0;         // 1 / (sigma2_y phi_y^2)
  double c = 0.0;         // (sigma2_y phi_y^2 + beta^2 sigma2_x phi_x^2) / (sigma2_x phi_x^2)
  double det_sigma = 0.0; // (sigma2_x phi_x^2)^2 (sigma2_y phi_y^2)^2
  double beta = 0.0;

  static AngleDensityParams from_theta(const ThetaSample& theta) {
    theta.validate();
    const double gy = theta.sigma2_y * theta.phi_y * theta.phi_y;
    const double gx = theta.sigma2_x * theta.phi_x * theta.phi_x;
    AngleDensityParams p;
    p.a = 1.0 / gy;
    p.c = (gy + theta.beta1 * theta.beta1 * gx) / gx;
    p.det_sigma = gx * gx * gy * gy;
    p.beta = theta.beta1;
    return p;
  }

  double atilde(const AngleSample& angles) const {
    return std::sqrt(a) * beta * std::cos(angles.theta_x - angles.theta_y);
  }
};

// Closed-form joint density of the two maximum-gradient angles at one
// location. Two branches by the sign of A~; at |A~| below 1e-12 both share
// the continuous limit C phi(0) / (ac).
inline double angle_density(const AngleSample& angles, const ThetaSample& theta) {
  angles.validate();
  const AngleDensityParams p = AngleDensityParams::from_theta(theta);
  const double at = p.atilde(angles);
  const double ac = p.a * p.c;
  const double norm_const = 1.0 / (p.a * std::pow(2.0 * M_PI, 1.5) * std::sqrt(p.det_sigma));
  const double phi0 = std_normal_pdf(0.0);

  if (std::abs(at) < 1e-12) return norm_const * phi0 / ac;

  const double gap = ac - at * at;  // positive for any finite beta
  const double orthant = bvn_orthant(std::sqrt(at * at / ac));
  const double l_term = at > 0.0 ? orthant : (0.5 - orthant);
  const double density =
      norm_const * (at * at * phi0 / (ac * gap) +
                    std::sqrt(2.0 * M_PI) * at * l_term / std::pow(gap, 1.5) + phi0 / ac);
  return std::max(density, 0.0);
}

// P(n1/m1 < r1, n2/m2 < r2) for (n1,n2) ~ N(0, cov_y), (m1,m2) ~ N(0, cov_x)
// independent. Reduced from the orthant decomposition: conditioning on the
// signs (s1, s2) of m and integrating the n-block in closed form gives
//   sum_{s in {+-1}^2} E_{m in (0,inf)^2 under sign-flipped cov_x}
//       [ Phi2(r1 m1 / sd1, r2 m2 / sd2; s1 s2 rho_y) ]
// evaluated by tensor Gauss-Legendre after a tan map of each half-axis.
struct JointRatioCdfResult {
  double value = 0.0;
  double error_estimate = 0.0;
};

namespace detail {

inline void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  // Newton iteration on Legendre polynomials, standard [-1, 1] rule.
  nodes.resize(n);
  weights.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
      }
      pp = n * (x * p0 - p1) / (x * x - 1.0);
      const double dx = p0 / pp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    nodes[i] = -x;
    nodes[n - 1 - i] = x;
    weights[i] = 2.0 / ((1.0 - x * x) * pp * pp);
    weights[n - 1 - i] = weights[i];
  }
}

inline double joint_ratio_cdf_quadrature(double r1, double r2, const Eigen::Matrix2d& cov_y,
                                         const Eigen::Matrix2d& cov_x, int n_nodes) {
  const double sy1 = std::sqrt(cov_y(0, 0)), sy2 = std::sqrt(cov_y(1, 1));
  const double rho_y = cov_y(0, 1) / (sy1 * sy2);
  const double sx1 = std::sqrt(cov_x(0, 0)), sx2 = std::sqrt(cov_x(1, 1));
  const double rho_x = std::clamp(cov_x(0, 1) / (sx1 * sx2), -1.0 + 1e-12, 1.0 - 1e-12);

  std::vector<double> gl_nodes, gl_weights;
  gauss_legendre(n_nodes, gl_nodes, gl_weights);

  // Half-axis map m = sd * tan(pi (t+1) / 4), t in (-1, 1).
  std::vector<double> m1(n_nodes), w1(n_nodes), m2(n_nodes), w2(n_nodes);
  for (int i = 0; i < n_nodes; ++i) {
    const double t = gl_nodes[i];
    const double ang = M_PI * (t + 1.0) / 4.0;
    const double sec2 = 1.0 / (std::cos(ang) * std::cos(ang));
    m1[i] = sx1 * std::tan(ang);
    w1[i] = gl_weights[i] * sx1 * (M_PI / 4.0) * sec2;
    m2[i] = sx2 * std::tan(ang);
    w2[i] = gl_weights[i] * sx2 * (M_PI / 4.0) * sec2;
  }

  const double det = 1.0 - rho_x * rho_x;
  const double dens_norm = 1.0 / (2.0 * M_PI * sx1 * sx2 * std::sqrt(det));

  double total = 0.0;
  for (int sgn = 0; sgn < 4; ++sgn) {
    const double s1 = (sgn & 1) ? -1.0 : 1.0;
    const double s2 = (sgn & 2) ? -1.0 : 1.0;
    const double rho_m = s1 * s2 * rho_x;   // correlation of (s1 m1, s2 m2)
    const double rho_n = s1 * s2 * rho_y;   // correlation of (s1 n1, s2 n2)
    double part = 0.0;
    for (int i = 0; i < n_nodes; ++i) {
      const double z1 = m1[i] / sx1;
      for (int j = 0; j < n_nodes; ++j) {
        const double z2 = m2[j] / sx2;
        const double dens =
            dens_norm * std::exp(-(z1 * z1 - 2.0 * rho_m * z1 * z2 + z2 * z2) / (2.0 * det));
        // conditioning on the sign quadrant of the denominators flips the
        // numerators instead: P(s1 N1 <= r1 m1, s2 N2 <= r2 m2 | corr rho_n)
        const double cdf = bivariate_normal_cdf(r1 * m1[i] / sy1, r2 * m2[j] / sy2, rho_n);
        part += w1[i] * w2[j] * dens * cdf;
      }
    }
    total += part;
  }
  return total;
}

}  // namespace detail

inline JointRatioCdfResult joint_ratio_cdf(double r1, double r2, const Eigen::Matrix2d& cov_y,
                                           const Eigen::Matrix2d& cov_x) {
  auto check_pd = [](const Eigen::Matrix2d& m, const char* name) {
    if (std::abs(m(0, 1) - m(1, 0)) > 1e-12 * (std::abs(m(0, 1)) + 1.0))
      throw std::invalid_argument(std::string(name) + ": not symmetric");
    if (!(m(0, 0) > 0.0) || !(m.determinant() > 0.0))
      throw std::invalid_argument(std::string(name) + ": not positive definite");
  };
  check_pd(cov_y, "cov_y");
  check_pd(cov_x, "cov_x");

  if (std::isinf(r1) && std::isinf(r2) && r1 > 0 && r2 > 0) return {1.0, 0.0};

  const double coarse = detail::joint_ratio_cdf_quadrature(r1, r2, cov_y, cov_x, 48);
  const double fine = detail::joint_ratio_cdf_quadrature(r1, r2, cov_y, cov_x, 96);
  JointRatioCdfResult out;
  out.value = std::clamp(fine, 0.0, 1.0);
  out.error_estimate = std::abs(fine - coarse);
  return out;
}

enum class TransformKind { log_intensity, probit };

// Chain rule for transformed surfaces: D_u g(Z) = g'(Z) D_u Z.
inline Eigen::Vector2d chain_rule_transform(TransformKind kind, double z,
                                            const Eigen::Vector2d& grad_z) {
  if (std::isnan(z)) throw std::invalid_argument("chain_rule_transform: z must not be NaN");
  double factor;
  if (kind == TransformKind::log_intensity) {
    // z = -inf is the flat-zero intensity sentinel
    factor = std::exp(z);
  } else {
    factor = std::isinf(z) ? 0.0 : std_normal_pdf(z);
  }
  if (factor == 0.0) return Eigen::Vector2d::Zero();
  return factor * grad_z;
}

}  // namespace gradfield

#endif
