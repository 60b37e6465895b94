#ifndef GRADFIELD_MODEL_HPP
#define GRADFIELD_MODEL_HPP

// Bivariate hierarchical GP data model: conditional likelihood
// L(theta; Y, X) = L(Y | theta, X) L(X | theta), adaptive random-walk
// Metropolis posterior sampling, and exact simulation of realizations.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "gradfield/kernel.hpp"
#include "gradfield/linalg.hpp"
#include "gradfield/rng.hpp"

namespace gradfield {

struct Dataset {
  std::vector<Location> locations;
  std::vector<double> x;
  std::vector<double> y;

  Eigen::Index n() const { return static_cast<Eigen::Index>(locations.size()); }

  void validate() const {
    if (locations.size() != x.size() || locations.size() != y.size())
      throw std::invalid_argument("Dataset: locations, x, y must have equal lengths");
    if (locations.size() < 3)
      throw std::invalid_argument("Dataset: need at least 3 observations");
    for (const auto& s : locations) s.validate();
    for (double v : x)
      if (!std::isfinite(v)) throw std::invalid_argument("Dataset: non-finite x value");
    for (double v : y)
      if (!std::isfinite(v)) throw std::invalid_argument("Dataset: non-finite y value");
    check_distinct(locations, locations, "locations", "locations");
  }
};

struct NormalPrior {
  double mean = 0.0;
  double variance = 100.0;
  // variance <= 0 is the point-mass convention (degenerate prior at `mean`)
  double log_density(double v) const {
    if (variance <= 0.0)
      return v == mean ? 0.0 : -std::numeric_limits<double>::infinity();
    return -0.5 * std::log(2.0 * M_PI * variance) - 0.5 * (v - mean) * (v - mean) / variance;
  }
};

struct InverseGammaPrior {
  double shape = 2.0;
  double scale = 0.1;
  // shape <= 0 is the point-mass convention (degenerate prior at `scale`)
  double log_density(double v) const {
    if (shape <= 0.0)
      return v == scale ? 0.0 : -std::numeric_limits<double>::infinity();
    if (v <= 0.0) return -std::numeric_limits<double>::infinity();
    return shape * std::log(scale) - std::lgamma(shape) - (shape + 1.0) * std::log(v) - scale / v;
  }
};

struct UniformPrior {
  double lower = 0.5;
  double upper = 10.0;
  // lower == upper is the point-mass convention
  double log_density(double v) const {
    if (v < lower || v > upper) return -std::numeric_limits<double>::infinity();
    if (upper <= lower) return 0.0;
    return -std::log(upper - lower);
  }
};

// Defaults mirror the simulation-study priors: N(0,100) for means/slope,
// IG(2, 0.1) for variances, U(0.5, 10) for decays.
struct PriorSpec {
  NormalPrior alpha0, beta0, beta1;
  InverseGammaPrior sigma2_x, sigma2_y;
  UniformPrior phi_x, phi_y;

  void validate() const {
    // variance 0 is the point-mass convention
    if (alpha0.variance < 0 || beta0.variance < 0 || beta1.variance < 0)
      throw std::invalid_argument("PriorSpec: normal prior variances must be nonnegative");
    if (!(phi_x.lower > 0) || !(phi_x.lower <= phi_x.upper) ||
        !(phi_y.lower > 0) || !(phi_y.lower <= phi_y.upper))
      throw std::invalid_argument("PriorSpec: need 0 < lower <= upper for phi bounds");
  }

  double log_density(const ThetaSample& t) const {
    return alpha0.log_density(t.alpha0) + beta0.log_density(t.beta0) +
           beta1.log_density(t.beta1) + sigma2_x.log_density(t.sigma2_x) +
           sigma2_y.log_density(t.sigma2_y) + phi_x.log_density(t.phi_x) +
           phi_y.log_density(t.phi_y);
  }
};

struct McmcConfig {
  int iterations = 10500;
  int burn_in = 500;
  int thin = 5;
  std::uint64_t seed = 0;
  double initial_scale = 0.1;
  int adaptation_window = 50;  // Robbins-Monro batch size during burn-in

  void validate() const {
    if (iterations <= 0 || burn_in < 0 || thin < 1)
      throw std::invalid_argument("McmcConfig: iterations > 0, burn_in >= 0, thin >= 1 required");
    if (burn_in >= iterations)
      throw std::invalid_argument("McmcConfig: burn_in must be below iterations");
  }

  int retained() const { return (iterations - burn_in) / thin; }
};

struct PosteriorChain {
  std::vector<ThetaSample> samples;
  std::array<double, 3> acceptance = {0, 0, 0};  // X block, Y block, regression block
  McmcConfig config;

  void validate() const {
    if (samples.empty()) throw std::invalid_argument("PosteriorChain: empty chain");
  }
};

namespace detail {

inline Eigen::MatrixXd correlation_matrix(const std::vector<Location>& locs, double phi) {
  const Eigen::Index n = static_cast<Eigen::Index>(locs.size());
  Eigen::MatrixXd r(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    r(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      r(i, j) = r(j, i) = corr_matern32(distance(locs[i], locs[j]), phi);
    }
  }
  return r;
}

inline double gp_log_density(const Eigen::VectorXd& resid, double sigma2,
                             const Eigen::LLT<Eigen::MatrixXd>& corr_llt) {
  const double n = static_cast<double>(resid.size());
  double log_det_corr = 0.0;
  for (Eigen::Index i = 0; i < resid.size(); ++i)
    log_det_corr += std::log(corr_llt.matrixL()(i, i));
  const double quad = resid.dot(corr_llt.solve(resid));
  return -0.5 * n * std::log(2.0 * M_PI * sigma2) - log_det_corr - 0.5 * quad / sigma2;
}

}  // namespace detail

// X marginal term: log N(x; alpha0 1, sigma2_x R(phi_x))
inline double log_likelihood_x(const ThetaSample& theta, const Dataset& data) {
  const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(data.x.data(), data.n());
  const Eigen::VectorXd resid = x.array() - theta.alpha0;
  auto llt = ridge_cholesky(detail::correlation_matrix(data.locations, theta.phi_x));
  return detail::gp_log_density(resid, theta.sigma2_x, llt);
}

// Y|X term: log N(y; beta0 1 + beta1 x, sigma2_y R(phi_y))
inline double log_likelihood_y(const ThetaSample& theta, const Dataset& data) {
  const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(data.x.data(), data.n());
  const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(data.y.data(), data.n());
  const Eigen::VectorXd resid = y.array() - theta.beta0 - theta.beta1 * x.array();
  auto llt = ridge_cholesky(detail::correlation_matrix(data.locations, theta.phi_y));
  return detail::gp_log_density(resid, theta.sigma2_y, llt);
}

inline double log_likelihood(const ThetaSample& theta, const Dataset& data) {
  theta.validate();
  data.validate();
  return log_likelihood_x(theta, data) + log_likelihood_y(theta, data);
}

// Exact draw of (X, Y) at the given locations via Cholesky of the two
// independent-process covariances: X = alpha0 + w_x, Y = beta0 + beta1 X + w_y.
inline Dataset simulate_bivariate_gp(const std::vector<Location>& locations,
                                     const ThetaSample& theta, std::uint64_t seed) {
  theta.validate();
  for (const auto& s : locations) s.validate();
  check_distinct(locations, locations, "locations", "locations");
  const Eigen::Index n = static_cast<Eigen::Index>(locations.size());

  Rng rng = make_rng(seed);
  auto draw_field = [&](const MaternParams& p) {
    Eigen::MatrixXd cov = detail::correlation_matrix(locations, p.phi) * p.sigma2;
    auto llt = ridge_cholesky(cov);
    return (llt.matrixL() * standard_normal_vector(rng, n)).eval();
  };

  const Eigen::VectorXd wx = draw_field(theta.x_params());
  const Eigen::VectorXd wy = draw_field(theta.y_params());

  Dataset out;
  out.locations = locations;
  out.x.resize(locations.size());
  out.y.resize(locations.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    out.x[i] = theta.alpha0 + wx(i);
    out.y[i] = theta.beta0 + theta.beta1 * out.x[i] + wy(i);
  }
  return out;
}

namespace detail {

// Unbounded working coordinates: log for variances, logit on bounds for decays.
struct Transform {
  double lo = 0.0, hi = 0.0;
  bool is_log = false, is_logit = false;

  double forward(double v) const {
    if (is_log) return std::log(v);
    if (is_logit) {
      if (hi - lo <= 0.0) return 0.0;
      const double p = (v - lo) / (hi - lo);
      return std::log(p / (1.0 - p));
    }
    return v;
  }
  double inverse(double z) const {
    if (is_log) return std::exp(z);
    if (is_logit) {
      if (hi - lo <= 0.0) return lo;
      return lo + (hi - lo) / (1.0 + std::exp(-z));
    }
    return z;
  }
  // log |dv/dz|, the Jacobian correction for the prior in working coordinates
  double log_jacobian(double z) const {
    if (is_log) return z;
    if (is_logit) {
      if (hi - lo <= 0.0) return 0.0;
      const double e = std::exp(-std::abs(z));
      return std::log(hi - lo) + std::log(e) - 2.0 * std::log1p(e);
    }
    return 0.0;
  }
};

struct ParamSpec {
  int index;  // 0 a0, 1 b0, 2 b1, 3 s2x, 4 s2y, 5 phix, 6 phiy
  Transform transform;
};

inline double get_param(const ThetaSample& t, int i) {
  switch (i) {
    case 0: return t.alpha0;
    case 1: return t.beta0;
    case 2: return t.beta1;
    case 3: return t.sigma2_x;
    case 4: return t.sigma2_y;
    case 5: return t.phi_x;
    default: return t.phi_y;
  }
}

inline void set_param(ThetaSample& t, int i, double v) {
  switch (i) {
    case 0: t.alpha0 = v; break;
    case 1: t.beta0 = v; break;
    case 2: t.beta1 = v; break;
    case 3: t.sigma2_x = v; break;
    case 4: t.sigma2_y = v; break;
    case 5: t.phi_x = v; break;
    default: t.phi_y = v; break;
  }
}

struct Block {
  std::vector<ParamSpec> params;
  double log_scale = 0.0;
  long proposals = 0;
  long accepts = 0;
};

}  // namespace detail

// Generic adaptive random-walk Metropolis over parameter blocks.
// `log_target` receives a candidate ThetaSample and returns the unnormalized
// log posterior (likelihood + prior). Blocks: (alpha0, sigma2_x, phi_x),
// (sigma2_y, phi_y), (beta0, beta1). Scales adapt toward 0.44 acceptance
// during burn-in only and are frozen afterward.
inline PosteriorChain run_metropolis(
    const std::function<double(const ThetaSample&)>& log_target, ThetaSample init,
    const PriorSpec& priors, const McmcConfig& cfg) {
  cfg.validate();
  using detail::Block;
  using detail::Transform;

  const Transform ident{};
  const Transform logt{0, 0, true, false};
  const Transform lgx{priors.phi_x.lower, priors.phi_x.upper, false, true};
  const Transform lgy{priors.phi_y.lower, priors.phi_y.upper, false, true};

  std::array<Block, 3> blocks;
  blocks[0].params = {{0, ident}, {3, logt}, {5, lgx}};
  blocks[1].params = {{4, logt}, {6, lgy}};
  blocks[2].params = {{1, ident}, {2, ident}};
  for (auto& b : blocks) b.log_scale = std::log(cfg.initial_scale);

  // Clamp initialization into the phi prior support; snap point-mass priors.
  init.phi_x = std::clamp(init.phi_x, priors.phi_x.lower, priors.phi_x.upper);
  init.phi_y = std::clamp(init.phi_y, priors.phi_y.lower, priors.phi_y.upper);
  if (priors.alpha0.variance <= 0.0) init.alpha0 = priors.alpha0.mean;
  if (priors.beta0.variance <= 0.0) init.beta0 = priors.beta0.mean;
  if (priors.beta1.variance <= 0.0) init.beta1 = priors.beta1.mean;
  if (priors.sigma2_x.shape <= 0.0) init.sigma2_x = priors.sigma2_x.scale;
  if (priors.sigma2_y.shape <= 0.0) init.sigma2_y = priors.sigma2_y.scale;

  auto is_point_mass = [&](int index) {
    switch (index) {
      case 0: return priors.alpha0.variance <= 0.0;
      case 1: return priors.beta0.variance <= 0.0;
      case 2: return priors.beta1.variance <= 0.0;
      case 3: return priors.sigma2_x.shape <= 0.0;
      case 4: return priors.sigma2_y.shape <= 0.0;
      default: return false;
    }
  };

  auto working_log_post = [&](const ThetaSample& t, const std::array<Block, 3>& blks) {
    double lp = log_target(t);
    if (!std::isfinite(lp)) return -std::numeric_limits<double>::infinity();
    for (const auto& b : blks)
      for (const auto& ps : b.params)
        lp += ps.transform.log_jacobian(ps.transform.forward(detail::get_param(t, ps.index)));
    return lp;
  };

  ThetaSample cur = init;
  double cur_lp = working_log_post(cur, blocks);
  if (!std::isfinite(cur_lp))
    throw std::runtime_error(
        "fit_mcmc: non-finite posterior at initialization; consider rescaling the data");

  Rng rng = make_rng(cfg.seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> ud(0.0, 1.0);

  PosteriorChain chain;
  chain.config = cfg;
  chain.samples.reserve(cfg.retained());

  std::array<long, 3> window_props{0, 0, 0}, window_accs{0, 0, 0};

  for (int iter = 0; iter < cfg.iterations; ++iter) {
    for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
      Block& blk = blocks[bi];
      ThetaSample prop = cur;
      const double scale = std::exp(blk.log_scale);
      for (const auto& ps : blk.params) {
        const double z = ps.transform.forward(detail::get_param(cur, ps.index));
        double zp = z + scale * nd(rng);
        // Point-mass priors and collapsed logit bounds pin the coordinate.
        if (is_point_mass(ps.index)) zp = z;
        if (ps.transform.is_logit && ps.transform.hi - ps.transform.lo <= 0.0) zp = z;
        detail::set_param(prop, ps.index, ps.transform.inverse(zp));
      }
      const double prop_lp = working_log_post(prop, blocks);
      blk.proposals++;
      window_props[bi]++;
      if (std::log(ud(rng)) < prop_lp - cur_lp) {
        cur = prop;
        cur_lp = prop_lp;
        blk.accepts++;
        window_accs[bi]++;
      }
      // Robbins-Monro adaptation toward 0.44, burn-in only.
      if (iter < cfg.burn_in && window_props[bi] >= cfg.adaptation_window) {
        const double rate =
            static_cast<double>(window_accs[bi]) / static_cast<double>(window_props[bi]);
        const double step = 1.0 / std::sqrt(1.0 + static_cast<double>(iter) / cfg.adaptation_window);
        blk.log_scale += step * (rate - 0.44);
        window_props[bi] = window_accs[bi] = 0;
      }
    }
    if (iter >= cfg.burn_in && (iter - cfg.burn_in) % cfg.thin == 0 &&
        static_cast<int>(chain.samples.size()) < cfg.retained()) {
      chain.samples.push_back(cur);
    }
  }

  for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
    chain.acceptance[bi] = blocks[bi].proposals > 0
        ? static_cast<double>(blocks[bi].accepts) / static_cast<double>(blocks[bi].proposals)
        : 0.0;
  }
  return chain;
}

inline ThetaSample ols_initialization(const Dataset& data, const PriorSpec& priors) {
  const Eigen::Index n = data.n();
  const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(data.x.data(), n);
  const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(data.y.data(), n);
  const double xm = x.mean();
  const double ym = y.mean();
  const double sxx = (x.array() - xm).square().sum();
  const double sxy = ((x.array() - xm) * (y.array() - ym)).sum();

  ThetaSample t;
  t.alpha0 = xm;
  t.beta1 = sxx > 0 ? sxy / sxx : 0.0;
  t.beta0 = ym - t.beta1 * xm;
  t.sigma2_x = std::max((x.array() - xm).square().sum() / std::max<double>(1, n - 1), 1e-6);
  const Eigen::VectorXd yr = y.array() - t.beta0 - t.beta1 * x.array();
  t.sigma2_y = std::max(yr.squaredNorm() / std::max<double>(1, n - 2), 1e-6);
  t.phi_x = std::sqrt(priors.phi_x.lower * priors.phi_x.upper);
  t.phi_y = std::sqrt(priors.phi_y.lower * priors.phi_y.upper);
  return t;
}

// `likelihood_weight` is a test hook: 0 turns the likelihood off for
// prior-only sampling checks.
inline PosteriorChain fit_mcmc(const Dataset& data, const PriorSpec& priors,
                               const McmcConfig& cfg, double likelihood_weight = 1.0) {
  data.validate();
  priors.validate();
  auto target = [&](const ThetaSample& t) {
    double lp = priors.log_density(t);
    if (!std::isfinite(lp)) return lp;
    if (likelihood_weight != 0.0) lp += likelihood_weight * log_likelihood(t, data);
    return lp;
  };
  return run_metropolis(target, ols_initialization(data, priors), priors, cfg);
}

// X-only fit (alpha0, sigma2_x, phi_x); used when only a covariate surface
// needs a GP model, e.g. kriging a covariate onto LGCP grid cells.
inline PosteriorChain fit_x_mcmc(const Dataset& data, const PriorSpec& priors,
                                 const McmcConfig& cfg) {
  data.validate();
  priors.validate();
  // Parameters the X likelihood ignores still carry their priors so the
  // working-coordinate chain stays proper; they just sample the prior.
  auto target = [&](const ThetaSample& t) {
    double lp = priors.log_density(t);
    if (!std::isfinite(lp)) return lp;
    return lp + log_likelihood_x(t, data);
  };
  return run_metropolis(target, ols_initialization(data, priors), priors, cfg);
}

}  // namespace gradfield

#endif
