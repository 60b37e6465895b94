#ifndef GRADFIELD_GRADIENT_HPP
#define GRADFIELD_GRADIENT_HPP

// Joint posterior-predictive inference for surfaces and gradient fields:
// Schur-complement conditionals of the stacked joint normal given the
// observed (Y, X), plus composition sampling across a posterior chain.

#include <cstdint>
#include <future>
#include <optional>
#include <stdexcept>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "gradfield/kernel.hpp"
#include "gradfield/model.hpp"
#include "gradfield/rng.hpp"

namespace gradfield {

struct PredictionTargets {
  std::vector<Location> locations;
  bool want_level = true;     // Y(s0), X(s0)
  bool want_gradient = true;  // gradY(s0), gradX(s0)
  // Targets that coincide with observations are rejected unless this is set,
  // in which case they are offset by 1e-6 spatial units.
  bool offset_coincident = false;

  void validate() const {
    if (locations.empty()) throw std::invalid_argument("PredictionTargets: empty target list");
    if (!want_level && !want_gradient)
      throw std::invalid_argument("PredictionTargets: nothing requested");
    for (const auto& s : locations) s.validate();
  }
};

struct ConditionalGaussian {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  Eigen::LLT<Eigen::MatrixXd> cov_llt;  // factor retained for draws
  bool want_level = true;
  bool want_gradient = true;
  Eigen::Index n_targets = 0;
};

struct GradientDraw {
  Location target;
  std::optional<double> y, x;
  Eigen::Vector2d grad_y = Eigen::Vector2d::Zero();
  Eigen::Vector2d grad_x = Eigen::Vector2d::Zero();
  int theta_index = 0;
};

namespace detail {

inline std::vector<Location> resolve_targets(const PredictionTargets& targets,
                                             const std::vector<Location>& obs) {
  std::vector<Location> out = targets.locations;
  if (targets.offset_coincident) {
    for (auto& t : out) {
      for (const auto& o : obs) {
        if (distance(t, o) < kDuplicateLocationTol) {
          t.s1 += 1e-6;
          t.s2 += 1e-6;
        }
      }
    }
  }
  return out;
}

}  // namespace detail

// Conditional of (Y(t), X(t))[if level] and (gradY(t), gradX(t))[if gradient]
// given the observed Y and X vectors, under a single theta.
// Component order matches joint_cov_matrix: Y(t), X(t), gradY(t), gradX(t).
inline ConditionalGaussian conditional_gradient_distribution(const ThetaSample& theta,
                                                             const Dataset& data,
                                                             const PredictionTargets& targets) {
  theta.validate();
  targets.validate();
  const std::vector<Location> tlocs = detail::resolve_targets(targets, data.locations);

  const Eigen::Index n = data.n();
  const Eigen::Index m = static_cast<Eigen::Index>(tlocs.size());
  const Eigen::MatrixXd v = joint_cov_matrix(data.locations, tlocs, theta);

  // Rows of the full matrix belonging to the predicted components.
  std::vector<Eigen::Index> a_idx;
  if (targets.want_level)
    for (Eigen::Index i = 0; i < 2 * m; ++i) a_idx.push_back(2 * n + i);
  if (targets.want_gradient)
    for (Eigen::Index i = 0; i < 4 * m; ++i) a_idx.push_back(2 * n + 2 * m + i);
  const Eigen::Index na = static_cast<Eigen::Index>(a_idx.size());

  Eigen::MatrixXd sigma_bb = v.topLeftCorner(2 * n, 2 * n);
  Eigen::MatrixXd sigma_ab(na, 2 * n);
  Eigen::MatrixXd sigma_aa(na, na);
  for (Eigen::Index i = 0; i < na; ++i) {
    sigma_ab.row(i) = v.row(a_idx[i]).head(2 * n);
    for (Eigen::Index j = 0; j < na; ++j) sigma_aa(i, j) = v(a_idx[i], a_idx[j]);
  }

  // Prior means: E[Y] = beta0 + beta1 alpha0, E[X] = alpha0, E[grad] = 0.
  const double mu_y = theta.beta0 + theta.beta1 * theta.alpha0;
  Eigen::VectorXd mu_a = Eigen::VectorXd::Zero(na);
  if (targets.want_level) {
    mu_a.head(m).setConstant(mu_y);
    mu_a.segment(m, m).setConstant(theta.alpha0);
  }

  ConditionalGaussian out;
  out.want_level = targets.want_level;
  out.want_gradient = targets.want_gradient;
  out.n_targets = m;

  if (n == 0) {
    out.mean = mu_a;
    out.cov = sigma_aa;
  } else {
    Eigen::VectorXd resid(2 * n);
    for (Eigen::Index i = 0; i < n; ++i) {
      resid(i) = data.y[i] - mu_y;
      resid(n + i) = data.x[i] - theta.alpha0;
    }
    auto bb_llt = ridge_cholesky(sigma_bb);
    const Eigen::MatrixXd w = bb_llt.solve(sigma_ab.transpose());  // Sigma_bb^-1 Sigma_ba
    out.mean = mu_a + sigma_ab * bb_llt.solve(resid);
    out.cov = sigma_aa - sigma_ab * w;
    out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  }
  out.cov_llt = ridge_cholesky(out.cov);
  return out;
}

// One exact multivariate-normal draw from the conditional; `zero_cov` is a
// test hook that returns the mean.
inline std::vector<GradientDraw> draw_joint_gradients(const ConditionalGaussian& dist,
                                                      const std::vector<Location>& target_locs,
                                                      std::uint64_t seed, int theta_index = 0,
                                                      bool zero_cov = false) {
  const Eigen::Index m = dist.n_targets;
  if (static_cast<Eigen::Index>(target_locs.size()) != m)
    throw std::invalid_argument("draw_joint_gradients: target count mismatch");

  Eigen::VectorXd draw = dist.mean;
  if (!zero_cov) {
    Rng rng = make_rng(seed, static_cast<std::uint64_t>(theta_index));
    draw += dist.cov_llt.matrixL() * standard_normal_vector(rng, dist.mean.size());
  }

  const Eigen::Index grad_offset = dist.want_level ? 2 * m : 0;
  std::vector<GradientDraw> out(static_cast<std::size_t>(m));
  for (Eigen::Index t = 0; t < m; ++t) {
    GradientDraw& g = out[static_cast<std::size_t>(t)];
    g.target = target_locs[static_cast<std::size_t>(t)];
    g.theta_index = theta_index;
    if (dist.want_level) {
      g.y = draw(t);
      g.x = draw(m + t);
    }
    if (dist.want_gradient) {
      g.grad_y = draw.segment<2>(grad_offset + 2 * t);
      g.grad_x = draw.segment<2>(grad_offset + 2 * m + 2 * t);
    }
  }
  return out;
}

struct CompositionResult {
  // draws[l] holds the joint draw for chain sample l (empty if skipped)
  std::vector<std::vector<GradientDraw>> draws;
  int failures = 0;
};

inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("GRADFIELD_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

// One joint draw per retained theta, each from its own conditional; the full
// joint over all targets is sampled at once (one factorization per theta).
// Per-theta RNG streams are derived from (seed, theta index), so the output
// is identical for any thread count.
inline CompositionResult composition_sample(const PosteriorChain& chain, const Dataset& data,
                                            const PredictionTargets& targets, std::uint64_t seed,
                                            int threads = 0) {
  chain.validate();
  data.validate();
  targets.validate();
  const std::vector<Location> tlocs = detail::resolve_targets(targets, data.locations);
  check_distinct(data.locations, tlocs, "obs", "targets");

  const int l = static_cast<int>(chain.samples.size());
  CompositionResult result;
  result.draws.resize(chain.samples.size());
  std::vector<char> failed(chain.samples.size(), 0);

  PredictionTargets resolved = targets;
  resolved.locations = tlocs;
  resolved.offset_coincident = false;

  const int nthreads = std::min(resolve_threads(threads), l);
  auto worker = [&](int begin, int end) {
    for (int i = begin; i < end; ++i) {
      try {
        const ConditionalGaussian dist =
            conditional_gradient_distribution(chain.samples[static_cast<std::size_t>(i)], data,
                                              resolved);
        result.draws[static_cast<std::size_t>(i)] =
            draw_joint_gradients(dist, tlocs, seed, i);
      } catch (const std::exception&) {
        failed[static_cast<std::size_t>(i)] = 1;
      }
    }
  };

  if (nthreads <= 1) {
    worker(0, l);
  } else {
    std::vector<std::future<void>> futures;
    const int chunk = (l + nthreads - 1) / nthreads;
    for (int t = 0; t < nthreads; ++t) {
      const int b = t * chunk, e = std::min(l, b + chunk);
      if (b >= e) break;
      futures.push_back(std::async(std::launch::async, worker, b, e));
    }
    for (auto& f : futures) f.get();
  }

  for (char f : failed) result.failures += f;
  if (result.failures > 0 && static_cast<double>(result.failures) > 0.01 * l)
    throw std::runtime_error("composition_sample: more than 1% of per-theta factorizations failed");
  return result;
}

}  // namespace gradfield

#endif
