#ifndef GRADFIELD_LGCP_HPP
#define GRADFIELD_LGCP_HPP

// Log-Gaussian Cox process machinery: grid-approximated likelihood,
// elliptical slice sampling of the latent field, Metropolis updates of
// (beta0, beta1, sigma2_z), K-function minimum-contrast estimation of the
// decay, and intensity-gradient sensitivity surfaces via the chain rule.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iostream>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "gradfield/gradient.hpp"
#include "gradfield/kernel.hpp"
#include "gradfield/linalg.hpp"
#include "gradfield/model.hpp"
#include "gradfield/processes.hpp"
#include "gradfield/rng.hpp"
#include "gradfield/surface.hpp"

namespace gradfield {

struct PointPattern {
  std::vector<Location> events;
  Window window;

  void validate() const {
    window.validate();
    for (const auto& e : events) {
      e.validate();
      if (!window.contains(e))
        throw std::invalid_argument("PointPattern: event outside window");
    }
  }
};

struct LgcpSample {
  double beta0 = 0.0;
  double beta1 = 0.0;
  double sigma2_z = 1.0;
  Eigen::VectorXd w;  // latent field at grid cells

  void validate() const {
    if (!(sigma2_z > 0.0)) throw std::invalid_argument("LgcpSample: sigma2_z must be positive");
    if (!w.allFinite()) throw std::invalid_argument("LgcpSample: non-finite latent field");
  }
};

struct LgcpChain {
  std::vector<LgcpSample> samples;
  double beta_acceptance = 0.0;
  double sigma2_acceptance = 0.0;
  McmcConfig config;
};

// log L = sum_i log lambda(cell of s_i) - sum_l |A_l| lambda(A_l), with
// lambda(A_l) = exp(beta0 + beta1 X(A_l) + w(A_l)). The cell-area factor
// makes the sum a Riemann approximation of the intensity measure.
inline double lgcp_log_likelihood(const LgcpSample& sample, const PointPattern& pattern,
                                  const SurfaceGrid& x_grid, const GridSpec& grid) {
  sample.validate();
  pattern.validate();
  grid.validate();
  if (static_cast<int>(x_grid.size()) != grid.cells() ||
      static_cast<Eigen::Index>(grid.cells()) != sample.w.size())
    throw std::invalid_argument("lgcp_log_likelihood: x_grid and w must align with grid");

  const double area = grid.cell_area();
  double ll = 0.0;
  Eigen::VectorXd log_lambda(grid.cells());
  for (int l = 0; l < grid.cells(); ++l) {
    log_lambda(l) = sample.beta0 + sample.beta1 * x_grid.values[static_cast<std::size_t>(l)] +
                    sample.w(l);
    ll -= area * std::exp(log_lambda(l));
  }
  for (const auto& e : pattern.events) ll += log_lambda(grid.cell_of(e));
  return ll;
}

// One elliptical slice transition for a zero-mean Gaussian prior with the
// given Cholesky factor of the prior covariance. Always accepts after
// bracket shrinkage; leaves prior x likelihood invariant.
inline Eigen::VectorXd elliptical_slice_step(const Eigen::VectorXd& w,
                                             const Eigen::MatrixXd& prior_chol_l,
                                             const std::function<double(const Eigen::VectorXd&)>& loglik,
                                             Rng& rng) {
  const double ll_cur = loglik(w);
  if (!std::isfinite(ll_cur))
    throw std::runtime_error("elliptical_slice_step: non-finite log-likelihood at current state");

  const Eigen::VectorXd nu = prior_chol_l * standard_normal_vector(rng, w.size());
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  const double log_slice = ll_cur + std::log(ud(rng));

  double angle = 2.0 * M_PI * ud(rng);
  double lo = angle - 2.0 * M_PI;
  double hi = angle;

  for (int it = 0; it < 1000; ++it) {
    const Eigen::VectorXd prop = w * std::cos(angle) + nu * std::sin(angle);
    if (loglik(prop) > log_slice) return prop;
    if (angle < 0.0)
      lo = angle;
    else
      hi = angle;
    angle = lo + (hi - lo) * ud(rng);
  }
  throw std::runtime_error("elliptical_slice_step: bracket shrank without acceptance");
}

struct LgcpPriors {
  NormalPrior beta0;
  NormalPrior beta1;
  InverseGammaPrior sigma2_z;
};

// Alternates elliptical slice updates of w with random-walk Metropolis on
// (beta0, beta1) and log sigma2_z. phi_z is fixed (minimum contrast estimate)
// so the latent correlation factor is computed once.
inline LgcpChain fit_lgcp(const PointPattern& pattern, const SurfaceGrid& x_grid,
                          const GridSpec& grid, double phi_z, const LgcpPriors& priors,
                          const McmcConfig& cfg) {
  pattern.validate();
  grid.validate();
  cfg.validate();
  if (!(phi_z > 0.0)) throw std::invalid_argument("fit_lgcp: phi_z must be positive");

  const int ncell = grid.cells();
  {
    double mn = x_grid.values[0], mx = x_grid.values[0];
    for (double v : x_grid.values) {
      mn = std::min(mn, v);
      mx = std::max(mx, v);
    }
    if (mx - mn < 1e-12)
      std::cerr << "fit_lgcp: warning: covariate grid is constant; beta1 is not identifiable\n";
  }

  std::vector<Location> centroids(static_cast<std::size_t>(ncell));
  for (int l = 0; l < ncell; ++l) centroids[static_cast<std::size_t>(l)] = grid.centroid(l);
  const Eigen::MatrixXd corr = detail::correlation_matrix(centroids, phi_z);
  auto corr_llt = ridge_cholesky(corr);
  const Eigen::MatrixXd corr_l = corr_llt.matrixL();

  // Events binned once.
  std::vector<int> event_cells;
  event_cells.reserve(pattern.events.size());
  for (const auto& e : pattern.events) event_cells.push_back(grid.cell_of(e));

  const double area = grid.cell_area();
  const Eigen::VectorXd xv =
      Eigen::Map<const Eigen::VectorXd>(x_grid.values.data(), static_cast<Eigen::Index>(ncell));

  auto loglik = [&](double b0, double b1, const Eigen::VectorXd& w) {
    const Eigen::VectorXd log_lambda = (b0 + (b1 * xv.array()) + w.array()).matrix();
    double ll = -area * log_lambda.array().exp().sum();
    for (int c : event_cells) ll += log_lambda(c);
    return ll;
  };

  Rng rng = make_rng(cfg.seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> ud(0.0, 1.0);

  LgcpSample cur;
  cur.beta0 = std::log(std::max<std::size_t>(pattern.events.size(), 1) / pattern.window.area());
  cur.beta1 = 0.0;
  cur.sigma2_z = 1.0;
  cur.w = Eigen::VectorXd::Zero(ncell);

  // log prior of w given sigma2: -n/2 log(2 pi sigma2) - logdet(L) - q/(2 sigma2)
  double corr_logdet = 0.0;
  for (int i = 0; i < ncell; ++i) corr_logdet += std::log(corr_l(i, i));
  auto w_quad = [&](const Eigen::VectorXd& w) { return w.dot(corr_llt.solve(w)); };

  double beta_scale = 0.05, s2_scale = 0.3;
  long beta_acc = 0, beta_prop = 0, s2_acc = 0, s2_prop = 0;
  long beta_win_acc = 0, beta_win_prop = 0, s2_win_acc = 0, s2_win_prop = 0;

  LgcpChain chain;
  chain.config = cfg;
  chain.samples.reserve(cfg.retained());

  double cur_ll = loglik(cur.beta0, cur.beta1, cur.w);
  double cur_quad = 0.0;

  for (int iter = 0; iter < cfg.iterations; ++iter) {
    // w | rest via elliptical slice on the scaled prior.
    {
      const double sd = std::sqrt(cur.sigma2_z);
      const Eigen::MatrixXd scaled_l = sd * corr_l;
      auto wl = [&](const Eigen::VectorXd& w) { return loglik(cur.beta0, cur.beta1, w); };
      cur.w = elliptical_slice_step(cur.w, scaled_l, wl, rng);
      cur_ll = loglik(cur.beta0, cur.beta1, cur.w);
      cur_quad = w_quad(cur.w);
    }

    // (beta0, beta1) random walk.
    {
      const double b0p = cur.beta0 + beta_scale * nd(rng);
      const double b1p = cur.beta1 + beta_scale * nd(rng);
      const double llp = loglik(b0p, b1p, cur.w);
      const double log_r = llp + priors.beta0.log_density(b0p) + priors.beta1.log_density(b1p) -
                           cur_ll - priors.beta0.log_density(cur.beta0) -
                           priors.beta1.log_density(cur.beta1);
      beta_prop++;
      beta_win_prop++;
      if (std::log(ud(rng)) < log_r) {
        cur.beta0 = b0p;
        cur.beta1 = b1p;
        cur_ll = llp;
        beta_acc++;
        beta_win_acc++;
      }
    }

    // sigma2_z random walk on log scale; likelihood is w's prior density.
    {
      const double zp = std::log(cur.sigma2_z) + s2_scale * nd(rng);
      const double s2p = std::exp(zp);
      auto w_logprior = [&](double s2) {
        return -0.5 * ncell * std::log(2.0 * M_PI * s2) - corr_logdet - 0.5 * cur_quad / s2;
      };
      const double log_r = w_logprior(s2p) + priors.sigma2_z.log_density(s2p) + zp -
                           w_logprior(cur.sigma2_z) - priors.sigma2_z.log_density(cur.sigma2_z) -
                           std::log(cur.sigma2_z);
      s2_prop++;
      s2_win_prop++;
      if (std::log(ud(rng)) < log_r) {
        cur.sigma2_z = s2p;
        s2_acc++;
        s2_win_acc++;
      }
    }

    if (iter < cfg.burn_in && beta_win_prop >= cfg.adaptation_window) {
      const double step = 1.0 / std::sqrt(1.0 + static_cast<double>(iter) / cfg.adaptation_window);
      beta_scale *= std::exp(step * (static_cast<double>(beta_win_acc) / beta_win_prop - 0.44));
      s2_scale *= std::exp(step * (static_cast<double>(s2_win_acc) / s2_win_prop - 0.44));
      beta_win_prop = beta_win_acc = s2_win_prop = s2_win_acc = 0;
    }

    if (iter >= cfg.burn_in && (iter - cfg.burn_in) % cfg.thin == 0 &&
        static_cast<int>(chain.samples.size()) < cfg.retained()) {
      chain.samples.push_back(cur);
    }
  }

  chain.beta_acceptance = beta_prop > 0 ? static_cast<double>(beta_acc) / beta_prop : 0.0;
  chain.sigma2_acceptance = s2_prop > 0 ? static_cast<double>(s2_acc) / s2_prop : 0.0;
  return chain;
}

// --- K-function minimum contrast ---------------------------------------

// Border-corrected (reduced sample) empirical K at the given radii.
inline std::vector<double> empirical_k_function(const PointPattern& pattern,
                                                const std::vector<double>& radii) {
  pattern.validate();
  const std::size_t n = pattern.events.size();
  const double lambda_hat = static_cast<double>(n) / pattern.window.area();
  std::vector<double> boundary_dist(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Location& s = pattern.events[i];
    boundary_dist[i] = std::min(std::min(s.s1 - pattern.window.x_min, pattern.window.x_max - s.s1),
                                std::min(s.s2 - pattern.window.y_min, pattern.window.y_max - s.s2));
  }

  std::vector<double> out(radii.size(), 0.0);
  for (std::size_t ri = 0; ri < radii.size(); ++ri) {
    const double r = radii[ri];
    double count = 0.0;
    long n_interior = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (boundary_dist[i] < r) continue;
      ++n_interior;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        if (distance(pattern.events[i], pattern.events[j]) <= r) count += 1.0;
      }
    }
    out[ri] = n_interior > 0 ? count / (lambda_hat * static_cast<double>(n_interior)) : 0.0;
  }
  return out;
}

// Theoretical LGCP K: K(r) = 2 pi int_0^r exp(sigma2 rho(t; phi)) t dt,
// Simpson on each radius increment.
inline std::vector<double> lgcp_k_function(const std::vector<double>& radii, double sigma2_z,
                                           double phi_z) {
  auto g = [&](double t) { return std::exp(sigma2_z * corr_matern32(t, phi_z)); };
  std::vector<double> out(radii.size(), 0.0);
  double acc = 0.0;
  double prev_r = 0.0;
  for (std::size_t i = 0; i < radii.size(); ++i) {
    const double r = radii[i];
    const int steps = 32;
    const double h = (r - prev_r) / steps;
    if (h > 0.0) {
      double sum = g(prev_r) * prev_r + g(r) * r;
      for (int k = 1; k < steps; ++k) {
        const double t = prev_r + k * h;
        sum += (k % 2 == 1 ? 4.0 : 2.0) * g(t) * t;
      }
      acc += sum * h / 3.0;
    }
    out[i] = 2.0 * M_PI * acc;
    prev_r = r;
  }
  return out;
}

struct MinContrastResult {
  double phi_z = 0.0;
  double sigma2_z = 0.0;
  double contrast = 0.0;
};

// Minimizes int (Khat^{1/4} - K_theta^{1/4})^2 dr over phi in bounds, with
// sigma2 profiled on a coarse inner grid; r_max is a quarter of the shorter
// window side. Fourth-root transform stabilizes the K variance.
inline MinContrastResult minimum_contrast_phi(const PointPattern& pattern,
                                              double phi_lower, double phi_upper) {
  pattern.validate();
  if (pattern.events.size() < 30)
    throw std::invalid_argument("minimum_contrast_phi: need at least 30 events");
  if (!(phi_lower > 0.0) || !(phi_lower < phi_upper))
    throw std::invalid_argument("minimum_contrast_phi: need 0 < lower < upper");

  const double r_max =
      0.25 * std::min(pattern.window.width(), pattern.window.height());
  const int n_r = 40;
  std::vector<double> radii(n_r);
  for (int i = 0; i < n_r; ++i) radii[i] = r_max * (i + 1) / n_r;
  const std::vector<double> k_hat = empirical_k_function(pattern, radii);

  auto contrast = [&](double phi, double s2) {
    const std::vector<double> k_th = lgcp_k_function(radii, s2, phi);
    double acc = 0.0;
    const double dr = r_max / n_r;
    for (int i = 0; i < n_r; ++i) {
      const double d = std::pow(std::max(k_hat[i], 0.0), 0.25) - std::pow(k_th[i], 0.25);
      acc += d * d * dr;
    }
    return acc;
  };

  const int n_phi = 40, n_s2 = 24;
  MinContrastResult best;
  best.contrast = std::numeric_limits<double>::infinity();
  int best_phi_index = -1;
  for (int i = 0; i < n_phi; ++i) {
    const double phi =
        phi_lower * std::pow(phi_upper / phi_lower, static_cast<double>(i) / (n_phi - 1));
    for (int j = 0; j < n_s2; ++j) {
      const double s2 = 0.05 * std::pow(5.0 / 0.05, static_cast<double>(j) / (n_s2 - 1));
      const double c = contrast(phi, s2);
      if (c < best.contrast) {
        best.contrast = c;
        best.phi_z = phi;
        best.sigma2_z = s2;
        best_phi_index = i;
      }
    }
  }
  if (best_phi_index <= 0 || best_phi_index >= n_phi - 1)
    throw std::runtime_error(
        "minimum_contrast_phi: optimum on the phi search boundary; decay not identifiable "
        "from this pattern");
  return best;
}

// --- Intensity-gradient sensitivity ------------------------------------

struct LgcpGpParams {
  double alpha0 = 0.0;   // X mean
  double sigma2_x = 1.0;
  double phi_x = 1.0;
  double phi_z = 1.0;    // fixed decay of the latent field
};

// Posterior-median surface of D_u lambda / D_u X on the target grid.
// Per retained LGCP draw: treat (Z at cells | X at cells) as data for the
// conditional bivariate GP, jointly draw (Z, gradZ, gradX) at the targets,
// apply the log-intensity chain rule, and form the directional ratio.
inline SurfaceGrid intensity_gradient_surface(const LgcpChain& chain, const SurfaceGrid& x_grid,
                                              const GridSpec& grid, const GridSpec& target_grid,
                                              const UnitVector& u, const LgcpGpParams& gp,
                                              std::uint64_t seed, int threads = 0,
                                              int max_draws = 0) {
  if (chain.samples.empty()) throw std::invalid_argument("intensity_gradient_surface: empty chain");
  grid.validate();
  target_grid.validate();
  u.validate();

  const int ncell = grid.cells();
  std::vector<Location> cell_locs(static_cast<std::size_t>(ncell));
  for (int l = 0; l < ncell; ++l) cell_locs[static_cast<std::size_t>(l)] = grid.centroid(l);

  const int ntarget = target_grid.cells();
  std::vector<Location> target_locs(static_cast<std::size_t>(ntarget));
  for (int t = 0; t < ntarget; ++t) target_locs[static_cast<std::size_t>(t)] = target_grid.centroid(t);

  // Thin the chain when a draw budget is set.
  std::vector<std::size_t> use;
  const std::size_t total = chain.samples.size();
  if (max_draws > 0 && static_cast<std::size_t>(max_draws) < total) {
    for (int i = 0; i < max_draws; ++i)
      use.push_back(static_cast<std::size_t>(i) * total / static_cast<std::size_t>(max_draws));
  } else {
    for (std::size_t i = 0; i < total; ++i) use.push_back(i);
  }

  std::vector<std::vector<double>> cell_samples(static_cast<std::size_t>(ntarget));
  for (auto& cs : cell_samples) cs.resize(use.size());

  auto worker = [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      const LgcpSample& smp = chain.samples[use[k]];
      // Z at cells under this draw.
      Dataset cond;
      cond.locations = cell_locs;
      cond.x.resize(static_cast<std::size_t>(ncell));
      cond.y.resize(static_cast<std::size_t>(ncell));
      for (int l = 0; l < ncell; ++l) {
        const double xv = x_grid.values[static_cast<std::size_t>(l)];
        cond.x[static_cast<std::size_t>(l)] = xv;
        cond.y[static_cast<std::size_t>(l)] = smp.beta0 + smp.beta1 * xv + smp.w(l);
      }

      ThetaSample theta;
      theta.alpha0 = gp.alpha0;
      theta.beta0 = smp.beta0;
      theta.beta1 = smp.beta1;
      theta.sigma2_x = gp.sigma2_x;
      theta.phi_x = gp.phi_x;
      theta.sigma2_y = smp.sigma2_z;
      theta.phi_y = gp.phi_z;

      PredictionTargets targets;
      targets.locations = target_locs;
      targets.want_level = true;
      targets.want_gradient = true;
      // target centroids may coincide with conditioning cell centroids
      targets.offset_coincident = true;

      const ConditionalGaussian dist = conditional_gradient_distribution(theta, cond, targets);
      const std::vector<GradientDraw> draws =
          draw_joint_gradients(dist, target_locs, seed, static_cast<int>(use[k]));

      for (int t = 0; t < ntarget; ++t) {
        const GradientDraw& g = draws[static_cast<std::size_t>(t)];
        const Eigen::Vector2d d_lambda =
            chain_rule_transform(TransformKind::log_intensity, *g.y, g.grad_y);
        cell_samples[static_cast<std::size_t>(t)][k] =
            lds_ratio(d_lambda, g.grad_x, u);
      }
    }
  };

  const int nthreads =
      std::min<int>(resolve_threads(threads), static_cast<int>(use.size()) > 0 ? static_cast<int>(use.size()) : 1);
  if (nthreads <= 1) {
    worker(0, use.size());
  } else {
    std::vector<std::future<void>> futures;
    const std::size_t chunk = (use.size() + nthreads - 1) / nthreads;
    for (int t = 0; t < nthreads; ++t) {
      const std::size_t b = static_cast<std::size_t>(t) * chunk;
      const std::size_t e = std::min(use.size(), b + chunk);
      if (b >= e) break;
      futures.push_back(std::async(std::launch::async, worker, b, e));
    }
    for (auto& f : futures) f.get();
  }

  return summarize_surface(target_grid.make_surface(), cell_samples);
}

// LGCP realization: latent field drawn exactly on the grid, Poisson counts
// per cell, events uniform within their cell.
inline PointPattern simulate_lgcp(const GridSpec& grid, const SurfaceGrid& x_grid, double beta0,
                                  double beta1, double sigma2_z, double phi_z,
                                  std::uint64_t seed, Eigen::VectorXd* w_out = nullptr) {
  grid.validate();
  const int ncell = grid.cells();
  std::vector<Location> centroids(static_cast<std::size_t>(ncell));
  for (int l = 0; l < ncell; ++l) centroids[static_cast<std::size_t>(l)] = grid.centroid(l);

  Rng rng = make_rng(seed);
  Eigen::MatrixXd cov = detail::correlation_matrix(centroids, phi_z) * sigma2_z;
  auto llt = ridge_cholesky(cov);
  const Eigen::VectorXd w = llt.matrixL() * standard_normal_vector(rng, ncell);
  if (w_out) *w_out = w;

  PointPattern out;
  out.window = grid.window;
  const double area = grid.cell_area();
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  for (int l = 0; l < ncell; ++l) {
    const double lambda =
        std::exp(beta0 + beta1 * x_grid.values[static_cast<std::size_t>(l)] + w(l));
    std::poisson_distribution<int> pd(lambda * area);
    const int count = pd(rng);
    const Location c = grid.centroid(l);
    for (int k = 0; k < count; ++k) {
      out.events.push_back({c.s1 + (ud(rng) - 0.5) * grid.dx(),
                            c.s2 + (ud(rng) - 0.5) * grid.dy()});
    }
  }
  return out;
}

}  // namespace gradfield

#endif
