// Release acceptance suite: one PASS/FAIL line per criterion, nonzero exit on
// any failure. Tolerances are fixed here on purpose -- do not tune them to
// make a run pass.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "gradfield/gradient.hpp"
#include "gradfield/io.hpp"
#include "gradfield/lgcp.hpp"
#include "gradfield/model.hpp"
#include "gradfield/processes.hpp"

using namespace gradfield;

namespace {

int g_failures = 0;
std::string g_cli_path;

#define REQUIRE(cond, detail)                                              \
  do {                                                                     \
    if (!(cond)) {                                                         \
      std::ostringstream os_;                                              \
      os_ << detail;                                                       \
      throw std::runtime_error(std::string(#cond) + " | " + os_.str());    \
    }                                                                      \
  } while (0)

void criterion(int number, const std::string& title, const std::function<std::string()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const std::string detail = body();
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << "PASS criterion " << number << ": " << title << " [" << detail << "] ("
              << secs << "s)\n";
  } catch (const std::exception& e) {
    std::cout << "FAIL criterion " << number << ": " << title << " -- " << e.what() << "\n";
    ++g_failures;
  }
  std::cout.flush();
}

ThetaSample benchmark_truths() {
  ThetaSample t;
  t.beta1 = 0.5;
  t.sigma2_x = t.sigma2_y = 1.0;
  t.phi_x = t.phi_y = 1.05;
  return t;
}

std::vector<Location> uniform_locations(int n, const Window& w, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> ux(w.x_min, w.x_max), uy(w.y_min, w.y_max);
  std::vector<Location> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out.push_back({ux(rng), uy(rng)});
  return out;
}

std::pair<double, double> central_interval(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return {v[static_cast<std::size_t>(0.025 * v.size())],
          v[static_cast<std::size_t>(0.975 * v.size())]};
}

// --- criterion bodies ---------------------------------------------------

std::string c1_kernel_derivatives() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng = make_rng(101);
  std::uniform_real_distribution<double> ud(-3.0, 3.0), up(0.3, 3.0);
  const double h = 1e-5;
  double worst_g = 0.0, worst_h = 0.0;
  for (int i = 0; i < 100; ++i) {
    MaternParams p{up(rng), up(rng)};
    SeparationVector d{ud(rng), ud(rng)};
    if (d.length() < 0.05) d.d1 += 0.1;
    auto k = [&](double a, double b) { return cov_matern32({a, b}, p); };
    auto g = [&](double a, double b) { return grad_matern32({a, b}, p); };
    const Eigen::Vector2d fd_g((k(d.d1 + h, d.d2) - k(d.d1 - h, d.d2)) / (2 * h),
                               (k(d.d1, d.d2 + h) - k(d.d1, d.d2 - h)) / (2 * h));
    worst_g = std::max(worst_g, (grad_matern32(d, p) - fd_g).norm() / fd_g.norm());
    Eigen::Matrix2d fd_h;
    fd_h.col(0) = (g(d.d1 + h, d.d2) - g(d.d1 - h, d.d2)) / (2 * h);
    fd_h.col(1) = (g(d.d1, d.d2 + h) - g(d.d1, d.d2 - h)) / (2 * h);
    worst_h = std::max(worst_h, (hess_matern32(d, p) - fd_h).norm() / fd_h.norm());
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  REQUIRE(worst_g < 1e-5, "gradient rel err " << worst_g);
  REQUIRE(worst_h < 1e-4, "hessian rel err " << worst_h);
  REQUIRE(secs < 1.0, "runtime " << secs << "s");
  std::ostringstream os;
  os << "grad err " << worst_g << ", hess err " << worst_h;
  return os.str();
}

std::string c2_local_cov_values() {
  const JointCovBlock blk = local_cov_block(benchmark_truths());
  const double tol = 1e-12;
  REQUIRE(std::abs(blk.gradient(0, 0) - 1.378125) < tol, blk.gradient(0, 0));
  REQUIRE(std::abs(blk.gradient(1, 1) - 1.378125) < tol, blk.gradient(1, 1));
  REQUIRE(std::abs(blk.gradient(0, 2) - 0.551250) < tol, blk.gradient(0, 2));
  REQUIRE(std::abs(blk.gradient(2, 2) - 1.1025) < tol, blk.gradient(2, 2));
  REQUIRE(std::abs(blk.level(0, 0) - 1.25) < tol, blk.level(0, 0));
  REQUIRE(std::abs(blk.level(0, 1) - 0.5) < tol, blk.level(0, 1));
  REQUIRE(std::abs(blk.level(1, 1) - 1.0) < tol, blk.level(1, 1));
  REQUIRE(std::abs(blk.gradient(0, 1)) == 0.0, "within-surface gradient cross term");
  const Eigen::MatrixXd full = blk.full();
  REQUIRE(full.topRightCorner(2, 4).cwiseAbs().maxCoeff() == 0.0, "level-gradient cross block");
  return "all zero-lag entries match to 1e-12";
}

std::string c3_cauchy_law() {
  const ThetaSample t = benchmark_truths();
  const Eigen::Matrix4d cov = local_cov_block(t).gradient;
  const Eigen::LLT<Eigen::Matrix4d> llt(cov);
  Rng rng = make_rng(103);
  std::normal_distribution<double> nd;
  const int n = 100000;
  std::vector<double> ratios(n);
  const UnitVector u(1.0, 0.0);
  for (int i = 0; i < n; ++i) {
    Eigen::Vector4d z;
    for (int k = 0; k < 4; ++k) z(k) = nd(rng);
    const Eigen::Vector4d g = llt.matrixL() * z;
    ratios[static_cast<std::size_t>(i)] = lds_ratio(g.head<2>(), g.tail<2>(), u);
  }
  std::sort(ratios.begin(), ratios.end());
  const double med = 0.5 * (ratios[n / 2 - 1] + ratios[n / 2]);
  const double hiqr = 0.5 * (ratios[3 * n / 4] - ratios[n / 4]);
  REQUIRE(std::abs(med - 0.5) < 0.02, "median " << med);
  REQUIRE(std::abs(hiqr - 1.0) < 0.02, "half-IQR " << hiqr);
  std::ostringstream os;
  os << "median " << med << ", half-IQR " << hiqr;
  return os.str();
}

std::string c4_angle_theory() {
  ThetaSample t = benchmark_truths();
  t.beta1 = 0.0;
  const double limit_err =
      std::abs(angle_density({0.2, -0.9}, t) - 1.0 / (4.0 * M_PI * M_PI));
  REQUIRE(limit_err < 1e-12, "uniform limit err " << limit_err);

  double worst_norm = 0.0;
  for (double beta : {-1.0, -0.5, -0.05, 0.05, 0.5, 1.0}) {
    ThetaSample tb = benchmark_truths();
    tb.beta1 = beta;
    const int n = 400;
    const double h = 2.0 * M_PI / n;
    double total = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        total += angle_density({-M_PI + (i + 0.5) * h, -M_PI + (j + 0.5) * h}, tb) * h * h;
    worst_norm = std::max(worst_norm, std::abs(total - 1.0));
  }
  REQUIRE(worst_norm < 1e-3, "normalization err " << worst_norm);

  // isotropic gradient: uniform angles, scaled Chi(2) magnitudes
  const ThetaSample tx = benchmark_truths();
  const double sd = std::sqrt(tx.sigma2_x) * tx.phi_x;
  Rng rng = make_rng(104);
  std::normal_distribution<double> nd(0.0, sd);
  const int n = 100000;
  std::vector<double> angles(n), mags(n);
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector2d g(nd(rng), nd(rng));
    angles[static_cast<std::size_t>(i)] = angle_of(g);
    mags[static_cast<std::size_t>(i)] = g.norm() / sd;
  }
  std::sort(angles.begin(), angles.end());
  double ks = 0.0;
  for (int i = 0; i < n; ++i)
    ks = std::max(ks, std::abs((angles[static_cast<std::size_t>(i)] + M_PI) / (2.0 * M_PI) -
                               (i + 1.0) / n));
  REQUIRE(ks < 0.01, "angle KS " << ks);
  std::sort(mags.begin(), mags.end());
  double qq = 0.0;
  for (double p : {0.1, 0.25, 0.5, 0.75, 0.9, 0.99}) {
    const double theo = std::sqrt(-2.0 * std::log(1.0 - p));
    qq = std::max(qq, std::abs(mags[static_cast<std::size_t>(p * n)] - theo));
  }
  REQUIRE(qq < 0.02, "magnitude Q-Q " << qq);
  std::ostringstream os;
  os << "norm err " << worst_norm << ", KS " << ks << ", Q-Q " << qq;
  return os.str();
}

std::string c5_kriging_exchange() {
  const ThetaSample t = benchmark_truths();
  const Window win{0.0, 10.0, 0.0, 10.0};
  const Dataset data = simulate_bivariate_gp(uniform_locations(25, win, 105), t, 106);
  auto krige_y = [&](const Location& s0) {
    PredictionTargets tg;
    tg.locations = {s0};
    tg.want_gradient = false;
    return conditional_gradient_distribution(t, data, tg).mean(0);
  };
  Rng rng = make_rng(107);
  std::uniform_real_distribution<double> ud(1.0, 9.0);
  const double h = 1e-4;
  double worst = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    const Location s0{ud(rng), ud(rng)};
    PredictionTargets tg;
    tg.locations = {s0};
    tg.want_level = false;
    const Eigen::VectorXd mean = conditional_gradient_distribution(t, data, tg).mean;
    const double fd1 = (krige_y({s0.s1 + h, s0.s2}) - krige_y({s0.s1 - h, s0.s2})) / (2 * h);
    const double fd2 = (krige_y({s0.s1, s0.s2 + h}) - krige_y({s0.s1, s0.s2 - h})) / (2 * h);
    worst = std::max(worst,
                     std::hypot(mean(0) - fd1, mean(1) - fd2) / std::max(1e-8, std::hypot(fd1, fd2)));
  }
  REQUIRE(worst < 1e-4, "worst rel err " << worst);
  std::ostringstream os;
  os << "worst rel err " << worst;
  return os.str();
}

std::string c6_posterior_recovery() {
  const ThetaSample truth = benchmark_truths();
  const Window win{0.0, 10.0, 0.0, 10.0};
  int covered_all = 0;
  double width_first = 0.0;
  bool beta1_ok_first = false;
  for (int rep = 0; rep < 5; ++rep) {
    const std::uint64_t seed = 700 + static_cast<std::uint64_t>(rep);
    const std::vector<Location> full = uniform_locations(2000, win, seed);
    const Dataset big = simulate_bivariate_gp(full, truth, derive_seed(seed, 1));
    Dataset obs;
    obs.locations.assign(big.locations.begin(), big.locations.begin() + 200);
    obs.x.assign(big.x.begin(), big.x.begin() + 200);
    obs.y.assign(big.y.begin(), big.y.begin() + 200);

    PriorSpec priors;
    McmcConfig cfg;
    cfg.seed = derive_seed(seed, 2);
    const PosteriorChain chain = fit_mcmc(obs, priors, cfg);

    auto interval = [&](auto get) {
      std::vector<double> v;
      for (const auto& s : chain.samples) v.push_back(get(s));
      return central_interval(v);
    };
    const auto b1 = interval([](const ThetaSample& s) { return s.beta1; });
    const auto s2x = interval([](const ThetaSample& s) { return s.sigma2_x; });
    const auto phx = interval([](const ThetaSample& s) { return s.phi_x; });
    const auto s2y = interval([](const ThetaSample& s) { return s.sigma2_y; });
    const auto phy = interval([](const ThetaSample& s) { return s.phi_y; });

    if (rep == 0) {
      width_first = b1.second - b1.first;
      beta1_ok_first = b1.first <= 0.5 && 0.5 <= b1.second && width_first >= 0.252 / 2.0 &&
                       width_first <= 0.252 * 2.0;
    }
    const bool cov = s2x.first <= 1.0 && 1.0 <= s2x.second && phx.first <= 1.05 &&
                     1.05 <= phx.second && s2y.first <= 1.0 && 1.0 <= s2y.second &&
                     phy.first <= 1.05 && 1.05 <= phy.second;
    if (cov) ++covered_all;
  }
  REQUIRE(beta1_ok_first,
          "slope interval width " << width_first << " (reference 0.252, factor-2 band)");
  REQUIRE(covered_all >= 4, "variance/decay coverage in " << covered_all << "/5 replicates");
  std::ostringstream os;
  os << "slope interval width " << width_first << ", coverage " << covered_all << "/5";
  return os.str();
}

std::string c7_joint_ratio_cdf() {
  Eigen::Matrix2d cov_y, cov_x;
  cov_y << 1.3, 0.4, 0.4, 0.9;
  cov_x << 0.8, -0.2, -0.2, 1.1;
  const double inf = std::numeric_limits<double>::infinity();
  const double scale = std::sqrt(cov_y(0, 0) / cov_x(0, 0));
  double worst = 0.0;
  for (double p : {0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 0.8, 0.9, 0.95}) {
    const double r = std::tan(M_PI * (p - 0.5)) * scale;
    worst = std::max(worst, std::abs(joint_ratio_cdf(r, inf, cov_y, cov_x).value - p));
  }
  REQUIRE(worst < 1e-3, "marginal err " << worst);

  Eigen::MatrixXd f(10, 10);
  std::vector<double> grid;
  for (int i = 0; i < 10; ++i) grid.push_back(-4.0 + 8.0 * i / 9.0);
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j)
      f(i, j) = joint_ratio_cdf(grid[static_cast<std::size_t>(i)],
                                grid[static_cast<std::size_t>(j)], cov_y, cov_x).value;
  for (int i = 1; i < 10; ++i)
    for (int j = 0; j < 10; ++j) {
      REQUIRE(f(i, j) >= f(i - 1, j) - 1e-9, "row monotonicity at " << i << "," << j);
      REQUIRE(f(j, i) >= f(j, i - 1) - 1e-9, "column monotonicity at " << j << "," << i);
    }
  std::ostringstream os;
  os << "Cauchy marginal err " << worst << ", monotone on 10x10 grid";
  return os.str();
}

std::string c8_slice_sampler() {
  Eigen::MatrixXd sigma(3, 3);
  sigma << 1.0, 0.6, 0.2, 0.6, 1.2, 0.4, 0.2, 0.4, 0.8;
  const double tau2 = 0.5;
  Eigen::VectorXd y(3);
  y << 1.0, -0.5, 0.3;
  const Eigen::MatrixXd post_cov =
      (sigma.inverse() + Eigen::MatrixXd::Identity(3, 3) / tau2).inverse();
  const Eigen::VectorXd post_mean = post_cov * (y / tau2);
  const Eigen::MatrixXd chol_l = Eigen::LLT<Eigen::MatrixXd>(sigma).matrixL();
  auto loglik = [&](const Eigen::VectorXd& w) { return -0.5 * (y - w).squaredNorm() / tau2; };

  Rng rng = make_rng(108);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(3);
  for (int i = 0; i < 500; ++i) w = elliptical_slice_step(w, chol_l, loglik, rng);
  const int n = 10000;
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(3);
  for (int i = 0; i < n; ++i) {
    w = elliptical_slice_step(w, chol_l, loglik, rng);
    acc += w;
  }
  const Eigen::VectorXd mean = acc / n;
  double worst_z = 0.0;
  for (int i = 0; i < 3; ++i) {
    // autocorrelation fudge: effective sample size n/10
    const double se = std::sqrt(post_cov(i, i) / (n / 10.0));
    worst_z = std::max(worst_z, std::abs(mean(i) - post_mean(i)) / se);
  }
  REQUIRE(worst_z < 3.0, "worst mean z-score " << worst_z);

  // prior invariance under a constant likelihood
  auto flat = [](const Eigen::VectorXd&) { return 0.0; };
  Eigen::VectorXd v = Eigen::VectorXd::Zero(3);
  Eigen::MatrixXd cov_acc = Eigen::MatrixXd::Zero(3, 3);
  const int m = 20000;
  for (int i = 0; i < m; ++i) {
    v = elliptical_slice_step(v, chol_l, flat, rng);
    cov_acc += v * v.transpose();
  }
  const double cov_err = (cov_acc / m - sigma).norm() / sigma.norm();
  REQUIRE(cov_err < 0.1, "prior covariance rel err " << cov_err);
  std::ostringstream os;
  os << "worst z " << worst_z << ", prior cov err " << cov_err;
  return os.str();
}

std::string c9_lgcp_reproduction() {
  GridSpec grid;
  grid.window = {0.0, 10.0, 0.0, 10.0};
  grid.nx = grid.ny = 15;

  // synthetic covariate field, same scale for both runs
  std::vector<Location> cells;
  for (int l = 0; l < grid.cells(); ++l) cells.push_back(grid.centroid(l));
  const double sigma2_x = 9.0, phi_x = 0.5;
  Rng xr = make_rng(901);
  const Eigen::VectorXd xf =
      ridge_cholesky(detail::correlation_matrix(cells, phi_x) * sigma2_x).matrixL() *
      standard_normal_vector(xr, grid.cells());
  SurfaceGrid x = grid.make_surface();
  for (int l = 0; l < grid.cells(); ++l) x.values[static_cast<std::size_t>(l)] = xf(l);

  const double sigma2_z = 0.09, phi_z = 0.7;

  auto fit_interval = [&](double beta1_true, std::uint64_t seed, LgcpChain* chain_out) {
    const PointPattern p = simulate_lgcp(grid, x, 1.3, beta1_true, sigma2_z, phi_z, seed);
    REQUIRE(p.events.size() > 200 && p.events.size() < 3000,
            "event count " << p.events.size());
    LgcpPriors priors;
    McmcConfig cfg;
    cfg.iterations = 2300;
    cfg.burn_in = 500;
    cfg.thin = 3;
    cfg.seed = derive_seed(seed, 1);
    *chain_out = fit_lgcp(p, x, grid, phi_z, priors, cfg);
    std::vector<double> b1;
    for (const auto& s : chain_out->samples) b1.push_back(s.beta1);
    return central_interval(b1);
  };

  LgcpChain chain;
  const auto neg = fit_interval(-0.26, 902, &chain);
  REQUIRE(neg.second < 0.0, "interval [" << neg.first << ", " << neg.second
                                         << "] should exclude 0");

  GridSpec targets;
  targets.window = {0.5, 9.5, 0.5, 9.5};
  targets.nx = targets.ny = 10;
  LgcpGpParams gp;
  gp.sigma2_x = sigma2_x;
  gp.phi_x = phi_x;
  gp.phi_z = phi_z;
  const UnitVector u(0.8508, -0.5255);
  const SurfaceGrid surf =
      intensity_gradient_surface(chain, x, grid, targets, u, gp, 903, 0, 150);
  int negative = 0, total = 0;
  for (std::size_t i = 0; i < surf.values.size(); ++i) {
    if (surf.missing[i]) continue;
    ++total;
    if (surf.values[i] < 0.0) ++negative;
  }
  const double frac = static_cast<double>(negative) / std::max(1, total);
  REQUIRE(frac > 0.8, "negative-cell fraction " << frac);

  LgcpChain null_chain;
  const auto null = fit_interval(0.0, 904, &null_chain);
  REQUIRE(null.first < 0.0 && null.second > 0.0,
          "null interval [" << null.first << ", " << null.second << "] should contain 0");
  std::ostringstream os;
  os << "interval [" << neg.first << ", " << neg.second << "], negative cells "
     << 100.0 * frac << "%, null interval [" << null.first << ", " << null.second << "]";
  return os.str();
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(f.good(), "cannot open " << p);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

std::string c10_cli_determinism() {
  REQUIRE(!g_cli_path.empty(), "CLI binary path must be passed as argv[1]");
  const std::filesystem::path work =
      std::filesystem::temp_directory_path() / "gradfield_acceptance_cli";
  std::filesystem::remove_all(work);
  std::filesystem::create_directories(work);
  {
    std::ofstream f(work / "sim.cfg");
    f << "simulate.n_full = 300\nsimulate.n_obs = 50\n";
  }
  auto run = [&](const std::string& args) {
    const std::string cmd = "cd " + work.string() + " && " + g_cli_path + " " + args +
                            " > /dev/null 2>&1";
    REQUIRE(std::system(cmd.c_str()) == 0, "command failed: " << args);
  };
  run("simulate --config sim.cfg --seed 5 --out a");
  run("simulate --config sim.cfg --seed 5 --out b");
  REQUIRE(slurp(work / "a/full.csv") == slurp(work / "b/full.csv"), "simulate reruns differ");

  {
    std::ofstream f(work / "fit.cfg");
    f << "data = a/obs.csv\nmcmc.iterations = 300\nmcmc.burn_in = 60\nmcmc.thin = 2\n";
  }
  run("fit-gp --config fit.cfg --seed 6 --out fit");
  {
    std::ofstream f(work / "surf.cfg");
    f << "data = a/obs.csv\nchain = fit/chain.csv\ngrid.nx = 4\ngrid.ny = 4\nu.1 = 1\nu.2 = 0\n";
  }
  run("sensitivity --config surf.cfg --seed 7 --out s1 --threads 1");
  run("sensitivity --config surf.cfg --seed 7 --out s4 --threads 4");
  REQUIRE(slurp(work / "s1/sensitivity.csv") == slurp(work / "s4/sensitivity.csv"),
          "sensitivity differs across thread counts");
  REQUIRE(slurp(work / "s1/sensitivity.ppm") == slurp(work / "s4/sensitivity.ppm"),
          "heatmap differs across thread counts");
  std::filesystem::remove_all(work);
  return "byte-identical across reruns and thread counts";
}

}  // namespace

int main(int argc, char** argv) {
  if (argc > 1) g_cli_path = argv[1];
  std::cout << "acceptance suite\n";

  criterion(1, "kernel derivatives match finite differences", c1_kernel_derivatives);
  criterion(2, "zero-lag joint covariance closed forms", c2_local_cov_values);
  criterion(3, "directional ratio follows the shifted Cauchy law", c3_cauchy_law);
  criterion(4, "angular density normalization and sampled angle laws", c4_angle_theory);
  criterion(5, "conditional mean gradient equals kriging-mean gradient", c5_kriging_exchange);
  criterion(6, "posterior recovery on the simulated benchmark", c6_posterior_recovery);
  criterion(7, "joint ratio CDF: Cauchy marginal and monotonicity", c7_joint_ratio_cdf);
  criterion(8, "elliptical slice sampler moment recovery", c8_slice_sampler);
  criterion(9, "point-process covariate effect and sensitivity surface", c9_lgcp_reproduction);
  criterion(10, "CLI determinism across runs and thread counts", c10_cli_determinism);

  if (g_failures > 0) {
    std::cout << g_failures << " criterion(s) FAILED\n";
    return 1;
  }
  std::cout << "all criteria passed\n";
  return 0;
}
