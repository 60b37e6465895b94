#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>

#include "gradfield/processes.hpp"
#include "gradfield/rng.hpp"
#include "gradfield/surface.hpp"

using namespace gradfield;

namespace {

ThetaSample make_theta(double beta1, double s2x = 1.0, double phix = 1.05, double s2y = 1.0,
                       double phiy = 1.05) {
  ThetaSample t;
  t.beta1 = beta1;
  t.sigma2_x = s2x;
  t.phi_x = phix;
  t.sigma2_y = s2y;
  t.phi_y = phiy;
  return t;
}

double cauchy_cdf(double x, double loc, double scale) {
  return 0.5 + std::atan((x - loc) / scale) / M_PI;
}

}  // namespace

TEST_CASE("directional derivative is the projection onto u") {
  const Eigen::Vector2d g(3.0, -4.0);
  CHECK(directional_derivative(g, UnitVector(1.0, 0.0)) == Catch::Approx(3.0));
  CHECK(directional_derivative(g, UnitVector(0.0, 1.0)) == Catch::Approx(-4.0));
  CHECK(directional_derivative(g, UnitVector(1.0, 1.0)) == Catch::Approx(-1.0 / std::sqrt(2.0)));
  CHECK_THROWS(UnitVector(0.0, 0.0));
}

TEST_CASE("lds_ratio edge cases and direction invariance") {
  const Eigen::Vector2d gy(2.0, 1.0), gx(0.5, -0.25);
  const UnitVector u(0.3, 0.9);
  const UnitVector mu(-0.3, -0.9);
  // numerator and denominator both flip sign, so the ratio is unchanged
  CHECK(lds_ratio(gy, gx, u) == lds_ratio(gy, gx, mu));

  const Eigen::Vector2d zero(0.0, 0.0);
  CHECK(std::isnan(lds_ratio(zero, zero, u)));
  CHECK(lds_ratio(gy, zero, u) == std::numeric_limits<double>::infinity());
  CHECK(lds_ratio(-gy, zero, u) == -std::numeric_limits<double>::infinity());
}

TEST_CASE("cauchy_scale closed forms") {
  CHECK(cauchy_scale(make_theta(0.5)) == Catch::Approx(1.0));
  CHECK(cauchy_scale(make_theta(0.0, 4.0, 0.5, 1.0, 1.0)) == Catch::Approx(1.0));
  CHECK(cauchy_scale(make_theta(0.0, 4.0, 1.0, 1.0, 1.0)) == Catch::Approx(0.5));
}

TEST_CASE("angle_of uses the standard atan2 branch") {
  CHECK(angle_of({1.0, 0.0}) == Catch::Approx(0.0));
  CHECK(angle_of({0.0, 1.0}) == Catch::Approx(M_PI / 2.0));
  CHECK(angle_of({-1.0, 0.0}) == Catch::Approx(M_PI));
  CHECK(angle_of({0.0, -1.0}) == Catch::Approx(-M_PI / 2.0));
  CHECK(angle_of({1.0, 1.0}) == Catch::Approx(M_PI / 4.0));
  CHECK(std::isnan(angle_of({0.0, 0.0})));
}

TEST_CASE("disc values, range, and invariances") {
  CHECK(disc({0.7, 0.7}) == Catch::Approx(0.0).margin(1e-15));
  CHECK(disc({0.7, 0.7 + M_PI}) == Catch::Approx(2.0));
  CHECK(disc({0.0, M_PI / 2.0}) == Catch::Approx(1.0));
  // symmetric in the two angles and invariant to 2pi shifts
  CHECK(disc({0.3, 1.9}) == Catch::Approx(disc({1.9, 0.3})));
  CHECK(disc({0.3, 1.9}) == Catch::Approx(disc({0.3 + 2.0 * M_PI, 1.9})));
  Rng rng = make_rng(5);
  std::uniform_real_distribution<double> ud(-10.0, 10.0);
  for (int i = 0; i < 200; ++i) {
    const double d = disc({ud(rng), ud(rng)});
    CHECK(d >= 0.0);
    CHECK(d <= 2.0);
  }
}

TEST_CASE("bivariate normal cdf sanity") {
  for (double rho : {-0.9, -0.3, 0.0, 0.4, 0.8}) {
    const double inf = std::numeric_limits<double>::infinity();
    CHECK(bivariate_normal_cdf(inf, inf, rho) == Catch::Approx(1.0).margin(1e-10));
    CHECK(bivariate_normal_cdf(-inf, 1.0, rho) == 0.0);
    CHECK(bivariate_normal_cdf(0.0, 0.0, rho) ==
          Catch::Approx(bvn_orthant(rho)).margin(1e-9));
    CHECK(bivariate_normal_cdf(0.7, inf, rho) ==
          Catch::Approx(std_normal_cdf(0.7)).margin(1e-10));
  }
  // independence factorizes
  CHECK(bivariate_normal_cdf(0.5, -1.2, 0.0) ==
        Catch::Approx(std_normal_cdf(0.5) * std_normal_cdf(-1.2)).margin(1e-9));
}

TEST_CASE("angle density reduces to the uniform torus density at beta = 0") {
  const ThetaSample t = make_theta(0.0);
  const double expect = 1.0 / (4.0 * M_PI * M_PI);
  for (double tx : {-2.0, 0.0, 1.1}) {
    for (double ty : {-3.0, 0.5, 2.2}) {
      CHECK(angle_density({tx, ty}, t) == Catch::Approx(expect).margin(1e-12));
    }
  }
}

TEST_CASE("angle density integrates to one over the torus", "[slow]") {
  for (double beta : {-1.0, -0.5, -0.05, 0.05, 0.5, 1.0}) {
    const ThetaSample t = make_theta(beta);
    const int n = 400;
    const double h = 2.0 * M_PI / n;
    double total = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        total += angle_density({-M_PI + (i + 0.5) * h, -M_PI + (j + 0.5) * h}, t) * h * h;
    INFO("beta = " << beta);
    CHECK(total == Catch::Approx(1.0).margin(1e-3));
  }
}

TEST_CASE("angle density peaks at aligned angles for positive slope") {
  const ThetaSample pos = make_theta(0.8);
  const ThetaSample neg = make_theta(-0.8);
  const double aligned = angle_density({0.4, 0.4}, pos);
  const double perp = angle_density({0.4, 0.4 + M_PI / 2.0}, pos);
  const double opposed = angle_density({0.4, 0.4 + M_PI}, pos);
  CHECK(aligned > perp);
  CHECK(perp > opposed);
  CHECK(angle_density({0.4, 0.4 + M_PI}, neg) > angle_density({0.4, 0.4}, neg));
  // density depends on the angles only through their difference
  CHECK(angle_density({0.4, 1.1}, pos) == Catch::Approx(angle_density({-2.0, -1.3}, pos)));
}

TEST_CASE("sampled gradient laws: Cauchy ratio, uniform and Rayleigh angles", "[slow]") {
  const ThetaSample t = make_theta(0.5, 2.0, 0.8, 1.0, 1.3);
  const Eigen::Matrix4d cov = local_cov_block(t).gradient;
  const Eigen::LLT<Eigen::Matrix4d> llt(cov);
  const UnitVector u(0.6, 0.8);
  Rng rng = make_rng(11);
  std::normal_distribution<double> nd;

  const int n = 100000;
  std::vector<double> ratios(n);
  std::vector<double> angles(n), mags(n);
  for (int i = 0; i < n; ++i) {
    Eigen::Vector4d z;
    for (int k = 0; k < 4; ++k) z(k) = nd(rng);
    const Eigen::Vector4d g = llt.matrixL() * z;
    ratios[i] = lds_ratio(g.head<2>(), g.tail<2>(), u);
    // the X gradient is isotropic, so its angle is uniform and its norm Rayleigh
    angles[i] = angle_of(g.tail<2>());
    mags[i] = g.tail<2>().norm() / (std::sqrt(t.sigma2_x) * t.phi_x);
  }

  std::sort(ratios.begin(), ratios.end());
  const double med = 0.5 * (ratios[n / 2 - 1] + ratios[n / 2]);
  const double q1 = ratios[n / 4], q3 = ratios[3 * n / 4];
  CHECK(med == Catch::Approx(t.beta1).margin(0.02));
  CHECK(0.5 * (q3 - q1) == Catch::Approx(cauchy_scale(t)).epsilon(0.02));

  std::sort(angles.begin(), angles.end());
  double ks = 0.0;
  for (int i = 0; i < n; ++i) {
    const double f = (angles[i] + M_PI) / (2.0 * M_PI);
    ks = std::max(ks, std::abs(f - (i + 1.0) / n));
  }
  CHECK(ks < 0.01);

  std::sort(mags.begin(), mags.end());
  double qq = 0.0;
  for (double p : {0.1, 0.25, 0.5, 0.75, 0.9, 0.99}) {
    const double theo = std::sqrt(-2.0 * std::log(1.0 - p));
    qq = std::max(qq, std::abs(mags[static_cast<int>(p * n)] - theo));
  }
  CHECK(qq < 0.02);
}

TEST_CASE("joint ratio cdf limits and marginals") {
  const double inf = std::numeric_limits<double>::infinity();
  Eigen::Matrix2d cov_y, cov_x;
  cov_y << 1.3, 0.4, 0.4, 0.9;
  cov_x << 0.8, -0.2, -0.2, 1.1;

  CHECK(joint_ratio_cdf(inf, inf, cov_y, cov_x).value == 1.0);
  const auto half = joint_ratio_cdf(0.0, inf, cov_y, cov_x);
  CHECK(half.value == Catch::Approx(0.5).margin(1e-6));
  CHECK(half.error_estimate < 1e-6);

  // with the second coordinate marginalized, the ratio is Cauchy(0, sd_y/sd_x)
  const double scale = std::sqrt(cov_y(0, 0) / cov_x(0, 0));
  for (double p : {0.05, 0.1, 0.2, 0.3, 0.4, 0.6, 0.75, 0.9, 0.95}) {
    const double r = std::tan(M_PI * (p - 0.5)) * scale;
    const auto res = joint_ratio_cdf(r, inf, cov_y, cov_x);
    INFO("p = " << p);
    CHECK(res.value == Catch::Approx(cauchy_cdf(r, 0.0, scale)).margin(1e-3));
    CHECK(res.error_estimate < 1e-3);
  }
}

TEST_CASE("joint ratio cdf matches Monte Carlo at interior points", "[slow]") {
  Eigen::Matrix2d cov_y, cov_x;
  cov_y << 1.3, 0.4, 0.4, 0.9;
  cov_x << 0.8, -0.2, -0.2, 1.1;
  const Eigen::LLT<Eigen::Matrix2d> ly(cov_y), lx(cov_x);
  Rng rng = make_rng(13);
  std::normal_distribution<double> nd;
  const int n = 200000;
  const std::vector<std::pair<double, double>> pts = {{0.0, 0.0}, {0.7, -0.5}, {-1.5, 2.0}};
  std::vector<int> hits(pts.size(), 0);
  for (int i = 0; i < n; ++i) {
    Eigen::Vector2d zy(nd(rng), nd(rng)), zx(nd(rng), nd(rng));
    const Eigen::Vector2d num = ly.matrixL() * zy;
    const Eigen::Vector2d den = lx.matrixL() * zx;
    const double r1 = num(0) / den(0), r2 = num(1) / den(1);
    for (std::size_t k = 0; k < pts.size(); ++k)
      if (r1 <= pts[k].first && r2 <= pts[k].second) ++hits[k];
  }
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const double p_hat = static_cast<double>(hits[k]) / n;
    const double se = std::sqrt(p_hat * (1.0 - p_hat) / n);
    const auto res = joint_ratio_cdf(pts[k].first, pts[k].second, cov_y, cov_x);
    INFO("point " << k);
    CHECK(res.value == Catch::Approx(p_hat).margin(3.0 * se + 1e-4));
  }
}

TEST_CASE("joint ratio cdf is monotone in each argument", "[slow]") {
  Eigen::Matrix2d cov_y, cov_x;
  cov_y << 1.0, 0.5, 0.5, 1.0;
  cov_x << 1.0, -0.3, -0.3, 0.7;
  std::vector<double> grid;
  for (int i = 0; i < 10; ++i) grid.push_back(-4.0 + 8.0 * i / 9.0);
  Eigen::MatrixXd f(10, 10);
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j) f(i, j) = joint_ratio_cdf(grid[i], grid[j], cov_y, cov_x).value;
  for (int i = 1; i < 10; ++i)
    for (int j = 0; j < 10; ++j) {
      CHECK(f(i, j) >= f(i - 1, j) - 1e-9);
      CHECK(f(j, i) >= f(j, i - 1) - 1e-9);
    }
}

TEST_CASE("joint ratio cdf rejects degenerate covariance") {
  Eigen::Matrix2d good, bad;
  good << 1.0, 0.2, 0.2, 1.0;
  bad << 1.0, 1.0, 1.0, 1.0;  // singular
  CHECK_THROWS_AS(joint_ratio_cdf(0.0, 0.0, bad, good), std::invalid_argument);
  CHECK_THROWS_AS(joint_ratio_cdf(0.0, 0.0, good, bad), std::invalid_argument);
}

TEST_CASE("chain rule transforms") {
  const Eigen::Vector2d g(2.0, -1.0);
  const Eigen::Vector2d li = chain_rule_transform(TransformKind::log_intensity, 0.5, g);
  CHECK(li(0) == Catch::Approx(std::exp(0.5) * 2.0));
  const Eigen::Vector2d pr = chain_rule_transform(TransformKind::probit, 0.0, g);
  CHECK(pr(0) == Catch::Approx(0.3989422804014327 * 2.0));
  CHECK(pr(1) == Catch::Approx(-0.3989422804014327));
  const double ninf = -std::numeric_limits<double>::infinity();
  CHECK(chain_rule_transform(TransformKind::log_intensity, ninf, g).norm() == 0.0);
  CHECK(chain_rule_transform(TransformKind::probit, ninf, g).norm() == 0.0);
  CHECK_THROWS(chain_rule_transform(TransformKind::probit, std::nan(""), g));
}

TEST_CASE("surface summaries: medians, infinities, exclusions") {
  SurfaceGrid layout;
  layout.nx = 2;
  layout.ny = 1;
  layout.values.assign(2, 0.0);
  layout.missing.assign(2, false);

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> samples = {
      {3.0, 1.0, 2.0},                            // plain median
      {-inf, 1.0, 2.0, 3.0, inf, std::nan("")}};  // infs are order statistics, NaN dropped
  std::size_t excluded = 0;
  const SurfaceGrid out = summarize_surface(layout, samples, SummaryStatistic::median, 0.5,
                                            &excluded);
  CHECK(out.values[0] == Catch::Approx(2.0));
  CHECK(out.values[1] == Catch::Approx(2.0));
  CHECK(excluded == 1);

  // a minority of infinities cannot move the median; a majority makes it infinite
  samples = {{inf, 1.0, 2.0}, {inf, inf, 5.0}};
  const SurfaceGrid out2 = summarize_surface(layout, samples);
  CHECK(out2.values[0] == Catch::Approx(2.0));
  CHECK(out2.values[1] == inf);

  samples = {{std::nan(""), std::nan("")}, {1.0}};
  const SurfaceGrid out3 = summarize_surface(layout, samples);
  CHECK(out3.missing[0]);
  CHECK_FALSE(out3.missing[1]);

  // quantile mode hits the requested order statistic
  std::vector<std::vector<double>> q_samples = {{1.0, 2.0, 3.0, 4.0, 5.0}, {10.0}};
  const SurfaceGrid out4 =
      summarize_surface(layout, q_samples, SummaryStatistic::quantile, 0.25);
  CHECK(out4.values[0] == Catch::Approx(2.0));
}
