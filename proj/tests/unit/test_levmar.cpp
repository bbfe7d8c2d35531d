#include <catch2/catch_amalgamated.hpp>

#include <cstring>

#include "spincav/levmar.hpp"

using namespace spincav;
using Catch::Approx;

TEST_CASE("levenberg_marquardt: quadratic and exponential recovery") {
  SECTION("linear least squares in one step cascade") {
    auto res = [](const Eigen::VectorXd& p) {
      Eigen::VectorXd r(3);
      r << p(0) - 1.0, p(1) + 2.0, p(0) + p(1);
      return r;
    };
    const LMResult out = levenberg_marquardt(res, Eigen::VectorXd::Zero(2));
    CHECK(out.converged);
    CHECK(out.params(0) == Approx(4.0 / 3.0).epsilon(1e-8));
    CHECK(out.params(1) == Approx(-5.0 / 3.0).epsilon(1e-8));
  }

  SECTION("nonlinear exponential fit") {
    const double a_true = 2.0, k_true = 1.7;
    std::vector<double> ts, ys;
    for (int i = 0; i < 40; ++i) {
      ts.push_back(0.05 * i);
      ys.push_back(a_true * std::exp(-k_true * ts.back()));
    }
    auto res = [&](const Eigen::VectorXd& p) {
      Eigen::VectorXd r(ts.size());
      for (std::size_t i = 0; i < ts.size(); ++i)
        r(i) = p(0) * std::exp(-p(1) * ts[i]) - ys[i];
      return r;
    };
    Eigen::VectorXd p0(2);
    p0 << 1.0, 1.0;
    const LMResult out = levenberg_marquardt(res, p0);
    CHECK(out.converged);
    CHECK(out.params(0) == Approx(a_true).epsilon(1e-6));
    CHECK(out.params(1) == Approx(k_true).epsilon(1e-6));
    CHECK(out.rms < 1e-8);
  }
}

TEST_CASE("levenberg_marquardt: accepted steps never increase the objective") {
  auto res = [](const Eigen::VectorXd& p) {
    Eigen::VectorXd r(2);
    r << 10.0 * (p(1) - p(0) * p(0)), 1.0 - p(0);  // Rosenbrock residuals
    return r;
  };
  Eigen::VectorXd p0(2);
  p0 << -1.2, 1.0;
  const LMResult out = levenberg_marquardt(res, p0);
  REQUIRE(out.objective_history.size() > 2);
  for (std::size_t k = 1; k < out.objective_history.size(); ++k)
    CHECK(out.objective_history[k] <= out.objective_history[k - 1]);
  CHECK(out.params(0) == Approx(1.0).epsilon(1e-6));
}

TEST_CASE("levenberg_marquardt: deterministic across runs") {
  auto res = [](const Eigen::VectorXd& p) {
    Eigen::VectorXd r(3);
    r << std::sin(p(0)) - 0.3, p(1) * p(1) - 2.0, p(0) * p(1) - 1.0;
    return r;
  };
  Eigen::VectorXd p0(2);
  p0 << 0.5, 1.0;
  const LMResult a = levenberg_marquardt(res, p0);
  const LMResult b = levenberg_marquardt(res, p0);
  REQUIRE(a.params.size() == b.params.size());
  CHECK(std::memcmp(a.params.data(), b.params.data(),
                    sizeof(double) * a.params.size()) == 0);
  CHECK(a.rms == b.rms);
  CHECK(a.iterations == b.iterations);
}
