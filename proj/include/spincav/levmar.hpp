#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <vector>

#include "spincav/errors.hpp"

namespace spincav {

using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct LMOptions {
  int max_iterations = 500;
  double gradient_tol = 1e-10;   // stop when |J^T r|_inf below this
  double step_rel = 1e-6;        // central-difference step, relative
  double lambda0 = 1e-3;         // initial damping
  double ftol = 1e-14;           // relative objective improvement floor
};

struct LMResult {
  Eigen::VectorXd params;
  double rms = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> objective_history;  // accepted objective values
};

/// Damped least squares with numerical central-difference Jacobians.
/// Accepted steps never increase the objective; deterministic for identical
/// inputs. Throws NumericsError on a singular normal system.
inline LMResult levenberg_marquardt(const ResidualFn& residuals,
                                    Eigen::VectorXd params,
                                    const LMOptions& opt = {}) {
  const int n_par = static_cast<int>(params.size());
  Eigen::VectorXd r = residuals(params);
  double obj = r.squaredNorm();

  LMResult result;
  result.objective_history.push_back(obj);

  auto jacobian = [&](const Eigen::VectorXd& p) {
    Eigen::MatrixXd j(r.size(), n_par);
    for (int k = 0; k < n_par; ++k) {
      const double h = opt.step_rel * std::max(std::abs(p(k)), 1e-8);
      Eigen::VectorXd lo = p, hi = p;
      lo(k) -= h;
      hi(k) += h;
      j.col(k) = (residuals(hi) - residuals(lo)) / (2.0 * h);
    }
    return j;
  };

  double lambda = opt.lambda0;
  int it = 0;
  int stalled = 0;
  for (; it < opt.max_iterations; ++it) {
    const Eigen::MatrixXd j = jacobian(params);
    if (!j.allFinite()) throw NumericsError("levenberg_marquardt: singular Jacobian");
    const Eigen::MatrixXd jtj = j.transpose() * j;
    const Eigen::VectorXd g = j.transpose() * r;
    if (g.cwiseAbs().maxCoeff() < opt.gradient_tol) {
      result.converged = true;
      break;
    }
    bool accepted = false;
    for (int tries = 0; tries < 40; ++tries) {
      Eigen::MatrixXd a = jtj;
      a.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-30);
      const Eigen::LDLT<Eigen::MatrixXd> solver(a);
      if (solver.info() != Eigen::Success)
        throw NumericsError("levenberg_marquardt: singular Jacobian");
      const Eigen::VectorXd step = solver.solve(-g);
      if (!step.allFinite())
        throw NumericsError("levenberg_marquardt: singular Jacobian");
      const Eigen::VectorXd trial = params + step;
      const Eigen::VectorXd rt = residuals(trial);
      const double obj_t = rt.squaredNorm();
      if (std::isfinite(obj_t) && obj_t <= obj) {
        const double gain = obj - obj_t;
        params = trial;
        r = rt;
        obj = obj_t;
        result.objective_history.push_back(obj);
        lambda = std::max(lambda * 0.3, 1e-12);
        accepted = true;
        stalled = (gain <= opt.ftol * std::max(obj, 1e-300)) ? stalled + 1 : 0;
        break;
      }
      lambda *= 4.0;
    }
    if (!accepted || stalled >= 3) {
      result.converged = accepted;  // stalled at a (local) minimum
      break;
    }
  }

  result.params = params;
  result.iterations = it;
  result.rms = std::sqrt(obj / static_cast<double>(r.size()));
  if (!result.converged && it >= opt.max_iterations)
    result.converged = false;
  return result;
}

}  // namespace spincav
