// Copyright 2026 The Atlas Audit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "atlas/lbfgs.h"

#include <cmath>
#include <deque>

#include "atlas/errors.h"

namespace atlas {

LbfgsResult MinimizeLbfgs(const Objective& f, Eigen::VectorXd x0,
                          const LbfgsOptions& options) {
  if (options.memory < 1 || options.max_iter < 0 || !(options.tol >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "invalid L-BFGS options");
  }
  LbfgsResult r;
  r.x = std::move(x0);
  Eigen::VectorXd g(r.x.size());
  r.value = f(r.x, &g);
  r.gradient_norm = g.norm();
  if (!std::isfinite(r.value)) {
    throw Error(ErrorCode::kComputation, "objective is not finite at start");
  }

  std::deque<Eigen::VectorXd> s_hist;
  std::deque<Eigen::VectorXd> y_hist;
  std::deque<double> rho_hist;
  Eigen::VectorXd x_new(r.x.size());
  Eigen::VectorXd g_new(r.x.size());

  while (r.gradient_norm >= options.tol && r.iterations < options.max_iter) {
    // Two-loop recursion for the search direction.
    Eigen::VectorXd q = g;
    std::vector<double> a(s_hist.size());
    for (std::size_t i = s_hist.size(); i-- > 0;) {
      a[i] = rho_hist[i] * s_hist[i].dot(q);
      q -= a[i] * y_hist[i];
    }
    double gamma = 1.0;
    if (!s_hist.empty()) {
      gamma = s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    } else {
      gamma = 1.0 / std::max(1.0, r.gradient_norm);
    }
    Eigen::VectorXd d = gamma * q;
    for (std::size_t i = 0; i < s_hist.size(); ++i) {
      const double b = rho_hist[i] * y_hist[i].dot(d);
      d += (a[i] - b) * s_hist[i];
    }
    d = -d;
    double slope = g.dot(d);
    if (!(slope < 0.0)) {
      // Not a descent direction; restart from steepest descent.
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      d = -g / std::max(1.0, r.gradient_norm);
      slope = g.dot(d);
    }

    double step = 1.0;
    double value_new = 0.0;
    bool accepted = false;
    for (int ls = 0; ls < options.max_line_search; ++ls) {
      x_new = r.x + step * d;
      value_new = f(x_new, &g_new);
      if (std::isfinite(value_new) &&
          value_new <= r.value + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;

    Eigen::VectorXd s = x_new - r.x;
    Eigen::VectorXd y = g_new - g;
    const double sy = s.dot(y);
    r.x = x_new;
    g = g_new;
    r.value = value_new;
    r.gradient_norm = g.norm();
    ++r.iterations;
    if (sy > 1e-12 * s.norm() * y.norm()) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > options.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
  }
  r.converged = r.gradient_norm < options.tol;
  return r;
}

}  // namespace atlas
