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

#ifndef ATLAS_LBFGS_H_
#define ATLAS_LBFGS_H_

#include <Eigen/Core>
#include <functional>

namespace atlas {

// Returns f(x) and writes the gradient into *grad.
using Objective =
    std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd* grad)>;

struct LbfgsOptions {
  int max_iter = 1000;
  double tol = 1e-6;  // on the Euclidean gradient norm
  int memory = 10;
  int max_line_search = 60;
};

struct LbfgsResult {
  Eigen::VectorXd x;
  double value = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Limited-memory BFGS with a backtracking Armijo line search. Intended for
// smooth convex objectives; deterministic for a given start point.
LbfgsResult MinimizeLbfgs(const Objective& f, Eigen::VectorXd x0,
                          const LbfgsOptions& options = {});

}  // namespace atlas

#endif  // ATLAS_LBFGS_H_
