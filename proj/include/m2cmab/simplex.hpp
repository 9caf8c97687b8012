// Copyright 2026 The M2CMAB Authors
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

#ifndef M2CMAB_SIMPLEX_HPP_
#define M2CMAB_SIMPLEX_HPP_

#include <vector>

#include <Eigen/Dense>

namespace m2cmab::lp {

enum class RowSense { kLessEqual, kEqual, kGreaterEqual };

enum class SolveStatus { kOptimal, kInfeasible, kUnbounded };

// maximize objective . x  subject to  row_coeffs x (sense) rhs,  x >= 0.
struct DenseProgram {
  Eigen::VectorXd objective;
  Eigen::MatrixXd row_coeffs;
  Eigen::VectorXd rhs;
  std::vector<RowSense> senses;
};

struct DenseSolution {
  Eigen::VectorXd x;
  double objective_value = 0.0;
  SolveStatus status = SolveStatus::kOptimal;
};

// Dense two-phase primal simplex on the full tableau. Pivoting is
// deterministic: largest reduced cost with lowest-index tie-breaks,
// falling back to Bland's rule after a degenerate stall, which also
// guarantees termination. Single-threaded and reentrant.
DenseSolution maximize(const DenseProgram& program);

}  // namespace m2cmab::lp

#endif  // M2CMAB_SIMPLEX_HPP_
