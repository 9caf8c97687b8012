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

#include "m2cmab/simplex.hpp"

#include <limits>

#include "m2cmab/types.hpp"

namespace m2cmab::lp {

namespace {

constexpr double kPivotTol = 1e-9;
constexpr double kFeasTol = 1e-8;
constexpr double kStallEps = 1e-12;
constexpr int kStallLimit = 50;
constexpr long kIterationLimit = 200000;

// Full-tableau simplex working state. Columns: n originals, then one
// slack/surplus per inequality row, then artificials; the last column is
// the right-hand side. Two cost rows are carried through every pivot so
// phase 2 starts from a consistent basis.
class Tableau {
 public:
  explicit Tableau(const DenseProgram& p) {
    const Eigen::Index m = p.row_coeffs.rows();
    const Eigen::Index n = p.row_coeffs.cols();

    Eigen::Index n_slack = 0;
    for (RowSense s : p.senses) {
      if (s != RowSense::kEqual) ++n_slack;
    }
    // Rows are normalized to nonnegative rhs first; artificials are only
    // needed where the slack cannot serve as the initial basic variable.
    std::vector<bool> needs_artificial(static_cast<std::size_t>(m), false);
    Eigen::Index n_art = 0;
    for (Eigen::Index i = 0; i < m; ++i) {
      RowSense sense = p.senses[static_cast<std::size_t>(i)];
      const bool flipped = p.rhs(i) < 0.0;
      if (flipped) {
        if (sense == RowSense::kLessEqual) sense = RowSense::kGreaterEqual;
        else if (sense == RowSense::kGreaterEqual) sense = RowSense::kLessEqual;
      }
      const bool art = sense != RowSense::kLessEqual;
      needs_artificial[static_cast<std::size_t>(i)] = art;
      if (art) ++n_art;
    }

    n_cols_ = n + n_slack + n_art;
    n_orig_ = n;
    first_art_ = n + n_slack;
    table_.setZero(m, n_cols_ + 1);
    basis_.resize(static_cast<std::size_t>(m));
    locked_.assign(static_cast<std::size_t>(n_cols_), false);

    Eigen::Index slack_col = n;
    Eigen::Index art_col = first_art_;
    for (Eigen::Index i = 0; i < m; ++i) {
      const double sign = p.rhs(i) < 0.0 ? -1.0 : 1.0;
      table_.row(i).head(n) = sign * p.row_coeffs.row(i);
      table_(i, n_cols_) = sign * p.rhs(i);
      RowSense sense = p.senses[static_cast<std::size_t>(i)];
      if (sign < 0.0) {
        if (sense == RowSense::kLessEqual) sense = RowSense::kGreaterEqual;
        else if (sense == RowSense::kGreaterEqual) sense = RowSense::kLessEqual;
      }
      if (sense == RowSense::kLessEqual) {
        table_(i, slack_col) = 1.0;
        basis_[static_cast<std::size_t>(i)] = slack_col++;
      } else if (sense == RowSense::kGreaterEqual) {
        table_(i, slack_col) = -1.0;
        ++slack_col;
        table_(i, art_col) = 1.0;
        basis_[static_cast<std::size_t>(i)] = art_col++;
      } else {
        table_(i, art_col) = 1.0;
        basis_[static_cast<std::size_t>(i)] = art_col++;
      }
    }

    // Phase-2 reduced costs: the initial basis carries zero objective, so
    // they start as the raw objective coefficients.
    cost2_.setZero(n_cols_ + 1);
    cost2_.head(n) = p.objective;

    // Phase-1 reduced costs for maximize(-sum of artificials): fold the
    // artificial basic rows into the cost row.
    cost1_.setZero(n_cols_ + 1);
    for (Eigen::Index j = first_art_; j < n_cols_; ++j) cost1_(j) = -1.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (basis_[static_cast<std::size_t>(i)] >= first_art_) cost1_ += table_.row(i);
    }
    has_artificials_ = n_art > 0;
  }

  SolveStatus run() {
    if (has_artificials_) {
      const SolveStatus phase1 = optimize(cost1_, /*exclude_artificials=*/false);
      if (phase1 == SolveStatus::kUnbounded) return SolveStatus::kInfeasible;
      // Residual artificial mass equals the cost row's rhs entry.
      if (cost1_(n_cols_) > kFeasTol) return SolveStatus::kInfeasible;
      evict_basic_artificials();
    }
    return optimize(cost2_, /*exclude_artificials=*/true);
  }

  Eigen::VectorXd solution() const {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n_orig_);
    for (Eigen::Index i = 0; i < table_.rows(); ++i) {
      const Eigen::Index j = basis_[static_cast<std::size_t>(i)];
      if (j < n_orig_) x(j) = std::max(0.0, table_(i, n_cols_));
    }
    return x;
  }

 private:
  void pivot(Eigen::Index row, Eigen::Index col) {
    table_.row(row) /= table_(row, col);
    for (Eigen::Index i = 0; i < table_.rows(); ++i) {
      if (i == row) continue;
      const double factor = table_(i, col);
      if (factor != 0.0) table_.row(i) -= factor * table_.row(row);
    }
    if (cost1_(col) != 0.0) cost1_ -= cost1_(col) * table_.row(row);
    if (cost2_(col) != 0.0) cost2_ -= cost2_(col) * table_.row(row);
    const Eigen::Index leaving = basis_[static_cast<std::size_t>(row)];
    if (leaving >= first_art_) locked_[static_cast<std::size_t>(leaving)] = true;
    basis_[static_cast<std::size_t>(row)] = col;
  }

  Eigen::Index pick_entering(const Eigen::RowVectorXd& cost, bool exclude_artificials,
                             bool bland) const {
    const Eigen::Index limit = exclude_artificials ? first_art_ : n_cols_;
    Eigen::Index best = -1;
    double best_cost = kPivotTol;
    for (Eigen::Index j = 0; j < limit; ++j) {
      if (locked_[static_cast<std::size_t>(j)]) continue;
      if (cost(j) > best_cost) {
        best = j;
        best_cost = cost(j);
        if (bland) break;  // lowest eligible index
      }
    }
    return best;
  }

  Eigen::Index pick_leaving(Eigen::Index col) const {
    Eigen::Index best = -1;
    double best_ratio = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < table_.rows(); ++i) {
      const double coeff = table_(i, col);
      if (coeff <= kPivotTol) continue;
      const double ratio = std::max(0.0, table_(i, n_cols_)) / coeff;
      if (ratio < best_ratio - kStallEps ||
          (ratio < best_ratio + kStallEps && best >= 0 &&
           basis_[static_cast<std::size_t>(i)] < basis_[static_cast<std::size_t>(best)])) {
        best = i;
        best_ratio = ratio;
      }
    }
    return best;
  }

  SolveStatus optimize(Eigen::RowVectorXd& cost, bool exclude_artificials) {
    int stall = 0;
    bool bland = false;
    for (long iter = 0; iter < kIterationLimit; ++iter) {
      const Eigen::Index col = pick_entering(cost, exclude_artificials, bland);
      if (col < 0) return SolveStatus::kOptimal;
      const Eigen::Index row = pick_leaving(col);
      if (row < 0) return SolveStatus::kUnbounded;

      const double before = -cost(n_cols_);
      pivot(row, col);
      const double after = -cost(n_cols_);
      if (after > before + kStallEps) {
        stall = 0;
        bland = false;
      } else if (++stall > kStallLimit) {
        bland = true;
      }
    }
    throw Error("internal", "simplex iteration limit exceeded");
  }

  // After phase 1, swap artificials still in the basis for structural
  // columns where possible; rows with no such column are redundant and
  // keep their artificial pinned at value zero.
  void evict_basic_artificials() {
    for (Eigen::Index i = 0; i < table_.rows(); ++i) {
      if (basis_[static_cast<std::size_t>(i)] < first_art_) continue;
      for (Eigen::Index j = 0; j < first_art_; ++j) {
        if (!locked_[static_cast<std::size_t>(j)] && std::abs(table_(i, j)) > kPivotTol) {
          pivot(i, j);
          break;
        }
      }
    }
  }

  Eigen::MatrixXd table_;
  Eigen::RowVectorXd cost1_, cost2_;
  std::vector<Eigen::Index> basis_;
  std::vector<bool> locked_;  // artificials barred from re-entering
  Eigen::Index n_cols_ = 0, n_orig_ = 0, first_art_ = 0;
  bool has_artificials_ = false;
};

}  // namespace

DenseSolution maximize(const DenseProgram& program) {
  const Eigen::Index m = program.row_coeffs.rows();
  if (program.rhs.size() != m || static_cast<Eigen::Index>(program.senses.size()) != m ||
      program.objective.size() != program.row_coeffs.cols()) {
    throw Error("dimension-mismatch", "inconsistent program dimensions");
  }
  if (!program.objective.allFinite() || !program.row_coeffs.allFinite() ||
      !program.rhs.allFinite()) {
    throw Error("malformed-field", "non-finite program data");
  }

  Tableau tableau(program);
  DenseSolution solution;
  solution.status = tableau.run();
  if (solution.status == SolveStatus::kOptimal) {
    solution.x = tableau.solution();
    solution.objective_value = program.objective.dot(solution.x);
  } else {
    solution.x = Eigen::VectorXd::Zero(program.objective.size());
    solution.objective_value = 0.0;
  }
  return solution;
}

}  // namespace m2cmab::lp
