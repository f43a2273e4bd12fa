#pragma once

#include <Eigen/Dense>

#include <vector>

namespace sgpplace {

struct Assignment {
  /// columns[i] is the column matched to row i; all entries are distinct.
  std::vector<int> columns;
  double total_cost = 0.0;
};

/// Exact minimum-cost assignment of every row of an a x b cost matrix
/// (a <= b) to a distinct column. Shortest augmenting paths with potentials,
/// O(a^2 b). Throws InvalidArgument when a > b or any cost is non-finite.
Assignment assignment_solve(const Eigen::Ref<const Eigen::MatrixXd>& cost);

}  // namespace sgpplace
