#include "sgpplace/assignment.hpp"

#include <limits>
#include <string>

#include "sgpplace/errors.hpp"

namespace sgpplace {

Assignment assignment_solve(const Eigen::Ref<const Eigen::MatrixXd>& cost) {
  const int a = static_cast<int>(cost.rows());
  const int b = static_cast<int>(cost.cols());
  if (a > b) {
    throw InvalidArgument("assignment needs rows <= columns, got " + std::to_string(a) + " x " + std::to_string(b));
  }
  if (!cost.allFinite()) throw InvalidArgument("assignment cost matrix has non-finite entries");

  Assignment out;
  out.columns.assign(static_cast<std::size_t>(a), -1);
  if (a == 0) return out;

  // 1-based arrays; column 0 is the virtual root of each augmenting search.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(a + 1, 0.0), v(b + 1, 0.0), minv(b + 1);
  std::vector<int> owner(b + 1, 0), way(b + 1, 0);
  std::vector<char> used(b + 1);

  for (int i = 1; i <= a; ++i) {
    owner[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = owner[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= b; ++j) {
        if (used[j]) continue;
        const double reduced = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (reduced < minv[j]) {
          minv[j] = reduced;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= b; ++j) {
        if (used[j]) {
          u[owner[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (owner[j0] != 0);
    do {
      const int j1 = way[j0];
      owner[j0] = owner[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  for (int j = 1; j <= b; ++j) {
    if (owner[j] != 0) out.columns[static_cast<std::size_t>(owner[j] - 1)] = j - 1;
  }
  for (int i = 0; i < a; ++i) out.total_cost += cost(i, out.columns[static_cast<std::size_t>(i)]);
  return out;
}

}  // namespace sgpplace
