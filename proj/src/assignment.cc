// Copyright 2026 mixitkit authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mixitkit/assignment.hpp"

#include <limits>
#include <string>

#include "mixitkit/error.hpp"

namespace mixitkit {

Assignment MaxScoreAssignment(const Eigen::MatrixXd& score) {
  const auto rows = static_cast<std::size_t>(score.rows());
  const auto cols = static_cast<std::size_t>(score.cols());
  if (rows > cols)
    throw Error(ErrorKind::kShapeMismatch, "assignment needs rows <= cols (" +
                                               std::to_string(rows) + " > " +
                                               std::to_string(cols) + ")");
  if (!score.allFinite()) throw Error(ErrorKind::kShapeMismatch, "assignment scores must be finite");
  const double inf = std::numeric_limits<double>::infinity();

  // 1-based shortest augmenting path formulation on cost = -score.
  std::vector<double> u(rows + 1, 0.0), v(cols + 1, 0.0);
  std::vector<std::size_t> match(cols + 1, 0), way(cols + 1, 0);
  for (std::size_t i = 1; i <= rows; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(cols + 1, inf);
    std::vector<bool> used(cols + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = match[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= cols; ++j) {
        if (used[j]) continue;
        const double cur = -score(static_cast<Eigen::Index>(i0 - 1), static_cast<Eigen::Index>(j - 1)) -
                           u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= cols; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  Assignment out;
  out.column_of_row.assign(rows, 0);
  for (std::size_t j = 1; j <= cols; ++j)
    if (match[j] != 0) out.column_of_row[match[j] - 1] = j - 1;
  for (std::size_t i = 0; i < rows; ++i)
    out.total += score(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(out.column_of_row[i]));
  return out;
}

}  // namespace mixitkit
