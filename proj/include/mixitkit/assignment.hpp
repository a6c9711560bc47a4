// Copyright 2026 mixitkit authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef MIXITKIT_ASSIGNMENT_HPP_
#define MIXITKIT_ASSIGNMENT_HPP_

#include <Eigen/Core>

#include <vector>

namespace mixitkit {

struct Assignment {
  std::vector<std::size_t> column_of_row;
  double total = 0.0;
};

// Injective row -> column map maximizing the summed score (rows <= cols),
// Hungarian method with potentials. Among equal-cost alternatives the scan
// prefers lower column indices.
Assignment MaxScoreAssignment(const Eigen::MatrixXd& score);

}  // namespace mixitkit

#endif  // MIXITKIT_ASSIGNMENT_HPP_
