#pragma once

#include "refac/linalg.hpp"
#include "refac/rng.hpp"

namespace testing {

inline refac::MatrixXd random_matrix(refac::Rng& rng, int r, int c) {
  refac::MatrixXd m(r, c);
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < c; ++j) m(i, j) = rng.normal();
  }
  return m;
}

inline double max_abs(const refac::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace testing
