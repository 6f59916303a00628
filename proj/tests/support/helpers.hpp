#pragma once

#include "mkt/core.hpp"

#include <initializer_list>

namespace testing_util {

inline mkt::Matrix mat(mkt::Index r, mkt::Index c, std::initializer_list<double> vals) {
  mkt::Matrix m(r, c);
  auto it = vals.begin();
  for (mkt::Index i = 0; i < r; ++i) {
    for (mkt::Index j = 0; j < c; ++j) m(i, j) = *it++;
  }
  return m;
}

inline mkt::Vector vec(std::initializer_list<double> vals) {
  mkt::Vector v(static_cast<mkt::Index>(vals.size()));
  mkt::Index k = 0;
  for (double x : vals) v(k++) = x;
  return v;
}

}  // namespace testing_util
