#pragma once

#include "opsurv/errors.hpp"
#include "opsurv/rng.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

namespace opsurv::evalmetrics {

struct FoldAssignment {
  int k = 0;
  std::vector<int> fold;  // per subject, in 0..k-1

  std::vector<std::size_t> sizes() const {
    std::vector<std::size_t> s(static_cast<std::size_t>(k), 0);
    for (int f : fold) ++s[static_cast<std::size_t>(f)];
    return s;
  }

  std::vector<std::size_t> members(int f) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold.size(); ++i)
      if (fold[i] == f) out.push_back(i);
    return out;
  }

  std::vector<std::size_t> complement(int f) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold.size(); ++i)
      if (fold[i] != f) out.push_back(i);
    return out;
  }
};

/// Balanced random partition of n subjects into k folds (sizes differ by <= 1).
inline FoldAssignment kfold_split(std::size_t n, int k, Rng& rng) {
  if (k < 2) throw ParameterError("kfold_split: k must be >= 2");
  if (n < static_cast<std::size_t>(k)) throw ParameterError("kfold_split: fewer subjects than folds");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  FoldAssignment fa;
  fa.k = k;
  fa.fold.assign(n, 0);
  for (std::size_t pos = 0; pos < n; ++pos)
    fa.fold[perm[pos]] = static_cast<int>(pos % static_cast<std::size_t>(k));
  return fa;
}

template <class T>
std::vector<T> select(const std::vector<T>& items, const std::vector<std::size_t>& idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(items[i]);
  return out;
}

}  // namespace opsurv::evalmetrics
