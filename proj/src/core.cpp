#include "parclust/core.hpp"

#include <cmath>
#include <limits>

namespace parclust {

Dataset::Dataset(std::size_t n, std::size_t d, std::vector<double> values,
                 std::vector<std::string> ids)
    : n_(n), d_(d), values_(std::move(values)), ids_(std::move(ids)) {
  if (n_ == 0) throw InvalidInput("dataset has no points");
  if (d_ == 0) throw InvalidInput("dataset has no features");
  if (n_ > std::numeric_limits<Index>::max())
    throw InvalidInput("dataset exceeds the supported point count");
  if (values_.size() != n_ * d_)
    throw InvalidInput("feature matrix size does not match n x d");
  for (std::size_t k = 0; k < values_.size(); ++k) {
    if (!std::isfinite(values_[k]))
      throw InvalidInput("non-finite feature value at row " +
                         std::to_string(k / d_ + 1) + ", column " +
                         std::to_string(k % d_ + 1));
  }
  if (ids_.empty()) {
    ids_.reserve(n_);
    for (std::size_t i = 0; i < n_; ++i) ids_.push_back(std::to_string(i));
  } else if (ids_.size() != n_) {
    throw InvalidInput("id count does not match point count");
  }
  lookup_.reserve(n_);
  for (std::size_t i = 0; i < n_; ++i) {
    if (!lookup_.emplace(ids_[i], i).second)
      throw InvalidInput("duplicate id '" + ids_[i] + "' at row " +
                         std::to_string(i + 1));
  }
}

std::optional<std::size_t> Dataset::index_of(const std::string& id) const {
  auto it = lookup_.find(id);
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

ClusterForest::ClusterForest(std::size_t n) : parent_(n), size_(n, 1), count_(n) {
  if (n == 0) throw InvalidInput("forest needs at least one point");
  for (std::size_t i = 0; i < n; ++i) parent_[i] = static_cast<Index>(i);
}

void ClusterForest::check(std::size_t i) const {
  if (i >= parent_.size())
    throw InvalidInput("point index " + std::to_string(i) + " out of range");
}

Index ClusterForest::find(std::size_t i) {
  check(i);
  Index x = static_cast<Index>(i);
  while (parent_[x] != x) {
    parent_[x] = parent_[parent_[x]];
    x = parent_[x];
  }
  return x;
}

Index ClusterForest::find_const(std::size_t i) const {
  check(i);
  Index x = static_cast<Index>(i);
  while (parent_[x] != x) x = parent_[x];
  return x;
}

ClusterForest::UnionResult ClusterForest::unite(std::size_t i, std::size_t j) {
  Index ri = find(i);
  Index rj = find(j);
  if (ri == rj)
    throw InvalidInput("points " + std::to_string(i) + " and " +
                       std::to_string(j) + " are already in one cluster");
  if (rj < ri) std::swap(ri, rj);
  parent_[rj] = ri;
  size_[ri] += size_[rj];
  --count_;
  return {ri, rj, size_[ri]};
}

std::vector<Index> ClusterForest::roots() {
  std::vector<Index> out(parent_.size());
  for (std::size_t i = 0; i < parent_.size(); ++i) out[i] = find(i);
  return out;
}

void ConstraintSet::validate() const {
  if (kl2 && kl3 && *kl3 <= *kl2)
    throw InvalidInput("kl3 must be greater than kl2");
  if (dmax && (!std::isfinite(*dmax) || *dmax < 0.0))
    throw InvalidInput("dmax must be a finite nonnegative number");
}

std::vector<Index> replay_assignments(std::size_t n, const MergeLog& log) {
  ClusterForest forest(n);
  for (const auto& e : log) forest.unite(e.root_a, e.root_b);
  return forest.roots();
}

}  // namespace parclust
