#ifndef DEEPSEQ_PARAMS_HPP
#define DEEPSEQ_PARAMS_HPP

#include "deepseq/tensor.hpp"

#include <functional>
#include <map>
#include <string>
#include <string_view>

namespace deepseq {

/// Ordered name -> matrix container. Iteration order is lexicographic in the
/// name, which fixes the order of every reduction over a parameter set.
template <typename Tag>
class NamedMatrices {
 public:
  using Map = std::map<std::string, Matrix, std::less<>>;
  using const_iterator = typename Map::const_iterator;
  using iterator = typename Map::iterator;

  void set(std::string name, Matrix value) { entries_[std::move(name)] = std::move(value); }

  bool contains(std::string_view name) const { return entries_.find(name) != entries_.end(); }

  const Matrix& at(std::string_view name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) {
      throw ShapeError("no matrix named '" + std::string(name) + "'");
    }
    return it->second;
  }

  Matrix& at(std::string_view name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) {
      throw ShapeError("no matrix named '" + std::string(name) + "'");
    }
    return it->second;
  }

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const_iterator begin() const { return entries_.begin(); }
  const_iterator end() const { return entries_.end(); }
  iterator begin() { return entries_.begin(); }
  iterator end() { return entries_.end(); }

  /// Total number of scalar entries.
  Index scalar_count() const {
    Index n = 0;
    for (const auto& [name, m] : entries_) n += m.size();
    return n;
  }

  friend bool operator==(const NamedMatrices& a, const NamedMatrices& b) {
    if (a.entries_.size() != b.entries_.size()) return false;
    auto ib = b.entries_.begin();
    for (const auto& [name, m] : a.entries_) {
      if (name != ib->first || m.rows() != ib->second.rows() || m.cols() != ib->second.cols() ||
          m != ib->second) {
        return false;
      }
      ++ib;
    }
    return true;
  }

 private:
  Map entries_;
};

struct ParamTag {};
struct GradientTag {};

/// Trainable weights and biases keyed by parameter name.
using ParamSet = NamedMatrices<ParamTag>;
/// d(loss)/d(param), same keys and shapes as the ParamSet it was taken against.
using GradientSet = NamedMatrices<GradientTag>;

/// Sum of squares over every entry of every matrix.
template <typename Tag>
double squared_norm(const NamedMatrices<Tag>& set) {
  double s = 0.0;
  for (const auto& [name, m] : set) s += m.squaredNorm();
  return s;
}

}  // namespace deepseq

#endif  // DEEPSEQ_PARAMS_HPP
