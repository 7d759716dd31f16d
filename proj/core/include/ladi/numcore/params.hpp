#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace ladi::numcore {

struct Slice {
  std::string name;
  std::size_t offset = 0;
  std::size_t length = 0;
};

// Flat parameter storage with a named layout. Slices are appended in order,
// so they are disjoint and cover the vector by construction.
class ParamVector {
 public:
  ParamVector() = default;

  // Appends a zero-initialised slice and returns its offset.
  std::size_t add_slice(const std::string& name, std::size_t length);

  const Slice& slice(const std::string& name) const;
  bool has_slice(const std::string& name) const;

  std::span<double> view(const std::string& name);
  std::span<const double> view(const std::string& name) const;

  std::size_t size() const { return values_.size(); }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }
  const std::vector<Slice>& layout() const { return layout_; }

  bool all_finite() const;

  // Rebuilds from serialized parts; validates that the layout tiles the values.
  static ParamVector from_parts(std::vector<Slice> layout,
                                std::vector<double> values);

  bool operator==(const ParamVector& other) const;

 private:
  std::vector<double> values_;
  std::vector<Slice> layout_;
};

}  // namespace ladi::numcore
