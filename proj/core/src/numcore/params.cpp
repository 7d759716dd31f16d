#include "ladi/numcore/params.hpp"

#include <algorithm>
#include <cmath>

#include "ladi/common.hpp"

namespace ladi::numcore {

std::size_t ParamVector::add_slice(const std::string& name,
                                   std::size_t length) {
  if (has_slice(name)) throw ConfigError("duplicate parameter slice: " + name);
  const std::size_t offset = values_.size();
  layout_.push_back({name, offset, length});
  values_.resize(offset + length, 0.0);
  return offset;
}

const Slice& ParamVector::slice(const std::string& name) const {
  for (const auto& s : layout_) {
    if (s.name == name) return s;
  }
  throw ConfigError("unknown parameter slice: " + name);
}

bool ParamVector::has_slice(const std::string& name) const {
  return std::any_of(layout_.begin(), layout_.end(),
                     [&](const Slice& s) { return s.name == name; });
}

std::span<double> ParamVector::view(const std::string& name) {
  const auto& s = slice(name);
  return {values_.data() + s.offset, s.length};
}

std::span<const double> ParamVector::view(const std::string& name) const {
  const auto& s = slice(name);
  return {values_.data() + s.offset, s.length};
}

bool ParamVector::all_finite() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](double v) { return std::isfinite(v); });
}

ParamVector ParamVector::from_parts(std::vector<Slice> layout,
                                    std::vector<double> values) {
  std::size_t cursor = 0;
  for (const auto& s : layout) {
    if (s.offset != cursor) {
      throw DataError("parameter layout is not contiguous at slice " + s.name);
    }
    cursor += s.length;
  }
  if (cursor != values.size()) {
    throw DataError("parameter layout does not cover the value vector");
  }
  ParamVector out;
  out.layout_ = std::move(layout);
  out.values_ = std::move(values);
  return out;
}

bool ParamVector::operator==(const ParamVector& other) const {
  if (layout_.size() != other.layout_.size()) return false;
  for (std::size_t i = 0; i < layout_.size(); ++i) {
    const auto& a = layout_[i];
    const auto& b = other.layout_[i];
    if (a.name != b.name || a.offset != b.offset || a.length != b.length) {
      return false;
    }
  }
  return values_ == other.values_;
}

}  // namespace ladi::numcore
