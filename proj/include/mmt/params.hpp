#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mmt/rng.hpp"
#include "mmt/tensor.hpp"

namespace mmt {

struct Parameter {
  std::string name;
  Tensor value;
  bool decay = true;  // subject to decoupled weight decay
};

// Ordered, named collection of learnable tensors.
class ParameterSet {
 public:
  std::size_t add(std::string name, Tensor value, bool decay = true);
  std::size_t index(std::string_view name) const;
  std::optional<std::size_t> find(std::string_view name) const;
  bool contains(std::string_view name) const { return find(name).has_value(); }

  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }
  Tensor& value(std::string_view name) { return params_[index(name)].value; }
  const Tensor& value(std::string_view name) const { return params_[index(name)].value; }

  std::size_t size() const noexcept { return params_.size(); }
  std::size_t scalar_count() const noexcept;
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  friend bool operator==(const ParameterSet& a, const ParameterSet& b);

 private:
  std::vector<Parameter> params_;
  std::map<std::string, std::size_t, std::less<>> by_name_;
};

// Gradient accumulator aligned index-for-index with a ParameterSet.
class Gradients {
 public:
  explicit Gradients(const ParameterSet& params);
  Tensor& operator[](std::size_t i) { return grads_[i]; }
  const Tensor& operator[](std::size_t i) const { return grads_[i]; }
  std::size_t size() const noexcept { return grads_.size(); }
  void zero();
  void scale(double factor);
  double global_norm() const;

 private:
  std::vector<Tensor> grads_;
};

// Initializers. All draw from a SplitMix64 stream so weights are reproducible.
Tensor normal_init(const Shape& shape, double std, SplitMix64& rng);
Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, SplitMix64& rng);

}  // namespace mmt
