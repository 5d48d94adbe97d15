#include "mmt/params.hpp"

#include <cmath>

#include "mmt/error.hpp"

namespace mmt {

std::size_t ParameterSet::add(std::string name, Tensor value, bool decay) {
  if (by_name_.contains(name)) throw ConfigError("duplicate parameter name '" + name + "'");
  const std::size_t idx = params_.size();
  by_name_.emplace(name, idx);
  params_.push_back({std::move(name), std::move(value), decay});
  return idx;
}

std::optional<std::size_t> ParameterSet::find(std::string_view name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) return std::nullopt;
  return it->second;
}

std::size_t ParameterSet::index(std::string_view name) const {
  auto idx = find(name);
  if (!idx) throw ConfigError("unknown parameter '" + std::string(name) + "'");
  return *idx;
}

std::size_t ParameterSet::scalar_count() const noexcept {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

bool operator==(const ParameterSet& a, const ParameterSet& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].name != b[i].name || a[i].decay != b[i].decay || !(a[i].value == b[i].value)) return false;
  }
  return true;
}

Gradients::Gradients(const ParameterSet& params) {
  grads_.reserve(params.size());
  for (const auto& p : params) grads_.emplace_back(p.value.shape());
}

void Gradients::zero() {
  for (auto& g : grads_) g.fill(0.0);
}

void Gradients::scale(double factor) {
  for (auto& g : grads_) {
    for (double& v : g.values()) v *= factor;
  }
}

double Gradients::global_norm() const {
  double s = 0.0;
  for (const auto& g : grads_) {
    for (double v : g.values()) s += v * v;
  }
  return std::sqrt(s);
}

Tensor normal_init(const Shape& shape, double std, SplitMix64& rng) {
  Tensor t(shape);
  for (double& v : t.values()) v = std * rng.normal();
  return t;
}

Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, SplitMix64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t({fan_in, fan_out});
  for (double& v : t.values()) v = (2.0 * rng.uniform() - 1.0) * limit;
  return t;
}

}  // namespace mmt
