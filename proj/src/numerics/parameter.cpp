#include "clarigen/numerics/parameter.h"

#include <cmath>
#include <cstring>

#include "clarigen/error.h"

namespace clarigen::numerics {

ParamId ParameterSet::add(std::string name, Tensor init) {
  if (find(name)) throw ContractError("duplicate parameter name: " + name);
  Parameter p;
  p.name = std::move(name);
  p.grad = Tensor(init.shape());
  p.value = std::move(init);
  params_.push_back(std::move(p));
  return params_.size() - 1;
}

ParamId ParameterSet::add_zeros(std::string name, Shape shape) {
  return add(std::move(name), Tensor(std::move(shape)));
}

ParamId ParameterSet::add_uniform(std::string name, Shape shape, Rng& rng,
                                  double range) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.uniform(-range, range);
  return add(std::move(name), std::move(t));
}

std::optional<ParamId> ParameterSet::find(const std::string& name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return i;
  }
  return std::nullopt;
}

Parameter& ParameterSet::get(const std::string& name) {
  auto id = find(name);
  if (!id) throw ContractError("unknown parameter: " + name);
  return params_[*id];
}

const Parameter& ParameterSet::get(const std::string& name) const {
  auto id = find(name);
  if (!id) throw ContractError("unknown parameter: " + name);
  return params_[*id];
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) {
    p.grad.fill(0.0);
    p.has_grad = false;
  }
}

double ParameterSet::grad_norm() const {
  double s = 0.0;
  for (const auto& p : params_) {
    if (!p.has_grad) continue;
    for (double g : p.grad.values()) s += g * g;
  }
  return std::sqrt(s);
}

std::uint64_t ParameterSet::checksum() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& p : params_) {
    mix(p.name.data(), p.name.size());
    for (std::size_t d : p.value.shape()) {
      const std::uint64_t e = d;
      mix(&e, sizeof e);
    }
    mix(p.value.data(), p.value.size() * sizeof(double));
  }
  return h;
}

}  // namespace clarigen::numerics
