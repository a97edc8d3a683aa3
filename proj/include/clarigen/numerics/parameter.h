#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "clarigen/numerics/rng.h"
#include "clarigen/numerics/tensor.h"

namespace clarigen::numerics {

// A trainable weight with its persistent gradient accumulator.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool has_grad = false;
};

using ParamId = std::size_t;

// Ordered, name-addressed collection of parameters. Models keep ParamIds
// rather than pointers so a model (and its set) can be copied by value.
class ParameterSet {
 public:
  ParamId add(std::string name, Tensor init);
  ParamId add_zeros(std::string name, Shape shape);
  ParamId add_uniform(std::string name, Shape shape, Rng& rng, double range);

  Parameter& operator[](ParamId id) { return params_.at(id); }
  const Parameter& operator[](ParamId id) const { return params_.at(id); }

  std::optional<ParamId> find(const std::string& name) const;
  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;

  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grad();
  double grad_norm() const;
  // FNV-1a over names, shapes and value bytes.
  std::uint64_t checksum() const;

 private:
  std::vector<Parameter> params_;
};

}  // namespace clarigen::numerics
