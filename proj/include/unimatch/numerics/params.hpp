#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "unimatch/numerics/tensor.hpp"

namespace unimatch {

/// Flat, ordered registry of learnable tensors. Handles returned by add()
/// alias the registry's storage, so updates through either are shared.
class ModelParams {
 public:
  Tensor add(std::string name, Tensor value);

  const Tensor& get(std::string_view name) const;
  bool contains(std::string_view name) const;

  std::span<const Tensor> tensors() const { return tensors_; }
  const std::vector<std::string>& names() const { return names_; }
  std::size_t size() const { return tensors_.size(); }
  /// Total number of scalar parameters.
  std::size_t scalar_count() const;

  /// Copies values from `other`; names and shapes must match exactly.
  void assign_from(const ModelParams& other);

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> tensors_;
};

/// Uniform(-bound, bound) with bound = sqrt(6 / fan_in).
Tensor he_uniform(Shape shape, std::size_t fan_in, std::mt19937_64& rng);
/// Uniform(-bound, bound) with bound = sqrt(6 / (fan_in + fan_out)).
Tensor xavier_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng);

}  // namespace unimatch
