#include "unimatch/numerics/params.hpp"

#include <algorithm>
#include <cmath>

#include "unimatch/errors.hpp"

namespace unimatch {

Tensor ModelParams::add(std::string name, Tensor value) {
  if (contains(name)) throw ContractError("duplicate parameter name '" + name + "'");
  value.set_requires_grad(true);
  names_.push_back(std::move(name));
  tensors_.push_back(value);
  return value;
}

const Tensor& ModelParams::get(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return tensors_[i];
  throw ContractError("unknown parameter '" + std::string(name) + "'");
}

bool ModelParams::contains(std::string_view name) const {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

std::size_t ModelParams::scalar_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.numel();
  return n;
}

void ModelParams::assign_from(const ModelParams& other) {
  if (other.names_ != names_) throw ContractError("parameter registries differ in names");
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    if (other.tensors_[i].shape() != tensors_[i].shape()) {
      throw ContractError("parameter '" + names_[i] + "' differs in shape");
    }
    auto src = other.tensors_[i].values();
    std::copy(src.begin(), src.end(), tensors_[i].values_mut().begin());
  }
}

Tensor he_uniform(Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
  const Real bound = std::sqrt(Real(6) / static_cast<Real>(fan_in));
  std::uniform_real_distribution<Real> u(-bound, bound);
  Tensor t(std::move(shape));
  for (auto& v : t.values_mut()) v = u(rng);
  return t;
}

Tensor xavier_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const Real bound = std::sqrt(Real(6) / static_cast<Real>(fan_in + fan_out));
  std::uniform_real_distribution<Real> u(-bound, bound);
  Tensor t(std::move(shape));
  for (auto& v : t.values_mut()) v = u(rng);
  return t;
}

}  // namespace unimatch
