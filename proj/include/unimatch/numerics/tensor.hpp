#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace unimatch {

using Real = double;
using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct TensorImpl {
  Shape shape;
  std::vector<Real> data;
  std::vector<Real> grad;  // allocated lazily during backward
  bool requires_grad = false;

  Real* grad_buffer() {
    if (grad.size() != data.size()) grad.assign(data.size(), Real(0));
    return grad.data();
  }
};

}  // namespace detail

/// Dense row-major array with shared ownership. Copies alias the same storage;
/// use clone() for a deep copy.
class Tensor {
 public:
  Tensor();
  explicit Tensor(Shape shape, Real fill = Real(0));
  Tensor(Shape shape, std::vector<Real> values);

  static Tensor scalar(Real value);

  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const { return impl_->data.size(); }

  /// Rows when the tensor is viewed as [prod(leading) x last].
  std::size_t rows() const;
  /// Last extent (1 for rank-0).
  std::size_t cols() const;

  std::span<const Real> values() const { return impl_->data; }
  std::span<Real> values_mut() { return impl_->data; }
  const Real* data() const { return impl_->data.data(); }
  Real* data_mut() { return impl_->data.data(); }
  Real operator[](std::size_t i) const { return impl_->data[i]; }
  Real item() const;

  bool requires_grad() const { return impl_->requires_grad; }
  Tensor& set_requires_grad(bool on = true);
  /// Empty when no adjoint has been accumulated.
  std::span<const Real> grad() const { return impl_->grad; }
  void zero_grad();

  /// Deep copy that does not require grad.
  Tensor clone() const;
  Tensor reshaped(Shape shape) const;

  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }
  const std::shared_ptr<detail::TensorImpl>& impl() const { return impl_; }

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
};

}  // namespace unimatch
