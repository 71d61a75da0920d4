#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "unimatch/numerics/tensor.hpp"

namespace unimatch {

/// Ordered record of primitive applications. Primitives append to the tape
/// that is active on the calling thread; backward() replays the adjoints in
/// reverse order.
class Tape {
 public:
  using Adjoint = std::function<void(const detail::TensorImpl& out)>;

  struct Entry {
    std::shared_ptr<detail::TensorImpl> output;
    std::vector<std::shared_ptr<detail::TensorImpl>> inputs;
    Adjoint adjoint;
  };

  /// Makes a tape active for the current thread for the scope's lifetime.
  class Scope {
   public:
    explicit Scope(Tape& tape);
    ~Scope();
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Tape* previous_;
  };

  static Tape* active();

  void record(Entry entry);
  /// Seeds d(loss)/d(loss) = 1 and accumulates adjoints into every recorded
  /// input. Leaf gradients from earlier passes are cleared first.
  void backward(const Tensor& loss);

  std::size_t size() const { return entries_.size(); }
  void clear() { entries_.clear(); }

 private:
  std::vector<Entry> entries_;
};

/// Reverse-mode adjoints of a scalar loss with respect to each parameter.
/// Parameters the loss does not depend on receive zeros.
std::vector<Tensor> gradients(Tape& tape, const Tensor& loss, std::span<const Tensor> params);

namespace detail {

/// True when a tape is active and one of the inputs requires grad.
bool should_record(std::initializer_list<const Tensor*> inputs);

/// Marks `out` as differentiable and appends its adjoint to the active tape.
void record(Tensor& out, std::initializer_list<const Tensor*> inputs, Tape::Adjoint adjoint);
void record(Tensor& out, std::span<const Tensor> inputs, Tape::Adjoint adjoint);

/// Gradient buffer of an input, or nullptr when it does not require grad.
inline Real* grad_of(const Tensor& t) {
  return t.requires_grad() ? t.impl()->grad_buffer() : nullptr;
}

/// Raises NumericError when any value is NaN or Inf.
void check_finite(const Tensor& t, const char* op);

}  // namespace detail
}  // namespace unimatch
