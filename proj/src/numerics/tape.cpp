#include "unimatch/numerics/tape.hpp"

#include <cmath>
#include <string>

#include "unimatch/errors.hpp"

namespace unimatch {
namespace {

thread_local Tape* g_active_tape = nullptr;

}  // namespace

Tape::Scope::Scope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }

Tape::Scope::~Scope() { g_active_tape = previous_; }

Tape* Tape::active() { return g_active_tape; }

void Tape::record(Entry entry) { entries_.push_back(std::move(entry)); }

void Tape::backward(const Tensor& loss) {
  if (loss.numel() != 1) {
    throw ContractError("backward() needs a scalar loss, got " + shape_str(loss.shape()));
  }
  for (auto& e : entries_) {
    e.output->grad.clear();
    for (auto& in : e.inputs) in->grad.clear();
  }
  loss.impl()->grad_buffer()[0] = Real(1);
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (it->output->grad.empty()) continue;
    it->adjoint(*it->output);
  }
}

std::vector<Tensor> gradients(Tape& tape, const Tensor& loss, std::span<const Tensor> params) {
  for (const auto& p : params) p.impl()->grad.clear();
  std::vector<Tensor> out;
  out.reserve(params.size());
  if (!loss.requires_grad()) {
    if (loss.numel() != 1) {
      throw ContractError("gradients() needs a scalar loss, got " + shape_str(loss.shape()));
    }
    for (const auto& p : params) out.emplace_back(p.shape(), Real(0));
    return out;
  }
  tape.backward(loss);
  for (const auto& p : params) {
    auto g = p.grad();
    if (g.empty()) {
      out.emplace_back(p.shape(), Real(0));
    } else {
      out.emplace_back(p.shape(), std::vector<Real>(g.begin(), g.end()));
    }
  }
  return out;
}

namespace detail {

bool should_record(std::initializer_list<const Tensor*> inputs) {
  if (!g_active_tape) return false;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

void record(Tensor& out, std::initializer_list<const Tensor*> inputs, Tape::Adjoint adjoint) {
  Tape::Entry e;
  e.output = out.impl();
  for (const Tensor* t : inputs) e.inputs.push_back(t->impl());
  e.adjoint = std::move(adjoint);
  out.set_requires_grad(true);
  g_active_tape->record(std::move(e));
}

void record(Tensor& out, std::span<const Tensor> inputs, Tape::Adjoint adjoint) {
  Tape::Entry e;
  e.output = out.impl();
  for (const Tensor& t : inputs) e.inputs.push_back(t.impl());
  e.adjoint = std::move(adjoint);
  out.set_requires_grad(true);
  g_active_tape->record(std::move(e));
}

void check_finite(const Tensor& t, const char* op) {
  const Real* d = t.data();
  for (std::size_t i = 0, n = t.numel(); i < n; ++i) {
    if (!std::isfinite(d[i])) {
      throw NumericError(std::string(op) + " produced a non-finite value at flat index " +
                         std::to_string(i) + " of " + shape_str(t.shape()));
    }
  }
}

}  // namespace detail
}  // namespace unimatch
