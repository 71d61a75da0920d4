#pragma once

#include <string>

#include "unimatch/numerics/tensor.hpp"

namespace unimatch {

enum class FieldKind { kFlow, kDisparity, kDepth };

std::string to_string(FieldKind kind);

/// Task output. Values are [H x W x 2] for flow and [H x W x 1] otherwise;
/// `stride` is the downsampling factor relative to the source image (1, 4, 8).
struct DenseField {
  FieldKind kind = FieldKind::kFlow;
  Tensor values;
  int stride = 1;

  std::size_t height() const { return values.dim(0); }
  std::size_t width() const { return values.dim(1); }
  std::size_t channels() const { return values.dim(2); }

  /// True when magnitudes are in pixel units and scale with resolution.
  bool scales_with_resolution() const { return kind != FieldKind::kDepth; }
};

inline std::size_t field_channels(FieldKind kind) { return kind == FieldKind::kFlow ? 2 : 1; }

/// Raises ContractError unless values are [H x W x channels(kind)].
void check_field(const DenseField& f, const char* where);

/// Detached deep copy.
DenseField detached(const DenseField& f);

}  // namespace unimatch
