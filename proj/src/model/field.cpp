#include "unimatch/field.hpp"

#include "unimatch/errors.hpp"

namespace unimatch {

std::string to_string(FieldKind kind) {
  switch (kind) {
    case FieldKind::kFlow:
      return "flow";
    case FieldKind::kDisparity:
      return "disparity";
    case FieldKind::kDepth:
      return "depth";
  }
  return "unknown";
}

void check_field(const DenseField& f, const char* where) {
  if (f.values.rank() != 3 || f.values.dim(2) != field_channels(f.kind)) {
    throw ContractError(std::string(where) + ": " + to_string(f.kind) + " field has shape " +
                        shape_str(f.values.shape()));
  }
}

DenseField detached(const DenseField& f) { return {f.kind, f.values.clone(), f.stride}; }

}  // namespace unimatch
