#include "unimatch/metrics.hpp"

#include <cmath>
#include <nlohmann/json.hpp>

#include "unimatch/errors.hpp"
#include "unimatch/matching.hpp"
#include "unimatch/numerics/ops.hpp"

namespace unimatch {

MetricReport compute_metrics(const DenseField& pred, const DenseField& gt,
                             std::span<const std::uint8_t> valid) {
  check_field(pred, "compute_metrics");
  check_field(gt, "compute_metrics");
  if (pred.kind != gt.kind || pred.values.shape() != gt.values.shape()) {
    throw ContractError("compute_metrics: prediction " + shape_str(pred.values.shape()) +
                        " vs ground truth " + shape_str(gt.values.shape()));
  }
  const std::size_t n = gt.height() * gt.width(), c = gt.channels();
  if (!valid.empty() && valid.size() != n) {
    throw ContractError("compute_metrics: valid mask has " + std::to_string(valid.size()) +
                        " entries for " + std::to_string(n) + " pixels");
  }
  MetricReport r;
  r.kind = gt.kind;
  const Real* p = pred.values.data();
  const Real* g = gt.values.data();
  double sum_err = 0, outliers = 0, abs_rel = 0, sq_rel = 0, sq = 0, sq_log = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!valid.empty() && !valid[i]) continue;
    ++r.valid_count;
    if (gt.kind == FieldKind::kDepth) {
      const double e = p[i] - g[i];
      abs_rel += std::abs(e) / g[i];
      sq_rel += e * e / g[i];
      sq += e * e;
      const double le = std::log(p[i]) - std::log(g[i]);
      sq_log += le * le;
      continue;
    }
    double err2 = 0, mag2 = 0;
    for (std::size_t k = 0; k < c; ++k) {
      const double e = p[i * c + k] - g[i * c + k];
      err2 += e * e;
      mag2 += g[i * c + k] * g[i * c + k];
    }
    const double err = std::sqrt(err2), mag = std::sqrt(mag2);
    sum_err += err;
    if (err > 3.0 && err > 0.05 * mag) outliers += 1;
    BucketEpe& b = mag < 10 ? r.s0_10 : (mag < 40 ? r.s10_40 : r.s40_plus);
    b.epe += err;
    ++b.count;
  }
  if (r.valid_count == 0) return r;
  r.empty = false;
  const double nv = static_cast<double>(r.valid_count);
  if (gt.kind == FieldKind::kDepth) {
    r.abs_rel = abs_rel / nv;
    r.sq_rel = sq_rel / nv;
    r.rmse = std::sqrt(sq / nv);
    r.rmse_log = std::sqrt(sq_log / nv);
  } else {
    r.epe = sum_err / nv;
    r.outlier_percent = 100.0 * outliers / nv;
    for (BucketEpe* b : {&r.s0_10, &r.s10_40, &r.s40_plus})
      if (b->count) b->epe /= static_cast<double>(b->count);
  }
  return r;
}

std::string MetricReport::to_json() const {
  nlohmann::ordered_json j;
  j["kind"] = to_string(kind);
  j["valid_count"] = valid_count;
  j["empty"] = empty;
  auto value = [&](double v) { return empty ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(v); };
  if (kind == FieldKind::kDepth) {
    j["abs_rel"] = value(abs_rel);
    j["sq_rel"] = value(sq_rel);
    j["rmse"] = value(rmse);
    j["rmse_log"] = value(rmse_log);
  } else {
    j["epe"] = value(epe);
    j[kind == FieldKind::kFlow ? "f1_all" : "d1_all"] = value(outlier_percent);
    auto bucket = [&](const BucketEpe& b) {
      nlohmann::ordered_json o;
      o["epe"] = b.count ? nlohmann::ordered_json(b.epe) : nlohmann::ordered_json(nullptr);
      o["count"] = b.count;
      return o;
    };
    j["s0-10"] = bucket(s0_10);
    j["s10-40"] = bucket(s10_40);
    j["s40+"] = bucket(s40_plus);
  }
  return j.dump(2);
}

std::vector<std::uint8_t> occlusion_mask(const DenseField& forward, const DenseField& backward,
                                         const OcclusionThresholds& t) {
  check_field(forward, "occlusion_mask");
  check_field(backward, "occlusion_mask");
  if (forward.kind != FieldKind::kFlow || backward.kind != FieldKind::kFlow ||
      forward.values.shape() != backward.values.shape()) {
    throw ContractError("occlusion_mask: needs two flow fields of equal extents");
  }
  const std::size_t h = forward.height(), w = forward.width();
  Tensor coords = add(coordinate_grid(h, w), forward.values);
  Tensor warped = bilinear_sample(backward.values, coords);
  std::vector<std::uint8_t> mask(h * w);
  for (std::size_t i = 0; i < h * w; ++i) {
    const double fx = forward.values[2 * i], fy = forward.values[2 * i + 1];
    const double bx = warped[2 * i], by = warped[2 * i + 1];
    const double sx = fx + bx, sy = fy + by;
    const double lhs = sx * sx + sy * sy;
    const double rhs = t.alpha1 * (fx * fx + fy * fy + bx * bx + by * by) + t.alpha2;
    mask[i] = lhs > rhs;
  }
  return mask;
}

}  // namespace unimatch
