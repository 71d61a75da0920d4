#include "unimatch/selfcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>

#include "unimatch/attention.hpp"
#include "unimatch/errors.hpp"
#include "unimatch/io.hpp"
#include "unimatch/loss.hpp"
#include "unimatch/matching.hpp"
#include "unimatch/model.hpp"
#include "unimatch/numerics/ops.hpp"
#include "unimatch/numerics/tape.hpp"
#include "unimatch/propagation.hpp"

namespace unimatch {
namespace {

using Clock = std::chrono::steady_clock;
using LD = long double;

Tensor random_tensor(Shape shape, std::mt19937_64& rng, Real lo = -1, Real hi = 1) {
  std::uniform_real_distribution<Real> u(lo, hi);
  Tensor t(std::move(shape));
  for (auto& v : t.values_mut()) v = u(rng);
  return t;
}

std::size_t pick(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(3);
  s << v;
  return s.str();
}

CheckResult finish(std::string name, Clock::time_point start, bool passed, std::string detail) {
  return {std::move(name), passed, std::move(detail),
          std::chrono::duration<double>(Clock::now() - start).count()};
}

// Runs `body`, turning library errors into a failed check.
CheckResult guarded(const std::string& name, const std::function<CheckResult()>& body) {
  const auto start = Clock::now();
  try {
    return body();
  } catch (const std::exception& e) {
    return finish(name, start, false, std::string("exception: ") + e.what());
  }
}

// softmax(s) . rows of v, accumulated in long double.
std::vector<LD> soft_combine(const std::vector<LD>& logits, const std::function<LD(std::size_t, std::size_t)>& v,
                             std::size_t channels) {
  LD m = -INFINITY;
  for (LD l : logits) m = std::max(m, l);
  LD z = 0;
  std::vector<LD> w(logits.size());
  for (std::size_t j = 0; j < logits.size(); ++j) z += w[j] = std::exp(logits[j] - m);
  std::vector<LD> out(channels, 0);
  for (std::size_t j = 0; j < logits.size(); ++j)
    for (std::size_t c = 0; c < channels; ++c) out[c] += w[j] / z * v(j, c);
  return out;
}

LD dot(const Tensor& a, std::size_t i, const Tensor& b, std::size_t j, std::size_t d) {
  LD s = 0;
  for (std::size_t c = 0; c < d; ++c) s += LD(a[i * d + c]) * LD(b[j * d + c]);
  return s;
}

double correlation_error(std::mt19937_64& rng) {
  const std::size_t h = pick(rng, 1, 8), w = pick(rng, 1, 8), d = pick(rng, 1, 8);
  const Tensor f1 = random_tensor({h, w, d}, rng), f2 = random_tensor({h, w, d}, rng);
  const auto c = flow_correlation(f1, f2);
  double err = 0;
  for (std::size_t i = 0; i < h * w; ++i)
    for (std::size_t j = 0; j < h * w; ++j) {
      const LD ref = dot(f1, i, f2, j, d) / std::sqrt(LD(d));
      err = std::max(err, double(std::abs(c.values[i * h * w + j] - ref)));
    }
  return err;
}

double attend_error(std::mt19937_64& rng) {
  const std::size_t l = pick(rng, 1, 8), lk = pick(rng, 1, 8), d = pick(rng, 1, 8), c = pick(rng, 1, 8);
  const Tensor q = random_tensor({l, d}, rng, -2, 2), k = random_tensor({lk, d}, rng, -2, 2);
  const Tensor v = random_tensor({lk, c}, rng);
  const Tensor out = attend(q, k, v);
  double err = 0;
  for (std::size_t i = 0; i < l; ++i) {
    std::vector<LD> logits(lk);
    for (std::size_t j = 0; j < lk; ++j) logits[j] = dot(q, i, k, j, d) / std::sqrt(LD(d));
    const auto ref = soft_combine(logits, [&](std::size_t j, std::size_t ch) { return LD(v[j * c + ch]); }, c);
    for (std::size_t ch = 0; ch < c; ++ch) err = std::max(err, double(std::abs(out[i * c + ch] - ref[ch])));
  }
  return err;
}

double propagate_error(std::mt19937_64& rng, PropagationWindow window) {
  const std::size_t h = pick(rng, 1, 8), w = pick(rng, 1, 8), d = pick(rng, 1, 8);
  const Tensor f = random_tensor({h, w, d}, rng, -2, 2);
  const DenseField v{FieldKind::kFlow, random_tensor({h, w, 2}, rng, -5, 5), 8};
  const DenseField out = propagate(f, v, window);
  double err = 0;
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      std::vector<std::size_t> nb;
      for (std::size_t yy = 0; yy < h; ++yy)
        for (std::size_t xx = 0; xx < w; ++xx) {
          const bool near = std::abs(long(yy) - long(y)) <= 1 && std::abs(long(xx) - long(x)) <= 1;
          if (window == PropagationWindow::kGlobal || near) nb.push_back(yy * w + xx);
        }
      std::vector<LD> logits;
      for (std::size_t j : nb) logits.push_back(dot(f, y * w + x, f, j, d) / std::sqrt(LD(d)));
      const auto ref = soft_combine(logits, [&](std::size_t j, std::size_t c) { return LD(v.values[nb[j] * 2 + c]); }, 2);
      for (std::size_t c = 0; c < 2; ++c)
        err = std::max(err, double(std::abs(out.values[(y * w + x) * 2 + c] - ref[c])));
    }
  return err;
}

double conv_error(std::mt19937_64& rng) {
  const std::size_t h = pick(rng, 3, 8), w = pick(rng, 3, 8), cin = pick(rng, 1, 8), cout = pick(rng, 1, 8);
  const int k = pick(rng, 0, 1) ? 3 : 1;
  const int stride = int(pick(rng, 1, 2));
  const Padding pad = pick(rng, 0, 1) ? Padding::kSame : Padding::kValid;
  const Tensor in = random_tensor({h, w, cin}, rng), ker = random_tensor({std::size_t(k), std::size_t(k), cin, cout}, rng);
  const Tensor out = conv2d(in, ker, stride, pad);
  const int p = pad == Padding::kSame ? k / 2 : 0;
  const std::size_t ho = out.dim(0), wo = out.dim(1);
  if (ho != std::size_t((int(h) + 2 * p - k) / stride + 1) || wo != std::size_t((int(w) + 2 * p - k) / stride + 1)) {
    return INFINITY;
  }
  double err = 0;
  for (std::size_t oy = 0; oy < ho; ++oy)
    for (std::size_t ox = 0; ox < wo; ++ox)
      for (std::size_t co = 0; co < cout; ++co) {
        LD s = 0;
        for (int ky = 0; ky < k; ++ky)
          for (int kx = 0; kx < k; ++kx) {
            const int iy = int(oy) * stride + ky - p, ix = int(ox) * stride + kx - p;
            if (iy < 0 || ix < 0 || iy >= int(h) || ix >= int(w)) continue;
            for (std::size_t ci = 0; ci < cin; ++ci)
              s += LD(in[(iy * w + ix) * cin + ci]) * LD(ker[((ky * k + kx) * cin + ci) * cout + co]);
          }
        err = std::max(err, double(std::abs(out[(oy * wo + ox) * cout + co] - s)));
      }
  return err;
}

double bilinear_error(std::mt19937_64& rng) {
  const std::size_t h = pick(rng, 1, 8), w = pick(rng, 1, 8), d = pick(rng, 1, 8);
  const std::size_t ho = pick(rng, 1, 8), wo = pick(rng, 1, 8);
  const Tensor feat = random_tensor({h, w, d}, rng);
  Tensor coords(Shape{ho, wo, 2});
  std::uniform_real_distribution<Real> ux(-1.5, double(w) + 0.5), uy(-1.5, double(h) + 0.5);
  for (std::size_t i = 0; i < ho * wo; ++i) {
    coords.values_mut()[2 * i] = ux(rng);
    coords.values_mut()[2 * i + 1] = uy(rng);
  }
  const Tensor out = bilinear_sample(feat, coords);
  double err = 0;
  for (std::size_t i = 0; i < ho * wo; ++i) {
    const LD x = coords[2 * i], y = coords[2 * i + 1];
    const long x0 = long(std::floor(x)), y0 = long(std::floor(y));
    for (std::size_t c = 0; c < d; ++c) {
      LD s = 0;
      for (long yy = y0; yy <= y0 + 1; ++yy)
        for (long xx = x0; xx <= x0 + 1; ++xx) {
          if (xx < 0 || yy < 0 || xx >= long(w) || yy >= long(h)) continue;
          const LD wt = (1 - std::abs(x - LD(xx))) * (1 - std::abs(y - LD(yy)));
          s += wt * LD(feat[(yy * w + xx) * d + c]);
        }
      err = std::max(err, double(std::abs(out[i * d + c] - s)));
    }
  }
  return err;
}

// Largest |row sum - 1| over a row-stochastic matrix.
double row_sum_error(const Tensor& m) {
  const std::size_t cols = m.dim(m.rank() - 1), rows = m.numel() / cols;
  double err = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    LD s = 0;
    for (std::size_t c = 0; c < cols; ++c) s += m[r * cols + c];
    err = std::max(err, double(std::abs(s - 1)));
  }
  return err;
}

std::array<double, 9> rotation(double ax, double ay, double az) {
  const double angle = std::sqrt(ax * ax + ay * ay + az * az);
  if (angle == 0) return {1, 0, 0, 0, 1, 0, 0, 0, 1};
  const double kx = ax / angle, ky = ay / angle, kz = az / angle;
  const double c = std::cos(angle), s = std::sin(angle), t = 1 - c;
  return {t * kx * kx + c,      t * kx * ky - s * kz, t * kx * kz + s * ky,
          t * kx * ky + s * kz, t * ky * ky + c,      t * ky * kz - s * kx,
          t * kx * kz - s * ky, t * ky * kz + s * kx, t * kz * kz + c};
}

CameraSetup random_camera(std::mt19937_64& rng, std::size_t h, std::size_t w) {
  std::uniform_real_distribution<double> u(0, 1);
  const double d_min = 0.3 + u(rng), d_max = d_min + 1 + 9 * u(rng);
  CameraSetup cam = CameraSetup::rectified(1 + 6 * u(rng), (double(w) - 1) / 2, (double(h) - 1) / 2,
                                           0.05 + 0.5 * u(rng), d_min, d_max, int(pick(rng, 2, 16)));
  const auto r = rotation(0.2 * (u(rng) - 0.5), 0.2 * (u(rng) - 0.5), 0.2 * (u(rng) - 0.5));
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) cam.e2[i * 4 + j] = r[i * 3 + j];
  cam.e2[7] += 0.1 * (u(rng) - 0.5);
  cam.validate();
  return cam;
}

Tensor one_hot(std::size_t h, std::size_t w, std::size_t d, const std::function<long(std::size_t, std::size_t)>& channel,
               Real s) {
  Tensor t(Shape{h, w, d});
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const long c = channel(y, x);
      if (c >= 0 && c < long(d)) t.data_mut()[(y * w + x) * d + std::size_t(c)] = s;
    }
  return t;
}

ModelConfig tiny_flow_model(std::uint64_t seed) {
  ModelConfig c;
  c.backbone.stem_channels = 6;
  c.backbone.stem_kernel = 3;
  c.backbone.blocks = {{8, 1}, {8, 2}};
  c.backbone.feature_dim = 8;
  c.num_blocks = 2;
  c.splits = 1;
  c.ffn_ratio = 2;
  c.num_scales = 1;
  c.upsample_hidden = 6;
  c.seed = seed;
  return c;
}

}  // namespace

CheckResult check_primitive_oracles(std::uint64_t seed, int trials) {
  const std::string name = "primitive oracles";
  return guarded(name, [&] {
    const auto start = Clock::now();
    std::mt19937_64 rng(seed);
    double corr = 0, att = 0, prop = 0, conv = 0, bil = 0;
    for (int t = 0; t < trials; ++t) {
      corr = std::max(corr, correlation_error(rng));
      att = std::max(att, attend_error(rng));
      prop = std::max({prop, propagate_error(rng, PropagationWindow::kGlobal),
                       propagate_error(rng, PropagationWindow::kLocal3x3)});
      conv = std::max(conv, conv_error(rng));
      bil = std::max(bil, bilinear_error(rng));
    }
    const double worst = std::max({corr, att, prop, conv, bil});
    return finish(name, start, worst < 1e-10,
                  "max abs error: correlation " + fmt(corr) + ", attend " + fmt(att) + ", propagate " +
                      fmt(prop) + ", conv2d " + fmt(conv) + ", bilinear " + fmt(bil) + " (limit 1e-10)");
  });
}

CheckResult check_pipeline_gradients(std::uint64_t seed, int probes) {
  const std::string name = "pipeline gradients";
  return guarded(name, [&] {
    const auto start = Clock::now();
    std::mt19937_64 rng(seed);
    UniMatch model(tiny_flow_model(seed));
    const Tensor img1 = random_tensor({16, 16, 3}, rng), img2 = random_tensor({16, 16, 3}, rng);
    const DenseField gt{FieldKind::kFlow, random_tensor({16, 16, 2}, rng, -3, 3), 1};
    // Squared error keeps the objective smooth; an L1 kink inside the
    // difference stencil would corrupt the numeric estimate, not the gradient.
    auto loss = [&] {
      Tensor total = Tensor::scalar(0);
      for (const auto& p : model.flow(img1, img2).sequence) {
        const Tensor d = sub(p.values, gt.values);
        total = add(total, mean(mul(d, d)));
      }
      return total;
    };
    Tape tape;
    Tensor value;
    {
      Tape::Scope scope(tape);
      value = loss();
    }
    const auto grads = gradients(tape, value, model.params().tensors());

    const auto tensors = model.params().tensors();
    std::vector<std::size_t> offsets{0};
    for (const auto& t : tensors) offsets.push_back(offsets.back() + t.numel());
    // Richardson-extrapolated central differences: O(h^4) truncation error.
    const double h = 4e-4;
    auto central = [&](Real* slot, double step) {
      const Real orig = *slot;
      *slot = orig + step;
      const double up = loss().item();
      *slot = orig - step;
      const double down = loss().item();
      *slot = orig;
      return (up - down) / (2 * step);
    };
    double worst = 0;
    std::string worst_at;
    for (int p = 0; p < probes; ++p) {
      const std::size_t flat = pick(rng, 0, offsets.back() - 1);
      const std::size_t k = std::size_t(std::upper_bound(offsets.begin(), offsets.end(), flat) - offsets.begin()) - 1;
      const std::size_t i = flat - offsets[k];
      Tensor param = tensors[k];
      Real* slot = param.data_mut() + i;
      const double numeric = (4 * central(slot, h / 2) - central(slot, h)) / 3, analytic = grads[k][i];
      const double rel = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
      if (rel > worst) {
        worst = rel;
        worst_at = model.params().names()[k] + "[" + std::to_string(i) + "]";
      }
    }
    return finish(name, start, worst < 1e-4,
                  std::to_string(probes) + " probes, max relative error " + fmt(worst) +
                      (worst_at.empty() ? "" : " at " + worst_at) + " (limit 1e-4)");
  });
}

CheckResult check_normalization(std::uint64_t seed, int trials) {
  const std::string name = "normalization";
  return guarded(name, [&] {
    const auto start = Clock::now();
    std::mt19937_64 rng(seed);
    ModelParams params;
    std::mt19937_64 init(seed + 1);
    const UpsampleHead head(8, 8, 4, params, init);
    double sum_err = 0, min_disp = INFINITY, depth_excess = 0;
    for (int t = 0; t < trials; ++t) {
      const std::size_t h = pick(rng, 1, 6), w = pick(rng, 1, 6), d = pick(rng, 1, 8);
      const Real amp = Real(pick(rng, 1, 20));
      const Tensor f1 = random_tensor({h, w, d}, rng, -amp, amp), f2 = random_tensor({h, w, d}, rng, -amp, amp);
      sum_err = std::max(sum_err, row_sum_error(flow_distribution(flow_correlation(f1, f2))));
      sum_err = std::max(sum_err, row_sum_error(disparity_distribution(f1, f2)));
      const DenseField disp = disparity_match(f1, f2);
      for (Real v : disp.values.values()) min_disp = std::min(min_disp, double(v));
      const CameraSetup cam = random_camera(rng, h, w);
      sum_err = std::max(sum_err, row_sum_error(depth_distribution(f1, f2, cam)));
      const DenseField depth = depth_match(f1, f2, cam);
      for (Real v : depth.values.values()) {
        depth_excess = std::max({depth_excess, cam.d_min - v, v - cam.d_max});
      }
      const int r = int(pick(rng, 1, 4));
      const Tensor logits = random_tensor({h, w, std::size_t(r * r * 9)}, rng, -30, 30);
      sum_err = std::max(sum_err, row_sum_error(reshape(normalize_upsample_weights(logits, r).values,
                                                        {h * w * std::size_t(r * r), 9})));
      const DenseField coarse{FieldKind::kFlow, random_tensor({h, w, 2}, rng, -4, 4), 8};
      const Tensor uw = head.weights(random_tensor({h, w, 8}, rng, -3, 3), coarse).values;
      sum_err = std::max(sum_err, row_sum_error(reshape(uw, {h * w * 16, 9})));
    }
    const bool ok = sum_err < 1e-6 && min_disp >= 0 && depth_excess <= 0;
    return finish(name, start, ok,
                  std::to_string(trials) + " trials, max |sum - 1| " + fmt(sum_err) + ", min disparity " +
                      fmt(min_disp) + ", depth range excess " + fmt(depth_excess));
  });
}

CheckResult check_bidirectional(std::uint64_t seed, int pairs) {
  const std::string name = "bidirectional consistency";
  return guarded(name, [&] {
    const auto start = Clock::now();
    std::mt19937_64 rng(seed);
    double match_err = 0, model_err = 0;
    for (int t = 0; t < pairs; ++t) {
      const std::size_t h = pick(rng, 1, 8), w = pick(rng, 1, 8), d = pick(rng, 1, 16);
      const Tensor f1 = random_tensor({h, w, d}, rng, -3, 3), f2 = random_tensor({h, w, d}, rng, -3, 3);
      const DenseField back = backward_flow(flow_correlation(f1, f2));
      const DenseField swapped = flow_from_correlation(flow_correlation(f2, f1));
      for (std::size_t i = 0; i < back.values.numel(); ++i)
        match_err = std::max(match_err, std::abs(back.values[i] - swapped.values[i]));
    }
    const UniMatch model(tiny_flow_model(seed));
    const int model_pairs = std::max(1, pairs / 10);
    for (int t = 0; t < model_pairs; ++t) {
      const Tensor a = random_tensor({32, 32, 3}, rng), b = random_tensor({32, 32, 3}, rng);
      const Prediction both = model.flow(a, b, {true, true});
      const DenseField reverse = model.flow(b, a).final();
      for (std::size_t i = 0; i < reverse.values.numel(); ++i)
        model_err = std::max(model_err, std::abs(both.backward->values[i] - reverse.values[i]));
    }
    return finish(name, start, match_err < 1e-6 && model_err < 1e-6,
                  std::to_string(pairs) + " matching pairs, max error " + fmt(match_err) + "; " +
                      std::to_string(model_pairs) + " model pairs, max error " + fmt(model_err) + " (limit 1e-6)");
  });
}

CheckResult check_geometry(std::uint64_t seed, int configs) {
  const std::string name = "geometry";
  return guarded(name, [&] {
    const auto start = Clock::now();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0, 1);
    double warp_err = 0, bin_err = 0;
    const std::size_t h = 3, w = 12, dim = 16;
    for (int t = 0; t < configs; ++t) {
      // Warp oracle at random depths.
      const double focal = 2 + 6 * u(rng), d_star = 1.5 + 4 * u(rng);
      const long disparity = long(pick(rng, 1, 3));
      const double baseline = double(disparity) * d_star / focal;
      const CameraSetup cam = CameraSetup::rectified(focal, (w - 1) / 2.0, 1, baseline, 1, 8, 16);
      for (int k = 0; k < 4; ++k) {
        const double depth = 0.5 + 10 * u(rng);
        const WarpGrid g = plane_sweep_warp(cam, depth, h, w);
        for (std::size_t y = 0; y < h; ++y)
          for (std::size_t x = 0; x < w; ++x) {
            const std::size_t i = (y * w + x) * 2;
            warp_err = std::max({warp_err, std::abs(g.coords[i] - (double(x) - focal * baseline / depth)),
                                 std::abs(g.coords[i + 1] - double(y))});
          }
      }
      // Saturated codes shifted by an integer disparity.
      const Tensor f1 = one_hot(h, w, dim, [](std::size_t, std::size_t x) { return long(x); }, 12);
      const Tensor f2 = one_hot(h, w, dim, [&](std::size_t, std::size_t x) { return long(x) + disparity; }, 12);
      const DenseField depth = depth_match(f1, f2, cam);
      const DenseField disp = disparity_match(f1, f2);
      const double bin = (1.0 / cam.d_min - 1.0 / cam.d_max) / (cam.num_candidates - 1);
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = std::size_t(disparity); x < w; ++x) {
          const double inv_depth = 1 / depth.values[y * w + x];
          const double inv_from_disp = disp.values[y * w + x] / (focal * baseline);
          bin_err = std::max({bin_err, std::abs(inv_depth - inv_from_disp) / bin, std::abs(inv_depth - 1 / d_star) / bin});
        }
    }
    return finish(name, start, warp_err < 1e-9 && bin_err < 1,
                  std::to_string(configs) + " configurations, warp error " + fmt(warp_err) +
                      " (limit 1e-9), depth vs disparity " + fmt(bin_err) + " bins (limit 1)");
  });
}

CheckResult check_codecs(std::uint64_t seed) {
  const std::string name = "codec round trips";
  return guarded(name, [&] {
    const auto start = Clock::now();
    std::mt19937_64 rng(seed);
    auto field = [&](FieldKind kind, Real lo, Real hi, double step) {
      DenseField f{kind, random_tensor({pick(rng, 1, 9), pick(rng, 1, 9), field_channels(kind)}, rng, lo, hi), 1};
      for (auto& v : f.values.values_mut()) v = step > 0 ? std::round(v / step) * step : Real(float(v));
      return f;
    };
    auto same = [](const Tensor& a, const Tensor& b) {
      return a.shape() == b.shape() && std::equal(a.values().begin(), a.values().end(), b.values().begin());
    };
    std::vector<std::string> failed;
    const DenseField flo = field(FieldKind::kFlow, -50, 50, 0);
    if (!same(decode_flo(encode_flo(flo)).values, flo.values)) failed.push_back(".flo");
    const DenseField kitti = field(FieldKind::kFlow, -300, 300, 1.0 / 64);
    if (!same(decode_kitti_flow(encode_kitti_flow(kitti)).field.values, kitti.values)) failed.push_back("KITTI flow");
    const DenseField disp = field(FieldKind::kDisparity, 0, 200, 1.0 / 256);
    if (!same(decode_kitti_disparity(encode_kitti_disparity(disp)).field.values, disp.values)) {
      failed.push_back("KITTI disparity");
    }
    const DenseField pfm = field(FieldKind::kDisparity, 0, 200, 0);
    if (!same(decode_pfm(encode_pfm(pfm), FieldKind::kDisparity).values, pfm.values)) failed.push_back("PFM");
    const DenseField depth = field(FieldKind::kDepth, 0.5, 10, 0.001);
    const Bytes depth_png = encode_depth_png(depth);
    if (encode_depth_png(decode_depth_png(depth_png).field) != depth_png) failed.push_back("depth PNG");
    Tensor img = random_tensor({pick(rng, 1, 9), pick(rng, 1, 9), 3}, rng);
    for (auto& v : img.values_mut()) v = std::round((v + 1) / 2 * 255) / 255 * 2 - 1;
    if (!same(decode_image(encode_image(img)), img)) failed.push_back("image PNG");
    const CameraSetup cam = random_camera(rng, 8, 8);
    if (format_cameras(parse_cameras(format_cameras(cam))) != format_cameras(cam)) failed.push_back("cameras");
    std::string detail = failed.empty() ? "flo, KITTI flow/disparity, PFM, depth PNG, image PNG, cameras" : "failed:";
    for (const auto& f : failed) detail += " " + f;
    return finish(name, start, failed.empty(), detail);
  });
}

std::vector<CheckResult> run_selfcheck(std::uint64_t seed) {
  return {check_primitive_oracles(seed),    check_pipeline_gradients(seed + 1), check_normalization(seed + 2),
          check_bidirectional(seed + 3),    check_geometry(seed + 4),          check_codecs(seed + 5)};
}

}  // namespace unimatch
