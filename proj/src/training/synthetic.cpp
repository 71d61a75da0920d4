#include "unimatch/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "unimatch/errors.hpp"

namespace unimatch {
namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double smoothstep(double t) { return t * t * t * (t * (t * 6 - 15) + 10); }

Texture make_texture(std::uint64_t seed, const SyntheticConfig& cfg) {
  return Texture(seed, cfg.texture_cell, cfg.texture_octaves, cfg.texture_persistence);
}

struct Layer {
  double x0, y0, x1, y1;  // rectangle in image-1 coordinates (background: everything)
  double disparity;
  Texture texture;
};

// Renders a rectified pair: image 1 sees layer content at x, image 2 at x - disparity.
void render_layers(const std::vector<Layer>& layers, std::size_t h, std::size_t w,
                   SyntheticSample& s) {
  s.img1 = Tensor(Shape{h, w, 3});
  s.img2 = Tensor(Shape{h, w, 3});
  Tensor gt(Shape{h, w, 1});
  auto front = [&](double x, double y, double shift) -> const Layer& {
    // Layers are ordered back to front; the last one containing the point wins.
    for (std::size_t k = layers.size(); k-- > 1;) {
      const Layer& l = layers[k];
      const double xs = x + (shift ? l.disparity : 0);
      if (xs >= l.x0 && xs < l.x1 && y >= l.y0 && y < l.y1) return l;
    }
    return layers.front();
  };
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const double fx = static_cast<double>(x), fy = static_cast<double>(y);
      const Layer& l1 = front(fx, fy, false);
      l1.texture.sample(fx, fy, s.img1.data_mut() + (y * w + x) * 3);
      gt.data_mut()[y * w + x] = l1.disparity;
      const Layer& l2 = front(fx, fy, true);
      l2.texture.sample(fx + l2.disparity, fy, s.img2.data_mut() + (y * w + x) * 3);
    }
  s.gt = {FieldKind::kDisparity, gt, 1};
}

std::vector<Layer> random_layers(std::mt19937_64& rng, const SyntheticConfig& cfg,
                                 double d_lo, double d_hi) {
  std::uniform_real_distribution<double> u(0, 1);
  const double w = static_cast<double>(cfg.width), h = static_cast<double>(cfg.height);
  std::vector<Layer> layers;
  const double back = d_lo + (d_hi - d_lo) * 0.3 * u(rng);
  layers.push_back({0, 0, w, h, back, make_texture(rng(), cfg)});
  const int n = std::uniform_int_distribution<int>(0, cfg.max_layers)(rng);
  double last = back;
  for (int i = 0; i < n; ++i) {
    const double rw = w * (0.25 + 0.35 * u(rng)), rh = h * (0.25 + 0.35 * u(rng));
    const double x0 = (w - rw) * u(rng), y0 = (h - rh) * u(rng);
    last = last + (d_hi - last) * (0.2 + 0.6 * u(rng));
    layers.push_back({x0, y0, x0 + rw, y0 + rh, last, make_texture(rng(), cfg)});
  }
  return layers;
}

}  // namespace

Texture::Texture(std::uint64_t seed, double cell, int octaves, double persistence)
    : seed_(seed), cell_(cell), octaves_(octaves), persistence_(persistence) {}

double Texture::lattice(long ix, long iy, int channel, int octave) const {
  std::uint64_t k = seed_;
  k = mix(k ^ static_cast<std::uint64_t>(ix) * 0x100000001b3ULL);
  k = mix(k ^ static_cast<std::uint64_t>(iy) * 0xc2b2ae3d27d4eb4fULL);
  k = mix(k ^ static_cast<std::uint64_t>(channel * 16 + octave));
  return static_cast<double>(k >> 11) * (2.0 / 9007199254740992.0) - 1.0;
}

void Texture::sample(double x, double y, Real* rgb) const {
  for (int c = 0; c < 3; ++c) {
    double value = 0, amp = 1, norm = 0, cell = cell_;
    for (int o = 0; o < octaves_; ++o) {
      const double gx = x / cell, gy = y / cell;
      const double fx = std::floor(gx), fy = std::floor(gy);
      const long ix = static_cast<long>(fx), iy = static_cast<long>(fy);
      const double tx = smoothstep(gx - fx), ty = smoothstep(gy - fy);
      const double a = lattice(ix, iy, c, o), b = lattice(ix + 1, iy, c, o);
      const double d = lattice(ix, iy + 1, c, o), e = lattice(ix + 1, iy + 1, c, o);
      value += amp * ((a * (1 - tx) + b * tx) * (1 - ty) + (d * (1 - tx) + e * tx) * ty);
      norm += amp;
      amp *= persistence_;
      cell *= 0.5;
    }
    rgb[c] = std::clamp(1.6 * value / norm, -1.0, 1.0);
  }
}

void SyntheticConfig::validate() const {
  if (height == 0 || width == 0 || height % 8 || width % 8) {
    throw ConfigError("synthetic extents must be positive multiples of 8");
  }
  if (max_translation < 0 || max_affine < 0 || max_disparity < 0 || max_layers < 0) {
    throw ConfigError("synthetic ranges must be non-negative");
  }
  if (!(focal > 0) || !(baseline > 0) || !(d_min > 0) || !(d_min < d_max) || num_candidates < 2) {
    throw ConfigError("invalid synthetic camera settings");
  }
  if (!(texture_cell > 0) || texture_octaves < 1 || !(texture_persistence > 0)) {
    throw ConfigError("invalid synthetic texture settings");
  }
}

SyntheticSample translation_sample(std::uint64_t seed, double tx, double ty,
                                   const SyntheticConfig& cfg) {
  cfg.validate();
  const std::size_t h = cfg.height, w = cfg.width;
  Texture tex = make_texture(mix(seed ^ 0x51ULL), cfg);
  SyntheticSample s;
  s.seed = seed;
  s.img1 = Tensor(Shape{h, w, 3});
  s.img2 = Tensor(Shape{h, w, 3});
  Tensor gt(Shape{h, w, 2});
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      tex.sample(double(x), double(y), s.img1.data_mut() + (y * w + x) * 3);
      tex.sample(double(x) - tx, double(y) - ty, s.img2.data_mut() + (y * w + x) * 3);
      gt.data_mut()[(y * w + x) * 2] = tx;
      gt.data_mut()[(y * w + x) * 2 + 1] = ty;
    }
  s.gt = {FieldKind::kFlow, gt, 1};
  return s;
}

SyntheticSample plane_sample(std::uint64_t seed, double depth, const SyntheticConfig& cfg) {
  cfg.validate();
  SyntheticSample s;
  s.seed = seed;
  const double w = static_cast<double>(cfg.width), h = static_cast<double>(cfg.height);
  std::vector<Layer> layers{{0, 0, w, h, cfg.focal * cfg.baseline / depth, make_texture(mix(seed), cfg)}};
  render_layers(layers, cfg.height, cfg.width, s);
  s.gt = {FieldKind::kDepth, Tensor(Shape{cfg.height, cfg.width, 1}, depth), 1};
  s.cam = CameraSetup::rectified(cfg.focal, (w - 1) / 2, (h - 1) / 2, cfg.baseline, cfg.d_min,
                                 cfg.d_max, cfg.num_candidates);
  return s;
}

SyntheticSample generate_sample(Task task, std::uint64_t seed, const SyntheticConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(mix(seed ^ (static_cast<std::uint64_t>(task) + 1) * 0x7f4a7c15ULL));
  std::uniform_real_distribution<double> u(-1, 1);
  const std::size_t h = cfg.height, w = cfg.width;
  SyntheticSample s;
  s.seed = seed;
  switch (task) {
    case Task::kFlow: {
      const double tx = cfg.max_translation * u(rng), ty = cfg.max_translation * u(rng);
      if (cfg.motion == FlowMotion::kTranslation) {
        SyntheticSample t = translation_sample(rng(), tx, ty, cfg);
        t.seed = seed;
        return t;
      }
      // Image 2 at q shows the texture at A^-1 (q - t) about the image centre.
      const double a = 1 + cfg.max_affine * u(rng), b = cfg.max_affine * u(rng);
      const double c = cfg.max_affine * u(rng), d = 1 + cfg.max_affine * u(rng);
      const double cx = (w - 1) / 2.0, cy = (h - 1) / 2.0, det = a * d - b * c;
      Texture tex = make_texture(rng(), cfg);
      s.img1 = Tensor(Shape{h, w, 3});
      s.img2 = Tensor(Shape{h, w, 3});
      Tensor gt(Shape{h, w, 2});
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
          const double px = x - cx, py = y - cy;
          tex.sample(double(x), double(y), s.img1.data_mut() + (y * w + x) * 3);
          gt.data_mut()[(y * w + x) * 2] = a * px + b * py + tx - px;
          gt.data_mut()[(y * w + x) * 2 + 1] = c * px + d * py + ty - py;
          const double qx = px - tx, qy = py - ty;
          tex.sample((d * qx - b * qy) / det + cx, (-c * qx + a * qy) / det + cy,
                     s.img2.data_mut() + (y * w + x) * 3);
        }
      s.gt = {FieldKind::kFlow, gt, 1};
      return s;
    }
    case Task::kStereo: {
      render_layers(random_layers(rng, cfg, 0.5, cfg.max_disparity), h, w, s);
      return s;
    }
    case Task::kDepth: {
      // Layer disparities f * b / z for depths within the camera range.
      const double fb = cfg.focal * cfg.baseline;
      const double disp_far = fb / std::min(cfg.d_max, 4.0), disp_near = fb / std::max(cfg.d_min, 0.5);
      auto layers = random_layers(rng, cfg, disp_far, disp_near);
      render_layers(layers, h, w, s);
      Tensor depth(Shape{h, w, 1});
      for (std::size_t i = 0; i < h * w; ++i) depth.data_mut()[i] = fb / s.gt.values[i];
      s.gt = {FieldKind::kDepth, depth, 1};
      s.cam = CameraSetup::rectified(cfg.focal, (w - 1) / 2.0, (h - 1) / 2.0, cfg.baseline,
                                     cfg.d_min, cfg.d_max, cfg.num_candidates);
      return s;
    }
  }
  throw ConfigError("unknown task");
}

std::vector<SyntheticSample> generate_synthetic(Task task, std::uint64_t seed, std::size_t count,
                                                const SyntheticConfig& cfg) {
  std::vector<SyntheticSample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(generate_sample(task, mix(seed + i), cfg));
  return out;
}

}  // namespace unimatch
