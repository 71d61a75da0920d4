#include "unimatch/io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <csetjmp>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "unimatch/errors.hpp"

namespace unimatch {
namespace {

static_assert(std::endian::native == std::endian::little, "little-endian host required");

[[noreturn]] void format_fail(const std::string& codec, const std::string& msg, std::size_t offset) {
  throw FormatError(codec + ": " + msg + " at byte offset " + std::to_string(offset));
}

template <typename T>
void put(Bytes& out, T v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
T get(std::span<const std::uint8_t> b, std::size_t offset, const char* codec) {
  if (offset + sizeof(T) > b.size()) format_fail(codec, "truncated data", b.size());
  T v;
  std::memcpy(&v, b.data() + offset, sizeof(T));
  return v;
}

void check_mask(std::span<const std::uint8_t> valid, const DenseField& f, const char* where) {
  if (!valid.empty() && valid.size() != f.height() * f.width()) {
    throw ContractError(std::string(where) + ": valid mask size does not match the field");
  }
}

void check_kind(const DenseField& f, FieldKind kind, const char* where) {
  check_field(f, where);
  if (f.kind != kind) {
    throw ContractError(std::string(where) + ": expected a " + to_string(kind) + " field, got " +
                        to_string(f.kind));
  }
}

std::uint16_t quantize16(double v) {
  return static_cast<std::uint16_t>(std::clamp(std::nearbyint(v), 0.0, 65535.0));
}

// libpng reports errors through longjmp, so the functions holding a jmp_buf
// keep only trivially destructible locals; buffers live in caller-owned structs.

struct PngState {
  const std::uint8_t* in = nullptr;
  std::size_t in_size = 0;
  std::size_t pos = 0;
  Bytes* out = nullptr;
  char message[256] = {};
};

struct RawImage {
  std::uint32_t width = 0, height = 0;
  int channels = 0;
  int bit_depth = 0;
  std::vector<std::uint8_t> pixels;
  std::vector<png_bytep> rows;
};

void on_png_error(png_structp png, png_const_charp msg) {
  auto* st = static_cast<PngState*>(png_get_error_ptr(png));
  std::snprintf(st->message, sizeof st->message, "%s", msg);
  png_longjmp(png, 1);
}

void on_png_warning(png_structp, png_const_charp) {}

void png_read_mem(png_structp png, png_bytep dst, png_size_t n) {
  auto* st = static_cast<PngState*>(png_get_io_ptr(png));
  if (st->in_size - st->pos < n) png_error(png, "truncated data");
  std::memcpy(dst, st->in + st->pos, n);
  st->pos += n;
}

void png_write_mem(png_structp png, png_bytep src, png_size_t n) {
  auto* st = static_cast<PngState*>(png_get_io_ptr(png));
  st->out->insert(st->out->end(), src, src + n);
}

void png_flush_mem(png_structp) {}

// Expands palette and low-bit gray, converts 8-bit input to RGB without alpha
// when `rgb8` is set. 16-bit data is delivered in host byte order.
bool png_decode_raw(PngState* st, RawImage* img, bool rgb8) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, st, on_png_error, on_png_warning);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_set_read_fn(png, st, png_read_mem);
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (rgb8) {
    if (depth == 16) png_set_strip_16(png);
    png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  } else if (depth == 16) {
    png_set_swap(png);
  }
  png_read_update_info(png, info);
  img->width = png_get_image_width(png, info);
  img->height = png_get_image_height(png, info);
  img->channels = png_get_channels(png, info);
  img->bit_depth = png_get_bit_depth(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  img->pixels.resize(stride * img->height);
  img->rows.resize(img->height);
  for (std::uint32_t y = 0; y < img->height; ++y) img->rows[y] = img->pixels.data() + y * stride;
  png_read_image(png, img->rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

bool png_encode_raw(PngState* st, RawImage* img) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, st, on_png_error, on_png_warning);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_set_write_fn(png, st, png_write_mem, png_flush_mem);
  const int color = img->channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
  png_set_IHDR(png, info, img->width, img->height, img->bit_depth, color, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (img->bit_depth == 16) png_set_swap(png);
  png_write_image(png, img->rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

RawImage decode_png(std::span<const std::uint8_t> bytes, const char* codec, bool rgb8) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
    format_fail(codec, "missing PNG signature", 0);
  }
  PngState st;
  st.in = bytes.data();
  st.in_size = bytes.size();
  RawImage img;
  if (!png_decode_raw(&st, &img, rgb8)) {
    format_fail(codec, st.message[0] ? st.message : "libpng failure", st.pos);
  }
  return img;
}

RawImage decode_png16(std::span<const std::uint8_t> bytes, const char* codec, int channels) {
  RawImage img = decode_png(bytes, codec, false);
  if (img.bit_depth != 16 || img.channels != channels) {
    format_fail(codec,
                "expected a 16-bit PNG with " + std::to_string(channels) + " channel(s), got " +
                    std::to_string(img.bit_depth) + "-bit with " + std::to_string(img.channels),
                24);
  }
  return img;
}

Bytes encode_png(RawImage& img, const char* codec) {
  const std::size_t stride = std::size_t(img.width) * img.channels * (img.bit_depth / 8);
  img.rows.resize(img.height);
  for (std::uint32_t y = 0; y < img.height; ++y) img.rows[y] = img.pixels.data() + y * stride;
  Bytes out;
  PngState st;
  st.out = &out;
  if (!png_encode_raw(&st, &img)) {
    throw FormatError(std::string(codec) + ": " + (st.message[0] ? st.message : "libpng failure"));
  }
  return out;
}

RawImage blank(std::size_t h, std::size_t w, int channels, int bit_depth) {
  if (h == 0 || w == 0 || h > 0x7fffffff || w > 0x7fffffff) {
    throw ContractError("PNG extents must be positive");
  }
  RawImage img;
  img.width = static_cast<std::uint32_t>(w);
  img.height = static_cast<std::uint32_t>(h);
  img.channels = channels;
  img.bit_depth = bit_depth;
  img.pixels.resize(h * w * channels * (bit_depth / 8));
  return img;
}

std::uint16_t* words(RawImage& img) { return reinterpret_cast<std::uint16_t*>(img.pixels.data()); }

Bytes encode_gray16(const DenseField& f, std::span<const std::uint8_t> valid, double scale) {
  RawImage img = blank(f.height(), f.width(), 1, 16);
  std::uint16_t* out = words(img);
  const auto v = f.values.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = (!valid.empty() && !valid[i]) ? 0 : quantize16(v[i] * scale);
  }
  return encode_png(img, "16-bit PNG");
}

FieldWithMask decode_gray16(std::span<const std::uint8_t> bytes, FieldKind kind, double scale,
                            const char* codec) {
  RawImage img = decode_png16(bytes, codec, 1);
  FieldWithMask r;
  r.field = {kind, Tensor(Shape{img.height, img.width, 1}), 1};
  r.valid.resize(std::size_t(img.height) * img.width);
  auto out = r.field.values.values_mut();
  const std::uint16_t* in = words(img);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = in[i] / scale;
    r.valid[i] = in[i] > 0;
  }
  return r;
}

std::string extension(const std::string& path) {
  const auto dot = path.find_last_of('.');
  if (dot == std::string::npos) return "";
  std::string ext = path.substr(dot);
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

}  // namespace

Bytes encode_flo(const DenseField& flow) {
  check_kind(flow, FieldKind::kFlow, "encode_flo");
  Bytes out;
  out.reserve(12 + flow.values.numel() * 4);
  put<float>(out, 202021.25f);
  put<std::int32_t>(out, static_cast<std::int32_t>(flow.width()));
  put<std::int32_t>(out, static_cast<std::int32_t>(flow.height()));
  for (Real v : flow.values.values()) put<float>(out, static_cast<float>(v));
  return out;
}

DenseField decode_flo(std::span<const std::uint8_t> bytes) {
  const char* codec = ".flo";
  if (get<float>(bytes, 0, codec) != 202021.25f) format_fail(codec, "bad magic", 0);
  const auto w = get<std::int32_t>(bytes, 4, codec);
  const auto h = get<std::int32_t>(bytes, 8, codec);
  if (w <= 0 || h <= 0) format_fail(codec, "non-positive extents", 4);
  const std::size_t n = std::size_t(w) * std::size_t(h) * 2;
  if (bytes.size() != 12 + n * 4) {
    format_fail(codec,
                "expected " + std::to_string(12 + n * 4) + " bytes, found " + std::to_string(bytes.size()),
                std::min(bytes.size(), 12 + n * 4));
  }
  DenseField f{FieldKind::kFlow, Tensor(Shape{std::size_t(h), std::size_t(w), 2}), 1};
  auto out = f.values.values_mut();
  for (std::size_t i = 0; i < n; ++i) out[i] = get<float>(bytes, 12 + 4 * i, codec);
  return f;
}

Bytes encode_kitti_flow(const DenseField& flow, std::span<const std::uint8_t> valid) {
  check_kind(flow, FieldKind::kFlow, "encode_kitti_flow");
  check_mask(valid, flow, "encode_kitti_flow");
  RawImage img = blank(flow.height(), flow.width(), 3, 16);
  std::uint16_t* out = words(img);
  const auto v = flow.values.values();
  for (std::size_t i = 0; i < flow.height() * flow.width(); ++i) {
    out[3 * i] = quantize16(v[2 * i] * 64.0 + 32768.0);
    out[3 * i + 1] = quantize16(v[2 * i + 1] * 64.0 + 32768.0);
    out[3 * i + 2] = (valid.empty() || valid[i]) ? 1 : 0;
  }
  return encode_png(img, "KITTI flow PNG");
}

FieldWithMask decode_kitti_flow(std::span<const std::uint8_t> bytes) {
  RawImage img = decode_png16(bytes, "KITTI flow PNG", 3);
  FieldWithMask r;
  r.field = {FieldKind::kFlow, Tensor(Shape{img.height, img.width, 2}), 1};
  const std::size_t n = std::size_t(img.height) * img.width;
  r.valid.resize(n);
  auto out = r.field.values.values_mut();
  const std::uint16_t* in = words(img);
  for (std::size_t i = 0; i < n; ++i) {
    out[2 * i] = (in[3 * i] - 32768.0) / 64.0;
    out[2 * i + 1] = (in[3 * i + 1] - 32768.0) / 64.0;
    r.valid[i] = in[3 * i + 2] != 0;
  }
  return r;
}

Bytes encode_kitti_disparity(const DenseField& disparity, std::span<const std::uint8_t> valid) {
  check_kind(disparity, FieldKind::kDisparity, "encode_kitti_disparity");
  check_mask(valid, disparity, "encode_kitti_disparity");
  return encode_gray16(disparity, valid, 256.0);
}

FieldWithMask decode_kitti_disparity(std::span<const std::uint8_t> bytes) {
  return decode_gray16(bytes, FieldKind::kDisparity, 256.0, "KITTI disparity PNG");
}

Bytes encode_depth_png(const DenseField& depth, std::span<const std::uint8_t> valid) {
  check_kind(depth, FieldKind::kDepth, "encode_depth_png");
  check_mask(valid, depth, "encode_depth_png");
  return encode_gray16(depth, valid, 1000.0);
}

FieldWithMask decode_depth_png(std::span<const std::uint8_t> bytes) {
  return decode_gray16(bytes, FieldKind::kDepth, 1000.0, "depth PNG");
}

Bytes encode_pfm(const DenseField& field) {
  check_field(field, "encode_pfm");
  if (field.channels() != 1) throw ContractError("encode_pfm: single-channel fields only");
  const std::string header =
      "Pf\n" + std::to_string(field.width()) + " " + std::to_string(field.height()) + "\n-1\n";
  Bytes out(header.begin(), header.end());
  const std::size_t h = field.height(), w = field.width();
  const auto v = field.values.values();
  for (std::size_t row = 0; row < h; ++row) {
    const std::size_t y = h - 1 - row;
    for (std::size_t x = 0; x < w; ++x) put<float>(out, static_cast<float>(v[y * w + x]));
  }
  return out;
}

DenseField decode_pfm(std::span<const std::uint8_t> bytes, FieldKind kind) {
  const char* codec = "PFM";
  if (field_channels(kind) != 1) throw ContractError("decode_pfm: single-channel kinds only");
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) ++pos;
    if (start == pos) format_fail(codec, "truncated header", pos);
    return std::pair{std::string(bytes.begin() + start, bytes.begin() + pos), start};
  };
  const auto [magic, magic_at] = token();
  if (magic != "Pf") format_fail(codec, "expected 'Pf' header, found '" + magic + "'", magic_at);
  auto number = [&](const char* what) {
    const auto [text, at] = token();
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (end != text.c_str() + text.size()) format_fail(codec, std::string("bad ") + what, at);
    return std::pair{v, at};
  };
  const auto [wv, w_at] = number("width");
  const auto [hv, h_at] = number("height");
  const auto [scale, scale_at] = number("scale");
  if (wv < 1 || hv < 1 || wv != std::floor(wv) || hv != std::floor(hv)) {
    format_fail(codec, "bad extents", w_at);
  }
  if (scale == 0) format_fail(codec, "zero scale", scale_at);
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) format_fail(codec, "missing header terminator", pos);
  ++pos;
  const auto w = static_cast<std::size_t>(wv), h = static_cast<std::size_t>(hv);
  if (bytes.size() - pos != w * h * 4) {
    format_fail(codec, "expected " + std::to_string(w * h * 4) + " data bytes, found " +
                           std::to_string(bytes.size() - pos), pos);
  }
  DenseField f{kind, Tensor(Shape{h, w, 1}), 1};
  auto out = f.values.values_mut();
  for (std::size_t row = 0; row < h; ++row) {
    const std::size_t y = h - 1 - row;
    for (std::size_t x = 0; x < w; ++x) {
      auto raw = get<std::uint32_t>(bytes, pos + 4 * (row * w + x), codec);
      if (scale > 0) raw = __builtin_bswap32(raw);
      out[y * w + x] = std::bit_cast<float>(raw);
    }
  }
  return f;
}

Tensor decode_image(std::span<const std::uint8_t> bytes) {
  RawImage img = decode_png(bytes, "image PNG", true);
  if (img.channels != 3 || img.bit_depth != 8) format_fail("image PNG", "unsupported pixel format", 24);
  Tensor t(Shape{img.height, img.width, 3});
  auto out = t.values_mut();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = img.pixels[i] / 255.0 * 2.0 - 1.0;
  return t;
}

Bytes encode_image(const Tensor& image) {
  if (image.rank() != 3 || image.dim(2) != 3) {
    throw ContractError("encode_image: expected [H x W x 3], got " + shape_str(image.shape()));
  }
  RawImage img = blank(image.dim(0), image.dim(1), 3, 8);
  const auto v = image.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    img.pixels[i] = static_cast<std::uint8_t>(std::clamp(std::nearbyint((v[i] + 1.0) / 2.0 * 255.0), 0.0, 255.0));
  }
  return encode_png(img, "image PNG");
}

Bytes encode_mask(std::span<const std::uint8_t> mask, std::size_t height, std::size_t width) {
  if (mask.size() != height * width) throw ContractError("encode_mask: size does not match extents");
  RawImage img = blank(height, width, 1, 8);
  for (std::size_t i = 0; i < mask.size(); ++i) img.pixels[i] = mask[i] ? 255 : 0;
  return encode_png(img, "mask PNG");
}

std::vector<std::uint8_t> decode_mask(std::span<const std::uint8_t> bytes, std::size_t* height,
                                      std::size_t* width) {
  RawImage img = decode_png(bytes, "mask PNG", false);
  if (img.channels != 1) format_fail("mask PNG", "expected a single-channel PNG", 24);
  const std::size_t n = std::size_t(img.height) * img.width;
  std::vector<std::uint8_t> mask(n);
  for (std::size_t i = 0; i < n; ++i) {
    mask[i] = img.bit_depth == 16 ? (img.pixels[2 * i] | img.pixels[2 * i + 1]) != 0 : img.pixels[i] != 0;
  }
  if (height) *height = img.height;
  if (width) *width = img.width;
  return mask;
}

CameraSetup parse_cameras(const std::string& text) {
  std::vector<double> nums;
  std::istringstream lines(text);
  std::string line;
  int line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream in(line);
    std::string tok;
    while (in >> tok) {
      char* end = nullptr;
      const double v = std::strtod(tok.c_str(), &end);
      if (end != tok.c_str() + tok.size()) {
        throw FormatError("cameras: bad number '" + tok + "' on line " + std::to_string(line_no));
      }
      nums.push_back(v);
    }
  }
  if (nums.size() != 50 && nums.size() != 52 && nums.size() != 53) {
    throw FormatError("cameras: expected 50 numbers (K1 E1 K2 E2) plus optional d_min d_max [N], got " +
                      std::to_string(nums.size()));
  }
  CameraSetup cam;
  std::copy_n(nums.begin(), 9, cam.k1.begin());
  std::copy_n(nums.begin() + 9, 16, cam.e1.begin());
  std::copy_n(nums.begin() + 25, 9, cam.k2.begin());
  std::copy_n(nums.begin() + 34, 16, cam.e2.begin());
  if (nums.size() >= 52) {
    cam.d_min = nums[50];
    cam.d_max = nums[51];
  }
  if (nums.size() == 53) {
    if (nums[52] != std::floor(nums[52])) throw FormatError("cameras: candidate count must be an integer");
    cam.num_candidates = static_cast<int>(nums[52]);
  }
  cam.validate();
  return cam;
}

std::string format_cameras(const CameraSetup& cam) {
  std::ostringstream out;
  out.precision(17);
  auto row = [&](const double* v, std::size_t n, std::size_t per_line) {
    for (std::size_t i = 0; i < n; ++i) out << v[i] << ((i + 1) % per_line ? " " : "\n");
  };
  out << "# K1\n";
  row(cam.k1.data(), 9, 3);
  out << "# E1\n";
  row(cam.e1.data(), 16, 4);
  out << "# K2\n";
  row(cam.k2.data(), 9, 3);
  out << "# E2\n";
  row(cam.e2.data(), 16, 4);
  out << "# d_min d_max num_candidates\n" << cam.d_min << " " << cam.d_max << " " << cam.num_candidates << "\n";
  return out.str();
}

Bytes read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InputError("failed writing '" + path + "'");
}

FieldWithMask read_field(const std::string& path, FieldKind kind) {
  const std::string ext = extension(path);
  const Bytes bytes = read_file(path);
  try {
    if (kind == FieldKind::kFlow && ext == ".flo") {
      FieldWithMask r{decode_flo(bytes), {}};
      r.valid.assign(r.field.height() * r.field.width(), 1);
      return r;
    }
    if (kind == FieldKind::kFlow && ext == ".png") return decode_kitti_flow(bytes);
    if (kind == FieldKind::kDisparity && ext == ".png") return decode_kitti_disparity(bytes);
    if (kind == FieldKind::kDepth && ext == ".png") return decode_depth_png(bytes);
    if (kind != FieldKind::kFlow && ext == ".pfm") {
      FieldWithMask r{decode_pfm(bytes, kind), {}};
      r.valid.resize(r.field.height() * r.field.width());
      const auto v = r.field.values.values();
      for (std::size_t i = 0; i < v.size(); ++i) r.valid[i] = std::isfinite(v[i]) && (kind != FieldKind::kDepth || v[i] > 0);
      return r;
    }
  } catch (const FormatError& e) {
    throw FormatError("'" + path + "': " + e.what());
  }
  throw InputError("'" + path + "': unsupported extension for a " + to_string(kind) + " field");
}

void write_field(const std::string& path, const DenseField& field, std::span<const std::uint8_t> valid) {
  const std::string ext = extension(path);
  if (field.kind == FieldKind::kFlow && ext == ".flo") return write_file(path, encode_flo(field));
  if (field.kind == FieldKind::kFlow && ext == ".png") return write_file(path, encode_kitti_flow(field, valid));
  if (field.kind == FieldKind::kDisparity && ext == ".png") {
    return write_file(path, encode_kitti_disparity(field, valid));
  }
  if (field.kind == FieldKind::kDepth && ext == ".png") return write_file(path, encode_depth_png(field, valid));
  if (field.kind != FieldKind::kFlow && ext == ".pfm") return write_file(path, encode_pfm(field));
  throw InputError("'" + path + "': unsupported extension for a " + to_string(field.kind) + " field");
}

}  // namespace unimatch
