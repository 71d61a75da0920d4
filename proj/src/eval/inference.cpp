#include "unimatch/inference.hpp"

#include "unimatch/errors.hpp"

namespace unimatch {

Tensor replicate_pad(const Tensor& image, std::size_t mh, std::size_t mw) {
  if (image.rank() != 3 || image.dim(0) == 0 || image.dim(1) == 0) {
    throw InputError("replicate_pad: expected a non-empty [H x W x C] image, got " + shape_str(image.shape()));
  }
  if (mh == 0 || mw == 0) throw ContractError("replicate_pad: zero multiple");
  const std::size_t h = image.dim(0), w = image.dim(1), c = image.dim(2);
  const std::size_t ph = (h + mh - 1) / mh * mh, pw = (w + mw - 1) / mw * mw;
  if (ph == h && pw == w) return image;
  Tensor out(Shape{ph, pw, c});
  for (std::size_t y = 0; y < ph; ++y)
    for (std::size_t x = 0; x < pw; ++x) {
      const Real* src = image.data() + (std::min(y, h - 1) * w + std::min(x, w - 1)) * c;
      std::copy(src, src + c, out.data_mut() + (y * pw + x) * c);
    }
  return out;
}

DenseField crop_field(const DenseField& f, std::size_t height, std::size_t width) {
  check_field(f, "crop_field");
  if (height > f.height() || width > f.width()) {
    throw ContractError("crop_field: window larger than the field");
  }
  if (height == f.height() && width == f.width()) return f;
  const std::size_t c = f.channels(), w = f.width();
  Tensor out(Shape{height, width, c});
  for (std::size_t y = 0; y < height; ++y) {
    const Real* src = f.values.data() + y * w * c;
    std::copy(src, src + width * c, out.data_mut() + y * width * c);
  }
  return {f.kind, out, f.stride};
}

Prediction infer_padded(const UniMatch& model, Task task, const Tensor& img1, const Tensor& img2,
                        const CameraSetup* cam, const InferenceOptions& opts) {
  if (img1.shape() != img2.shape()) {
    throw InputError("images differ in extent: " + shape_str(img1.shape()) + " vs " + shape_str(img2.shape()));
  }
  const auto [mh, mw] = model.config().input_multiple(task);
  const std::size_t h = img1.dim(0), w = img1.dim(1);
  Prediction p = model.run(task, replicate_pad(img1, mh, mw), replicate_pad(img2, mh, mw), cam, opts);
  for (auto& f : p.sequence) f = crop_field(f, h, w);
  if (p.backward) p.backward = crop_field(*p.backward, h, w);
  return p;
}

}  // namespace unimatch
