#pragma once

#include "unimatch/model.hpp"

namespace unimatch {

/// Extends an [H x W x C] image to multiples of (mh, mw) by repeating its last
/// row and column.
Tensor replicate_pad(const Tensor& image, std::size_t mh, std::size_t mw);

/// Top-left [height x width] window of a field.
DenseField crop_field(const DenseField& f, std::size_t height, std::size_t width);

/// Runs `task` on images of any extent: pads to the model's input multiple,
/// then crops every prediction back to the input extent.
Prediction infer_padded(const UniMatch& model, Task task, const Tensor& img1, const Tensor& img2,
                        const CameraSetup* cam = nullptr, const InferenceOptions& opts = {});

}  // namespace unimatch
