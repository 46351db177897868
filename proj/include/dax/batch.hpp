#pragma once

#include <span>

#include "dax/image.hpp"
#include "dax/nn/tensor.hpp"

namespace dax {

// Packs HWC images into one NCHW tensor.
nn::Tensor to_batch(std::span<const Image> images);
nn::Tensor to_batch(const Image& image);

// Extracts sample n of an [N,1,H,W] tensor as a grid.
Grid plane(const nn::Tensor& t, int n);

}  // namespace dax
