#pragma once

#include "depthpatch/core.hpp"

namespace depthpatch {

// Bilinear resize with the half-pixel-center convention and clamped borders.
ImageRGB resize_bilinear(const ImageRGB& src, int out_h, int out_w);
Grid resize_bilinear(const Grid& src, int out_h, int out_w);

// Adjoint of resize_bilinear: scatters an (out_h x out_w) gradient back onto
// the (in_h x in_w) source.
ImageRGB resize_bilinear_vjp(const ImageRGB& grad_out, int in_h, int in_w);
Grid resize_bilinear_vjp(const Grid& grad_out, int in_h, int in_w);

}  // namespace depthpatch
