#pragma once

#include "modelseg/image.hpp"

namespace modelseg {

struct ImageGradients {
  ImageGrid du;
  ImageGrid dv;
};

// Per-channel central differences with replicated borders, so the border
// derivative is half the one-sided difference. Requires width, height >= 2.
ImageGradients gradients(const ImageGrid& image);

// k-norm gradient magnitude summed over channels:
//   G(u,v) = sum_i |dW_i/du|^k + |dW_i/dv|^k,  k in {1, 2}.
// Always returns a 1-channel grid of the input's size.
ImageGrid gradient_magnitude(const ImageGrid& image, int k);
// Same, writing into `out` (reshaped as needed). `out` must not alias `image`.
void gradient_magnitude_into(const ImageGrid& image, int k, ImageGrid& out);

// One pyramid step: separable (1,4,6,4,1)/16 smoothing with replicated
// borders, then keeping even rows/columns. Output size is floor(dim / 2).
ImageGrid pyramid_reduce(const ImageGrid& image);
// Same, writing into `out` and using `scratch` for the horizontal pass.
// Neither may alias `image`.
void pyramid_reduce_into(const ImageGrid& image, ImageGrid& out, ImageGrid& scratch);

// `levels` applications of pyramid_reduce. Level 0 returns a copy.
// Throws ArgumentError if any dimension would drop below 2.
ImageGrid gaussian_pyramid_level(const ImageGrid& image, int levels);

// Separable sampled Gaussian with standard deviation `sigma` (pixels),
// truncated at ceil(3 sigma) and renormalised. sigma == 0 is the identity.
ImageGrid gaussian_blur(const ImageGrid& image, double sigma);

// Pearson product-moment correlation over all elements.
// Throws ArgumentError on shape mismatch and DegenerateCorrelationError when
// either operand has zero variance.
double pearson(const ImageGrid& a, const ImageGrid& b);

// Rec. 601 luma for 3-channel input, channel mean otherwise. 1-channel input
// is returned unchanged.
ImageGrid luminance(const ImageGrid& image);

// Copy of `image` with every pixel outside `mask` set to 0.
ImageGrid apply_mask(const ImageGrid& image, const BinaryGrid& mask);

// Morphology with the disc structuring element {(dx,dy) : dx^2+dy^2 <= r^2}.
// `outside` is the value assumed for pixels beyond the grid. With the
// defaults, erosion eats an r-wide border off a full grid and dilation never
// grows from the border. Duality: erode(M, r, o) == ~dilate(~M, r, !o).
BinaryGrid dilate(const BinaryGrid& mask, double radius, bool outside = false);
BinaryGrid erode(const BinaryGrid& mask, double radius, bool outside = false);

// Fills every region enclosed by `outline`: pixels not 4-connected to the grid
// border through non-outline pixels, plus the outline itself.
BinaryGrid fill_outline(const BinaryGrid& outline);

// Set pixels that are 4-adjacent to an unset pixel or to the grid border.
BinaryGrid boundary_pixels(const BinaryGrid& mask);

}  // namespace modelseg
