#pragma once

#include "xsplat/image.hpp"
#include "xsplat/volume.hpp"

namespace xsplat {

/// Digitally reconstructed radiograph: per pixel, midpoint integration of the
/// volume along the pixel ray over the grid bounding box, accumulating
/// density * step only where the sampled density strictly exceeds the
/// threshold. step_mm bounds the sample spacing; the actual step divides the
/// clipped ray segment exactly. step_mm <= 0 selects half the minimum voxel
/// spacing.
ProjectionImage render_drr(const Volume& v, const Camera& camera,
                           double threshold = 0.0, double step_mm = 0.0);

}  // namespace xsplat
