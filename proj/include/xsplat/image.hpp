#pragma once

#include <filesystem>
#include <vector>

#include "xsplat/geometry.hpp"

namespace xsplat {

/// Single-channel line-integral image (density * mm) with the camera that
/// produced it. Pixel (x, y) covers [x, x+1) x [y, y+1) in continuous
/// coordinates; samples are taken at pixel centers (x+0.5, y+0.5).
struct ProjectionImage {
    int width = 0;
    int height = 0;
    std::vector<double> pixels;  // row-major, pixels[y * width + x]
    Camera camera;

    ProjectionImage() = default;
    ProjectionImage(int w, int h, const Camera& cam)
        : width(w), height(h), pixels(std::size_t(w) * h, 0.0), camera(cam) {}

    double& at(int x, int y) { return pixels[std::size_t(y) * width + x]; }
    double at(int x, int y) const { return pixels[std::size_t(y) * width + x]; }
    double max_value() const;
};

// PFM (portable float map), grayscale "Pf", little-endian, rows stored
// bottom-to-top as the format prescribes. Values are written as float32.
void write_pfm(const std::filesystem::path& file, const ProjectionImage& img);
ProjectionImage read_pfm(const std::filesystem::path& file);

}  // namespace xsplat
