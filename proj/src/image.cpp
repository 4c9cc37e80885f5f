#include "xsplat/image.hpp"

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "xsplat/errors.hpp"

namespace xsplat {

double ProjectionImage::max_value() const {
    double m = 0.0;
    for (double v : pixels) m = std::max(m, v);
    return m;
}

void write_pfm(const std::filesystem::path& file, const ProjectionImage& img) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw IoError("write_pfm: cannot open " + file.string());
    out << "Pf\n" << img.width << " " << img.height << "\n-1.0\n";
    std::vector<float> row(img.width);
    for (int y = img.height - 1; y >= 0; --y) {
        for (int x = 0; x < img.width; ++x) row[x] = static_cast<float>(img.at(x, y));
        out.write(reinterpret_cast<const char*>(row.data()),
                  std::streamsize(row.size() * sizeof(float)));
    }
    if (!out) throw IoError("write_pfm: write failed for " + file.string());
}

ProjectionImage read_pfm(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw IoError("read_pfm: cannot open " + file.string());
    std::string magic;
    int w = 0, h = 0;
    double scale = 0.0;
    in >> magic >> w >> h >> scale;
    if (magic != "Pf" || w <= 0 || h <= 0)
        throw IoError("read_pfm: not a grayscale PFM: " + file.string());
    in.get();  // single whitespace after the header
    ProjectionImage img;
    img.width = w;
    img.height = h;
    img.pixels.assign(std::size_t(w) * h, 0.0);
    std::vector<float> row(w);
    for (int y = h - 1; y >= 0; --y) {
        in.read(reinterpret_cast<char*>(row.data()), std::streamsize(row.size() * sizeof(float)));
        if (!in) throw IoError("read_pfm: truncated data in " + file.string());
        if (scale > 0) {  // big-endian payload
            for (auto& v : row) {
                std::uint32_t bits;
                std::memcpy(&bits, &v, 4);
                bits = __builtin_bswap32(bits);
                std::memcpy(&v, &bits, 4);
            }
        }
        for (int x = 0; x < w; ++x) img.at(x, y) = row[x];
    }
    return img;
}

}  // namespace xsplat
