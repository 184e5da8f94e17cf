#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

namespace fuseid {

/// Row-major 2-D raster; element (row, col) is pixel (y, x).
template <typename Scalar>
using Raster = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using RasterF = Raster<float>;

class ImageError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// 8-bit grayscale image. Width and height are always at least 1.
class GrayImage {
  public:
    GrayImage(int width, int height, std::uint8_t fill = 0);
    explicit GrayImage(Raster<std::uint8_t> pixels);

    int width() const { return static_cast<int>(pixels_.cols()); }
    int height() const { return static_cast<int>(pixels_.rows()); }

    std::uint8_t operator()(int x, int y) const { return pixels_(y, x); }
    std::uint8_t& operator()(int x, int y) { return pixels_(y, x); }

    const Raster<std::uint8_t>& pixels() const { return pixels_; }
    const std::uint8_t* data() const { return pixels_.data(); }

    friend bool operator==(const GrayImage& a, const GrayImage& b) {
        return a.width() == b.width() && a.height() == b.height() && (a.pixels_ == b.pixels_).all();
    }

  private:
    Raster<std::uint8_t> pixels_;
};

struct PixelPoint {
    int x = 0;
    int y = 0;
    friend bool operator==(const PixelPoint&, const PixelPoint&) = default;
};

/// Manually annotated ear landmarks (Triangular Fossa and Antitragus).
struct EarLandmarks {
    PixelPoint triangular_fossa;
    PixelPoint antitragus;
};

struct ClaheParams {
    int tile_rows = 8;
    int tile_cols = 8;
    double clip_limit = 0.01;
};

/// Reads binary (P5/P6) or ASCII (P2/P3) netpbm. Color is reduced to Rec.601 luma.
GrayImage load_image(const std::filesystem::path& path);

/// Writes binary P5 with maxval 255.
void save_pgm(const GrayImage& img, const std::filesystem::path& path);

/// Parses the sidecar line `tf_x tf_y at_x at_y`.
EarLandmarks load_landmarks(const std::filesystem::path& path);

/// Bilinear resize with aligned-corner sampling; same-size resize is an exact copy.
GrayImage resize(const GrayImage& img, int target_width, int target_height);

/// Contrast-limited adaptive histogram equalization with bilinear blending of tile mappings.
GrayImage adaptive_hist_eq(const GrayImage& img, const ClaheParams& params = {});

/// Crops the landmark bounding box grown by `margin` × box size on each side, clamped to the image.
GrayImage crop_ear(const GrayImage& img, const EarLandmarks& landmarks, double margin = 0.25);

/// Luminance scaled to [0, 1].
RasterF to_float(const GrayImage& img);

/// Rounds and saturates a [0, 1] raster back to 8 bits.
GrayImage from_float(const RasterF& img);

}  // namespace fuseid
