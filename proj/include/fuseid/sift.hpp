#pragma once

#include "fuseid/image.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

namespace fuseid {

inline constexpr int kDescriptorSize = 128;

using Descriptor = Eigen::Matrix<float, kDescriptorSize, 1>;

enum class Modality : std::uint8_t { fingerprint = 0, ear = 1 };

std::string to_string(Modality m);
Modality parse_modality(const std::string& name);

struct SiftParams {
    int octaves = 4;
    int scales_per_octave = 3;
    double base_sigma = 1.6;
    double contrast_threshold = 0.03;  // on images normalized to [0, 1]
    double edge_ratio_threshold = 10.0;
    bool upsample = false;

    void validate() const;
};

struct Keypoint {
    float x = 0;  // column, input-image pixels
    float y = 0;  // row, input-image pixels
    float scale = 0;
    float orientation = 0;  // radians in [0, 2π)
    Descriptor descriptor = Descriptor::Zero();

    friend bool operator==(const Keypoint& a, const Keypoint& b) {
        return a.x == b.x && a.y == b.y && a.scale == b.scale && a.orientation == b.orientation &&
               a.descriptor == b.descriptor;
    }
};

struct FeatureSet {
    Modality modality = Modality::fingerprint;
    std::string subject_id;
    std::string source_id;  // sample label
    std::vector<Keypoint> keypoints;
};

struct Octave {
    std::vector<RasterF> gaussians;  // scales_per_octave + 3 levels
    std::vector<RasterF> dogs;       // scales_per_octave + 2 levels
};

/// Gaussian scale space. `pixel_step` is the size of an octave-0 sample in input pixels.
struct ScaleSpace {
    std::vector<Octave> octaves;
    int scales_per_octave = 3;
    double base_sigma = 1.6;
    double pixel_step = 1.0;

    /// Blur of level `level` relative to its own octave's sampling grid.
    double level_sigma(double level) const;
};

struct Candidate {
    int octave = 0;
    int level = 0;  // DoG level
    int x = 0;
    int y = 0;
};

enum class Rejection { none, unstable, low_contrast, edge };

/// A candidate after sub-pixel refinement, in its octave's coordinates.
struct LocalizedPoint {
    int octave = 0;
    int level = 0;        // integer DoG level after re-centering
    float x = 0;          // refined column in octave pixels
    float y = 0;
    float level_offset = 0;
    float contrast = 0;     // interpolated DoG value
    float edge_score = 0;   // trace² / det of the spatial Hessian
};

struct Localization {
    Rejection status = Rejection::unstable;
    LocalizedPoint point;

    bool accepted() const { return status == Rejection::none; }
};

struct OrientedPoint {
    LocalizedPoint point;
    float orientation = 0;
};

/// Gaussian blur with a reflect-101 border; the kernel spans ±ceil(4σ).
RasterF gaussian_blur(const RasterF& img, double sigma);

ScaleSpace build_scale_space(const RasterF& img, const SiftParams& params);

/// Samples strictly above or strictly below all 26 neighbours in the 3×3×3 DoG block.
std::vector<Candidate> detect_extrema(const ScaleSpace& space);

Localization localize_keypoint(const Candidate& candidate, const ScaleSpace& space, const SiftParams& params);

/// Dominant gradient directions at the point; empty when the window has no gradient.
std::vector<OrientedPoint> assign_orientations(const LocalizedPoint& point, const ScaleSpace& space);

Descriptor compute_descriptor(const OrientedPoint& point, const ScaleSpace& space);

/// Full detector on a [0, 1] raster, coordinates in input pixels.
std::vector<Keypoint> detect_keypoints(const RasterF& img, const SiftParams& params);

FeatureSet extract_features(const GrayImage& img, Modality modality, const SiftParams& params = {});

namespace detail {
// Unit-normalize and clip each element at 0.2 (no second normalization).
Descriptor clamp_unit(const Descriptor& raw);
Descriptor normalize_descriptor(const Descriptor& raw);
}  // namespace detail

}  // namespace fuseid
