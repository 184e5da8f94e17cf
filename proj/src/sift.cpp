#include "fuseid/sift.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace fuseid {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr int kOrientationBins = 36;
constexpr float kOrientationPeakRatio = 0.8f;
constexpr int kDescriptorWidth = 4;
constexpr int kDescriptorBins = 8;
constexpr float kDescriptorClamp = 0.2f;
constexpr int kMaxRefinements = 5;
constexpr int kMinOctaveSide = 16;

int reflect101(int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        i = i < 0 ? -i : 2 * n - 2 - i;
    }
    return i;
}

RasterF downsample(const RasterF& img) {
    const Eigen::Index h = img.rows() / 2;
    const Eigen::Index w = img.cols() / 2;
    RasterF out(h, w);
    for (Eigen::Index y = 0; y < h; ++y) {
        for (Eigen::Index x = 0; x < w; ++x) {
            out(y, x) = img(2 * y, 2 * x);
        }
    }
    return out;
}

RasterF upsample2x(const RasterF& img) {
    const Eigen::Index h = img.rows();
    const Eigen::Index w = img.cols();
    RasterF out(2 * h, 2 * w);
    for (Eigen::Index y = 0; y < 2 * h; ++y) {
        const float fy = 0.5f * static_cast<float>(y);
        const Eigen::Index y0 = y / 2;
        const Eigen::Index y1 = std::min(y0 + 1, h - 1);
        const float wy = fy - static_cast<float>(y0);
        for (Eigen::Index x = 0; x < 2 * w; ++x) {
            const float fx = 0.5f * static_cast<float>(x);
            const Eigen::Index x0 = x / 2;
            const Eigen::Index x1 = std::min(x0 + 1, w - 1);
            const float wx = fx - static_cast<float>(x0);
            out(y, x) = (1 - wy) * ((1 - wx) * img(y0, x0) + wx * img(y0, x1)) +
                        wy * ((1 - wx) * img(y1, x0) + wx * img(y1, x1));
        }
    }
    return out;
}

float wrap_angle(double a) {
    a = std::fmod(a, kTwoPi);
    if (a < 0) a += kTwoPi;
    auto f = static_cast<float>(a);
    // Rounding can land exactly on 2π.
    return f >= static_cast<float>(kTwoPi) ? 0.0f : f;
}

bool in_gradient_window(int x, int y, const RasterF& img) {
    return x >= 1 && y >= 1 && x < img.cols() - 1 && y < img.rows() - 1;
}

}  // namespace

std::string to_string(Modality m) { return m == Modality::fingerprint ? "fingerprint" : "ear"; }

Modality parse_modality(const std::string& name) {
    if (name == "fingerprint") return Modality::fingerprint;
    if (name == "ear") return Modality::ear;
    throw std::invalid_argument("unknown modality '" + name + "'");
}

void SiftParams::validate() const {
    if (octaves < 1 || scales_per_octave < 1 || !(base_sigma > 0) || !(contrast_threshold > 0) ||
        !(edge_ratio_threshold > 1)) {
        throw std::invalid_argument("invalid SIFT parameters");
    }
}

double ScaleSpace::level_sigma(double level) const {
    return base_sigma * std::exp2(level / scales_per_octave);
}

RasterF gaussian_blur(const RasterF& img, double sigma) {
    if (!(sigma > 0)) return img;
    const int radius = std::max(1, static_cast<int>(std::ceil(4.0 * sigma)));
    std::vector<float> kernel(2 * radius + 1);
    double sum = 0;
    for (int i = -radius; i <= radius; ++i) {
        const double v = std::exp(-0.5 * i * i / (sigma * sigma));
        kernel[i + radius] = static_cast<float>(v);
        sum += v;
    }
    for (auto& k : kernel) k = static_cast<float>(k / sum);

    const int h = static_cast<int>(img.rows());
    const int w = static_cast<int>(img.cols());
    RasterF tmp(h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            float acc = 0;
            for (int i = -radius; i <= radius; ++i) {
                acc += kernel[i + radius] * img(y, reflect101(x + i, w));
            }
            tmp(y, x) = acc;
        }
    }
    RasterF out(h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            float acc = 0;
            for (int i = -radius; i <= radius; ++i) {
                acc += kernel[i + radius] * tmp(reflect101(y + i, h), x);
            }
            out(y, x) = acc;
        }
    }
    return out;
}

ScaleSpace build_scale_space(const RasterF& img, const SiftParams& params) {
    params.validate();
    if (img.rows() < kMinOctaveSide || img.cols() < kMinOctaveSide) {
        throw std::invalid_argument("build_scale_space: image smaller than 16x16");
    }

    ScaleSpace space;
    space.scales_per_octave = params.scales_per_octave;
    space.base_sigma = params.base_sigma;

    RasterF base = params.upsample ? upsample2x(img) : img;
    const double assumed_blur = params.upsample ? 1.0 : 0.5;
    space.pixel_step = params.upsample ? 0.5 : 1.0;

    const auto min_side = static_cast<double>(std::min(base.rows(), base.cols()));
    const int max_octaves = static_cast<int>(std::floor(std::log2(min_side / kMinOctaveSide))) + 1;
    const int n_octaves = std::clamp(params.octaves, 1, max_octaves);

    const int s = params.scales_per_octave;
    const int n_levels = s + 3;
    const double k = std::exp2(1.0 / s);
    std::vector<double> increments(n_levels, 0.0);
    for (int i = 1; i < n_levels; ++i) {
        const double prev = params.base_sigma * std::pow(k, i - 1);
        const double total = prev * k;
        increments[i] = std::sqrt(total * total - prev * prev);
    }

    const double initial = std::sqrt(std::max(params.base_sigma * params.base_sigma - assumed_blur * assumed_blur, 0.01));
    RasterF octave_base = gaussian_blur(base, initial);

    for (int o = 0; o < n_octaves; ++o) {
        Octave octave;
        octave.gaussians.reserve(n_levels);
        octave.gaussians.push_back(o == 0 ? std::move(octave_base) : downsample(space.octaves.back().gaussians[s]));
        for (int i = 1; i < n_levels; ++i) {
            octave.gaussians.push_back(gaussian_blur(octave.gaussians.back(), increments[i]));
        }
        octave.dogs.reserve(n_levels - 1);
        for (int i = 0; i + 1 < n_levels; ++i) {
            octave.dogs.push_back(octave.gaussians[i + 1] - octave.gaussians[i]);
        }
        space.octaves.push_back(std::move(octave));
    }
    return space;
}

std::vector<Candidate> detect_extrema(const ScaleSpace& space) {
    std::vector<Candidate> out;
    for (int o = 0; o < static_cast<int>(space.octaves.size()); ++o) {
        const auto& dogs = space.octaves[o].dogs;
        for (int l = 1; l + 1 < static_cast<int>(dogs.size()); ++l) {
            const RasterF& prev = dogs[l - 1];
            const RasterF& cur = dogs[l];
            const RasterF& next = dogs[l + 1];
            const int h = static_cast<int>(cur.rows());
            const int w = static_cast<int>(cur.cols());
            for (int y = 1; y < h - 1; ++y) {
                for (int x = 1; x < w - 1; ++x) {
                    const float v = cur(y, x);
                    bool is_max = true;
                    bool is_min = true;
                    for (int dy = -1; dy <= 1 && (is_max || is_min); ++dy) {
                        for (int dx = -1; dx <= 1; ++dx) {
                            for (const RasterF* layer : {&prev, &cur, &next}) {
                                if (layer == &cur && dx == 0 && dy == 0) continue;
                                const float n = (*layer)(y + dy, x + dx);
                                is_max = is_max && v > n;
                                is_min = is_min && v < n;
                            }
                        }
                    }
                    if (is_max || is_min) {
                        out.push_back({o, l, x, y});
                    }
                }
            }
        }
    }
    return out;
}

Localization localize_keypoint(const Candidate& candidate, const ScaleSpace& space, const SiftParams& params) {
    Localization result;
    const auto& dogs = space.octaves.at(candidate.octave).dogs;
    const int s = space.scales_per_octave;
    const int h = static_cast<int>(dogs[0].rows());
    const int w = static_cast<int>(dogs[0].cols());

    int x = candidate.x;
    int y = candidate.y;
    int l = candidate.level;
    Eigen::Vector3d offset = Eigen::Vector3d::Zero();
    Eigen::Vector3d gradient;
    bool converged = false;

    for (int iter = 0; iter < kMaxRefinements; ++iter) {
        const RasterF& prev = dogs[l - 1];
        const RasterF& cur = dogs[l];
        const RasterF& next = dogs[l + 1];
        const double c = cur(y, x);
        gradient << 0.5 * (cur(y, x + 1) - cur(y, x - 1)), 0.5 * (cur(y + 1, x) - cur(y - 1, x)),
            0.5 * (next(y, x) - prev(y, x));
        const double dxx = cur(y, x + 1) + cur(y, x - 1) - 2 * c;
        const double dyy = cur(y + 1, x) + cur(y - 1, x) - 2 * c;
        const double dss = next(y, x) + prev(y, x) - 2 * c;
        const double dxy = 0.25 * (cur(y + 1, x + 1) - cur(y + 1, x - 1) - cur(y - 1, x + 1) + cur(y - 1, x - 1));
        const double dxs = 0.25 * (next(y, x + 1) - next(y, x - 1) - prev(y, x + 1) + prev(y, x - 1));
        const double dys = 0.25 * (next(y + 1, x) - next(y - 1, x) - prev(y + 1, x) + prev(y - 1, x));
        Eigen::Matrix3d hessian;
        hessian << dxx, dxy, dxs, dxy, dyy, dys, dxs, dys, dss;

        // Minimum-norm solution keeps flat directions (e.g. along an edge) at zero offset.
        offset = -hessian.completeOrthogonalDecomposition().solve(gradient);
        if (!offset.allFinite()) {
            return result;
        }
        if ((offset.array().abs() < 0.5).all()) {
            converged = true;
            break;
        }
        if ((offset.array().abs() > static_cast<double>(std::max(w, h))).any()) {
            return result;
        }
        x += static_cast<int>(std::lround(offset.x()));
        y += static_cast<int>(std::lround(offset.y()));
        l += static_cast<int>(std::lround(offset.z()));
        if (l < 1 || l > s || x < 1 || x >= w - 1 || y < 1 || y >= h - 1) {
            return result;
        }
    }
    if (!converged) {
        return result;
    }

    const RasterF& cur = dogs[l];
    const double contrast = cur(y, x) + 0.5 * gradient.dot(offset);
    result.point.octave = candidate.octave;
    result.point.level = l;
    result.point.x = static_cast<float>(x + offset.x());
    result.point.y = static_cast<float>(y + offset.y());
    result.point.level_offset = static_cast<float>(offset.z());
    result.point.contrast = static_cast<float>(contrast);

    const double c = cur(y, x);
    const double dxx = cur(y, x + 1) + cur(y, x - 1) - 2 * c;
    const double dyy = cur(y + 1, x) + cur(y - 1, x) - 2 * c;
    const double dxy = 0.25 * (cur(y + 1, x + 1) - cur(y + 1, x - 1) - cur(y - 1, x + 1) + cur(y - 1, x - 1));
    const double trace = dxx + dyy;
    const double det = dxx * dyy - dxy * dxy;
    result.point.edge_score = det > 0 ? static_cast<float>(trace * trace / det) : std::numeric_limits<float>::infinity();

    if (std::abs(contrast) < params.contrast_threshold) {
        result.status = Rejection::low_contrast;
        return result;
    }
    const double r = params.edge_ratio_threshold;
    if (det <= 0 || trace * trace * r > (r + 1) * (r + 1) * det) {
        result.status = Rejection::edge;
        return result;
    }
    result.status = Rejection::none;
    return result;
}

std::vector<OrientedPoint> assign_orientations(const LocalizedPoint& point, const ScaleSpace& space) {
    const RasterF& img = space.octaves.at(point.octave).gaussians.at(point.level);
    const double sigma = 1.5 * space.level_sigma(point.level + point.level_offset);
    const int radius = static_cast<int>(std::lround(3.0 * sigma));
    const int px = static_cast<int>(std::lround(point.x));
    const int py = static_cast<int>(std::lround(point.y));

    std::array<double, kOrientationBins> raw{};
    for (int dy = -radius; dy <= radius; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
            if (dx * dx + dy * dy > radius * radius) continue;
            const int x = px + dx;
            const int y = py + dy;
            if (!in_gradient_window(x, y, img)) continue;
            const double gx = img(y, x + 1) - img(y, x - 1);
            const double gy = img(y + 1, x) - img(y - 1, x);
            const double mag = std::hypot(gx, gy);
            if (mag == 0) continue;
            const double weight = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
            int bin = static_cast<int>(std::lround(kOrientationBins * std::atan2(gy, gx) / kTwoPi));
            bin = ((bin % kOrientationBins) + kOrientationBins) % kOrientationBins;
            raw[bin] += weight * mag;
        }
    }

    std::array<double, kOrientationBins> hist{};
    auto at = [&](int i) { return raw[((i % kOrientationBins) + kOrientationBins) % kOrientationBins]; };
    for (int i = 0; i < kOrientationBins; ++i) {
        hist[i] = (at(i - 2) + at(i + 2)) / 16.0 + (at(i - 1) + at(i + 1)) * 4.0 / 16.0 + at(i) * 6.0 / 16.0;
    }
    const double peak = *std::max_element(hist.begin(), hist.end());
    if (!(peak > 0)) {
        return {};
    }

    std::vector<OrientedPoint> out;
    for (int j = 0; j < kOrientationBins; ++j) {
        const double left = hist[(j + kOrientationBins - 1) % kOrientationBins];
        const double right = hist[(j + 1) % kOrientationBins];
        const double c = hist[j];
        if (c > left && c > right && c >= kOrientationPeakRatio * peak) {
            const double bin = j + 0.5 * (left - right) / (left - 2 * c + right);
            out.push_back({point, wrap_angle(kTwoPi * bin / kOrientationBins)});
        }
    }
    return out;
}

namespace detail {

Descriptor clamp_unit(const Descriptor& raw) {
    const float norm = raw.norm();
    if (!(norm > 0)) return Descriptor::Zero();
    return (raw / norm).cwiseMin(kDescriptorClamp);
}

Descriptor normalize_descriptor(const Descriptor& raw) {
    Descriptor d = clamp_unit(raw);
    const float norm = d.norm();
    return norm > 0 ? Descriptor(d / norm) : Descriptor::Zero();
}

}  // namespace detail

Descriptor compute_descriptor(const OrientedPoint& oriented, const ScaleSpace& space) {
    const LocalizedPoint& point = oriented.point;
    const RasterF& img = space.octaves.at(point.octave).gaussians.at(point.level);
    constexpr int d = kDescriptorWidth;
    constexpr int n = kDescriptorBins;

    const double cell = 3.0 * space.level_sigma(point.level + point.level_offset);
    const double diag = std::hypot(static_cast<double>(img.cols()), static_cast<double>(img.rows()));
    const int radius = static_cast<int>(std::min(std::lround(cell * std::numbers::sqrt2 * (d + 1) * 0.5), std::lround(diag)));
    const double cos_t = std::cos(oriented.orientation) / cell;
    const double sin_t = std::sin(oriented.orientation) / cell;
    const int px = static_cast<int>(std::lround(point.x));
    const int py = static_cast<int>(std::lround(point.y));

    std::array<double, d * d * n> hist{};
    for (int dy = -radius; dy <= radius; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
            // Offset expressed in the keypoint frame, in units of descriptor cells.
            const double c_rot = dx * cos_t + dy * sin_t;
            const double r_rot = -dx * sin_t + dy * cos_t;
            const double rbin = r_rot + d / 2.0 - 0.5;
            const double cbin = c_rot + d / 2.0 - 0.5;
            if (rbin <= -1 || rbin >= d || cbin <= -1 || cbin >= d) continue;
            const int x = px + dx;
            const int y = py + dy;
            if (!in_gradient_window(x, y, img)) continue;

            const double gx = img(y, x + 1) - img(y, x - 1);
            const double gy = img(y + 1, x) - img(y - 1, x);
            const double mag = std::hypot(gx, gy);
            if (mag == 0) continue;
            const double weight = std::exp(-(c_rot * c_rot + r_rot * r_rot) / (0.5 * d * d));
            double obin = (std::atan2(gy, gx) - oriented.orientation) * n / kTwoPi;
            obin = std::fmod(obin, static_cast<double>(n));
            if (obin < 0) obin += n;

            const int r0 = static_cast<int>(std::floor(rbin));
            const int c0 = static_cast<int>(std::floor(cbin));
            const int o0 = static_cast<int>(std::floor(obin));
            const double fr = rbin - r0;
            const double fc = cbin - c0;
            const double fo = obin - o0;
            const double v = weight * mag;
            for (int ir = 0; ir <= 1; ++ir) {
                const int r = r0 + ir;
                if (r < 0 || r >= d) continue;
                const double vr = v * (ir ? fr : 1 - fr);
                for (int ic = 0; ic <= 1; ++ic) {
                    const int c = c0 + ic;
                    if (c < 0 || c >= d) continue;
                    const double vc = vr * (ic ? fc : 1 - fc);
                    for (int io = 0; io <= 1; ++io) {
                        const int o = (o0 + io) % n;
                        hist[(r * d + c) * n + o] += vc * (io ? fo : 1 - fo);
                    }
                }
            }
        }
    }

    Descriptor raw;
    for (int i = 0; i < kDescriptorSize; ++i) raw[i] = static_cast<float>(hist[i]);
    return detail::normalize_descriptor(raw);
}

std::vector<Keypoint> detect_keypoints(const RasterF& img, const SiftParams& params) {
    const ScaleSpace space = build_scale_space(img, params);
    std::vector<Keypoint> out;
    for (const Candidate& cand : detect_extrema(space)) {
        const Localization loc = localize_keypoint(cand, space, params);
        if (!loc.accepted()) continue;
        const double octave_step = std::ldexp(space.pixel_step, loc.point.octave);
        const double scale = space.level_sigma(loc.point.level + loc.point.level_offset) * octave_step;
        for (const OrientedPoint& op : assign_orientations(loc.point, space)) {
            Keypoint kp;
            kp.x = static_cast<float>(loc.point.x * octave_step);
            kp.y = static_cast<float>(loc.point.y * octave_step);
            kp.scale = static_cast<float>(scale);
            kp.orientation = op.orientation;
            kp.descriptor = compute_descriptor(op, space);
            out.push_back(kp);
        }
    }
    return out;
}

FeatureSet extract_features(const GrayImage& img, Modality modality, const SiftParams& params) {
    FeatureSet fs;
    fs.modality = modality;
    fs.keypoints = detect_keypoints(to_float(img), params);
    return fs;
}

}  // namespace fuseid
