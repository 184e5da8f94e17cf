#pragma once

#include "fuseid/dataset.hpp"
#include "fuseid/image.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace fuseid {

struct SynthConfig {
    int subjects = 20;
    int samples_per_subject = 2;
    std::uint64_t seed = 1;
    double max_rotation_deg = 5.0;
    double max_shift_px = 3.0;
    double brightness_jitter = 0.1;
    double fingerprint_noise = 0.25;
    double ear_noise = 0.20;
    int fingerprint_width = 200;
    int fingerprint_height = 200;
    int ear_width = 200;
    int ear_height = 140;

    void validate() const;
};

/// Seeded rigid motion, affine brightness change and Gaussian noise of one sample.
struct SamplePerturbation {
    double rotation = 0;  // radians, about the image centre
    double shift_x = 0;
    double shift_y = 0;
    double gain = 1;
    double offset = 0;
    double noise_sigma = 0;
    std::uint64_t noise_seed = 0;
};

/// Ridge flow around a warped loop core, interrupted by dot-like ridge breaks.
class FingerprintTexture {
  public:
    FingerprintTexture(std::uint64_t seed, int width, int height);
    double operator()(double x, double y) const;

  private:
    struct Dot {
        double x, y, sigma, amplitude;
    };
    double cx_, cy_, aspect_, tilt_, period_;
    double unit_;
    double warp_amp_[2], warp_kx_[2], warp_ky_[2], warp_phase_[2];
    std::vector<Dot> dots_;
};

/// Smooth elliptical contours over soft blobs.
class EarTexture {
  public:
    EarTexture(std::uint64_t seed, int width, int height);
    double operator()(double x, double y) const;

  private:
    struct Ring {
        double cx, cy, a, b, angle, width, amplitude;
    };
    struct Blob {
        double x, y, sigma, amplitude;
    };
    double background_;
    double unit_;
    std::vector<Ring> rings_;
    std::vector<Blob> blobs_;
};

std::uint64_t subject_seed(std::uint64_t seed, int subject_index, int modality);

SamplePerturbation sample_perturbation(const SynthConfig& cfg, int subject_index, int sample_index, int modality);

/// Renders `texture` under `p` onto a width × height raster (noise included when sigma > 0).
template <typename Texture>
GrayImage render_sample(const Texture& texture, int width, int height, const SamplePerturbation& p);

/// Writes fingerprint/ and ear/ PGM images plus manifest.txt under `out_dir`.
DatasetManifest synth_dataset(const SynthConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace fuseid
