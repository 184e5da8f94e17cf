#include "fuseid/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <stdexcept>

namespace fuseid {

namespace {

constexpr int kFingerprintDots = 600;
constexpr int kEarRings = 5;
constexpr int kEarBlobs = 150;

// Texture geometry is authored on a 200-pixel canvas and scaled to the target size.
constexpr double kCanvas = 200.0;

std::mt19937_64 make_rng(std::initializer_list<std::uint64_t> parts) {
    std::vector<std::uint32_t> words;
    for (auto p : parts) {
        words.push_back(static_cast<std::uint32_t>(p));
        words.push_back(static_cast<std::uint32_t>(p >> 32));
    }
    std::seed_seq seq(words.begin(), words.end());
    return std::mt19937_64(seq);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

double signed_uniform(std::mt19937_64& rng, double lo, double hi) {
    const double mag = uniform(rng, lo, hi);
    return (rng() & 1) ? mag : -mag;
}

}  // namespace

void SynthConfig::validate() const {
    if (subjects < 2) throw std::invalid_argument("synth: at least 2 subjects required");
    if (samples_per_subject < 1) throw std::invalid_argument("synth: samples_per_subject must be positive");
    if (max_rotation_deg < 0 || max_shift_px < 0 || brightness_jitter < 0 || brightness_jitter >= 1 ||
        fingerprint_noise < 0 || ear_noise < 0) {
        throw std::invalid_argument("synth: perturbation magnitudes must be non-negative");
    }
    if (fingerprint_width < 16 || fingerprint_height < 16 || ear_width < 16 || ear_height < 16) {
        throw std::invalid_argument("synth: image dimensions must be at least 16");
    }
}

FingerprintTexture::FingerprintTexture(std::uint64_t seed, int width, int height) {
    auto rng = make_rng({seed, 0xF1});
    unit_ = std::max(width, height) / kCanvas;
    cx_ = 0.5 * width / unit_ + uniform(rng, -20, 20);
    cy_ = 0.5 * height / unit_ + uniform(rng, -25, 25);
    aspect_ = uniform(rng, 0.6, 0.9);
    tilt_ = uniform(rng, -0.5, 0.5);
    period_ = uniform(rng, 7.0, 10.0);
    for (int i = 0; i < 2; ++i) {
        warp_amp_[i] = uniform(rng, 4.0, 10.0);
        const double wavelength = uniform(rng, 60.0, 150.0);
        const double dir = uniform(rng, 0, std::numbers::pi);
        warp_kx_[i] = 2 * std::numbers::pi / wavelength * std::cos(dir);
        warp_ky_[i] = 2 * std::numbers::pi / wavelength * std::sin(dir);
        warp_phase_[i] = uniform(rng, 0, 2 * std::numbers::pi);
    }
    for (int i = 0; i < kFingerprintDots; ++i) {
        dots_.push_back({uniform(rng, 0, kCanvas), uniform(rng, 0, kCanvas), uniform(rng, 1.5, 3.0),
                         signed_uniform(rng, 0.6, 1.0)});
    }
}

double FingerprintTexture::operator()(double x, double y) const {
    x /= unit_;
    y /= unit_;
    const double wx = x + warp_amp_[0] * std::sin(warp_kx_[0] * x + warp_ky_[0] * y + warp_phase_[0]);
    const double wy = y + warp_amp_[1] * std::sin(warp_kx_[1] * x + warp_ky_[1] * y + warp_phase_[1]);
    const double dx = wx - cx_;
    const double dy = wy - cy_;
    const double u = dx * std::cos(tilt_) + dy * std::sin(tilt_);
    const double v = -dx * std::sin(tilt_) + dy * std::cos(tilt_);
    const double r = std::sqrt(u * u + (v / aspect_) * (v / aspect_));
    double value = 0.5 + 0.4 * std::cos(2 * std::numbers::pi * r / period_);
    for (const Dot& d : dots_) {
        const double ddx = x - d.x;
        const double ddy = y - d.y;
        const double d2 = ddx * ddx + ddy * ddy;
        if (d2 > 16 * d.sigma * d.sigma) continue;
        const double g = std::abs(d.amplitude) * std::exp(-0.5 * d2 / (d.sigma * d.sigma));
        const double target = d.amplitude > 0 ? 0.95 : 0.05;
        value = value * (1 - g) + target * g;
    }
    return value;
}

EarTexture::EarTexture(std::uint64_t seed, int width, int height) {
    auto rng = make_rng({seed, 0xEA});
    unit_ = std::max(width, height) / kCanvas;
    const double cx = 0.5 * width / unit_;
    const double cy = 0.5 * height / unit_;
    background_ = uniform(rng, 0.3, 0.4);
    for (int i = 0; i < kEarRings; ++i) {
        rings_.push_back({cx + uniform(rng, -15, 15), cy + uniform(rng, -10, 10), uniform(rng, 30, 90),
                          uniform(rng, 20, 60), uniform(rng, -0.4, 0.4), uniform(rng, 2, 5),
                          signed_uniform(rng, 0.2, 0.45)});
    }
    for (int i = 0; i < kEarBlobs; ++i) {
        blobs_.push_back({uniform(rng, 0, 2 * cx), uniform(rng, 0, 2 * cy), uniform(rng, 2, 8),
                          signed_uniform(rng, 0.1, 0.35)});
    }
}

double EarTexture::operator()(double x, double y) const {
    x /= unit_;
    y /= unit_;
    double value = background_;
    for (const Ring& r : rings_) {
        const double dx = x - r.cx;
        const double dy = y - r.cy;
        const double u = dx * std::cos(r.angle) + dy * std::sin(r.angle);
        const double v = -dx * std::sin(r.angle) + dy * std::cos(r.angle);
        const double rho = std::sqrt((u / r.a) * (u / r.a) + (v / r.b) * (v / r.b));
        const double dist = (rho - 1) * 0.5 * (r.a + r.b);
        value += r.amplitude * std::exp(-0.5 * dist * dist / (r.width * r.width));
    }
    for (const Blob& b : blobs_) {
        const double dx = x - b.x;
        const double dy = y - b.y;
        value += b.amplitude * std::exp(-0.5 * (dx * dx + dy * dy) / (b.sigma * b.sigma));
    }
    return value;
}

std::uint64_t subject_seed(std::uint64_t seed, int subject_index, int modality) {
    auto rng = make_rng({seed, static_cast<std::uint64_t>(subject_index), static_cast<std::uint64_t>(modality), 0x5B});
    return rng();
}

SamplePerturbation sample_perturbation(const SynthConfig& cfg, int subject_index, int sample_index, int modality) {
    auto rng = make_rng({cfg.seed, static_cast<std::uint64_t>(subject_index), static_cast<std::uint64_t>(sample_index),
                         static_cast<std::uint64_t>(modality), 0x9E});
    SamplePerturbation p;
    const double max_rot = cfg.max_rotation_deg * std::numbers::pi / 180.0;
    p.rotation = uniform(rng, -max_rot, max_rot);
    p.shift_x = uniform(rng, -cfg.max_shift_px, cfg.max_shift_px);
    p.shift_y = uniform(rng, -cfg.max_shift_px, cfg.max_shift_px);
    p.gain = uniform(rng, 1 - cfg.brightness_jitter, 1 + cfg.brightness_jitter);
    p.offset = uniform(rng, -0.5 * cfg.brightness_jitter, 0.5 * cfg.brightness_jitter);
    p.noise_sigma = modality == 0 ? cfg.fingerprint_noise : cfg.ear_noise;
    p.noise_seed = rng();
    return p;
}

template <typename Texture>
GrayImage render_sample(const Texture& texture, int width, int height, const SamplePerturbation& p) {
    const double cx = 0.5 * (width - 1);
    const double cy = 0.5 * (height - 1);
    const double c = std::cos(p.rotation);
    const double s = std::sin(p.rotation);
    std::mt19937_64 rng(p.noise_seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    Raster<std::uint8_t> px(height, width);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            // Inverse of: rotate about the centre, then translate.
            const double dx = x - cx - p.shift_x;
            const double dy = y - cy - p.shift_y;
            const double sx = c * dx + s * dy + cx;
            const double sy = -s * dx + c * dy + cy;
            double v = p.gain * texture(sx, sy) + p.offset;
            if (p.noise_sigma > 0) v += p.noise_sigma * noise(rng);
            px(y, x) = static_cast<std::uint8_t>(std::clamp(std::lround(255.0 * v), 0L, 255L));
        }
    }
    return GrayImage(std::move(px));
}

template GrayImage render_sample<FingerprintTexture>(const FingerprintTexture&, int, int, const SamplePerturbation&);
template GrayImage render_sample<EarTexture>(const EarTexture&, int, int, const SamplePerturbation&);

DatasetManifest synth_dataset(const SynthConfig& cfg, const std::filesystem::path& out_dir) {
    cfg.validate();
    std::error_code ec;
    std::filesystem::create_directories(out_dir / "fingerprint", ec);
    std::filesystem::create_directories(out_dir / "ear", ec);
    if (ec) {
        throw std::runtime_error("cannot create output directory " + out_dir.string() + ": " + ec.message());
    }

    DatasetManifest manifest;
    for (int subject = 0; subject < cfg.subjects; ++subject) {
        char id[32];
        std::snprintf(id, sizeof id, "S%03d", subject + 1);
        const FingerprintTexture fp(subject_seed(cfg.seed, subject, 0), cfg.fingerprint_width, cfg.fingerprint_height);
        const EarTexture ear(subject_seed(cfg.seed, subject, 1), cfg.ear_width, cfg.ear_height);
        for (int sample = 1; sample <= cfg.samples_per_subject; ++sample) {
            SampleRecord rec;
            rec.subject_id = id;
            rec.sample_index = sample;
            const std::string name = std::string(id) + "_" + std::to_string(sample) + ".pgm";
            rec.fingerprint = out_dir / "fingerprint" / name;
            rec.ear = out_dir / "ear" / name;
            save_pgm(render_sample(fp, cfg.fingerprint_width, cfg.fingerprint_height,
                                   sample_perturbation(cfg, subject, sample, 0)),
                     rec.fingerprint);
            save_pgm(render_sample(ear, cfg.ear_width, cfg.ear_height, sample_perturbation(cfg, subject, sample, 1)),
                     rec.ear);
            manifest.samples.push_back(std::move(rec));
        }
    }
    write_manifest(manifest, out_dir / "manifest.txt");
    return manifest;
}

}  // namespace fuseid
