#include "fuseid/image.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

namespace fuseid {

namespace {

constexpr int kBins = 256;

using Lut = std::array<std::uint8_t, kBins>;

int reflect101(int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        i = i < 0 ? -i : 2 * n - 2 - i;
    }
    return i;
}

// Clipped, redistributed histogram turned into a mapping that stretches the
// tile's occupied range [vmin, vmax] onto [0, 255]. A flat tile maps to itself.
Lut tile_mapping(const std::array<long, kBins>& counts, long n_pixels, double clip_limit) {
    int vmin = 0;
    while (counts[vmin] == 0) ++vmin;
    int vmax = kBins - 1;
    while (counts[vmax] == 0) --vmax;

    Lut lut{};
    if (vmin == vmax) {
        for (int v = 0; v < kBins; ++v) lut[v] = static_cast<std::uint8_t>(v);
        return lut;
    }

    const long min_clip = (n_pixels + kBins - 1) / kBins;
    const long limit = min_clip + std::lround(clip_limit * static_cast<double>(n_pixels - min_clip));

    std::array<long, kBins> hist = counts;
    long excess = 0;
    for (auto& h : hist) {
        if (h > limit) {
            excess += h - limit;
            h = limit;
        }
    }
    const long share = excess / kBins;
    const long residual = excess % kBins;
    for (auto& h : hist) h += share;
    if (residual > 0) {
        const long step = std::max<long>(kBins / residual, 1);
        for (long i = 0, given = 0; i < kBins && given < residual; i += step, ++given) {
            ++hist[i];
        }
    }

    std::array<long, kBins> cdf{};
    long acc = 0;
    for (int v = 0; v < kBins; ++v) {
        acc += hist[v];
        cdf[v] = acc;
    }
    const double lo = static_cast<double>(cdf[vmin]);
    const double span = static_cast<double>(cdf[vmax]) - lo;
    for (int v = 0; v < kBins; ++v) {
        if (v <= vmin) {
            lut[v] = 0;
        } else if (v >= vmax) {
            lut[v] = 255;
        } else {
            const double m = 255.0 * (static_cast<double>(cdf[v]) - lo) / span;
            lut[v] = static_cast<std::uint8_t>(std::clamp(std::lround(m), 0L, 255L));
        }
    }
    return lut;
}

}  // namespace

GrayImage adaptive_hist_eq(const GrayImage& img, const ClaheParams& params) {
    const int w = img.width();
    const int h = img.height();
    if (params.tile_rows < 1 || params.tile_cols < 1 || h / params.tile_rows < 8 || w / params.tile_cols < 8) {
        throw std::invalid_argument("adaptive_hist_eq: degenerate tile grid");
    }
    if (!(params.clip_limit > 0.0 && params.clip_limit <= 1.0)) {
        throw std::invalid_argument("adaptive_hist_eq: clip limit must lie in (0, 1]");
    }

    // Tiles cover a reflect-padded canvas so that every tile has the same area.
    const int tile_h = (h + params.tile_rows - 1) / params.tile_rows;
    const int tile_w = (w + params.tile_cols - 1) / params.tile_cols;
    const long tile_area = static_cast<long>(tile_h) * tile_w;

    std::vector<Lut> luts(static_cast<std::size_t>(params.tile_rows) * params.tile_cols);
    for (int ty = 0; ty < params.tile_rows; ++ty) {
        for (int tx = 0; tx < params.tile_cols; ++tx) {
            std::array<long, kBins> counts{};
            for (int y = ty * tile_h; y < (ty + 1) * tile_h; ++y) {
                const int sy = reflect101(y, h);
                for (int x = tx * tile_w; x < (tx + 1) * tile_w; ++x) {
                    ++counts[img(reflect101(x, w), sy)];
                }
            }
            luts[static_cast<std::size_t>(ty) * params.tile_cols + tx] =
                tile_mapping(counts, tile_area, params.clip_limit);
        }
    }

    auto neighbours = [](int p, int tile, int n_tiles, int& t0, int& t1, double& frac) {
        const double f = (p + 0.5) / tile - 0.5;
        const int lo = static_cast<int>(std::floor(f));
        frac = f - lo;
        t0 = std::clamp(lo, 0, n_tiles - 1);
        t1 = std::clamp(lo + 1, 0, n_tiles - 1);
    };

    Raster<std::uint8_t> out(h, w);
    for (int y = 0; y < h; ++y) {
        int ty0, ty1;
        double fy;
        neighbours(y, tile_h, params.tile_rows, ty0, ty1, fy);
        for (int x = 0; x < w; ++x) {
            int tx0, tx1;
            double fx;
            neighbours(x, tile_w, params.tile_cols, tx0, tx1, fx);
            const std::uint8_t v = img(x, y);
            auto at = [&](int ty, int tx) {
                return static_cast<double>(luts[static_cast<std::size_t>(ty) * params.tile_cols + tx][v]);
            };
            const double top = (1 - fx) * at(ty0, tx0) + fx * at(ty0, tx1);
            const double bottom = (1 - fx) * at(ty1, tx0) + fx * at(ty1, tx1);
            out(y, x) = static_cast<std::uint8_t>(std::clamp(std::lround((1 - fy) * top + fy * bottom), 0L, 255L));
        }
    }
    return GrayImage(std::move(out));
}

}  // namespace fuseid
