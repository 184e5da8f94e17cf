#include "fuseid/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>
#include <vector>

namespace fuseid {

GrayImage::GrayImage(int width, int height, std::uint8_t fill) {
    if (width < 1 || height < 1) {
        throw ImageError("zero-dimension image");
    }
    pixels_ = Raster<std::uint8_t>::Constant(height, width, fill);
}

GrayImage::GrayImage(Raster<std::uint8_t> pixels) : pixels_(std::move(pixels)) {
    if (pixels_.rows() < 1 || pixels_.cols() < 1) {
        throw ImageError("zero-dimension image");
    }
}

namespace {

class NetpbmReader {
  public:
    explicit NetpbmReader(std::vector<unsigned char> bytes) : bytes_(std::move(bytes)) {}

    // Next whitespace-delimited header token, skipping '#' comments.
    std::string token() {
        while (pos_ < bytes_.size()) {
            const unsigned char c = bytes_[pos_];
            if (c == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else if (std::isspace(c)) {
                ++pos_;
            } else {
                break;
            }
        }
        std::string out;
        while (pos_ < bytes_.size() && !std::isspace(bytes_[pos_]) && bytes_[pos_] != '#') {
            out.push_back(static_cast<char>(bytes_[pos_++]));
        }
        if (out.empty()) {
            throw ImageError("unreadable file: truncated header");
        }
        return out;
    }

    long number() {
        const std::string t = token();
        if (!std::all_of(t.begin(), t.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
            throw ImageError("unreadable file: bad header field '" + t + "'");
        }
        return std::stol(t);
    }

    // Exactly one whitespace byte separates the header from raster data.
    void skip_single_whitespace() {
        if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
            throw ImageError("unreadable file: truncated header");
        }
        ++pos_;
    }

    unsigned sample(bool binary, bool wide) {
        if (!binary) {
            return static_cast<unsigned>(number());
        }
        const std::size_t need = wide ? 2 : 1;
        if (pos_ + need > bytes_.size()) {
            throw ImageError("unreadable file: truncated raster");
        }
        unsigned v = bytes_[pos_++];
        if (wide) {
            v = (v << 8) | bytes_[pos_++];
        }
        return v;
    }

  private:
    std::vector<unsigned char> bytes_;
    std::size_t pos_ = 0;
};

std::uint8_t rescale(unsigned v, unsigned maxval) {
    if (v > maxval) {
        throw ImageError("unreadable file: sample exceeds maxval");
    }
    if (maxval == 255) {
        return static_cast<std::uint8_t>(v);
    }
    return static_cast<std::uint8_t>((v * 255u * 2u + maxval) / (2u * maxval));
}

}  // namespace

GrayImage load_image(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ImageError("unreadable file: " + path.string());
    }
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() < 2 || bytes[0] != 'P') {
        throw ImageError("unsupported format: " + path.string());
    }
    const char kind = static_cast<char>(bytes[1]);
    if (kind != '2' && kind != '3' && kind != '5' && kind != '6') {
        throw ImageError("unsupported format: " + path.string());
    }
    const bool binary = kind == '5' || kind == '6';
    const bool color = kind == '3' || kind == '6';

    NetpbmReader reader(std::move(bytes));
    reader.token();  // magic
    const long width = reader.number();
    const long height = reader.number();
    const long maxval = reader.number();
    if (width == 0 || height == 0) {
        throw ImageError("zero-dimension image: " + path.string());
    }
    if (maxval < 1 || maxval > 65535) {
        throw ImageError("unreadable file: bad maxval");
    }
    if (binary) {
        reader.skip_single_whitespace();
    }
    const bool wide = maxval > 255;
    const auto mv = static_cast<unsigned>(maxval);

    Raster<std::uint8_t> px(height, width);
    for (long y = 0; y < height; ++y) {
        for (long x = 0; x < width; ++x) {
            if (color) {
                const double r = rescale(reader.sample(binary, wide), mv);
                const double g = rescale(reader.sample(binary, wide), mv);
                const double b = rescale(reader.sample(binary, wide), mv);
                px(y, x) = static_cast<std::uint8_t>(std::lround(0.299 * r + 0.587 * g + 0.114 * b));
            } else {
                px(y, x) = rescale(reader.sample(binary, wide), mv);
            }
        }
    }
    return GrayImage(std::move(px));
}

void save_pgm(const GrayImage& img, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ImageError("cannot write " + path.string());
    }
    out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.data()), static_cast<std::streamsize>(img.pixels().size()));
    if (!out) {
        throw ImageError("cannot write " + path.string());
    }
}

EarLandmarks load_landmarks(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ImageError("unreadable file: " + path.string());
    }
    EarLandmarks lm;
    if (!(in >> lm.triangular_fossa.x >> lm.triangular_fossa.y >> lm.antitragus.x >> lm.antitragus.y)) {
        throw ImageError("malformed landmark file: " + path.string());
    }
    return lm;
}

GrayImage resize(const GrayImage& img, int target_width, int target_height) {
    if (target_width < 1 || target_height < 1) {
        throw std::invalid_argument("resize: zero target dimension");
    }
    if (target_width == img.width() && target_height == img.height()) {
        return img;
    }
    const int sw = img.width();
    const int sh = img.height();
    auto source_coord = [](int i, int src, int dst) {
        return dst > 1 ? static_cast<double>(i) * (src - 1) / (dst - 1) : 0.0;
    };

    Raster<std::uint8_t> out(target_height, target_width);
    for (int y = 0; y < target_height; ++y) {
        const double fy = source_coord(y, sh, target_height);
        const int y0 = static_cast<int>(std::floor(fy));
        const int y1 = std::min(y0 + 1, sh - 1);
        const double wy = fy - y0;
        for (int x = 0; x < target_width; ++x) {
            const double fx = source_coord(x, sw, target_width);
            const int x0 = static_cast<int>(std::floor(fx));
            const int x1 = std::min(x0 + 1, sw - 1);
            const double wx = fx - x0;
            const double top = (1 - wx) * img(x0, y0) + wx * img(x1, y0);
            const double bottom = (1 - wx) * img(x0, y1) + wx * img(x1, y1);
            const double v = (1 - wy) * top + wy * bottom;
            out(y, x) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
        }
    }
    return GrayImage(std::move(out));
}

GrayImage crop_ear(const GrayImage& img, const EarLandmarks& landmarks, double margin) {
    auto inside = [&](PixelPoint p) { return p.x >= 0 && p.y >= 0 && p.x < img.width() && p.y < img.height(); };
    if (!inside(landmarks.triangular_fossa) || !inside(landmarks.antitragus)) {
        throw std::invalid_argument("crop_ear: landmark outside image");
    }
    if (landmarks.triangular_fossa == landmarks.antitragus) {
        throw std::invalid_argument("crop_ear: landmarks coincide");
    }
    if (!(margin >= 0.0)) {
        throw std::invalid_argument("crop_ear: negative margin");
    }
    const auto [x0, x1] = std::minmax(landmarks.triangular_fossa.x, landmarks.antitragus.x);
    const auto [y0, y1] = std::minmax(landmarks.triangular_fossa.y, landmarks.antitragus.y);
    const int grow_x = static_cast<int>(std::lround(margin * (x1 - x0 + 1)));
    const int grow_y = static_cast<int>(std::lround(margin * (y1 - y0 + 1)));
    const int left = std::max(0, x0 - grow_x);
    const int top = std::max(0, y0 - grow_y);
    const int right = std::min(img.width() - 1, x1 + grow_x);
    const int bottom = std::min(img.height() - 1, y1 + grow_y);
    if (right < left || bottom < top) {
        throw std::invalid_argument("crop_ear: crop collapses to zero area");
    }
    return GrayImage(img.pixels().block(top, left, bottom - top + 1, right - left + 1));
}

RasterF to_float(const GrayImage& img) { return img.pixels().cast<float>() / 255.0f; }

GrayImage from_float(const RasterF& img) {
    Raster<std::uint8_t> out = (img * 255.0f).round().max(0.0f).min(255.0f).cast<std::uint8_t>();
    return GrayImage(std::move(out));
}

}  // namespace fuseid
