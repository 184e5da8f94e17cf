#include "fuseid/fusion.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

namespace fuseid {

namespace {

constexpr std::array<unsigned char, 4> kMagic{'F', 'U', 'S', 'D'};
constexpr std::uint16_t kVersion = 1;
constexpr std::uint8_t kFlagReduced = 0x01;

std::uint32_t crc32_of(std::span<const unsigned char> bytes) {
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, bytes.data(), static_cast<uInt>(bytes.size()));
    return static_cast<std::uint32_t>(crc);
}

class Writer {
  public:
    template <typename T>
    void put(T v) {
        static_assert(std::is_integral_v<T>);
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            out_.push_back(static_cast<unsigned char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff));
        }
    }
    void put_f32(float v) { put(std::bit_cast<std::uint32_t>(v)); }
    void put_string(const std::string& s) {
        put(static_cast<std::uint32_t>(s.size()));
        out_.insert(out_.end(), s.begin(), s.end());
    }
    void put_bytes(std::span<const unsigned char> b) { out_.insert(out_.end(), b.begin(), b.end()); }
    std::vector<unsigned char>& bytes() { return out_; }

  private:
    std::vector<unsigned char> out_;
};

class Reader {
  public:
    explicit Reader(std::span<const unsigned char> in) : in_(in) {}

    template <typename T>
    T get() {
        need(sizeof(T));
        std::uint64_t v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            v |= static_cast<std::uint64_t>(in_[pos_++]) << (8 * i);
        }
        return static_cast<T>(v);
    }
    float get_f32() { return std::bit_cast<float>(get<std::uint32_t>()); }
    std::string get_string() {
        const auto n = get<std::uint32_t>();
        need(n);
        std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    std::size_t remaining() const { return in_.size() - pos_; }

  private:
    void need(std::size_t n) const {
        if (in_.size() - pos_ < n) {
            throw TemplateFormatError("truncated template file");
        }
    }
    std::span<const unsigned char> in_;
    std::size_t pos_ = 0;
};

constexpr std::size_t kEntryBytes = 1 + 4 * 4 + kDescriptorSize * 4;

}  // namespace

std::size_t FusedTemplate::count(Modality m) const {
    return static_cast<std::size_t>(
        std::count_if(entries.begin(), entries.end(), [m](const TemplateEntry& e) { return e.modality == m; }));
}

FusedTemplate fuse(const FeatureSet& fingerprint, const FeatureSet& ear) {
    if (fingerprint.modality != Modality::fingerprint || ear.modality != Modality::ear) {
        throw std::invalid_argument("fuse: modality mismatch");
    }
    if (fingerprint.subject_id != ear.subject_id) {
        throw std::invalid_argument("fuse: subject mismatch ('" + fingerprint.subject_id + "' vs '" + ear.subject_id +
                                    "')");
    }
    FusedTemplate t;
    t.subject_id = fingerprint.subject_id;
    t.provenance = {fingerprint.source_id, ear.source_id};
    t.entries.reserve(fingerprint.keypoints.size() + ear.keypoints.size());
    for (const Keypoint& kp : fingerprint.keypoints) t.entries.push_back({Modality::fingerprint, kp});
    for (const Keypoint& kp : ear.keypoints) t.entries.push_back({Modality::ear, kp});
    return t;
}

FusedTemplate as_template(const FeatureSet& features) {
    FusedTemplate t;
    t.subject_id = features.subject_id;
    t.provenance = {features.source_id};
    t.entries.reserve(features.keypoints.size());
    for (const Keypoint& kp : features.keypoints) t.entries.push_back({features.modality, kp});
    return t;
}

FeatureSet split_modality(const FusedTemplate& t, Modality modality) {
    FeatureSet fs;
    fs.modality = modality;
    fs.subject_id = t.subject_id;
    fs.source_id = t.provenance.empty() ? std::string{} : t.provenance.front();
    for (const TemplateEntry& e : t.entries) {
        if (e.modality == modality) fs.keypoints.push_back(e.keypoint);
    }
    return fs;
}

std::vector<unsigned char> encode_template(const FusedTemplate& t) {
    if (t.provenance.size() > std::numeric_limits<std::uint16_t>::max() ||
        t.entries.size() > std::numeric_limits<std::uint32_t>::max()) {
        throw std::invalid_argument("encode_template: template too large");
    }
    Writer w;
    w.put_bytes(kMagic);
    w.put(kVersion);
    w.put(static_cast<std::uint8_t>(t.reduced ? kFlagReduced : 0));
    w.put_string(t.subject_id);
    w.put(static_cast<std::uint16_t>(t.provenance.size()));
    for (const auto& p : t.provenance) w.put_string(p);
    w.put(static_cast<std::uint32_t>(t.entries.size()));
    for (const TemplateEntry& e : t.entries) {
        w.put(static_cast<std::uint8_t>(e.modality));
        w.put_f32(e.keypoint.x);
        w.put_f32(e.keypoint.y);
        w.put_f32(e.keypoint.scale);
        w.put_f32(e.keypoint.orientation);
        for (int i = 0; i < kDescriptorSize; ++i) w.put_f32(e.keypoint.descriptor[i]);
    }
    const std::uint32_t crc = crc32_of(w.bytes());
    w.put(crc);
    return std::move(w.bytes());
}

FusedTemplate decode_template(std::span<const unsigned char> bytes) {
    if (bytes.size() < kMagic.size() || !std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
        throw TemplateFormatError("not a template file (bad magic)");
    }
    if (bytes.size() < kMagic.size() + 2 + 4) {
        throw TemplateFormatError("truncated template file");
    }
    Reader header(bytes.subspan(kMagic.size()));
    const auto version = header.get<std::uint16_t>();
    if (version != kVersion) {
        throw TemplateFormatError("unsupported template version " + std::to_string(version));
    }

    const auto body = bytes.first(bytes.size() - 4);
    Reader trailer(bytes.last(4));
    if (crc32_of(body) != trailer.get<std::uint32_t>()) {
        throw TemplateFormatError("template checksum failure");
    }

    Reader r(body.subspan(kMagic.size() + 2));
    FusedTemplate t;
    const auto flags = r.get<std::uint8_t>();
    t.reduced = (flags & kFlagReduced) != 0;
    t.subject_id = r.get_string();
    const auto n_prov = r.get<std::uint16_t>();
    for (std::uint16_t i = 0; i < n_prov; ++i) t.provenance.push_back(r.get_string());
    const auto n_entries = r.get<std::uint32_t>();
    if (r.remaining() != static_cast<std::size_t>(n_entries) * kEntryBytes) {
        throw TemplateFormatError("truncated template file");
    }
    t.entries.resize(n_entries);
    for (TemplateEntry& e : t.entries) {
        const auto m = r.get<std::uint8_t>();
        if (m > 1) {
            throw TemplateFormatError("invalid modality tag " + std::to_string(m));
        }
        e.modality = static_cast<Modality>(m);
        e.keypoint.x = r.get_f32();
        e.keypoint.y = r.get_f32();
        e.keypoint.scale = r.get_f32();
        e.keypoint.orientation = r.get_f32();
        for (int i = 0; i < kDescriptorSize; ++i) e.keypoint.descriptor[i] = r.get_f32();
    }
    return t;
}

void write_template(const FusedTemplate& t, const std::filesystem::path& path) {
    const auto bytes = encode_template(t);
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw std::runtime_error("cannot write template " + path.string());
    }
}

FusedTemplate read_template(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open template " + path.string());
    }
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_template(bytes);
}

}  // namespace fuseid
