#pragma once

#include "fuseid/sift.hpp"

#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fuseid {

struct TemplateEntry {
    Modality modality = Modality::fingerprint;
    Keypoint keypoint;

    friend bool operator==(const TemplateEntry&, const TemplateEntry&) = default;
};

/// The stored biometric record: tagged keypoints, fingerprint entries first.
struct FusedTemplate {
    std::string subject_id;
    std::vector<TemplateEntry> entries;
    bool reduced = false;
    std::vector<std::string> provenance;

    std::size_t size() const { return entries.size(); }
    bool empty() const { return entries.empty(); }
    std::size_t count(Modality m) const;

    friend bool operator==(const FusedTemplate&, const FusedTemplate&) = default;
};

class TemplateFormatError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Order-preserving concatenation of a fingerprint set and an ear set of one subject.
FusedTemplate fuse(const FeatureSet& fingerprint, const FeatureSet& ear);

/// Single-modality template carrying one feature set.
FusedTemplate as_template(const FeatureSet& features);

/// Entries of one modality, in template order.
FeatureSet split_modality(const FusedTemplate& t, Modality modality);

std::vector<unsigned char> encode_template(const FusedTemplate& t);
FusedTemplate decode_template(std::span<const unsigned char> bytes);

void write_template(const FusedTemplate& t, const std::filesystem::path& path);
FusedTemplate read_template(const std::filesystem::path& path);

}  // namespace fuseid
