#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace fuseid {

struct SampleRecord {
    std::string subject_id;
    int sample_index = 1;
    std::filesystem::path fingerprint;
    std::filesystem::path ear;
    std::optional<std::filesystem::path> landmarks;
};

/// One line per sample: `subject_id sample_idx fp_path ear_path [landmark_path]`.
/// Relative paths resolve against the manifest's directory.
struct DatasetManifest {
    std::vector<SampleRecord> samples;

    /// Subject ids in order of first appearance.
    std::vector<std::string> subjects() const;
    const SampleRecord* find(const std::string& subject_id, int sample_index) const;
    /// Smallest per-subject sample count.
    int samples_per_subject() const;
};

DatasetManifest read_manifest(const std::filesystem::path& path);

/// Paths are written relative to the manifest's directory when they lie below it.
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

}  // namespace fuseid
