#pragma once

#include "fuseid/fusion.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <stdexcept>
#include <span>
#include <string>
#include <vector>

namespace fuseid {

struct MatchConfig {
    int neighbor_count = 2;  // 1 disables the ratio test
    double ratio_threshold = 0.8;
    double geometry_weight = 0.0;

    void validate() const;
};

/// Which slice of a fused template a matcher compares.
enum class MatcherKind { fingerprint, ear, feature_fusion };

std::string to_string(MatcherKind kind);
MatcherKind parse_matcher(const std::string& name);

struct MatchedPair {
    std::size_t probe_index = 0;
    std::size_t gallery_index = 0;
    double distance = 0;
};

struct RawScore {
    std::string probe_id;
    std::string gallery_id;
    std::size_t matched_count = 0;
    std::size_t probe_size = 0;
    std::size_t gallery_size = 0;
};

/// Descriptor distance plus `geometry_weight` times the (x, y, scale, wrapped angle) distance.
double keypoint_distance(const Keypoint& a, const Keypoint& b, const MatchConfig& cfg);

/// All-pairs keypoint distances, probe entries as rows.
Eigen::MatrixXd distance_table(std::span<const TemplateEntry> probe, std::span<const TemplateEntry> gallery,
                               const MatchConfig& cfg);

/// Entries the given matcher looks at.
std::vector<TemplateEntry> matcher_view(const FusedTemplate& t, MatcherKind kind);

/// Ratio-test nearest-neighbour matching with one-to-one gallery usage.
///
/// A probe entry is a candidate when its nearest gallery distance is below
/// `ratio_threshold` times the second nearest. Candidates are then granted
/// their nearest gallery entry in ascending distance order (ties by probe
/// index); a candidate whose gallery entry is already taken is dropped.
std::vector<MatchedPair> knn_match(std::span<const TemplateEntry> probe, std::span<const TemplateEntry> gallery,
                                   const MatchConfig& cfg);
std::vector<MatchedPair> knn_match(const FusedTemplate& probe, const FusedTemplate& gallery, const MatchConfig& cfg);

/// The same matching rule applied to a precomputed probe × gallery distance table.
std::vector<MatchedPair> match_table(const Eigen::Ref<const Eigen::MatrixXd>& table, const MatchConfig& cfg);

RawScore match_score(const FusedTemplate& probe, const FusedTemplate& gallery, const MatchConfig& cfg,
                     MatcherKind kind = MatcherKind::feature_fusion);

/// (s - min) / (max - min); a constant column maps to zeros.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> minmax_normalize(const Eigen::MatrixBase<Derived>& scores) {
    using Scalar = typename Derived::Scalar;
    if (scores.size() == 0) {
        throw std::invalid_argument("minmax_normalize: empty input");
    }
    const Scalar lo = scores.minCoeff();
    const Scalar hi = scores.maxCoeff();
    if (!(hi > lo)) {
        return Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(scores.size());
    }
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out = (scores.reshaped().array() - lo) / (hi - lo);
    // The maximum maps to exactly 1.
    for (Eigen::Index i = 0; i < out.size(); ++i) {
        if (scores.reshaped()(i) == hi) out(i) = Scalar(1);
        out(i) = std::clamp(out(i), Scalar(0), Scalar(1));
    }
    return out;
}

std::vector<double> minmax_normalize(std::span<const double> scores);

}  // namespace fuseid
