#include "fuseid/matcher.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace fuseid {

namespace {

double wrapped_angle_difference(double a, double b) {
    double d = std::fmod(a - b, 2.0 * std::numbers::pi);
    if (d > std::numbers::pi) d -= 2.0 * std::numbers::pi;
    if (d < -std::numbers::pi) d += 2.0 * std::numbers::pi;
    return d;
}

double geometry_distance(const Keypoint& a, const Keypoint& b) {
    const double dx = static_cast<double>(a.x) - b.x;
    const double dy = static_cast<double>(a.y) - b.y;
    const double ds = static_cast<double>(a.scale) - b.scale;
    const double dt = wrapped_angle_difference(a.orientation, b.orientation);
    return std::sqrt(dx * dx + dy * dy + ds * ds + dt * dt);
}

using DescriptorRows = Eigen::Matrix<double, Eigen::Dynamic, kDescriptorSize, Eigen::RowMajor>;

DescriptorRows stack(std::span<const TemplateEntry> entries) {
    DescriptorRows m(static_cast<Eigen::Index>(entries.size()), kDescriptorSize);
    for (std::size_t i = 0; i < entries.size(); ++i) {
        m.row(static_cast<Eigen::Index>(i)) = entries[i].keypoint.descriptor.cast<double>().transpose();
    }
    return m;
}

}  // namespace

void MatchConfig::validate() const {
    if (neighbor_count < 1) {
        throw std::invalid_argument("match: neighbor_count must be at least 1");
    }
    if (!(ratio_threshold > 0.0 && ratio_threshold <= 1.0)) {
        throw std::invalid_argument("match: ratio_threshold must lie in (0, 1]");
    }
    if (!(geometry_weight >= 0.0)) {
        throw std::invalid_argument("match: geometry_weight must be non-negative");
    }
}

std::string to_string(MatcherKind kind) {
    switch (kind) {
        case MatcherKind::fingerprint: return "fingerprint";
        case MatcherKind::ear: return "ear";
        case MatcherKind::feature_fusion: return "feature_fusion";
    }
    return "?";
}

MatcherKind parse_matcher(const std::string& name) {
    if (name == "fingerprint") return MatcherKind::fingerprint;
    if (name == "ear") return MatcherKind::ear;
    if (name == "feature_fusion") return MatcherKind::feature_fusion;
    throw std::invalid_argument("unknown matcher '" + name + "'");
}

double keypoint_distance(const Keypoint& a, const Keypoint& b, const MatchConfig& cfg) {
    const double desc = (a.descriptor.cast<double>() - b.descriptor.cast<double>()).norm();
    if (cfg.geometry_weight == 0.0) return desc;
    return desc + cfg.geometry_weight * geometry_distance(a, b);
}

Eigen::MatrixXd distance_table(std::span<const TemplateEntry> probe, std::span<const TemplateEntry> gallery,
                               const MatchConfig& cfg) {
    const DescriptorRows p = stack(probe);
    const DescriptorRows g = stack(gallery);
    Eigen::MatrixXd sq = -2.0 * (p * g.transpose());
    sq.colwise() += p.rowwise().squaredNorm();
    sq.rowwise() += g.rowwise().squaredNorm().transpose();
    Eigen::MatrixXd table = sq.cwiseMax(0.0).cwiseSqrt();
    if (cfg.geometry_weight != 0.0) {
        for (Eigen::Index i = 0; i < table.rows(); ++i) {
            for (Eigen::Index j = 0; j < table.cols(); ++j) {
                table(i, j) += cfg.geometry_weight * geometry_distance(probe[i].keypoint, gallery[j].keypoint);
            }
        }
    }
    return table;
}

std::vector<TemplateEntry> matcher_view(const FusedTemplate& t, MatcherKind kind) {
    if (kind == MatcherKind::feature_fusion) return t.entries;
    const Modality wanted = kind == MatcherKind::fingerprint ? Modality::fingerprint : Modality::ear;
    std::vector<TemplateEntry> out;
    for (const TemplateEntry& e : t.entries) {
        if (e.modality == wanted) out.push_back(e);
    }
    return out;
}

std::vector<MatchedPair> match_table(const Eigen::Ref<const Eigen::MatrixXd>& table, const MatchConfig& cfg) {
    cfg.validate();
    if (table.rows() == 0 || table.cols() == 0) return {};
    const bool ratio_test = cfg.neighbor_count >= 2;

    std::vector<MatchedPair> candidates;
    for (Eigen::Index i = 0; i < table.rows(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        double second = std::numeric_limits<double>::infinity();
        Eigen::Index best_j = 0;
        for (Eigen::Index j = 0; j < table.cols(); ++j) {
            const double d = table(i, j);
            if (d < best) {
                second = best;
                best = d;
                best_j = j;
            } else if (d < second) {
                second = d;
            }
        }
        if (!ratio_test || best < cfg.ratio_threshold * second) {
            candidates.push_back({static_cast<std::size_t>(i), static_cast<std::size_t>(best_j), best});
        }
    }

    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const MatchedPair& a, const MatchedPair& b) { return a.distance < b.distance; });
    std::vector<char> taken(static_cast<std::size_t>(table.cols()), 0);
    std::vector<MatchedPair> out;
    for (const MatchedPair& c : candidates) {
        if (taken[c.gallery_index]) continue;
        taken[c.gallery_index] = 1;
        out.push_back(c);
    }
    return out;
}

std::vector<MatchedPair> knn_match(std::span<const TemplateEntry> probe, std::span<const TemplateEntry> gallery,
                                   const MatchConfig& cfg) {
    cfg.validate();
    if (probe.empty() || gallery.empty()) return {};
    return match_table(distance_table(probe, gallery, cfg), cfg);
}

std::vector<MatchedPair> knn_match(const FusedTemplate& probe, const FusedTemplate& gallery, const MatchConfig& cfg) {
    return knn_match(std::span<const TemplateEntry>(probe.entries), std::span<const TemplateEntry>(gallery.entries), cfg);
}

RawScore match_score(const FusedTemplate& probe, const FusedTemplate& gallery, const MatchConfig& cfg,
                     MatcherKind kind) {
    const auto p = matcher_view(probe, kind);
    const auto g = matcher_view(gallery, kind);
    RawScore s;
    s.probe_id = probe.subject_id;
    s.gallery_id = gallery.subject_id;
    s.probe_size = p.size();
    s.gallery_size = g.size();
    s.matched_count = knn_match(p, g, cfg).size();
    return s;
}

std::vector<double> minmax_normalize(std::span<const double> scores) {
    const Eigen::Map<const Eigen::VectorXd> v(scores.data(), static_cast<Eigen::Index>(scores.size()));
    const Eigen::VectorXd out = minmax_normalize(v);
    return {out.data(), out.data() + out.size()};
}

}  // namespace fuseid
