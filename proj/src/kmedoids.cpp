#include "fuseid/kmedoids.hpp"

#include "fuseid/matcher.hpp"

namespace fuseid {

DistanceMatrix<float> keypoint_distances(std::span<const Keypoint> points, PamMetric metric) {
    const auto n = static_cast<Eigen::Index>(points.size());
    if (metric == PamMetric::descriptor) {
        Eigen::Matrix<float, Eigen::Dynamic, kDescriptorSize, Eigen::RowMajor> rows(n, kDescriptorSize);
        for (Eigen::Index i = 0; i < n; ++i) rows.row(i) = points[i].descriptor.transpose();
        return pairwise_euclidean(rows);
    }
    MatchConfig composite;
    composite.geometry_weight = 1.0;
    DistanceMatrix<float> dist(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        dist(i, i) = 0.0f;
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const auto d = static_cast<float>(keypoint_distance(points[i], points[j], composite));
            dist(i, j) = d;
            dist(j, i) = d;
        }
    }
    return dist;
}

MedoidPartition pam(std::span<const Keypoint> points, const PamConfig& cfg) {
    if (points.empty()) {
        throw std::invalid_argument("pam: empty input");
    }
    return pam_on_distances(keypoint_distances(points, cfg.metric), cfg);
}

FusedTemplate reduce_template(const FusedTemplate& t, const PamConfig& cfg) {
    if (t.empty()) {
        throw std::invalid_argument("reduce_template: empty template");
    }
    std::vector<Keypoint> points;
    points.reserve(t.size());
    for (const TemplateEntry& e : t.entries) points.push_back(e.keypoint);
    const MedoidPartition partition = pam(points, cfg);

    FusedTemplate out;
    out.subject_id = t.subject_id;
    out.provenance = t.provenance;
    out.reduced = true;
    out.entries.reserve(partition.medoid_indices.size());
    for (Eigen::Index m : partition.medoid_indices) {
        out.entries.push_back(t.entries[static_cast<std::size_t>(m)]);
    }
    return out;
}

}  // namespace fuseid
