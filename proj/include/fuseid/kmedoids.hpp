#pragma once

#include "fuseid/fusion.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace fuseid {

enum class PamMetric { descriptor, composite };

struct PamConfig {
    std::size_t k = 0;  // 0 selects min(max_k, ceil(n / 4))
    std::size_t max_k = 200;  // 0 disables the cap
    std::uint64_t seed = 1;
    int max_iterations = 100;
    PamMetric metric = PamMetric::descriptor;

    std::size_t resolve_k(std::size_t n) const {
        if (k != 0) return k;
        const std::size_t quarter = (n + 3) / 4;
        return max_k == 0 ? quarter : std::min(max_k, quarter);
    }
};

struct MedoidPartition {
    std::vector<Eigen::Index> medoid_indices;  // ascending
    std::vector<Eigen::Index> assignment;      // input index of each point's medoid
    double total_cost = 0;
    bool converged = false;
    int iterations = 0;
    std::vector<double> cost_history;  // initial cost, then one value per accepted swap
};

template <typename Scalar>
using DistanceMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Euclidean distances between the rows of `points`.
template <typename Derived>
DistanceMatrix<typename Derived::Scalar> pairwise_euclidean(const Eigen::MatrixBase<Derived>& points) {
    using Scalar = typename Derived::Scalar;
    const Eigen::Index n = points.rows();
    DistanceMatrix<Scalar> dist(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        dist(i, i) = Scalar(0);
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const Scalar d = (points.row(i) - points.row(j)).norm();
            dist(i, j) = d;
            dist(j, i) = d;
        }
    }
    return dist;
}

namespace detail {

struct NearestMedoids {
    std::vector<Eigen::Index> nearest_slot;
    std::vector<double> nearest;
    std::vector<double> second;
};

// Medoid slots are scanned in ascending index order with strict comparison, so
// equal distances resolve to the lowest-index medoid.
template <typename Scalar>
NearestMedoids nearest_medoids(const DistanceMatrix<Scalar>& dist, const std::vector<Eigen::Index>& medoids) {
    const Eigen::Index n = dist.rows();
    NearestMedoids nm{std::vector<Eigen::Index>(n), std::vector<double>(n), std::vector<double>(n)};
    for (Eigen::Index o = 0; o < n; ++o) {
        double best = std::numeric_limits<double>::infinity();
        double second = std::numeric_limits<double>::infinity();
        Eigen::Index slot = 0;
        for (std::size_t s = 0; s < medoids.size(); ++s) {
            const double d = static_cast<double>(dist(o, medoids[s]));
            if (d < best) {
                second = best;
                best = d;
                slot = static_cast<Eigen::Index>(s);
            } else if (d < second) {
                second = d;
            }
        }
        nm.nearest_slot[o] = slot;
        nm.nearest[o] = best;
        nm.second[o] = second;
    }
    return nm;
}

template <typename Scalar>
double configuration_cost(const DistanceMatrix<Scalar>& dist, const std::vector<Eigen::Index>& medoids) {
    const auto nm = nearest_medoids(dist, medoids);
    return std::accumulate(nm.nearest.begin(), nm.nearest.end(), 0.0);
}

// Cost change of replacing each medoid slot by `candidate`, all slots at once.
template <typename Scalar>
void swap_deltas(const DistanceMatrix<Scalar>& dist, const NearestMedoids& nm, Eigen::Index candidate,
                 std::vector<double>& deltas) {
    double shared = 0;
    std::fill(deltas.begin(), deltas.end(), 0.0);
    for (Eigen::Index o = 0; o < dist.rows(); ++o) {
        const double d_oc = static_cast<double>(dist(o, candidate));
        const double dn = nm.nearest[o];
        if (d_oc < dn) {
            shared += d_oc - dn;
        } else {
            deltas[nm.nearest_slot[o]] += std::min(d_oc, nm.second[o]) - dn;
        }
    }
    for (auto& d : deltas) d += shared;
}

}  // namespace detail

/// Partitioning Around Medoids over a precomputed symmetric distance matrix.
///
/// Seeds k distinct medoids at random, then repeatedly applies the single
/// medoid/non-medoid swap with the largest cost reduction until none remains
/// or `max_iterations` swaps were accepted. Ties prefer lower indices: at a
/// local optimum, a medoid that can be exchanged for a lower-index point at
/// exactly equal cost is moved there and the descent resumes.
template <typename Scalar>
MedoidPartition pam_on_distances(const DistanceMatrix<Scalar>& dist, const PamConfig& cfg) {
    const auto n = static_cast<std::size_t>(dist.rows());
    if (n == 0) {
        throw std::invalid_argument("pam: empty input");
    }
    if (dist.cols() != dist.rows()) {
        throw std::invalid_argument("pam: distance matrix must be square");
    }
    const std::size_t k = cfg.resolve_k(n);
    if (k < 1 || k > n) {
        throw std::invalid_argument("pam: k must lie in [1, n]");
    }
    if (cfg.max_iterations < 1) {
        throw std::invalid_argument("pam: max_iterations must be positive");
    }

    // Partial Fisher-Yates over 0..n-1.
    std::mt19937_64 rng(cfg.seed);
    std::vector<Eigen::Index> pool(n);
    std::iota(pool.begin(), pool.end(), Eigen::Index{0});
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng() % (n - i));
        std::swap(pool[i], pool[j]);
    }
    std::vector<Eigen::Index> medoids(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(medoids.begin(), medoids.end());

    MedoidPartition result;
    double cost = detail::configuration_cost(dist, medoids);
    result.cost_history.push_back(cost);

    std::vector<char> is_medoid(n, 0);
    for (auto m : medoids) is_medoid[m] = 1;
    std::vector<double> deltas(k);

    auto apply_swap = [&](std::vector<Eigen::Index> current, std::size_t slot, Eigen::Index candidate) {
        current[slot] = candidate;
        std::sort(current.begin(), current.end());
        return current;
    };

    // Steepest descent; returns false when the iteration cap stops it.
    auto descend = [&] {
        while (result.iterations < cfg.max_iterations) {
            const auto nm = detail::nearest_medoids(dist, medoids);
            double best_delta = 0;
            std::size_t best_slot = 0;
            Eigen::Index best_candidate = -1;
            for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(n); ++c) {
                if (is_medoid[c]) continue;
                detail::swap_deltas(dist, nm, c, deltas);
                for (std::size_t s = 0; s < k; ++s) {
                    if (deltas[s] < best_delta) {
                        best_delta = deltas[s];
                        best_slot = s;
                        best_candidate = c;
                    }
                }
            }
            if (best_candidate < 0) return true;
            auto next = apply_swap(medoids, best_slot, best_candidate);
            const double next_cost = detail::configuration_cost(dist, next);
            if (!(next_cost < cost)) return true;  // rounding-level improvement only
            is_medoid[medoids[best_slot]] = 0;
            is_medoid[best_candidate] = 1;
            medoids = std::move(next);
            cost = next_cost;
            result.cost_history.push_back(cost);
            ++result.iterations;
        }
        return false;
    };

    // One move of a medoid to a lower-index point at exactly equal cost.
    auto lower_tie = [&] {
        const double tolerance = 1e-12 * std::max(1.0, cost);
        const auto nm = detail::nearest_medoids(dist, medoids);
        for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(n); ++c) {
            if (is_medoid[c]) continue;
            detail::swap_deltas(dist, nm, c, deltas);
            for (std::size_t s = 0; s < k; ++s) {
                if (c > medoids[s] || std::abs(deltas[s]) > tolerance) continue;
                auto next = apply_swap(medoids, s, c);
                if (detail::configuration_cost(dist, next) == cost) {
                    is_medoid[medoids[s]] = 0;
                    is_medoid[c] = 1;
                    medoids = std::move(next);
                    return true;
                }
            }
        }
        return false;
    };

    // A tie move can open new improving swaps, so descent resumes after each one.
    while (descend()) {
        if (!lower_tie()) {
            result.converged = true;
            break;
        }
    }

    const auto nm = detail::nearest_medoids(dist, medoids);
    result.assignment.resize(n);
    for (std::size_t o = 0; o < n; ++o) {
        result.assignment[o] = medoids[static_cast<std::size_t>(nm.nearest_slot[o])];
    }
    result.total_cost = cost;
    result.medoid_indices = std::move(medoids);
    return result;
}

/// PAM on the rows of `points` under Euclidean distance.
template <typename Derived>
MedoidPartition pam(const Eigen::MatrixBase<Derived>& points, const PamConfig& cfg) {
    return pam_on_distances(pairwise_euclidean(points), cfg);
}

/// Distances between keypoints under the configured metric.
DistanceMatrix<float> keypoint_distances(std::span<const Keypoint> points, PamMetric metric);

MedoidPartition pam(std::span<const Keypoint> points, const PamConfig& cfg);

/// Keeps only the medoid entries, in their original order, and marks the template reduced.
FusedTemplate reduce_template(const FusedTemplate& t, const PamConfig& cfg);

}  // namespace fuseid
