#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <limits>
#include <vector>

namespace fuseid::test {

struct BruteForceOptimum {
    double cost = std::numeric_limits<double>::infinity();
    std::vector<int> medoids;  // lexicographically first optimal set
};

// Exhaustive k-medoids over every k-subset of the n points.
inline BruteForceOptimum brute_force_medoids(const Eigen::MatrixXd& dist, int k) {
    const int n = static_cast<int>(dist.rows());
    BruteForceOptimum best;
    std::vector<int> pick(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) pick[i] = i;
    while (true) {
        double cost = 0;
        for (int o = 0; o < n; ++o) {
            double m = std::numeric_limits<double>::infinity();
            for (int c : pick) m = std::min(m, dist(o, c));
            cost += m;
        }
        if (cost < best.cost) {
            best.cost = cost;
            best.medoids = pick;
        }
        int i = k - 1;
        while (i >= 0 && pick[i] == n - k + i) --i;
        if (i < 0) break;
        ++pick[i];
        for (int j = i + 1; j < k; ++j) pick[j] = pick[j - 1] + 1;
    }
    return best;
}

}  // namespace fuseid::test
