#include "fuseid/doddington.hpp"

#include <numeric>

namespace fuseid {

Eigen::VectorXd base_weights(const std::vector<std::vector<double>>& impostor_scores_per_matcher) {
    if (impostor_scores_per_matcher.empty()) {
        throw std::invalid_argument("base_weights: no matchers");
    }
    Eigen::VectorXd w(static_cast<Eigen::Index>(impostor_scores_per_matcher.size()));
    for (std::size_t m = 0; m < impostor_scores_per_matcher.size(); ++m) {
        const auto& scores = impostor_scores_per_matcher[m];
        if (scores.empty()) {
            throw std::invalid_argument("base_weights: empty impostor set for matcher " + std::to_string(m));
        }
        const double mean = std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(scores.size());
        w(static_cast<Eigen::Index>(m)) = std::clamp(1.0 - mean, 0.0, 1.0);
    }
    return w;
}

UserWeights user_weights(const std::string& user_id, const std::vector<std::vector<double>>& impostor_scores_per_matcher) {
    UserWeights uw;
    uw.user_id = user_id;
    uw.raw = base_weights(impostor_scores_per_matcher);
    uw.adapted = adapt_weights(uw.raw);
    return uw;
}

}  // namespace fuseid
