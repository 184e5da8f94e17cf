#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

namespace fuseid {

/// Per-user matcher weights before and after tanh adaptation.
struct UserWeights {
    std::string user_id;
    Eigen::VectorXd raw;
    Eigen::VectorXd adapted;
};

/// w = 1 - mean impostor score, per matcher, clamped to [0, 1]. A matcher under
/// which other users score highly against this user (a lamb) is trusted less.
Eigen::VectorXd base_weights(const std::vector<std::vector<double>>& impostor_scores_per_matcher);

/// tanh of each raw weight, renormalized to sum to one. All-zero input gives
/// uniform weights, and so does any input whose entries are all equal.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> adapt_weights(const Eigen::MatrixBase<Derived>& raw) {
    using Scalar = typename Derived::Scalar;
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    const Eigen::Index ms = raw.size();
    if (ms == 0) {
        throw std::invalid_argument("adapt_weights: no matchers");
    }
    if ((raw.array() < Scalar(0)).any() || (raw.array() > Scalar(1)).any() || !raw.allFinite()) {
        throw std::invalid_argument("adapt_weights: raw weights must lie in [0, 1]");
    }
    const Vector uniform = Vector::Constant(ms, Scalar(1) / static_cast<Scalar>(ms));
    if ((raw.array() == raw.reshaped()(0)).all()) {
        return uniform;
    }
    const Vector squashed = raw.reshaped().array().tanh();
    const Scalar total = squashed.sum();
    if (!(total > Scalar(0))) {
        return uniform;
    }
    return squashed / total;
}

/// Weighted sum of normalized matcher scores, within [min(scores), max(scores)].
template <typename DerivedW, typename DerivedS>
typename DerivedS::Scalar fuse_scores(const Eigen::MatrixBase<DerivedW>& weights,
                                      const Eigen::MatrixBase<DerivedS>& scores) {
    using Scalar = typename DerivedS::Scalar;
    if (weights.size() != scores.size() || scores.size() == 0) {
        throw std::invalid_argument("fuse_scores: weight/score length mismatch");
    }
    const Scalar fused = weights.reshaped().template cast<Scalar>().dot(scores.reshaped());
    return std::clamp(fused, scores.minCoeff(), scores.maxCoeff());
}

UserWeights user_weights(const std::string& user_id, const std::vector<std::vector<double>>& impostor_scores_per_matcher);

}  // namespace fuseid
