#pragma once

#include "fuseid/dataset.hpp"
#include "fuseid/doddington.hpp"
#include "fuseid/fusion.hpp"
#include "fuseid/image.hpp"
#include "fuseid/kmedoids.hpp"
#include "fuseid/matcher.hpp"
#include "fuseid/sift.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fuseid {

struct PreprocessConfig {
    ClaheParams clahe;
    bool equalize = true;
    double ear_margin = 0.25;
    int fingerprint_width = 200;
    int fingerprint_height = 200;
    int ear_width = 200;
    int ear_height = 140;
};

struct PipelineConfig {
    PreprocessConfig preprocess;
    SiftParams sift;
    PamConfig pam;
    bool reduce_gallery = true;
    bool reduce_probe = true;
    MatchConfig match;
    std::vector<MatcherKind> matchers{MatcherKind::fingerprint, MatcherKind::ear, MatcherKind::feature_fusion};
    int enroll_sample = 1;
    int probe_sample = 2;
    int workers = 0;  // 0 = hardware concurrency

    void validate() const;
};

/// Name of the Doddington-weighted output in reports.
inline constexpr const char* kFusedOutput = "fused";

/// Ear: optional landmark crop, then resize; fingerprint: resize. Both are then equalized.
GrayImage preprocess(const GrayImage& img, Modality modality, const PreprocessConfig& cfg,
                     const std::optional<EarLandmarks>& landmarks = std::nullopt);

/// Load, preprocess and extract one modality of one sample.
FeatureSet extract_modality(const std::filesystem::path& image, Modality modality, const PipelineConfig& cfg,
                            const std::optional<std::filesystem::path>& landmarks = std::nullopt);

/// Fused template of one sample, medoid-reduced when `reduce` is set and the template is non-empty.
FusedTemplate build_template(const SampleRecord& sample, const PipelineConfig& cfg, bool reduce);

struct Gallery {
    std::vector<FusedTemplate> templates;
    std::vector<std::string> failures;  // one line per flagged subject

    std::vector<std::string> subject_ids() const;
};

/// One template per subject from the enrollment sample; unreadable or featureless subjects are flagged.
Gallery enroll_gallery(const DatasetManifest& manifest, const PipelineConfig& cfg);

void write_gallery(const Gallery& gallery, const std::filesystem::path& dir);

/// Raw matched counts, probe × gallery, one matrix per matcher.
std::map<MatcherKind, Eigen::MatrixXd> score_matrices(const std::vector<FusedTemplate>& probes,
                                                      const std::vector<FusedTemplate>& gallery,
                                                      const PipelineConfig& cfg);

/// Weights from cross-matching the gallery with itself.
std::vector<UserWeights> estimate_weights(const Gallery& gallery, const PipelineConfig& cfg);

struct RankedCandidate {
    std::string subject_id;
    double score = 0;
};

struct Identification {
    std::map<MatcherKind, Eigen::VectorXd> raw;         // per gallery entry
    std::map<MatcherKind, Eigen::VectorXd> normalized;  // per gallery entry
    Eigen::VectorXd fused;
    std::vector<RankedCandidate> ranking;  // descending score, ties by subject id
    bool degenerate = false;               // probe without features
};

/// Rank candidates by descending score, ties by subject id.
std::vector<RankedCandidate> rank_candidates(const std::vector<std::string>& ids, const Eigen::VectorXd& scores);

/// Normalizes each matcher's raw column and fuses with each gallery user's weights.
Identification identify_from_raw(const std::map<MatcherKind, Eigen::VectorXd>& raw, const Gallery& gallery,
                                 const std::vector<UserWeights>& weights, const PipelineConfig& cfg);

Identification identify(const FusedTemplate& probe, const Gallery& gallery, const std::vector<UserWeights>& weights,
                        const PipelineConfig& cfg);

struct CmcCurve {
    std::vector<double> hit_rate;  // index r-1 holds the rate at rank r

    std::size_t size() const { return hit_rate.size(); }
    double at(std::size_t rank) const { return hit_rate.at(rank - 1); }
};

CmcCurve compute_cmc(const std::vector<std::vector<RankedCandidate>>& rankings,
                     const std::vector<std::string>& true_subjects);

double rank1_rate(const CmcCurve& curve);

struct ExperimentReport {
    Gallery gallery;
    std::vector<std::string> gallery_ids;
    std::vector<std::string> probe_ids;
    std::map<std::string, Eigen::MatrixXd> scores;  // normalized, probe × gallery
    std::map<std::string, CmcCurve> cmc;
    std::vector<MatcherKind> weighted_matchers;
    std::vector<UserWeights> weights;
    std::vector<std::string> failures;

    double rank1(const std::string& name) const { return rank1_rate(cmc.at(name)); }
};

/// Enroll the enrollment sample, weight from the gallery sweep, identify every probe sample.
ExperimentReport run_experiment(const DatasetManifest& manifest, const PipelineConfig& cfg);

/// scores_*.csv, cmc_*.csv, weights.csv, summary.txt and the gallery templates.
void write_report(const ExperimentReport& report, const std::filesystem::path& dir);

/// Formats a score or rate the way every report file does.
std::string format_rate(double v);

}  // namespace fuseid
