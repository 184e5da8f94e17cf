#include "fuseid/eval.hpp"

#include "parallel.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <stdexcept>

namespace fuseid {

namespace {

constexpr MatcherKind kAllMatchers[] = {MatcherKind::fingerprint, MatcherKind::ear, MatcherKind::feature_fusion};

std::vector<Eigen::Index> indices_of(const FusedTemplate& t, MatcherKind kind) {
    std::vector<Eigen::Index> out;
    for (std::size_t i = 0; i < t.entries.size(); ++i) {
        const Modality m = t.entries[i].modality;
        const bool keep = kind == MatcherKind::feature_fusion ||
                          (kind == MatcherKind::fingerprint && m == Modality::fingerprint) ||
                          (kind == MatcherKind::ear && m == Modality::ear);
        if (keep) out.push_back(static_cast<Eigen::Index>(i));
    }
    return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
}

}  // namespace

void PipelineConfig::validate() const {
    sift.validate();
    match.validate();
    if (matchers.empty()) {
        throw std::invalid_argument("pipeline: at least one weighted matcher required");
    }
    std::set<MatcherKind> seen(matchers.begin(), matchers.end());
    if (seen.size() != matchers.size()) {
        throw std::invalid_argument("pipeline: duplicate matcher in weighting set");
    }
    if (pam.max_iterations < 1) {
        throw std::invalid_argument("pipeline: pam.max_iterations must be positive");
    }
    if (enroll_sample == probe_sample) {
        throw std::invalid_argument("pipeline: enrollment and probe samples must differ");
    }
    if (preprocess.fingerprint_width < 16 || preprocess.fingerprint_height < 16 || preprocess.ear_width < 16 ||
        preprocess.ear_height < 16) {
        throw std::invalid_argument("pipeline: preprocessed images must be at least 16x16");
    }
}

GrayImage preprocess(const GrayImage& img, Modality modality, const PreprocessConfig& cfg,
                     const std::optional<EarLandmarks>& landmarks) {
    GrayImage out = img;
    if (modality == Modality::ear) {
        if (landmarks) out = crop_ear(out, *landmarks, cfg.ear_margin);
        out = resize(out, cfg.ear_width, cfg.ear_height);
    } else {
        out = resize(out, cfg.fingerprint_width, cfg.fingerprint_height);
    }
    return cfg.equalize ? adaptive_hist_eq(out, cfg.clahe) : out;
}

FeatureSet extract_modality(const std::filesystem::path& image, Modality modality, const PipelineConfig& cfg,
                            const std::optional<std::filesystem::path>& landmarks) {
    std::optional<EarLandmarks> lm;
    if (landmarks && modality == Modality::ear) lm = load_landmarks(*landmarks);
    FeatureSet fs = extract_features(preprocess(load_image(image), modality, cfg.preprocess, lm), modality, cfg.sift);
    fs.source_id = image.filename().string();
    return fs;
}

FusedTemplate build_template(const SampleRecord& sample, const PipelineConfig& cfg, bool reduce) {
    FeatureSet fp = extract_modality(sample.fingerprint, Modality::fingerprint, cfg);
    FeatureSet ear = extract_modality(sample.ear, Modality::ear, cfg, sample.landmarks);
    fp.subject_id = sample.subject_id;
    ear.subject_id = sample.subject_id;
    FusedTemplate t = fuse(fp, ear);
    if (reduce && !t.empty()) t = reduce_template(t, cfg.pam);
    return t;
}

std::vector<std::string> Gallery::subject_ids() const {
    std::vector<std::string> out;
    out.reserve(templates.size());
    for (const auto& t : templates) out.push_back(t.subject_id);
    return out;
}

Gallery enroll_gallery(const DatasetManifest& manifest, const PipelineConfig& cfg) {
    cfg.validate();
    const auto subjects = manifest.subjects();
    std::vector<std::optional<FusedTemplate>> built(subjects.size());
    std::vector<std::string> errors(subjects.size());
    detail::parallel_for(subjects.size(), cfg.workers, [&](std::size_t i) {
        const SampleRecord* rec = manifest.find(subjects[i], cfg.enroll_sample);
        if (!rec) {
            errors[i] = subjects[i] + ": no enrollment sample " + std::to_string(cfg.enroll_sample);
            return;
        }
        try {
            FusedTemplate t = build_template(*rec, cfg, cfg.reduce_gallery);
            if (t.empty()) {
                errors[i] = subjects[i] + ": enrollment produced no features";
            } else {
                built[i] = std::move(t);
            }
        } catch (const std::exception& e) {
            errors[i] = subjects[i] + ": " + e.what();
        }
    });

    Gallery g;
    for (std::size_t i = 0; i < subjects.size(); ++i) {
        if (built[i]) {
            g.templates.push_back(std::move(*built[i]));
        } else {
            g.failures.push_back("enroll " + errors[i]);
        }
    }
    return g;
}

void write_gallery(const Gallery& gallery, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (const auto& t : gallery.templates) {
        write_template(t, dir / (t.subject_id + ".fusd"));
    }
}

std::map<MatcherKind, Eigen::MatrixXd> score_matrices(const std::vector<FusedTemplate>& probes,
                                                      const std::vector<FusedTemplate>& gallery,
                                                      const PipelineConfig& cfg) {
    const auto np = static_cast<Eigen::Index>(probes.size());
    const auto ng = static_cast<Eigen::Index>(gallery.size());
    std::map<MatcherKind, Eigen::MatrixXd> out;
    for (MatcherKind k : kAllMatchers) out[k] = Eigen::MatrixXd::Zero(np, ng);

    std::map<MatcherKind, std::vector<std::vector<Eigen::Index>>> gallery_idx;
    for (MatcherKind k : kAllMatchers) {
        for (const auto& g : gallery) gallery_idx[k].push_back(indices_of(g, k));
    }

    // One all-pairs table per (probe, gallery) cell; the unimodal matchers use its
    // same-modality sub-blocks.
    detail::parallel_for(static_cast<std::size_t>(np * ng), cfg.workers, [&](std::size_t cell) {
        const auto i = static_cast<Eigen::Index>(cell) / ng;
        const auto j = static_cast<Eigen::Index>(cell) % ng;
        const FusedTemplate& p = probes[static_cast<std::size_t>(i)];
        const FusedTemplate& g = gallery[static_cast<std::size_t>(j)];
        if (p.empty() || g.empty()) return;
        const Eigen::MatrixXd table = distance_table(p.entries, g.entries, cfg.match);
        for (MatcherKind k : kAllMatchers) {
            const auto rows = indices_of(p, k);
            const auto& cols = gallery_idx.at(k)[static_cast<std::size_t>(j)];
            if (rows.empty() || cols.empty()) continue;
            const Eigen::MatrixXd block = table(rows, cols);
            out.at(k)(i, j) = static_cast<double>(match_table(block, cfg.match).size());
        }
    });
    return out;
}

std::vector<UserWeights> estimate_weights(const Gallery& gallery, const PipelineConfig& cfg) {
    const std::size_t n = gallery.templates.size();
    const auto ms = static_cast<Eigen::Index>(cfg.matchers.size());
    std::vector<UserWeights> out;
    if (n < 2) {
        for (const auto& t : gallery.templates) {
            const Eigen::VectorXd raw = Eigen::VectorXd::Ones(ms);
            out.push_back({t.subject_id, raw, adapt_weights(raw)});
        }
        return out;
    }

    const auto raw = score_matrices(gallery.templates, gallery.templates, cfg);
    std::map<MatcherKind, Eigen::MatrixXd> normalized;
    for (const auto& [kind, m] : raw) {
        Eigen::MatrixXd norm(m.rows(), m.cols());
        for (Eigen::Index r = 0; r < m.rows(); ++r) norm.row(r) = minmax_normalize(m.row(r)).transpose();
        normalized[kind] = std::move(norm);
    }

    for (std::size_t p = 0; p < n; ++p) {
        std::vector<std::vector<double>> impostors;
        for (MatcherKind kind : cfg.matchers) {
            std::vector<double> scores;
            for (std::size_t j = 0; j < n; ++j) {
                if (j != p) {
                    scores.push_back(normalized.at(kind)(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(p)));
                }
            }
            impostors.push_back(std::move(scores));
        }
        out.push_back(user_weights(gallery.templates[p].subject_id, impostors));
    }
    return out;
}

std::vector<RankedCandidate> rank_candidates(const std::vector<std::string>& ids, const Eigen::VectorXd& scores) {
    std::vector<RankedCandidate> out;
    out.reserve(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) out.push_back({ids[i], scores(static_cast<Eigen::Index>(i))});
    std::sort(out.begin(), out.end(), [](const RankedCandidate& a, const RankedCandidate& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.subject_id < b.subject_id;
    });
    return out;
}

Identification identify_from_raw(const std::map<MatcherKind, Eigen::VectorXd>& raw, const Gallery& gallery,
                                 const std::vector<UserWeights>& weights, const PipelineConfig& cfg) {
    const auto ng = static_cast<Eigen::Index>(gallery.templates.size());
    if (ng == 0) {
        throw std::invalid_argument("identify: empty gallery");
    }
    if (weights.size() != gallery.templates.size()) {
        throw std::invalid_argument("identify: one weight vector per gallery user required");
    }
    Identification id;
    id.raw = raw;
    for (const auto& [kind, column] : raw) {
        id.normalized[kind] = minmax_normalize(column);
    }
    const auto ms = static_cast<Eigen::Index>(cfg.matchers.size());
    id.fused.resize(ng);
    for (Eigen::Index p = 0; p < ng; ++p) {
        Eigen::VectorXd scores(ms);
        for (Eigen::Index m = 0; m < ms; ++m) {
            scores(m) = id.normalized.at(cfg.matchers[static_cast<std::size_t>(m)])(p);
        }
        id.fused(p) = fuse_scores(weights[static_cast<std::size_t>(p)].adapted, scores);
    }
    id.ranking = rank_candidates(gallery.subject_ids(), id.fused);
    return id;
}

Identification identify(const FusedTemplate& probe, const Gallery& gallery, const std::vector<UserWeights>& weights,
                        const PipelineConfig& cfg) {
    if (gallery.templates.empty()) {
        throw std::invalid_argument("identify: empty gallery");
    }
    const auto matrices = score_matrices({probe}, gallery.templates, cfg);
    std::map<MatcherKind, Eigen::VectorXd> raw;
    for (const auto& [kind, m] : matrices) raw[kind] = m.row(0).transpose();
    Identification id = identify_from_raw(raw, gallery, weights, cfg);
    id.degenerate = probe.empty();
    return id;
}

CmcCurve compute_cmc(const std::vector<std::vector<RankedCandidate>>& rankings,
                     const std::vector<std::string>& true_subjects) {
    if (rankings.size() != true_subjects.size()) {
        throw std::invalid_argument("compute_cmc: one label per probe required");
    }
    if (rankings.empty()) {
        throw std::invalid_argument("compute_cmc: no probes");
    }
    const std::size_t n = rankings.front().size();
    std::vector<std::size_t> hits_at(n + 1, 0);
    for (std::size_t i = 0; i < rankings.size(); ++i) {
        if (rankings[i].size() != n) {
            throw std::invalid_argument("compute_cmc: rankings must share one gallery");
        }
        const auto it = std::find_if(rankings[i].begin(), rankings[i].end(),
                                     [&](const RankedCandidate& c) { return c.subject_id == true_subjects[i]; });
        if (it == rankings[i].end()) {
            throw std::invalid_argument("compute_cmc: probe label '" + true_subjects[i] + "' absent from gallery");
        }
        ++hits_at[static_cast<std::size_t>(it - rankings[i].begin()) + 1];
    }
    CmcCurve curve;
    curve.hit_rate.resize(n);
    std::size_t cumulative = 0;
    for (std::size_t r = 1; r <= n; ++r) {
        cumulative += hits_at[r];
        curve.hit_rate[r - 1] = static_cast<double>(cumulative) / static_cast<double>(rankings.size());
    }
    return curve;
}

double rank1_rate(const CmcCurve& curve) {
    if (curve.hit_rate.empty()) {
        throw std::invalid_argument("rank1_rate: empty curve");
    }
    return curve.hit_rate.front();
}

ExperimentReport run_experiment(const DatasetManifest& manifest, const PipelineConfig& cfg) {
    cfg.validate();
    ExperimentReport report;
    report.gallery = enroll_gallery(manifest, cfg);
    const Gallery& gallery = report.gallery;
    report.failures = gallery.failures;
    report.gallery_ids = gallery.subject_ids();
    report.weighted_matchers = cfg.matchers;
    if (gallery.templates.empty()) {
        throw std::runtime_error("run_experiment: no subject could be enrolled");
    }
    report.weights = estimate_weights(gallery, cfg);

    std::vector<const SampleRecord*> probe_records;
    for (const auto& id : report.gallery_ids) {
        if (const SampleRecord* rec = manifest.find(id, cfg.probe_sample)) {
            probe_records.push_back(rec);
        } else {
            report.failures.push_back("probe " + id + ": no probe sample " + std::to_string(cfg.probe_sample));
        }
    }
    for (const auto& id : manifest.subjects()) {
        if (std::find(report.gallery_ids.begin(), report.gallery_ids.end(), id) == report.gallery_ids.end() &&
            manifest.find(id, cfg.probe_sample)) {
            report.failures.push_back("probe " + id + ": subject not enrolled, skipped");
        }
    }

    std::vector<std::optional<FusedTemplate>> built(probe_records.size());
    std::vector<std::string> errors(probe_records.size());
    detail::parallel_for(probe_records.size(), cfg.workers, [&](std::size_t i) {
        try {
            built[i] = build_template(*probe_records[i], cfg, cfg.reduce_probe);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    });
    std::vector<FusedTemplate> probes;
    for (std::size_t i = 0; i < built.size(); ++i) {
        const std::string& id = probe_records[i]->subject_id;
        if (!built[i]) {
            report.failures.push_back("probe " + id + ": " + errors[i]);
            continue;
        }
        if (built[i]->empty()) {
            report.failures.push_back("probe " + id + ": no features, scored as all-zero");
        }
        probes.push_back(std::move(*built[i]));
        report.probe_ids.push_back(id);
    }
    if (probes.empty()) {
        throw std::runtime_error("run_experiment: no usable probe samples");
    }

    const auto raw = score_matrices(probes, gallery.templates, cfg);
    const auto np = static_cast<Eigen::Index>(probes.size());
    const auto ng = static_cast<Eigen::Index>(gallery.templates.size());
    std::map<std::string, std::vector<std::vector<RankedCandidate>>> rankings;
    for (MatcherKind k : kAllMatchers) report.scores[to_string(k)] = Eigen::MatrixXd(np, ng);
    report.scores[kFusedOutput] = Eigen::MatrixXd(np, ng);

    for (Eigen::Index i = 0; i < np; ++i) {
        std::map<MatcherKind, Eigen::VectorXd> column;
        for (const auto& [kind, m] : raw) column[kind] = m.row(i).transpose();
        const Identification id = identify_from_raw(column, gallery, report.weights, cfg);
        for (MatcherKind k : kAllMatchers) {
            const Eigen::VectorXd& norm = id.normalized.at(k);
            report.scores[to_string(k)].row(i) = norm.transpose();
            rankings[to_string(k)].push_back(rank_candidates(report.gallery_ids, norm));
        }
        report.scores[kFusedOutput].row(i) = id.fused.transpose();
        rankings[kFusedOutput].push_back(id.ranking);
    }
    for (const auto& [name, r] : rankings) {
        report.cmc[name] = compute_cmc(r, report.probe_ids);
    }
    return report;
}

std::string format_rate(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

void write_report(const ExperimentReport& report, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (const auto& [name, m] : report.scores) {
        std::string text = "probe";
        for (const auto& g : report.gallery_ids) text += "," + g;
        text += "\n";
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            text += report.probe_ids[static_cast<std::size_t>(i)];
            for (Eigen::Index j = 0; j < m.cols(); ++j) text += "," + format_rate(m(i, j));
            text += "\n";
        }
        write_text(dir / ("scores_" + name + ".csv"), text);
    }
    for (const auto& [name, curve] : report.cmc) {
        std::string text = "rank,hit_rate\n";
        for (std::size_t r = 1; r <= curve.size(); ++r) text += std::to_string(r) + "," + format_rate(curve.at(r)) + "\n";
        write_text(dir / ("cmc_" + name + ".csv"), text);
    }
    {
        std::string text = "user_id,matcher,raw_weight,adapted_weight\n";
        for (const auto& w : report.weights) {
            for (std::size_t m = 0; m < report.weighted_matchers.size(); ++m) {
                const auto idx = static_cast<Eigen::Index>(m);
                text += w.user_id + "," + to_string(report.weighted_matchers[m]) + "," + format_rate(w.raw(idx)) + "," +
                        format_rate(w.adapted(idx)) + "\n";
            }
        }
        write_text(dir / "weights.csv", text);
    }
    {
        std::string text;
        text += "gallery_size = " + std::to_string(report.gallery_ids.size()) + "\n";
        text += "probe_count = " + std::to_string(report.probe_ids.size()) + "\n";
        for (const auto& [name, curve] : report.cmc) {
            text += "rank1." + name + " = " + format_rate(rank1_rate(curve)) + "\n";
        }
        for (const auto& f : report.failures) text += "flagged = " + f + "\n";
        write_text(dir / "summary.txt", text);
    }
    write_gallery(report.gallery, dir / "gallery");
}

}  // namespace fuseid
