// fuseid: command-line front end for the fingerprint + ear identification pipeline.

#include "fuseid/config.hpp"
#include "fuseid/eval.hpp"
#include "fuseid/fusion.hpp"
#include "fuseid/kmedoids.hpp"
#include "fuseid/matcher.hpp"
#include "fuseid/synth.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

struct ConfigOptions {
    std::string file;
    std::vector<std::string> overrides;
    std::optional<int> workers;
};

void add_config_options(CLI::App* cmd, ConfigOptions& opts, bool with_workers) {
    cmd->add_option("--config", opts.file, "flat `section.key = value` config file")->check(CLI::ExistingFile);
    cmd->add_option("--set", opts.overrides, "override one config key, `section.key=value` (repeatable)");
    if (with_workers) {
        cmd->add_option("--workers", opts.workers, "worker threads (0 = all hardware threads)")->check(CLI::NonNegativeNumber);
    }
}

fuseid::Config resolve_config(const ConfigOptions& opts) {
    fuseid::Config cfg;
    if (!opts.file.empty()) cfg.load_file(opts.file);
    for (const auto& o : opts.overrides) cfg.apply_override(o);
    if (opts.workers) cfg.set("run.workers", std::to_string(*opts.workers));
    cfg.apply_environment();
    return cfg;
}

std::string fixed6(double v) { return fuseid::format_rate(v); }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fuseid: fingerprint + ear feature-level fusion identification"};
    app.require_subcommand(1);

    // extract
    ConfigOptions extract_cfg;
    std::string extract_image, extract_modality, extract_out, extract_landmarks, extract_subject;
    auto* extract = app.add_subcommand("extract", "extract SIFT features of one image into a single-modality template");
    extract->add_option("image", extract_image, "input image (PGM/PPM)")->required()->check(CLI::ExistingFile);
    extract->add_option("--modality", extract_modality, "fingerprint | ear")
        ->required()
        ->check(CLI::IsMember({"fingerprint", "ear"}));
    extract->add_option("--out", extract_out, "output template file")->required();
    extract->add_option("--landmarks", extract_landmarks, "ear landmark sidecar `tf_x tf_y at_x at_y`")
        ->check(CLI::ExistingFile);
    extract->add_option("--subject", extract_subject, "subject id (default: image file stem)");
    add_config_options(extract, extract_cfg, false);

    // fuse
    std::string fuse_fp, fuse_ear, fuse_out;
    auto* fuse_cmd = app.add_subcommand("fuse", "concatenate a fingerprint template and an ear template");
    fuse_cmd->add_option("fingerprint", fuse_fp, "fingerprint template")->required()->check(CLI::ExistingFile);
    fuse_cmd->add_option("ear", fuse_ear, "ear template")->required()->check(CLI::ExistingFile);
    fuse_cmd->add_option("--out", fuse_out, "output fused template")->required();

    // reduce
    ConfigOptions reduce_cfg;
    std::string reduce_in, reduce_out;
    std::optional<std::size_t> reduce_k;
    std::optional<std::uint64_t> reduce_seed;
    auto* reduce = app.add_subcommand("reduce", "keep the k PAM medoids of a template");
    reduce->add_option("template", reduce_in, "input template")->required()->check(CLI::ExistingFile);
    reduce->add_option("--out", reduce_out, "output template")->required();
    reduce->add_option("--k", reduce_k, "medoid count (default: pam.k, 0 = automatic)");
    reduce->add_option("--seed", reduce_seed, "initialization seed (default: pam.seed)");
    add_config_options(reduce, reduce_cfg, false);

    // match
    ConfigOptions match_cfg;
    std::string match_probe, match_matcher = "feature_fusion", match_csv;
    std::vector<std::string> match_gallery;
    auto* match = app.add_subcommand("match", "score a probe template against gallery templates");
    match->add_option("probe", match_probe, "probe template")->required()->check(CLI::ExistingFile);
    match->add_option("gallery", match_gallery, "gallery templates")->required()->check(CLI::ExistingFile);
    match->add_option("--matcher", match_matcher, "fingerprint | ear | feature_fusion")
        ->check(CLI::IsMember({"fingerprint", "ear", "feature_fusion"}));
    match->add_option("--csv", match_csv, "also write the scores to this CSV file");
    add_config_options(match, match_cfg, false);

    // synth
    ConfigOptions synth_cfg;
    std::string synth_out;
    auto* synth = app.add_subcommand("synth", "generate a synthetic fingerprint + ear dataset and manifest");
    synth->add_option("--out", synth_out, "output directory")->required();
    add_config_options(synth, synth_cfg, false);

    // evaluate
    ConfigOptions eval_cfg;
    std::string eval_manifest, eval_out;
    auto* evaluate = app.add_subcommand("evaluate", "run the identification experiment and write a report");
    evaluate->add_option("manifest", eval_manifest, "dataset manifest")->required()->check(CLI::ExistingFile);
    evaluate->add_option("--out", eval_out, "report directory")->required();
    add_config_options(evaluate, eval_cfg, true);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*extract) {
            const auto cfg = resolve_config(extract_cfg).pipeline();
            std::optional<std::filesystem::path> lm;
            if (!extract_landmarks.empty()) lm = extract_landmarks;
            fuseid::FeatureSet fs =
                fuseid::extract_modality(extract_image, fuseid::parse_modality(extract_modality), cfg, lm);
            fs.subject_id = extract_subject.empty() ? std::filesystem::path(extract_image).stem().string() : extract_subject;
            fuseid::write_template(fuseid::as_template(fs), extract_out);
            std::cout << fs.keypoints.size() << " keypoints\n";
        } else if (*fuse_cmd) {
            const auto fp_t = fuseid::read_template(fuse_fp);
            const auto ear_t = fuseid::read_template(fuse_ear);
            if (fp_t.count(fuseid::Modality::ear) != 0 || ear_t.count(fuseid::Modality::fingerprint) != 0) {
                throw std::invalid_argument("fuse: modality mismatch");
            }
            const auto fused = fuseid::fuse(fuseid::split_modality(fp_t, fuseid::Modality::fingerprint),
                                            fuseid::split_modality(ear_t, fuseid::Modality::ear));
            fuseid::write_template(fused, fuse_out);
            std::cout << fused.size() << " entries\n";
        } else if (*reduce) {
            auto pam = resolve_config(reduce_cfg).pipeline().pam;
            if (reduce_k) pam.k = *reduce_k;
            if (reduce_seed) pam.seed = *reduce_seed;
            const auto reduced = fuseid::reduce_template(fuseid::read_template(reduce_in), pam);
            fuseid::write_template(reduced, reduce_out);
            std::cout << reduced.size() << " entries\n";
        } else if (*match) {
            const auto cfg = resolve_config(match_cfg).pipeline();
            const auto kind = fuseid::parse_matcher(match_matcher);
            const auto probe = fuseid::read_template(match_probe);
            std::vector<std::string> ids;
            std::vector<double> raw;
            for (const auto& path : match_gallery) {
                const auto g = fuseid::read_template(path);
                ids.push_back(g.subject_id);
                raw.push_back(static_cast<double>(fuseid::match_score(probe, g, cfg.match, kind).matched_count));
            }
            const auto norm = fuseid::minmax_normalize(raw);
            std::string text = "gallery_id,raw_score,normalized_score\n";
            for (std::size_t i = 0; i < ids.size(); ++i) {
                text += ids[i] + "," + std::to_string(static_cast<long long>(raw[i])) + "," + fixed6(norm[i]) + "\n";
            }
            std::cout << text;
            if (!match_csv.empty()) {
                std::ofstream out(match_csv, std::ios::binary);
                out << text;
                if (!out) throw std::runtime_error("cannot write " + match_csv);
            }
        } else if (*synth) {
            const auto cfg = resolve_config(synth_cfg).synth();
            const auto manifest = fuseid::synth_dataset(cfg, synth_out);
            std::cout << manifest.samples.size() << " samples written to " << synth_out << "\n";
        } else if (*evaluate) {
            const auto cfg = resolve_config(eval_cfg).pipeline();
            const auto report = fuseid::run_experiment(fuseid::read_manifest(eval_manifest), cfg);
            fuseid::write_report(report, eval_out);
            for (const auto& [name, curve] : report.cmc) {
                std::cout << "rank1." << name << " = " << fixed6(fuseid::rank1_rate(curve)) << "\n";
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "fuseid: error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
