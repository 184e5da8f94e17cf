#include "fuseid/eval.hpp"
#include "fuseid/synth.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace fuseid;
using fuseid::test::read_bytes;
using fuseid::test::TempDir;
using fuseid::test::write_bytes;

namespace {

std::vector<RankedCandidate> ranking(std::initializer_list<const char*> ids) {
    std::vector<RankedCandidate> out;
    double score = 1.0;
    for (const char* id : ids) {
        out.push_back({id, score});
        score -= 0.1;
    }
    return out;
}

SynthConfig small_synth(int subjects, std::uint64_t seed) {
    SynthConfig cfg;
    cfg.subjects = subjects;
    cfg.seed = seed;
    return cfg;
}

double bilinear(const GrayImage& img, double x, double y) {
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const double fx = x - x0;
    const double fy = y - y0;
    auto at = [&](int xx, int yy) { return static_cast<double>(img(xx, yy)); };
    return (1 - fy) * ((1 - fx) * at(x0, y0) + fx * at(x0 + 1, y0)) +
           fy * ((1 - fx) * at(x0, y0 + 1) + fx * at(x0 + 1, y0 + 1));
}

// Mean absolute difference between `sample` and `reference` pulled back through the perturbation.
double pullback_residual(const GrayImage& sample, const GrayImage& reference, const SamplePerturbation& p) {
    const double cx = 0.5 * (sample.width() - 1);
    const double cy = 0.5 * (sample.height() - 1);
    double total = 0;
    int count = 0;
    for (int y = 15; y < sample.height() - 15; ++y) {
        for (int x = 15; x < sample.width() - 15; ++x) {
            const double dx = x - cx - p.shift_x;
            const double dy = y - cy - p.shift_y;
            const double sx = std::cos(p.rotation) * dx + std::sin(p.rotation) * dy + cx;
            const double sy = -std::sin(p.rotation) * dx + std::cos(p.rotation) * dy + cy;
            const double expected = p.gain * bilinear(reference, sx, sy) + 255.0 * p.offset;
            total += std::abs(sample(x, y) - std::clamp(expected, 0.0, 255.0));
            ++count;
        }
    }
    return total / count;
}

}  // namespace

TEST_CASE("compute_cmc") {
    SUBCASE("direct count") {
        const CmcCurve c = compute_cmc({ranking({"A", "B", "C"}), ranking({"A", "C", "B"})}, {"A", "B"});
        CHECK(c.hit_rate == std::vector<double>{0.5, 0.5, 1.0});
        CHECK(rank1_rate(c) == 0.5);
        CHECK(c.at(3) == 1.0);
    }
    SUBCASE("perfect system") {
        const CmcCurve c = compute_cmc({ranking({"A", "B"}), ranking({"B", "A"})}, {"A", "B"});
        CHECK(c.hit_rate == std::vector<double>{1.0, 1.0});
        CHECK(rank1_rate(c) == 1.0);
    }
    SUBCASE("worst case") {
        const CmcCurve c =
            compute_cmc({ranking({"B", "C", "A"}), ranking({"A", "C", "B"}), ranking({"A", "B", "C"})}, {"A", "B", "C"});
        CHECK(c.hit_rate == std::vector<double>{0.0, 0.0, 1.0});
    }
    SUBCASE("errors") {
        CHECK_THROWS_WITH(compute_cmc({ranking({"A", "B"})}, {"Z"}), doctest::Contains("absent"));
        CHECK_THROWS(compute_cmc({}, {}));
        CHECK_THROWS(rank1_rate(CmcCurve{}));
    }
}

TEST_CASE("rank_candidates orders by score then subject id") {
    Eigen::VectorXd s(4);
    s << 0.5, 0.9, 0.5, 0.0;
    const auto r = rank_candidates({"S3", "S2", "S1", "S0"}, s);
    REQUIRE(r.size() == 4);
    CHECK(r[0].subject_id == "S2");
    CHECK(r[1].subject_id == "S1");
    CHECK(r[2].subject_id == "S3");
    CHECK(r[3].subject_id == "S0");
}

TEST_CASE("identify_from_raw") {
    PipelineConfig cfg;
    Gallery g;
    for (const char* id : {"A", "B", "C"}) {
        FusedTemplate t;
        t.subject_id = id;
        g.templates.push_back(t);
    }
    std::vector<UserWeights> w;
    for (const auto& t : g.templates) w.push_back(user_weights(t.subject_id, {{0.1}, {0.3}, {0.2}}));

    std::map<MatcherKind, Eigen::VectorXd> raw;
    raw[MatcherKind::fingerprint] = Eigen::Vector3d(3, 10, 4);
    raw[MatcherKind::ear] = Eigen::Vector3d(1, 6, 2);
    raw[MatcherKind::feature_fusion] = Eigen::Vector3d(4, 16, 6);
    const Identification id = identify_from_raw(raw, g, w, cfg);
    CHECK(id.ranking[0].subject_id == "B");
    CHECK(id.fused(1) == doctest::Approx(1.0));
    CHECK(id.fused(0) == 0.0);

    SUBCASE("invariant under an affine change of one matcher's raw scores") {
        auto shifted = raw;
        shifted[MatcherKind::ear] = 3.0 * raw[MatcherKind::ear].array() + 7.0;
        const Identification other = identify_from_raw(shifted, g, w, cfg);
        for (std::size_t i = 0; i < 3; ++i) CHECK(other.ranking[i].subject_id == id.ranking[i].subject_id);
        CHECK(other.fused.isApprox(id.fused));
    }
    SUBCASE("all-zero raw scores rank by subject id") {
        for (auto& [k, v] : raw) v.setZero();
        const Identification zero = identify_from_raw(raw, g, w, cfg);
        CHECK(zero.fused.isZero());
        CHECK(zero.ranking[0].subject_id == "A");
        CHECK(zero.ranking[2].subject_id == "C");
    }
    SUBCASE("singleton gallery") {
        Gallery one;
        one.templates.push_back(g.templates[2]);
        std::map<MatcherKind, Eigen::VectorXd> r1;
        for (auto k : cfg.matchers) r1[k] = Eigen::VectorXd::Zero(1);
        const Identification single = identify_from_raw(r1, one, {w[2]}, cfg);
        REQUIRE(single.ranking.size() == 1);
        CHECK(single.ranking[0].subject_id == "C");
    }
}

TEST_CASE("far-away impostor scores zero everywhere") {
    PipelineConfig cfg;
    Gallery g;
    std::mt19937 rng(1);
    std::uniform_real_distribution<float> u(0, 1);
    for (int s = 0; s < 4; ++s) {
        FusedTemplate t;
        t.subject_id = "G" + std::to_string(s);
        for (int i = 0; i < 12; ++i) {
            Keypoint kp;
            for (int d = 0; d < 64; ++d) kp.descriptor(d) = u(rng);
            kp.descriptor.normalize();
            t.entries.push_back({i < 8 ? Modality::fingerprint : Modality::ear, kp});
        }
        g.templates.push_back(t);
    }
    FusedTemplate probe;
    probe.subject_id = "X";
    for (int i = 0; i < 10; ++i) {
        Keypoint kp;
        for (int d = 64; d < kDescriptorSize; ++d) kp.descriptor(d) = u(rng);
        kp.descriptor.normalize();
        probe.entries.push_back({i < 5 ? Modality::fingerprint : Modality::ear, kp});
    }
    // All-pairs distances between disjoint-support unit vectors are sqrt(2).
    for (const auto& t : g.templates)
        for (const auto& a : probe.entries)
            for (const auto& b : t.entries)
                REQUIRE(keypoint_distance(a.keypoint, b.keypoint, cfg.match) == doctest::Approx(std::sqrt(2.0)));

    std::vector<UserWeights> w;
    for (const auto& t : g.templates) w.push_back(user_weights(t.subject_id, {{0.0}, {0.0}, {0.0}}));
    const Identification id = identify(probe, g, w, cfg);
    CHECK(id.fused.isZero());
    for (const auto& [k, v] : id.raw) CHECK(v.isZero());
    CHECK_FALSE(id.degenerate);
    CHECK(identify(FusedTemplate{}, g, w, cfg).degenerate);
}

TEST_CASE("synthetic data") {
    SUBCASE("textures are deterministic and subject specific") {
        const GrayImage a = render_sample(FingerprintTexture(5, 200, 200), 200, 200, {});
        const GrayImage b = render_sample(FingerprintTexture(5, 200, 200), 200, 200, {});
        const GrayImage c = render_sample(FingerprintTexture(6, 200, 200), 200, 200, {});
        CHECK(a == b);
        CHECK_FALSE(a == c);
        CHECK(subject_seed(1, 0, 0) != subject_seed(1, 1, 0));
        CHECK(subject_seed(1, 0, 0) != subject_seed(1, 0, 1));
        CHECK(subject_seed(1, 0, 0) == subject_seed(1, 0, 0));
        const GrayImage e = render_sample(EarTexture(5, 200, 140), 200, 140, {});
        CHECK(e.width() == 200);
        CHECK(e.height() == 140);
    }
    SUBCASE("a sample is the base texture under the declared perturbation") {
        SynthConfig cfg;
        for (int modality : {0, 1}) {
            SamplePerturbation p = sample_perturbation(cfg, 3, 2, modality);
            CHECK(std::abs(p.rotation) <= 5.0 * std::numbers::pi / 180.0);
            CHECK(std::abs(p.shift_x) <= 3.0);
            CHECK(std::abs(p.shift_y) <= 3.0);
            p.noise_sigma = 0;
            const int w = 200;
            const int h = modality == 0 ? 200 : 140;
            auto render = [&](std::uint64_t seed, const SamplePerturbation& q) {
                return modality == 0 ? render_sample(FingerprintTexture(seed, w, h), w, h, q)
                                     : render_sample(EarTexture(seed, w, h), w, h, q);
            };
            const GrayImage sample = render(11, p);
            const double own = pullback_residual(sample, render(11, {}), p);
            const double other = pullback_residual(sample, render(12, {}), p);
            CHECK(own < 4.0);
            CHECK(own < 0.2 * other);
        }
    }
    SUBCASE("dataset generation is byte-identical per seed") {
        TempDir a("synth");
        TempDir b("synth");
        const DatasetManifest ma = synth_dataset(small_synth(3, 9), a.path());
        synth_dataset(small_synth(3, 9), b.path());
        REQUIRE(ma.samples.size() == 6);
        CHECK(ma.subjects() == std::vector<std::string>{"S001", "S002", "S003"});
        CHECK(ma.samples_per_subject() == 2);
        for (const char* f : {"manifest.txt", "fingerprint/S002_1.pgm", "ear/S003_2.pgm"}) {
            CHECK(read_bytes(a / f) == read_bytes(b / f));
        }
        const GrayImage fp = load_image(a / "fingerprint/S001_1.pgm");
        CHECK(fp.width() == 200);
        CHECK(fp.height() == 200);
        const GrayImage ear = load_image(a / "ear/S001_1.pgm");
        CHECK(ear.width() == 200);
        CHECK(ear.height() == 140);
        CHECK(read_manifest(a / "manifest.txt").samples.size() == 6);
    }
    SUBCASE("validation") {
        CHECK_THROWS(small_synth(1, 1).validate());
        SynthConfig bad;
        bad.ear_noise = -1;
        CHECK_THROWS(bad.validate());
    }
}

TEST_CASE("manifest parsing") {
    TempDir dir("manifest");
    write_bytes(dir / "m.txt", "# subject sample fp ear [landmarks]\nA 1 fp/a1.pgm ear/a1.pgm\n\nA 2 fp/a2.pgm ear/a2.pgm lm/a2.txt  # note\nB 1 /abs/b1.pgm ear/b1.pgm\n");
    const DatasetManifest m = read_manifest(dir / "m.txt");
    REQUIRE(m.samples.size() == 3);
    CHECK(m.subjects() == std::vector<std::string>{"A", "B"});
    const SampleRecord* a2 = m.find("A", 2);
    REQUIRE(a2 != nullptr);
    CHECK(a2->fingerprint == dir.path() / "fp/a2.pgm");
    REQUIRE(a2->landmarks.has_value());
    CHECK(*a2->landmarks == dir.path() / "lm/a2.txt");
    CHECK(m.find("B", 1)->fingerprint == std::filesystem::path("/abs/b1.pgm"));
    CHECK(m.find("B", 2) == nullptr);

    write_manifest(m, dir / "copy.txt");
    const DatasetManifest back = read_manifest(dir / "copy.txt");
    CHECK(back.samples.size() == 3);
    CHECK(back.find("A", 2)->ear == a2->ear);

    write_bytes(dir / "bad.txt", "A 1 only_three\n");
    CHECK_THROWS_WITH(read_manifest(dir / "bad.txt"), doctest::Contains("line 1"));
    write_bytes(dir / "dup.txt", "A 1 f e\nA 1 f e\n");
    CHECK_THROWS_WITH(read_manifest(dir / "dup.txt"), doctest::Contains("duplicate"));
    write_bytes(dir / "idx.txt", "A x f e\n");
    CHECK_THROWS(read_manifest(dir / "idx.txt"));
    CHECK_THROWS(read_manifest(dir / "missing.txt"));
}

TEST_CASE("enrollment and identification on synthetic subjects") {
    TempDir dir("enroll");
    DatasetManifest m = synth_dataset(small_synth(4, 3), dir / "data");
    PipelineConfig cfg;

    SUBCASE("one template per subject, bit-identical on re-run") {
        const Gallery g = enroll_gallery(m, cfg);
        CHECK(g.templates.size() == 4);
        CHECK(g.failures.empty());
        for (const auto& t : g.templates) CHECK(t.reduced);
        write_gallery(g, dir / "g1");
        cfg.workers = 2;
        write_gallery(enroll_gallery(m, cfg), dir / "g2");
        for (const auto& id : g.subject_ids()) CHECK(read_bytes(dir / "g1" / (id + ".fusd")) == read_bytes(dir / "g2" / (id + ".fusd")));
        CHECK(read_template(dir / "g1" / "S002.fusd") == g.templates[1]);
    }
    SUBCASE("unreadable image flags the subject and the run continues") {
        std::filesystem::remove(m.find("S003", 1)->ear);
        const Gallery g = enroll_gallery(m, cfg);
        CHECK(g.templates.size() == 3);
        REQUIRE(g.failures.size() == 1);
        CHECK(g.failures[0].find("S003") != std::string::npos);
    }
    SUBCASE("the enrollment images identify their own subject") {
        const Gallery g = enroll_gallery(m, cfg);
        const auto weights = estimate_weights(g, cfg);
        REQUIRE(weights.size() == 4);
        for (const auto& w : weights) CHECK(w.adapted.sum() == doctest::Approx(1.0).epsilon(1e-9));
        for (const auto& subject : m.subjects()) {
            const FusedTemplate probe = build_template(*m.find(subject, 1), cfg, cfg.reduce_probe);
            CHECK(identify(probe, g, weights, cfg).ranking[0].subject_id == subject);
        }
    }
}

TEST_CASE("experiment on a separable synthetic set") {
    TempDir dir("experiment");
    SynthConfig sc = small_synth(5, 2);
    sc.fingerprint_noise = 0;
    sc.ear_noise = 0;
    sc.max_rotation_deg = 0;
    sc.max_shift_px = 0;
    sc.brightness_jitter = 0;
    const DatasetManifest m = synth_dataset(sc, dir / "data");
    const ExperimentReport r = run_experiment(m, PipelineConfig{});
    CHECK(r.gallery_ids.size() == 5);
    CHECK(r.probe_ids.size() == 5);
    CHECK(r.rank1(kFusedOutput) == 1.0);
    for (const auto& [name, curve] : r.cmc) {
        CHECK(curve.size() == 5);
        CHECK(curve.hit_rate.back() == 1.0);
        CHECK(std::is_sorted(curve.hit_rate.begin(), curve.hit_rate.end()));
    }
    CHECK(r.cmc.size() == 4);
    CHECK(r.scores.at("fingerprint").rows() == 5);

    write_report(r, dir / "report");
    for (const char* f : {"scores_fingerprint.csv", "scores_ear.csv", "scores_feature_fusion.csv", "scores_fused.csv",
                          "cmc_fingerprint.csv", "cmc_ear.csv", "cmc_feature_fusion.csv", "cmc_fused.csv",
                          "weights.csv", "summary.txt", "gallery/S001.fusd"}) {
        CHECK(std::filesystem::exists(dir / "report" / f));
    }
    const std::string summary = read_bytes(dir / "report" / "summary.txt");
    CHECK(summary.find("rank1.fused = 1.000000") != std::string::npos);
    CHECK(read_bytes(dir / "report" / "cmc_fused.csv").rfind("rank,hit_rate\n1,1.000000\n", 0) == 0);
}

TEST_CASE("PipelineConfig validation") {
    PipelineConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.matchers.clear();
    CHECK_THROWS(cfg.validate());
    cfg = {};
    cfg.matchers = {MatcherKind::ear, MatcherKind::ear};
    CHECK_THROWS(cfg.validate());
    cfg = {};
    cfg.probe_sample = cfg.enroll_sample;
    CHECK_THROWS(cfg.validate());
}
