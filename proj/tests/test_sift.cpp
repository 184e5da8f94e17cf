#include "fuseid/image.hpp"
#include "fuseid/sift.hpp"
#include "fuseid/synth.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <tuple>

using namespace fuseid;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kBinWidth = 2 * kPi / 36;

double angle_gap(double a, double b) {
    double d = std::fmod(std::abs(a - b), 2 * kPi);
    return std::min(d, 2 * kPi - d);
}

RasterF gaussian_blob(int w, int h, double cx, double cy, double sigma) {
    RasterF img(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            img(y, x) = static_cast<float>(std::exp(-((x - cx) * (x - cx) + (y - cy) * (y - cy)) / (2 * sigma * sigma)));
    return img;
}

GrayImage textured(std::uint64_t seed, int w, int h) {
    return render_sample(FingerprintTexture(seed, w, h), w, h, SamplePerturbation{});
}

// Every sample strictly above or strictly below all 26 neighbours, by direct scan.
std::set<std::tuple<int, int, int, int>> brute_force_extrema(const ScaleSpace& space) {
    std::set<std::tuple<int, int, int, int>> out;
    for (int o = 0; o < static_cast<int>(space.octaves.size()); ++o) {
        const auto& dogs = space.octaves[o].dogs;
        const int h = static_cast<int>(dogs[0].rows());
        const int w = static_cast<int>(dogs[0].cols());
        for (int l = 1; l + 1 < static_cast<int>(dogs.size()); ++l) {
            for (int y = 1; y < h - 1; ++y) {
                for (int x = 1; x < w - 1; ++x) {
                    const float v = dogs[l](y, x);
                    bool above = true;
                    bool below = true;
                    for (int dl = -1; dl <= 1; ++dl)
                        for (int dy = -1; dy <= 1; ++dy)
                            for (int dx = -1; dx <= 1; ++dx) {
                                if (dl == 0 && dy == 0 && dx == 0) continue;
                                const float n = dogs[l + dl](y + dy, x + dx);
                                above = above && v > n;
                                below = below && v < n;
                            }
                    if (above || below) out.insert({o, l, x, y});
                }
            }
        }
    }
    return out;
}

std::set<std::tuple<int, int, int, int>> as_set(const std::vector<Candidate>& cands) {
    std::set<std::tuple<int, int, int, int>> out;
    for (const auto& c : cands) out.insert({c.octave, c.level, c.x, c.y});
    return out;
}

}  // namespace

TEST_CASE("SiftParams validation") {
    CHECK_NOTHROW(SiftParams{}.validate());
    SiftParams p;
    p.octaves = 0;
    CHECK_THROWS(p.validate());
    p = {};
    p.edge_ratio_threshold = 1.0;
    CHECK_THROWS(p.validate());
    p = {};
    p.contrast_threshold = 0;
    CHECK_THROWS(p.validate());
}

TEST_CASE("scale space shape") {
    SiftParams p;
    p.octaves = 3;
    const ScaleSpace space = build_scale_space(RasterF::Constant(64, 64, 0.5f), p);
    REQUIRE(space.octaves.size() == 3);
    const int sides[] = {64, 32, 16};
    for (int o = 0; o < 3; ++o) {
        CHECK(space.octaves[o].gaussians.size() == 6);
        CHECK(space.octaves[o].dogs.size() == 5);
        CHECK(space.octaves[o].gaussians[0].rows() == sides[o]);
        CHECK(space.octaves[o].gaussians[0].cols() == sides[o]);
    }
    SUBCASE("octave count is clamped, not an error") {
        p.octaves = 10;
        CHECK(build_scale_space(RasterF::Constant(64, 64, 0.5f), p).octaves.size() == 3);
    }
    SUBCASE("impulse is the spatial extremum of every finest DoG level") {
        RasterF img = RasterF::Zero(64, 64);
        img(32, 32) = 1.0f;
        const ScaleSpace impulse = build_scale_space(img, SiftParams{});
        for (const RasterF& dog : impulse.octaves[0].dogs) {
            Eigen::Index r = 0;
            Eigen::Index c = 0;
            dog.minCoeff(&r, &c);
            CHECK(r == 32);
            CHECK(c == 32);
            CHECK(dog(32, 32) < 0.0f);
        }
    }
    SUBCASE("too small") { CHECK_THROWS(build_scale_space(RasterF::Constant(15, 40, 0.5f), p)); }
}

TEST_CASE("constant image") {
    const ScaleSpace space = build_scale_space(RasterF::Constant(64, 64, 0.7f), SiftParams{});
    for (const auto& oct : space.octaves)
        for (const auto& dog : oct.dogs) CHECK(dog.abs().maxCoeff() < 1e-6f);
    CHECK(detect_extrema(space).empty());
    CHECK(extract_features(GrayImage(80, 80, 77), Modality::fingerprint).keypoints.empty());
}

TEST_CASE("detect_extrema agrees with a brute-force 26-neighbour scan") {
    SUBCASE("impulse planted in a zero DoG stack") {
        ScaleSpace space;
        Octave oct;
        for (int l = 0; l < 6; ++l) oct.gaussians.push_back(RasterF::Zero(32, 32));
        for (int l = 0; l < 5; ++l) oct.dogs.push_back(RasterF::Zero(32, 32));
        oct.dogs[2](12, 20) = -0.5f;
        space.octaves.push_back(oct);
        const auto found = as_set(detect_extrema(space));
        CHECK(found == brute_force_extrema(space));
        CHECK(found == std::set<std::tuple<int, int, int, int>>{{0, 2, 20, 12}});
    }
    SUBCASE("texture") {
        const ScaleSpace space = build_scale_space(to_float(textured(3, 96, 96)), SiftParams{});
        const auto cands = detect_extrema(space);
        CHECK(as_set(cands) == brute_force_extrema(space));
        for (const auto& c : cands) {
            const auto& dog = space.octaves[c.octave].dogs[0];
            CHECK(c.level >= 1);
            CHECK(c.level <= 3);
            CHECK(c.x >= 1);
            CHECK(c.y >= 1);
            CHECK(c.x < dog.cols() - 1);
            CHECK(c.y < dog.rows() - 1);
        }
    }
}

TEST_CASE("localize_keypoint") {
    SUBCASE("isotropic blob has curvature ratio 4") {
        const ScaleSpace space = build_scale_space(gaussian_blob(64, 64, 32, 32, 4.0), SiftParams{});
        const auto cands = detect_extrema(space);
        bool checked = false;
        for (const auto& c : cands) {
            if (c.octave != 0 || std::abs(c.x - 32) > 1 || std::abs(c.y - 32) > 1) continue;
            const Localization loc = localize_keypoint(c, space, SiftParams{});
            REQUIRE(loc.accepted());
            CHECK(loc.point.edge_score == doctest::Approx(4.0).epsilon(0.01));
            CHECK(loc.point.x == doctest::Approx(32.0).epsilon(0.01));
            CHECK(loc.point.y == doctest::Approx(32.0).epsilon(0.01));
            checked = true;
        }
        CHECK(checked);
    }
    SUBCASE("straight step edge is rejected by the curvature test") {
        RasterF img(64, 64);
        for (int y = 0; y < 64; ++y)
            for (int x = 0; x < 64; ++x) img(y, x) = x < 32 ? 0.0f : 1.0f;
        const ScaleSpace space = build_scale_space(img, SiftParams{});
        const auto& dog = space.octaves[0].dogs[1];
        int col = 1;
        for (int x = 1; x < 63; ++x)
            if (std::abs(dog(32, x)) > std::abs(dog(32, col))) col = x;
        // Direct Hessian of the DoG at the strongest edge response.
        const double dxx = dog(32, col + 1) + dog(32, col - 1) - 2 * dog(32, col);
        const double dyy = dog(33, col) + dog(31, col) - 2 * dog(32, col);
        const double dxy = 0.25 * (dog(33, col + 1) - dog(33, col - 1) - dog(31, col + 1) + dog(31, col - 1));
        const double det = dxx * dyy - dxy * dxy;
        const double r = SiftParams{}.edge_ratio_threshold;
        REQUIRE((det <= 0 || (dxx + dyy) * (dxx + dyy) * r > (r + 1) * (r + 1) * det));

        const Localization loc = localize_keypoint({0, 1, col, 32}, space, SiftParams{});
        CHECK(loc.status == Rejection::edge);
        CHECK(std::abs(loc.point.contrast) >= SiftParams{}.contrast_threshold);
    }
    SUBCASE("faint blob is rejected for low contrast") {
        RasterF img = gaussian_blob(64, 64, 32, 32, 4.0) * 0.05f;
        const ScaleSpace space = build_scale_space(img, SiftParams{});
        int hits = 0;
        for (const auto& c : detect_extrema(space)) {
            if (c.octave != 0 || std::abs(c.x - 32) > 1 || std::abs(c.y - 32) > 1) continue;
            CHECK(localize_keypoint(c, space, SiftParams{}).status == Rejection::low_contrast);
            ++hits;
        }
        CHECK(hits > 0);
    }
}

TEST_CASE("assign_orientations") {
    auto ramp = [](double angle) {
        RasterF img(64, 64);
        for (int y = 0; y < 64; ++y)
            for (int x = 0; x < 64; ++x)
                img(y, x) = static_cast<float>(0.5 + 0.005 * (std::cos(angle) * (x - 32) + std::sin(angle) * (y - 32)));
        return img;
    };
    LocalizedPoint centre;
    centre.octave = 0;
    centre.level = 1;
    centre.x = 32;
    centre.y = 32;

    SUBCASE("horizontal ramp") {
        const auto pts = assign_orientations(centre, build_scale_space(ramp(0.0), SiftParams{}));
        REQUIRE(pts.size() == 1);
        CHECK(angle_gap(pts[0].orientation, 0.0) <= kBinWidth);
    }
    SUBCASE("rotating the ramp rotates the orientation") {
        for (double phi : {0.3, 1.0, 2.2, 3.5, 5.0}) {
            const auto pts = assign_orientations(centre, build_scale_space(ramp(phi), SiftParams{}));
            REQUIRE(pts.size() == 1);
            CHECK(angle_gap(pts[0].orientation, phi) <= kBinWidth);
            CHECK(pts[0].orientation >= 0.0f);
            CHECK(pts[0].orientation < 2 * kPi);
        }
    }
    SUBCASE("two orthogonal gradient populations") {
        RasterF img(64, 64);
        for (int y = 0; y < 64; ++y)
            for (int x = 0; x < 64; ++x) img(y, x) = static_cast<float>(0.5 + 0.005 * std::max(x - 32, y - 32));
        const auto pts = assign_orientations(centre, build_scale_space(img, SiftParams{}));
        REQUIRE(pts.size() == 2);
        std::vector<double> found{pts[0].orientation, pts[1].orientation};
        std::sort(found.begin(), found.end());
        CHECK(angle_gap(found[0], 0.0) <= kBinWidth);
        CHECK(angle_gap(found[1], kPi / 2) <= kBinWidth);
    }
    SUBCASE("zero-gradient window drops the point") {
        CHECK(assign_orientations(centre, build_scale_space(RasterF::Constant(64, 64, 0.3f), SiftParams{})).empty());
    }
}

TEST_CASE("descriptor normalization") {
    Descriptor raw = Descriptor::Zero();
    raw(0) = 10;
    raw(1) = 1;
    raw(2) = 1;
    const Descriptor clamped = detail::clamp_unit(raw);
    CHECK(clamped.maxCoeff() <= 0.2f + 1e-7f);
    const Descriptor final_desc = detail::normalize_descriptor(raw);
    CHECK(final_desc.norm() == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(final_desc.minCoeff() >= 0.0f);
    // After clamping the dominant entry no longer dominates.
    CHECK(final_desc(0) / final_desc(1) < 10.0f);
    CHECK(detail::normalize_descriptor(Descriptor::Zero()).isZero());
}

TEST_CASE("descriptor is invariant to a brightness gain") {
    const RasterF img = to_float(textured(5, 96, 96)) * 0.45f;
    SiftParams p;
    p.contrast_threshold = 0.005;
    const ScaleSpace a = build_scale_space(img, p);
    const ScaleSpace b = build_scale_space(img * 2.0f, p);
    int compared = 0;
    for (const auto& c : detect_extrema(a)) {
        const Localization loc = localize_keypoint(c, a, p);
        if (!loc.accepted()) continue;
        for (const auto& op : assign_orientations(loc.point, a)) {
            const Descriptor da = compute_descriptor(op, a);
            const Descriptor db = compute_descriptor(op, b);
            CHECK((da - db).cwiseAbs().maxCoeff() <= 1e-6f);
            ++compared;
        }
    }
    CHECK(compared > 10);
}

TEST_CASE("extracted keypoints satisfy the type invariants") {
    const GrayImage img = textured(11, 200, 200);
    const FeatureSet fs = extract_features(img, Modality::fingerprint);
    CHECK(fs.modality == Modality::fingerprint);
    CHECK(fs.keypoints.size() >= 100);
    CHECK(fs.keypoints.size() <= 10000);
    for (const Keypoint& kp : fs.keypoints) {
        CHECK(kp.descriptor.size() == kDescriptorSize);
        CHECK(kp.descriptor.norm() == doctest::Approx(1.0).epsilon(1e-6));
        CHECK(kp.descriptor.minCoeff() >= 0.0f);
        CHECK(kp.descriptor.maxCoeff() <= 1.0f);
        CHECK(std::isfinite(kp.scale));
        CHECK(kp.scale > 0.0f);
        CHECK(kp.x >= 0.0f);
        CHECK(kp.y >= 0.0f);
        CHECK(kp.x < 200.0f);
        CHECK(kp.y < 200.0f);
        CHECK(kp.orientation >= 0.0f);
        CHECK(kp.orientation < 2 * kPi);
    }
    SUBCASE("deterministic") { CHECK(extract_features(img, Modality::fingerprint).keypoints == fs.keypoints); }
}

TEST_CASE("raising the contrast threshold never adds keypoints") {
    const RasterF img = to_float(textured(2, 128, 128));
    std::size_t previous = std::numeric_limits<std::size_t>::max();
    for (double t : {0.005, 0.01, 0.02, 0.03, 0.05, 0.08}) {
        SiftParams p;
        p.contrast_threshold = t;
        const std::size_t n = detect_keypoints(img, p).size();
        CHECK(n <= previous);
        previous = n;
    }
}

TEST_CASE("quarter-turn rotation maps keypoints and orientations") {
    const GrayImage img = textured(21, 128, 128);
    GrayImage rot(128, 128);
    // rot(x, y) = img(y, 127 - x): a point (X, Y) lands at (127 - Y, X), directions turn by +pi/2.
    for (int y = 0; y < 128; ++y)
        for (int x = 0; x < 128; ++x) rot(x, y) = img(y, 127 - x);
    const auto k0 = extract_features(img, Modality::fingerprint).keypoints;
    const auto k1 = extract_features(rot, Modality::fingerprint).keypoints;
    REQUIRE(!k0.empty());
    int located = 0;
    int oriented = 0;
    for (const Keypoint& a : k0) {
        const double xr = 127 - a.y;
        const double yr = a.x;
        bool near = false;
        bool turned = false;
        for (const Keypoint& b : k1) {
            if (std::hypot(b.x - xr, b.y - yr) > 1.0) continue;
            near = true;
            turned = turned || angle_gap(b.orientation, a.orientation + kPi / 2) <= kBinWidth;
        }
        located += near;
        oriented += turned;
    }
    CHECK(located >= 0.9 * static_cast<double>(k0.size()));
    CHECK(oriented >= 0.9 * static_cast<double>(k0.size()));
}

TEST_CASE("modality names") {
    CHECK(to_string(Modality::ear) == "ear");
    CHECK(parse_modality("fingerprint") == Modality::fingerprint);
    CHECK_THROWS(parse_modality("iris"));
}
