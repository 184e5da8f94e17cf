#include "fuseid/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace fuseid {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

template <typename T>
bool parse_number(const std::string& text, T& out) {
    const char* first = text.data();
    const char* last = text.data() + text.size();
    if (first != last && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last && first != last;
}

bool parse_bool(const std::string& text, bool& out) {
    if (text == "true" || text == "1" || text == "yes" || text == "on") {
        out = true;
        return true;
    }
    if (text == "false" || text == "0" || text == "no" || text == "off") {
        out = false;
        return true;
    }
    return false;
}

bool valid_for(ValueType type, const std::string& value) {
    switch (type) {
        case ValueType::boolean: {
            bool b;
            return parse_bool(value, b);
        }
        case ValueType::integer: {
            long long v;
            return parse_number(value, v);
        }
        case ValueType::unsigned_integer: {
            std::uint64_t v;
            return parse_number(value, v);
        }
        case ValueType::real: {
            double v;
            return parse_number(value, v);
        }
        case ValueType::text: return !value.empty();
    }
    return false;
}

const ConfigKey* lookup(const std::string& key) {
    const auto& keys = Config::known_keys();
    const auto it = std::find_if(keys.begin(), keys.end(), [&](const ConfigKey& k) { return k.name == key; });
    return it == keys.end() ? nullptr : &*it;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, ',');) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

}  // namespace

const std::vector<ConfigKey>& Config::known_keys() {
    using enum ValueType;
    static const std::vector<ConfigKey> keys = {
        {"preprocess.equalize", boolean, "true", "apply adaptive histogram equalization"},
        {"preprocess.clahe_rows", integer, "8", "CLAHE tile grid rows"},
        {"preprocess.clahe_cols", integer, "8", "CLAHE tile grid columns"},
        {"preprocess.clip_limit", real, "0.01", "CLAHE clip limit, fraction in (0, 1]"},
        {"preprocess.ear_margin", real, "0.25", "ear crop margin per side, fraction of the landmark box"},
        {"preprocess.fingerprint_width", integer, "200", "fingerprint width after resizing"},
        {"preprocess.fingerprint_height", integer, "200", "fingerprint height after resizing"},
        {"preprocess.ear_width", integer, "200", "ear width after resizing"},
        {"preprocess.ear_height", integer, "140", "ear height after resizing"},
        {"sift.octaves", integer, "4", "octave count (clamped to image size)"},
        {"sift.scales_per_octave", integer, "3", "DoG scales per octave"},
        {"sift.base_sigma", real, "1.6", "blur of the first level of each octave"},
        {"sift.contrast_threshold", real, "0.03", "minimum |DoG| at a keypoint, images in [0, 1]"},
        {"sift.edge_ratio", real, "10", "maximum principal curvature ratio"},
        {"sift.upsample", boolean, "false", "double the image before building the pyramid"},
        {"pam.k", unsigned_integer, "0", "medoid count; 0 selects min(pam.max_k, ceil(n/4))"},
        {"pam.max_k", unsigned_integer, "200", "cap on the automatic medoid count; 0 disables it"},
        {"pam.seed", unsigned_integer, "1", "medoid initialization seed"},
        {"pam.max_iterations", integer, "100", "maximum accepted swaps"},
        {"pam.metric", text, "descriptor", "descriptor | composite"},
        {"protocol.reduce_gallery", boolean, "true", "medoid-reduce gallery templates"},
        {"protocol.reduce_probe", boolean, "true", "medoid-reduce probe templates"},
        {"protocol.enroll_sample", integer, "1", "sample index used for enrollment"},
        {"protocol.probe_sample", integer, "2", "sample index used as probe"},
        {"match.neighbor_count", integer, "2", "neighbours per probe keypoint; 1 disables the ratio test"},
        {"match.ratio_threshold", real, "0.8", "nearest / second-nearest acceptance ratio"},
        {"match.geometry_weight", real, "0", "weight of the (x, y, scale, angle) distance term"},
        {"weighting.matchers", text, "fingerprint,ear,feature_fusion", "matchers entering the weighted fusion"},
        {"synth.subjects", integer, "20", "synthetic subject count"},
        {"synth.samples", integer, "2", "samples per synthetic subject"},
        {"synth.seed", unsigned_integer, "1", "synthetic dataset seed"},
        {"synth.max_rotation_deg", real, "5", "maximum per-sample rotation in degrees"},
        {"synth.max_shift_px", real, "3", "maximum per-sample translation in pixels"},
        {"synth.brightness_jitter", real, "0.1", "gain jitter; offset jitter is half of it"},
        {"synth.fingerprint_noise", real, "0.25", "additive Gaussian noise sigma, fingerprint"},
        {"synth.ear_noise", real, "0.2", "additive Gaussian noise sigma, ear"},
        {"synth.fingerprint_width", integer, "200", "synthetic fingerprint width"},
        {"synth.fingerprint_height", integer, "200", "synthetic fingerprint height"},
        {"synth.ear_width", integer, "200", "synthetic ear width"},
        {"synth.ear_height", integer, "140", "synthetic ear height"},
        {"run.workers", integer, "0", "worker threads; 0 uses all hardware threads"},
    };
    return keys;
}

Config::Config() {
    for (const auto& k : known_keys()) values_[k.name] = k.default_value;
}

void Config::set(const std::string& key, const std::string& value) {
    const ConfigKey* k = lookup(key);
    if (!k) {
        throw ConfigError("unknown config key '" + key + "'");
    }
    const std::string v = trim(value);
    if (!valid_for(k->type, v)) {
        throw ConfigError("invalid value '" + v + "' for config key '" + key + "'");
    }
    values_[key] = v;
    explicit_.insert(key);
}

void Config::apply_override(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) {
        throw ConfigError("override '" + assignment + "' is not of the form section.key=value");
    }
    set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

void Config::load_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file " + path.string());
    }
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        try {
            apply_override(line);
        } catch (const ConfigError& e) {
            throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
}

void Config::apply_environment() {
    const char* env = std::getenv("FUSEID_SEED");
    if (!env || !*env) return;
    std::uint64_t seed;
    if (!parse_number(trim(env), seed)) {
        throw ConfigError(std::string("FUSEID_SEED is not an unsigned integer: '") + env + "'");
    }
    for (const char* key : {"synth.seed", "pam.seed"}) {
        if (!explicitly_set(key)) values_[key] = std::to_string(seed);
    }
}

const std::string& Config::get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) {
        throw ConfigError("unknown config key '" + key + "'");
    }
    return it->second;
}

bool Config::get_bool(const std::string& key) const {
    bool b = false;
    parse_bool(get(key), b);
    return b;
}

long long Config::get_int(const std::string& key) const {
    long long v = 0;
    parse_number(get(key), v);
    return v;
}

std::uint64_t Config::get_u64(const std::string& key) const {
    std::uint64_t v = 0;
    parse_number(get(key), v);
    return v;
}

double Config::get_double(const std::string& key) const {
    double v = 0;
    parse_number(get(key), v);
    return v;
}

PipelineConfig Config::pipeline() const {
    PipelineConfig c;
    c.preprocess.equalize = get_bool("preprocess.equalize");
    c.preprocess.clahe.tile_rows = static_cast<int>(get_int("preprocess.clahe_rows"));
    c.preprocess.clahe.tile_cols = static_cast<int>(get_int("preprocess.clahe_cols"));
    c.preprocess.clahe.clip_limit = get_double("preprocess.clip_limit");
    c.preprocess.ear_margin = get_double("preprocess.ear_margin");
    c.preprocess.fingerprint_width = static_cast<int>(get_int("preprocess.fingerprint_width"));
    c.preprocess.fingerprint_height = static_cast<int>(get_int("preprocess.fingerprint_height"));
    c.preprocess.ear_width = static_cast<int>(get_int("preprocess.ear_width"));
    c.preprocess.ear_height = static_cast<int>(get_int("preprocess.ear_height"));

    c.sift.octaves = static_cast<int>(get_int("sift.octaves"));
    c.sift.scales_per_octave = static_cast<int>(get_int("sift.scales_per_octave"));
    c.sift.base_sigma = get_double("sift.base_sigma");
    c.sift.contrast_threshold = get_double("sift.contrast_threshold");
    c.sift.edge_ratio_threshold = get_double("sift.edge_ratio");
    c.sift.upsample = get_bool("sift.upsample");

    c.pam.k = get_u64("pam.k");
    c.pam.max_k = get_u64("pam.max_k");
    c.pam.seed = get_u64("pam.seed");
    c.pam.max_iterations = static_cast<int>(get_int("pam.max_iterations"));
    const std::string metric = get("pam.metric");
    if (metric == "descriptor") {
        c.pam.metric = PamMetric::descriptor;
    } else if (metric == "composite") {
        c.pam.metric = PamMetric::composite;
    } else {
        throw ConfigError("pam.metric must be 'descriptor' or 'composite', got '" + metric + "'");
    }

    c.reduce_gallery = get_bool("protocol.reduce_gallery");
    c.reduce_probe = get_bool("protocol.reduce_probe");
    c.enroll_sample = static_cast<int>(get_int("protocol.enroll_sample"));
    c.probe_sample = static_cast<int>(get_int("protocol.probe_sample"));

    c.match.neighbor_count = static_cast<int>(get_int("match.neighbor_count"));
    c.match.ratio_threshold = get_double("match.ratio_threshold");
    c.match.geometry_weight = get_double("match.geometry_weight");

    c.matchers.clear();
    for (const auto& name : split_list(get("weighting.matchers"))) {
        try {
            c.matchers.push_back(parse_matcher(name));
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("weighting.matchers: ") + e.what());
        }
    }
    c.workers = static_cast<int>(get_int("run.workers"));
    try {
        c.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return c;
}

SynthConfig Config::synth() const {
    SynthConfig s;
    s.subjects = static_cast<int>(get_int("synth.subjects"));
    s.samples_per_subject = static_cast<int>(get_int("synth.samples"));
    s.seed = get_u64("synth.seed");
    s.max_rotation_deg = get_double("synth.max_rotation_deg");
    s.max_shift_px = get_double("synth.max_shift_px");
    s.brightness_jitter = get_double("synth.brightness_jitter");
    s.fingerprint_noise = get_double("synth.fingerprint_noise");
    s.ear_noise = get_double("synth.ear_noise");
    s.fingerprint_width = static_cast<int>(get_int("synth.fingerprint_width"));
    s.fingerprint_height = static_cast<int>(get_int("synth.fingerprint_height"));
    s.ear_width = static_cast<int>(get_int("synth.ear_width"));
    s.ear_height = static_cast<int>(get_int("synth.ear_height"));
    try {
        s.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return s;
}

std::string Config::dump() const {
    std::string out;
    for (const auto& k : known_keys()) out += k.name + " = " + get(k.name) + "\n";
    return out;
}

}  // namespace fuseid
