#include "fuseid/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace fuseid {

std::vector<std::string> DatasetManifest::subjects() const {
    std::vector<std::string> out;
    for (const auto& s : samples) {
        if (std::find(out.begin(), out.end(), s.subject_id) == out.end()) out.push_back(s.subject_id);
    }
    return out;
}

const SampleRecord* DatasetManifest::find(const std::string& subject_id, int sample_index) const {
    for (const auto& s : samples) {
        if (s.subject_id == subject_id && s.sample_index == sample_index) return &s;
    }
    return nullptr;
}

int DatasetManifest::samples_per_subject() const {
    std::map<std::string, int> counts;
    for (const auto& s : samples) ++counts[s.subject_id];
    if (counts.empty()) return 0;
    int lo = counts.begin()->second;
    for (const auto& [id, c] : counts) lo = std::min(lo, c);
    return lo;
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open manifest " + path.string());
    }
    const auto root = path.parent_path();
    auto resolve = [&](const std::string& p) {
        std::filesystem::path fp(p);
        return fp.is_absolute() ? fp : root / fp;
    };

    DatasetManifest m;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream fields(line);
        std::vector<std::string> tok;
        for (std::string t; fields >> t;) tok.push_back(t);
        if (tok.empty()) continue;
        if (tok.size() != 4 && tok.size() != 5) {
            throw std::runtime_error("manifest line " + std::to_string(line_no) + ": expected 4 or 5 fields");
        }
        SampleRecord r;
        r.subject_id = tok[0];
        try {
            r.sample_index = std::stoi(tok[1]);
        } catch (const std::exception&) {
            throw std::runtime_error("manifest line " + std::to_string(line_no) + ": bad sample index");
        }
        r.fingerprint = resolve(tok[2]);
        r.ear = resolve(tok[3]);
        if (tok.size() == 5) r.landmarks = resolve(tok[4]);
        if (m.find(r.subject_id, r.sample_index)) {
            throw std::runtime_error("manifest line " + std::to_string(line_no) + ": duplicate sample");
        }
        m.samples.push_back(std::move(r));
    }
    return m;
}

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
    const auto root = path.parent_path();
    auto rel = [&](const std::filesystem::path& p) {
        const auto r = p.lexically_relative(root);
        return (r.empty() || *r.begin() == "..") ? p.generic_string() : r.generic_string();
    };
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write manifest " + path.string());
    }
    for (const auto& s : manifest.samples) {
        out << s.subject_id << ' ' << s.sample_index << ' ' << rel(s.fingerprint) << ' ' << rel(s.ear);
        if (s.landmarks) out << ' ' << rel(*s.landmarks);
        out << '\n';
    }
}

}  // namespace fuseid
