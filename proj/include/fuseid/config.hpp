#pragma once

#include "fuseid/eval.hpp"
#include "fuseid/synth.hpp"

#include <filesystem>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace fuseid {

class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

enum class ValueType { boolean, integer, unsigned_integer, real, text };

struct ConfigKey {
    std::string name;
    ValueType type;
    std::string default_value;
    std::string help;
};

/// Flat `section.key = value` settings. Every key has a default; unknown keys are rejected.
class Config {
  public:
    Config();

    static const std::vector<ConfigKey>& known_keys();

    void set(const std::string& key, const std::string& value);
    /// Parses `section.key=value`.
    void apply_override(const std::string& assignment);
    void load_file(const std::filesystem::path& path);
    /// FUSEID_SEED seeds synth.seed and pam.seed unless they were set explicitly.
    void apply_environment();

    const std::string& get(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    long long get_int(const std::string& key) const;
    std::uint64_t get_u64(const std::string& key) const;
    double get_double(const std::string& key) const;
    bool explicitly_set(const std::string& key) const { return explicit_.count(key) != 0; }

    PipelineConfig pipeline() const;
    SynthConfig synth() const;

    /// Every key with its current value, one `key = value` line each.
    std::string dump() const;

  private:
    std::map<std::string, std::string> values_;
    std::set<std::string> explicit_;
};

}  // namespace fuseid
