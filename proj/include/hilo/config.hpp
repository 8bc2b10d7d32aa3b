// Run configuration: a flat tree of namespaced keys with typed defaults.
// Unknown keys are rejected so typos fail loudly, and the effective
// configuration of every run can be written back verbatim.
#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace hilo {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigKey {
    std::string name;
    std::string def;   // default, stored in text form
    std::string help;
};

class RunConfig {
  public:
    RunConfig();  // all keys at their defaults

    // Parse `key = value` lines; '#' starts a comment. Unknown keys throw.
    void load_file(const std::string& path);
    void set(const std::string& key, const std::string& value);  // throws on unknown key
    void apply_overrides(const std::vector<std::string>& key_eq_value);

    bool has_key(const std::string& key) const;

    std::string get_string(const std::string& key) const;
    double get_double(const std::string& key) const;
    std::int64_t get_int(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    std::vector<double> get_double_list(const std::string& key) const;  // comma separated
    std::vector<std::int64_t> get_int_list(const std::string& key) const;
    std::vector<std::string> get_string_list(const std::string& key) const;

    // Write every key (sorted) with its current value.
    void write_effective(const std::string& path) const;
    std::string render_effective() const;

    static const std::vector<ConfigKey>& schema();

  private:
    std::map<std::string, std::string> values_;
};

}  // namespace hilo
