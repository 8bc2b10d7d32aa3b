#include "hilo/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace hilo {

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

const std::vector<ConfigKey>& RunConfig::schema() {
    static const std::vector<ConfigKey> keys = {
        {"seed", "1", "root seed; all random streams are derived from it per purpose"},
        {"out", "runs", "output root directory"},

        {"corpus.subjects", "1", "number of synthetic subjects to generate"},
        {"corpus.body", "proxy", "base body kind: proxy (articulated capsule figure) or sphere"},
        {"corpus.mc_resolution", "96", "marching-cubes lattice used to extract the proxy body surface"},
        {"corpus.sphere_radius", "0.5", "radius of the sphere body kind"},
        {"corpus.sphere_subdiv", "3", "icosphere subdivision of the sphere body kind"},
        {"corpus.pose_jitter", "0.3", "per-subject uniform pose variation (radians)"},
        {"corpus.shape_jitter", "0.08", "per-subject uniform shape variation (log-scale units)"},
        {"corpus.lf_offset", "0.05", "uniform outward displacement of the clothed target (units)"},
        {"corpus.hf_amp", "0.0", "wrinkle amplitude of the clothed target (units)"},
        {"corpus.hf_freq", "20.0", "wrinkle spatial frequency along the height coordinate (rad/unit)"},
        {"corpus.noise_levels", "", "comma-separated extra noise scales; each adds a perturbed body variant"},

        {"hf.num_bands", "5", "number of sin/cos frequency bands applied to the signed distance"},
        {"hf.include_raw", "true", "prepend the raw signed distance to the band encoding"},
        {"hf.anneal_iters", "2000", "iterations over which the band weights anneal from 0 to full"},
        {"hf.enabled", "true", "use the banded distance encoding; off = raw signed distance only"},
        {"hf.progressive", "true", "anneal band weights over training; off = all bands active from step 0"},

        {"voxel.resolution", "32", "occupancy grid resolution per axis"},
        {"voxel.channels", "22", "feature channels produced by the grid encoder"},
        {"voxel.padding_frac", "0.1", "bounding-box padding as a fraction of its diagonal"},
        {"voxel.feature", "true", "concatenate the interpolated grid feature into the point feature"},

        {"gate.enabled", "true", "modulate hidden layers with grid-derived gate vectors"},
        {"gate.mode", "global", "gate source: global (pooled over the volume) or pointwise (sampled at p)"},
        {"gate.output_scalar", "false", "add a learned scalar gate on the output in addition to the squash"},

        {"net.hidden_dims", "512,256,128", "hidden layer widths of the field network"},

        {"train.points_per_step", "8000", "query points sampled per training step"},
        {"train.near_fraction", "0.9", "fraction of points sampled near the target surface"},
        {"train.near_sigma", "0.05", "isotropic offset sigma for near-surface samples (units)"},
        {"train.uniform_fraction", "0.1", "fraction of points sampled uniformly in the padded box"},
        {"train.lr", "1e-4", "optimizer learning rate"},
        {"train.decay", "0.99", "squared-gradient running-average decay"},
        {"train.eps", "1e-8", "optimizer denominator floor"},
        {"train.total_iters", "2000", "training iterations"},
        {"train.trace_every", "10", "record a loss-trace row every k iterations"},
        {"train.abort_factor", "10.0", "abort when loss exceeds this multiple of the initial loss"},
        {"train.abort_patience", "100", "consecutive bad iterations tolerated before aborting"},

        {"recon.resolution", "64", "initial reconstruction grid resolution per axis"},
        {"recon.refine_levels", "2", "binary refinement levels near the surface"},
        {"recon.iso", "0.5", "occupancy iso level defining the surface"},
        {"recon.band", "0.02", "cells whose corners straddle iso +/- band are refined"},

        {"noise.s1", "0.0", "shape-parameter noise scale"},
        {"noise.s2", "0.0", "pose-parameter noise scale"},
        {"noise.per_component", "false", "draw an independent noise scalar per parameter component"},

        {"eval.samples", "10000", "surface samples per directed distance"},
        {"eval.normal_res", "256", "normal-render image resolution"},

        {"matrix.variants", "full,no_hf,no_gate,no_voxel", "comma-separated variant names"},
        {"matrix.noise_levels", "0.0", "comma-separated noise scales applied to both s1 and s2"},
        {"matrix.seeds", "1,2,3", "comma-separated run seeds"},
        {"matrix.jobs", "1", "matrix cells evaluated in parallel"},
    };
    return keys;
}

RunConfig::RunConfig() {
    for (const auto& k : schema()) values_[k.name] = k.def;
}

bool RunConfig::has_key(const std::string& key) const { return values_.count(key) > 0; }

void RunConfig::set(const std::string& key, const std::string& value) {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key: '" + key + "'");
    it->second = trim(value);
}

void RunConfig::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected 'key = value'");
        try {
            set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        } catch (const ConfigError& e) {
            throw ConfigError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
}

void RunConfig::apply_overrides(const std::vector<std::string>& kvs) {
    for (const auto& kv : kvs) {
        auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("override must be key=value: '" + kv + "'");
        set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
    }
}

std::string RunConfig::get_string(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key: '" + key + "'");
    return it->second;
}

double RunConfig::get_double(const std::string& key) const {
    const std::string v = get_string(key);
    try {
        size_t pos = 0;
        double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
    }
}

std::int64_t RunConfig::get_int(const std::string& key) const {
    const std::string v = get_string(key);
    try {
        size_t pos = 0;
        long long i = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return i;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': expected an integer, got '" + v + "'");
    }
}

bool RunConfig::get_bool(const std::string& key) const {
    std::string v = get_string(key);
    std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("key '" + key + "': expected a boolean, got '" + v + "'");
}

std::vector<std::string> RunConfig::get_string_list(const std::string& key) const {
    std::vector<std::string> out;
    std::stringstream ss(get_string(key));
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::vector<double> RunConfig::get_double_list(const std::string& key) const {
    std::vector<double> out;
    for (const auto& s : get_string_list(key)) {
        try {
            out.push_back(std::stod(s));
        } catch (const std::exception&) {
            throw ConfigError("key '" + key + "': expected numbers, got '" + s + "'");
        }
    }
    return out;
}

std::vector<std::int64_t> RunConfig::get_int_list(const std::string& key) const {
    std::vector<std::int64_t> out;
    for (const auto& s : get_string_list(key)) {
        try {
            out.push_back(std::stoll(s));
        } catch (const std::exception&) {
            throw ConfigError("key '" + key + "': expected integers, got '" + s + "'");
        }
    }
    return out;
}

std::string RunConfig::render_effective() const {
    std::ostringstream os;
    for (const auto& [k, v] : values_) os << k << " = " << v << "\n";
    return os.str();
}

void RunConfig::write_effective(const std::string& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ConfigError("cannot write config file: " + path);
    out << render_effective();
}

}  // namespace hilo
