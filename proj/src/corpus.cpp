#include "hilo/corpus.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace hilo {

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string join_vector(const Eigen::VectorXd& v) {
    std::string out;
    for (int i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += fmt_double(v[i]);
    }
    return out;
}

Eigen::VectorXd parse_vector(const std::string& s, int expected) {
    std::vector<double> vals;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) vals.push_back(std::stod(item));
    if (static_cast<int>(vals.size()) != expected)
        throw std::runtime_error("manifest: parameter vector length mismatch");
    Eigen::VectorXd v(expected);
    for (int i = 0; i < expected; ++i) v[i] = vals[i];
    return v;
}

}  // namespace

const CorpusEntry& CorpusManifest::find(const std::string& subject_id) const {
    for (const auto& e : entries)
        if (e.subject_id == subject_id) return e;
    std::string known;
    for (const auto& e : entries) known += " " + e.subject_id;
    throw std::runtime_error("unknown subject '" + subject_id + "'; available:" + known);
}

TriMesh build_body_mesh(const CorpusManifest& manifest, const ProxyBody& params) {
    if (manifest.body_kind == "sphere") {
        double radius = manifest.sphere_radius * std::exp(params.theta_s[0]);
        return make_icosphere(radius, manifest.sphere_subdiv);
    }
    if (manifest.body_kind == "proxy")
        return generate_body(params, BodyDims{}, manifest.mc_resolution);
    throw std::runtime_error("unknown body kind: " + manifest.body_kind);
}

CorpusManifest generate_corpus(const CorpusConfig& cfg, const std::string& out_dir) {
    if (cfg.subjects < 1) throw std::runtime_error("corpus: need at least one subject");
    std::filesystem::create_directories(out_dir);

    CorpusManifest manifest;
    manifest.body_kind = cfg.body_kind;
    manifest.mc_resolution = cfg.mc_resolution;
    manifest.sphere_radius = cfg.sphere_radius;
    manifest.sphere_subdiv = cfg.sphere_subdiv;

    for (int k = 0; k < cfg.subjects; ++k) {
        char id[32];
        std::snprintf(id, sizeof(id), "sub%03d", k);

        ProxyBody base;
        Rng rng(derive_seed(cfg.seed, "corpus-subject", static_cast<std::uint64_t>(k)));
        if (cfg.body_kind == "sphere") {
            base.theta_s[0] = rng.uniform(-cfg.shape_jitter, cfg.shape_jitter);
        } else {
            for (int i = 0; i < kShapeParams; ++i)
                base.theta_s[i] = rng.uniform(-cfg.shape_jitter, cfg.shape_jitter);
            for (int i = 0; i < kPoseParams; ++i)
                base.theta_p[i] = rng.uniform(-cfg.pose_jitter, cfg.pose_jitter);
        }

        TriMesh body = build_body_mesh(manifest, base);
        TriMesh target = generate_target(body, cfg.clothing);

        std::string body_file = std::string(id) + "_body.ply";
        std::string target_file = std::string(id) + "_target.ply";
        save_ply(body, out_dir + "/" + body_file);
        save_ply(target, out_dir + "/" + target_file);

        CorpusEntry entry;
        entry.subject_id = id;
        entry.params = base;
        entry.clothing = cfg.clothing;
        entry.body_file = body_file;
        entry.target_file = target_file;
        manifest.entries.push_back(entry);

        for (size_t li = 0; li < cfg.noise_levels.size(); ++li) {
            double level = cfg.noise_levels[li];
            ProxyBody noisy = base;
            Rng noise_rng(derive_seed(cfg.seed, "corpus-noise",
                                      static_cast<std::uint64_t>(k) * 1000 + li));
            perturb_params(noisy, level, level, noise_rng);
            TriMesh noisy_body = build_body_mesh(manifest, noisy);
            char suffix[32];
            std::snprintf(suffix, sizeof(suffix), "_noise%zu", li + 1);
            std::string noisy_file = std::string(id) + suffix + "_body.ply";
            save_ply(noisy_body, out_dir + "/" + noisy_file);

            CorpusEntry variant = entry;
            variant.subject_id = std::string(id) + "/n" + std::to_string(li + 1);
            variant.s1 = variant.s2 = level;
            variant.params = noisy;
            variant.body_file = noisy_file;
            manifest.entries.push_back(variant);
        }
    }
    write_manifest(manifest, out_dir + "/manifest.txt");
    return manifest;
}

void write_manifest(const CorpusManifest& m, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write manifest: " + path);
    out << "hilo-corpus v1\n";
    out << "body_kind " << m.body_kind << "\n";
    out << "mc_resolution " << m.mc_resolution << "\n";
    out << "sphere_radius " << fmt_double(m.sphere_radius) << "\n";
    out << "sphere_subdiv " << m.sphere_subdiv << "\n";
    out << "entries " << m.entries.size() << "\n";
    for (const auto& e : m.entries) {
        out << e.subject_id << '\t' << fmt_double(e.s1) << '\t' << fmt_double(e.s2) << '\t'
            << fmt_double(e.clothing.lf_offset) << '\t' << fmt_double(e.clothing.hf_amp) << '\t'
            << fmt_double(e.clothing.hf_freq) << '\t' << join_vector(e.params.theta_s) << '\t'
            << join_vector(e.params.theta_p) << '\t' << e.body_file << '\t' << e.target_file
            << "\n";
    }
}

CorpusManifest read_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open manifest: " + path);
    std::string line;
    if (!std::getline(in, line) || line != "hilo-corpus v1")
        throw std::runtime_error("bad manifest header: " + path);
    CorpusManifest m;
    size_t count = 0;
    for (int i = 0; i < 5; ++i) {
        std::getline(in, line);
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "body_kind") ls >> m.body_kind;
        else if (key == "mc_resolution") ls >> m.mc_resolution;
        else if (key == "sphere_radius") ls >> m.sphere_radius;
        else if (key == "sphere_subdiv") ls >> m.sphere_subdiv;
        else if (key == "entries") ls >> count;
        else throw std::runtime_error("bad manifest field '" + key + "' in " + path);
    }
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ls(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ls, field, '\t')) fields.push_back(field);
        if (fields.size() != 10) throw std::runtime_error("bad manifest row in " + path);
        CorpusEntry e;
        e.subject_id = fields[0];
        e.s1 = std::stod(fields[1]);
        e.s2 = std::stod(fields[2]);
        e.clothing.lf_offset = std::stod(fields[3]);
        e.clothing.hf_amp = std::stod(fields[4]);
        e.clothing.hf_freq = std::stod(fields[5]);
        e.params.theta_s = parse_vector(fields[6], kShapeParams);
        e.params.theta_p = parse_vector(fields[7], kPoseParams);
        e.body_file = fields[8];
        e.target_file = fields[9];
        m.entries.push_back(e);
    }
    if (m.entries.size() != count)
        throw std::runtime_error("manifest entry count mismatch in " + path);
    return m;
}

}  // namespace hilo
