// Corpus generation: per-subject body/target meshes plus noise variants, with
// a deterministic manifest describing every variant. Generators are pure
// given (parameters, seed).
#pragma once

#include <string>
#include <vector>

#include "hilo/proxy_body.hpp"

namespace hilo {

struct CorpusConfig {
    int subjects = 1;
    std::string body_kind = "proxy";  // proxy | sphere
    int mc_resolution = 96;
    double sphere_radius = 0.5;
    int sphere_subdiv = 3;
    double pose_jitter = 0.3;   // uniform per-subject variation (radians)
    double shape_jitter = 0.08; // uniform per-subject variation (log-scale)
    ClothingSpec clothing;
    std::vector<double> noise_levels;  // each adds a perturbed body variant
    std::uint64_t seed = 1;
};

struct CorpusEntry {
    std::string subject_id;  // "sub000", plus "/n1".. suffix for noise variants
    double s1 = 0.0, s2 = 0.0;
    ProxyBody params;  // effective parameters of this variant's body
    ClothingSpec clothing;
    std::string body_file;    // relative to the corpus directory
    std::string target_file;  // clean target shared across noise variants
};

struct CorpusManifest {
    std::string body_kind = "proxy";
    int mc_resolution = 96;
    double sphere_radius = 0.5;
    int sphere_subdiv = 3;
    std::vector<CorpusEntry> entries;

    const CorpusEntry& find(const std::string& subject_id) const;
};

// Builds the body mesh for a set of parameters under the manifest's body kind.
TriMesh build_body_mesh(const CorpusManifest& manifest, const ProxyBody& params);

// Writes meshes + manifest.txt under out_dir (created if absent).
CorpusManifest generate_corpus(const CorpusConfig& cfg, const std::string& out_dir);

void write_manifest(const CorpusManifest& m, const std::string& path);
CorpusManifest read_manifest(const std::string& path);

}  // namespace hilo
