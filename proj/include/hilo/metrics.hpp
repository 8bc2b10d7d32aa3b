// Evaluation metrics: point-to-surface distance, bidirectional chamfer, and
// the L2 error between orthographic normal renders from fixed viewpoints.
// Distances are reported in centimetres (one scene unit = one metre).
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hilo/bvh.hpp"
#include "hilo/trimesh.hpp"

namespace hilo {

struct MetricsReport {
    double chamfer_cm = 0.0;
    double p2s_cm = 0.0;
    double normals = 0.0;  // dimensionless normal-image L2
    int sample_count = 0;
    int viewpoints = 0;
};

// Area-uniform surface samples used by the directed distances (seeded and
// reproducible; the scan-equivalence tests reuse them).
std::vector<Vec3> metric_surface_samples(const TriMesh& mesh, int n_samples, std::uint64_t seed);

// Mean unsigned distance of the sample points to the tree's surface (scene units).
double mean_distance_to_surface(const std::vector<Vec3>& points, const BvhTree& tree);

// Mean distance from `n_samples` ground-truth surface points to the
// reconstruction, in cm. An empty reconstruction reports +infinity.
double p2s(const TriMesh& gt, const TriMesh& recon, int n_samples, std::uint64_t seed);

// Bidirectional point-to-surface: the mean of the two directed distances,
// both drawn with the same seed, in cm. Symmetric by construction.
double chamfer(const TriMesh& gt, const TriMesh& recon, int n_samples, std::uint64_t seed);

struct NormalRenderConfig {
    int resolution = 256;
    int viewpoints = 4;  // yaw 0/90/180/270 around +y
};

// Orthographic normal renders of both meshes from the fixed yaw viewpoints,
// framed identically by their union bounds; normals map to [0,1]^3, background
// is black. Mean per-pixel L2 over pixels covered by either render; an empty
// mesh reports +infinity.
double normals_error(const TriMesh& gt, const TriMesh& recon,
                     const NormalRenderConfig& cfg = {});

MetricsReport evaluate_pair(const TriMesh& gt, const TriMesh& recon, int n_samples,
                            std::uint64_t seed, const NormalRenderConfig& render_cfg = {});

}  // namespace hilo
