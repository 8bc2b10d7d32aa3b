// Indexed triangle mesh. One scene unit is about one metre; reported metric
// distances elsewhere convert to centimetres on that basis.
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "hilo/geom.hpp"

namespace hilo {

struct TriMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<std::uint32_t, 3>> faces;
    std::vector<Vec3> vertex_normals;  // unit, area-weighted average of incident faces

    bool empty() const { return faces.empty(); }

    Vec3 face_normal(std::uint32_t f) const;           // unit
    double face_area(std::uint32_t f) const;
    double total_area() const;
    Aabb bounds() const;

    // Area-weighted vertex normals, normalized to unit length.
    void compute_vertex_normals();

    // Throws std::runtime_error on out-of-range indices or degenerate faces
    // (area <= 1e-12). Called by every loader.
    void validate() const;

    // Every undirected edge shared by exactly two faces, with opposite
    // orientation in the two (a consistent closed 2-manifold).
    bool is_watertight() const;

    int euler_characteristic() const;  // V - E + F

    // Signed volume via the divergence theorem; positive for outward winding.
    double signed_volume() const;
};

// Area-uniform surface sampling (cumulative face areas + square-root
// barycentric draw). The mesh must outlive the sampler.
class Rng;
class SurfaceSampler {
  public:
    explicit SurfaceSampler(const TriMesh& mesh);
    struct Sample {
        Vec3 point;
        Vec3 normal;  // barycentric-interpolated unit normal
        std::uint32_t face;
    };
    Sample sample(Rng& rng) const;

  private:
    const TriMesh* mesh_;
    std::vector<double> cumulative_;
};

// Generators used by the synthetic corpus and the tests.
TriMesh make_icosphere(double radius, int subdivisions, const Vec3& center = Vec3::Zero());
TriMesh make_box(const Vec3& lo, const Vec3& hi);
TriMesh make_single_triangle();

// ASCII OBJ (v/vn/f records, faces triangulated on load) and binary
// little-endian PLY. Writers are deterministic byte-for-byte.
TriMesh load_mesh(const std::string& path);        // dispatch on extension
void save_mesh(const TriMesh& m, const std::string& path);

TriMesh load_obj(const std::string& path);
void save_obj(const TriMesh& m, const std::string& path);
TriMesh load_ply(const std::string& path);
void save_ply(const TriMesh& m, const std::string& path);

}  // namespace hilo
