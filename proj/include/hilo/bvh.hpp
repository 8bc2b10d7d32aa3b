// Bounding-volume hierarchy over triangle meshes: closest-point, signed
// distance, inside/outside via the generalized winding number, and ray casts.
// Trees are immutable after construction; all queries are const and safe to
// issue concurrently.
#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "hilo/geom.hpp"
#include "hilo/trimesh.hpp"

namespace hilo {

struct SurfaceSample {
    Vec3 query_point;
    double signed_distance = 0.0;  // unsigned magnitude when sign_valid is false
    Vec3 closest_point;
    Vec3 body_normal;          // barycentric-interpolated vertex normal at closest_point
    std::uint32_t face = 0;
    bool sign_valid = true;    // false for non-watertight input ("sign unavailable")
};

struct RayHit {
    Vec3 point;
    Vec3 normal;  // barycentric-interpolated unit vector
    double t = 0.0;
    std::uint32_t face = 0;
};

class BvhTree {
  public:
    struct Node {
        Aabb box;
        std::int32_t left = -1, right = -1;  // children; leaf when count > 0
        std::uint32_t start = 0, count = 0;  // triangle range for leaves
        // Cluster summary for the far-field winding approximation.
        Vec3 weighted_normal = Vec3::Zero();  // sum of area * face normal
        Vec3 area_centroid = Vec3::Zero();
        double radius = 0.0;  // bounding radius of the cluster around area_centroid
    };

    // Median split on the longest axis, leaf size <= 4. Throws on empty geometry.
    static BvhTree build(const TriMesh& mesh);

    SurfaceSample closest_point(const Vec3& p) const;
    std::optional<RayHit> raycast(const Vec3& origin, const Vec3& direction) const;

    // Generalized winding number of the query point. `exact` sums the solid
    // angle of every triangle; the default uses a far-field dipole cluster
    // approximation that is more than accurate enough for the 0.5 threshold.
    double winding_number(const Vec3& p, bool exact = false) const;

    const std::vector<Node>& nodes() const { return nodes_; }
    const std::vector<std::uint32_t>& triangle_order() const { return tri_index_; }
    const TriMesh& mesh() const { return *mesh_; }

  private:
    const TriMesh* mesh_ = nullptr;
    std::vector<Node> nodes_;
    std::vector<std::uint32_t> tri_index_;  // leaf ranges index into this permutation
    // Triangle vertices in tri_index_ order, flattened for cache-friendly queries.
    std::vector<Vec3> tri_a_, tri_b_, tri_c_;

    double winding_recursive(const Vec3& p, std::int32_t node, bool exact) const;
};

// Signed distance per the surface-distance definition: magnitude from the
// closest point, sign negative inside (winding > 0.5). Non-watertight meshes
// yield the unsigned distance with sign_valid = false.
SurfaceSample signed_distance(const BvhTree& tree, const TriMesh& mesh, const Vec3& p,
                              bool watertight);

// True iff the winding number exceeds 0.5. Points with |winding - 0.5| < 1e-6
// are classified outside (deterministic tie-break for on-surface queries).
bool inside_test(const BvhTree& tree, const Vec3& p);

}  // namespace hilo
