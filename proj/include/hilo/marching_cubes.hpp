// Table-driven marching cubes over a scalar lattice. The 256-entry case table
// is generated from per-face marching-squares rules with a fixed resolution of
// ambiguous faces (above-iso corners are never joined across a face diagonal),
// so adjacent cells always agree on the shared face and the output is a closed
// 2-manifold. Triangles are wound so normals point toward lower field values;
// with occupancy fields (inside = 1) that is outward.
#pragma once

#include <vector>

#include "hilo/geom.hpp"
#include "hilo/trimesh.hpp"

namespace hilo {

struct ScalarGrid {
    int nx = 0, ny = 0, nz = 0;  // lattice points per axis
    Vec3 origin = Vec3::Zero();
    double spacing = 1.0;
    std::vector<double> values;  // index (z * ny + y) * nx + x

    double& at(int x, int y, int z) { return values[(static_cast<size_t>(z) * ny + y) * nx + x]; }
    double at(int x, int y, int z) const {
        return values[(static_cast<size_t>(z) * ny + y) * nx + x];
    }
    Vec3 point(int x, int y, int z) const { return origin + spacing * Vec3(x, y, z); }
};

// Corner values exactly at iso are nudged by 1e-9 before classification so
// every crossing is strict; an all-above or all-below field yields an empty mesh.
TriMesh marching_cubes(const ScalarGrid& grid, double iso);

// Case table access for the enumeration tests: triangles (as edge-id triples)
// emitted for a given 8-bit corner mask (bit set = corner above iso).
const std::vector<std::array<int, 3>>& marching_cubes_case(int mask);

// Edge id -> its two cube corners (corner bit i encodes (x,y,z) = (i&1, i>>1&1, i>>2&1)).
extern const int kCubeEdgeCorners[12][2];

}  // namespace hilo
