#include "hilo/marching_cubes.hpp"

#include <array>
#include <unordered_map>

namespace hilo {

const int kCubeEdgeCorners[12][2] = {
    {0, 1}, {2, 3}, {4, 5}, {6, 7},  // x-aligned
    {0, 2}, {1, 3}, {4, 6}, {5, 7},  // y-aligned
    {0, 4}, {1, 5}, {2, 6}, {3, 7},  // z-aligned
};

namespace {

// Faces with their 4 corners ordered counter-clockwise as seen from outside.
const int kFaceCorners[6][4] = {
    {0, 4, 6, 2},  // x = 0
    {1, 3, 7, 5},  // x = 1
    {0, 1, 5, 4},  // y = 0
    {2, 6, 7, 3},  // y = 1
    {0, 2, 3, 1},  // z = 0
    {4, 5, 7, 6},  // z = 1
};

int edge_between(int c0, int c1) {
    for (int e = 0; e < 12; ++e) {
        if ((kCubeEdgeCorners[e][0] == c0 && kCubeEdgeCorners[e][1] == c1) ||
            (kCubeEdgeCorners[e][0] == c1 && kCubeEdgeCorners[e][1] == c0))
            return e;
    }
    return -1;
}

// Directed iso-segments of one face: for every maximal cyclic run of above-iso
// corners, the boundary leaves through the edge after the run and enters
// through the edge before it. Diagonal (ambiguous) patterns fall out as two
// separate runs, i.e. the above corners stay separated.
void face_segments(int mask, const int corners[4], std::vector<std::pair<int, int>>& out) {
    bool above[4];
    int n_above = 0;
    for (int j = 0; j < 4; ++j) {
        above[j] = (mask >> corners[j]) & 1;
        n_above += above[j];
    }
    if (n_above == 0 || n_above == 4) return;
    for (int j = 0; j < 4; ++j) {
        // j starts a run when it is above and its cyclic predecessor is not
        if (!above[j] || above[(j + 3) & 3]) continue;
        int e = j;
        while (above[(e + 1) & 3]) e = (e + 1) & 3;
        int from = edge_between(corners[e], corners[(e + 1) & 3]);
        int to = edge_between(corners[(j + 3) & 3], corners[j]);
        out.emplace_back(from, to);
    }
}

std::array<std::vector<std::array<int, 3>>, 256> build_case_table() {
    std::array<std::vector<std::array<int, 3>>, 256> table;
    for (int mask = 0; mask < 256; ++mask) {
        std::vector<std::pair<int, int>> segments;
        for (const auto& fc : kFaceCorners) face_segments(mask, fc, segments);

        // chain segments into closed loops (each crossing edge is left and
        // entered exactly once)
        std::array<int, 12> next_from;
        next_from.fill(-1);
        for (const auto& [from, to] : segments) next_from[from] = to;
        std::array<bool, 12> used{};
        for (const auto& [start, first_to] : segments) {
            if (used[start]) continue;
            std::vector<int> loop;
            int e = start;
            do {
                loop.push_back(e);
                used[e] = true;
                e = next_from[e];
            } while (e != start);
            // loops assembled above bound the high side; reverse so triangle
            // normals point toward lower values
            std::reverse(loop.begin(), loop.end());
            for (size_t k = 1; k + 1 < loop.size(); ++k)
                table[mask].push_back({loop[0], loop[k], loop[k + 1]});
        }
    }
    return table;
}

const std::array<std::vector<std::array<int, 3>>, 256>& case_table() {
    static const auto table = build_case_table();
    return table;
}

}  // namespace

const std::vector<std::array<int, 3>>& marching_cubes_case(int mask) {
    return case_table()[mask & 0xff];
}

TriMesh marching_cubes(const ScalarGrid& grid, double iso) {
    TriMesh mesh;
    if (grid.nx < 2 || grid.ny < 2 || grid.nz < 2)
        throw std::runtime_error("marching cubes requires a grid of at least 2^3 points");
    const auto& table = case_table();

    auto value = [&](int x, int y, int z) {
        double v = grid.at(x, y, z);
        return v == iso ? iso + 1e-9 : v;
    };

    // global edge key -> output vertex index
    std::unordered_map<std::uint64_t, std::uint32_t> edge_vertex;
    auto edge_key = [&](int axis, int x, int y, int z) {
        return ((static_cast<std::uint64_t>(axis) * grid.nz + z) * grid.ny + y) * grid.nx + x;
    };

    const int corner_dx[8] = {0, 1, 0, 1, 0, 1, 0, 1};
    const int corner_dy[8] = {0, 0, 1, 1, 0, 0, 1, 1};
    const int corner_dz[8] = {0, 0, 0, 0, 1, 1, 1, 1};

    for (int z = 0; z + 1 < grid.nz; ++z) {
        for (int y = 0; y + 1 < grid.ny; ++y) {
            for (int x = 0; x + 1 < grid.nx; ++x) {
                double v[8];
                int mask = 0;
                for (int c = 0; c < 8; ++c) {
                    v[c] = value(x + corner_dx[c], y + corner_dy[c], z + corner_dz[c]);
                    if (v[c] > iso) mask |= 1 << c;
                }
                const auto& tris = table[mask];
                if (tris.empty()) continue;

                std::uint32_t edge_out[12];
                std::uint32_t touched = 0;
                for (const auto& tri : tris)
                    for (int e : tri) touched |= 1u << e;
                for (int e = 0; e < 12; ++e) {
                    if (!(touched & (1u << e))) continue;
                    int c0 = kCubeEdgeCorners[e][0], c1 = kCubeEdgeCorners[e][1];
                    int axis = e < 4 ? 0 : (e < 8 ? 1 : 2);
                    int ex = x + corner_dx[c0], ey = y + corner_dy[c0], ez = z + corner_dz[c0];
                    std::uint64_t key = edge_key(axis, ex, ey, ez);
                    auto it = edge_vertex.find(key);
                    if (it != edge_vertex.end()) {
                        edge_out[e] = it->second;
                        continue;
                    }
                    // keep crossings off the corners so no emitted triangle
                    // degenerates to (numerically) zero area
                    double t = (iso - v[c0]) / (v[c1] - v[c0]);
                    t = std::clamp(t, 1e-3, 1.0 - 1e-3);
                    Vec3 p0 = grid.point(ex, ey, ez);
                    Vec3 p1 = grid.point(x + corner_dx[c1], y + corner_dy[c1], z + corner_dz[c1]);
                    Vec3 p = p0 + t * (p1 - p0);
                    std::uint32_t idx = static_cast<std::uint32_t>(mesh.vertices.size());
                    mesh.vertices.push_back(p);
                    edge_vertex.emplace(key, idx);
                    edge_out[e] = idx;
                }
                for (const auto& tri : tris)
                    mesh.faces.push_back({edge_out[tri[0]], edge_out[tri[1]], edge_out[tri[2]]});
            }
        }
    }
    mesh.compute_vertex_normals();
    return mesh;
}

}  // namespace hilo
