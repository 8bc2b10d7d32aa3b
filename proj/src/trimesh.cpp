#include "hilo/trimesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <stdexcept>

#include "hilo/rng.hpp"

namespace hilo {

Vec3 TriMesh::face_normal(std::uint32_t f) const {
    const auto& t = faces[f];
    Vec3 n = (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]);
    double len = n.norm();
    if (len < 1e-300) return Vec3(0, 0, 1);
    return n / len;
}

double TriMesh::face_area(std::uint32_t f) const {
    const auto& t = faces[f];
    return 0.5 * (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]).norm();
}

double TriMesh::total_area() const {
    double a = 0.0;
    for (std::uint32_t f = 0; f < faces.size(); ++f) a += face_area(f);
    return a;
}

Aabb TriMesh::bounds() const {
    Aabb b;
    for (const auto& v : vertices) b.expand(v);
    return b;
}

void TriMesh::compute_vertex_normals() {
    vertex_normals.assign(vertices.size(), Vec3::Zero());
    for (const auto& t : faces) {
        Vec3 n = (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]);
        // n has twice the face area as magnitude, giving the area weighting.
        vertex_normals[t[0]] += n;
        vertex_normals[t[1]] += n;
        vertex_normals[t[2]] += n;
    }
    for (auto& n : vertex_normals) {
        double len = n.norm();
        n = (len > 1e-300) ? Vec3(n / len) : Vec3(0, 0, 1);
    }
}

void TriMesh::validate() const {
    for (size_t f = 0; f < faces.size(); ++f) {
        for (int k = 0; k < 3; ++k) {
            if (faces[f][k] >= vertices.size())
                throw std::runtime_error("face " + std::to_string(f) +
                                         " references vertex " + std::to_string(faces[f][k]) +
                                         " beyond vertex count " + std::to_string(vertices.size()));
        }
        if (face_area(static_cast<std::uint32_t>(f)) <= 1e-12)
            throw std::runtime_error("degenerate face " + std::to_string(f) +
                                     " (area <= 1e-12)");
    }
}

bool TriMesh::is_watertight() const {
    if (faces.empty()) return false;
    // directed edge -> count; every edge must appear exactly once in each direction
    std::map<std::pair<std::uint32_t, std::uint32_t>, int> directed;
    for (const auto& t : faces) {
        for (int k = 0; k < 3; ++k) {
            std::uint32_t a = t[k], b = t[(k + 1) % 3];
            if (a == b) return false;
            if (++directed[{a, b}] > 1) return false;
        }
    }
    for (const auto& [e, c] : directed) {
        auto rev = directed.find({e.second, e.first});
        if (rev == directed.end() || rev->second != 1) return false;
    }
    return true;
}

int TriMesh::euler_characteristic() const {
    std::map<std::pair<std::uint32_t, std::uint32_t>, int> edges;
    for (const auto& t : faces)
        for (int k = 0; k < 3; ++k) {
            std::uint32_t a = t[k], b = t[(k + 1) % 3];
            edges[{std::min(a, b), std::max(a, b)}] = 1;
        }
    return static_cast<int>(vertices.size()) - static_cast<int>(edges.size()) +
           static_cast<int>(faces.size());
}

double TriMesh::signed_volume() const {
    double v = 0.0;
    for (const auto& t : faces)
        v += vertices[t[0]].dot(vertices[t[1]].cross(vertices[t[2]])) / 6.0;
    return v;
}

SurfaceSampler::SurfaceSampler(const TriMesh& mesh) : mesh_(&mesh) {
    if (mesh.faces.empty()) throw std::runtime_error("surface sampler: empty geometry");
    cumulative_.resize(mesh.faces.size());
    double acc = 0.0;
    for (std::uint32_t f = 0; f < mesh.faces.size(); ++f) {
        acc += mesh.face_area(f);
        cumulative_[f] = acc;
    }
}

SurfaceSampler::Sample SurfaceSampler::sample(Rng& rng) const {
    double u = rng.uniform() * cumulative_.back();
    auto it = std::lower_bound(cumulative_.begin(), cumulative_.end(), u);
    std::uint32_t f = static_cast<std::uint32_t>(it - cumulative_.begin());
    if (f >= mesh_->faces.size()) f = static_cast<std::uint32_t>(mesh_->faces.size() - 1);

    double r1 = std::sqrt(rng.uniform());
    double r2 = rng.uniform();
    double wa = 1.0 - r1, wb = r1 * (1.0 - r2), wc = r1 * r2;
    const auto& t = mesh_->faces[f];
    Sample s;
    s.face = f;
    s.point = wa * mesh_->vertices[t[0]] + wb * mesh_->vertices[t[1]] + wc * mesh_->vertices[t[2]];
    Vec3 n = wa * mesh_->vertex_normals[t[0]] + wb * mesh_->vertex_normals[t[1]] +
             wc * mesh_->vertex_normals[t[2]];
    double len = n.norm();
    s.normal = len > 1e-300 ? Vec3(n / len) : mesh_->face_normal(f);
    return s;
}

TriMesh make_single_triangle() {
    TriMesh m;
    m.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
    m.faces = {{0, 1, 2}};
    m.compute_vertex_normals();
    return m;
}

TriMesh make_box(const Vec3& lo, const Vec3& hi) {
    TriMesh m;
    m.vertices = {
        {lo.x(), lo.y(), lo.z()}, {hi.x(), lo.y(), lo.z()}, {hi.x(), hi.y(), lo.z()},
        {lo.x(), hi.y(), lo.z()}, {lo.x(), lo.y(), hi.z()}, {hi.x(), lo.y(), hi.z()},
        {hi.x(), hi.y(), hi.z()}, {lo.x(), hi.y(), hi.z()},
    };
    // outward winding
    m.faces = {{0, 2, 1}, {0, 3, 2},   // z = lo
               {4, 5, 6}, {4, 6, 7},   // z = hi
               {0, 1, 5}, {0, 5, 4},   // y = lo
               {3, 6, 2}, {3, 7, 6},   // y = hi
               {0, 7, 3}, {0, 4, 7},   // x = lo
               {1, 2, 6}, {1, 6, 5}};  // x = hi
    m.compute_vertex_normals();
    return m;
}

TriMesh make_icosphere(double radius, int subdivisions, const Vec3& center) {
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> verts = {
        {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t},  {0, 1, t},
        {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
    for (auto& v : verts) v.normalize();
    std::vector<std::array<std::uint32_t, 3>> tris = {
        {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9},
        {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},   {3, 4, 2},
        {3, 2, 6},  {3, 6, 8},  {3, 8, 9},   {4, 9, 5},  {2, 4, 11},  {6, 2, 10},
        {8, 6, 7},  {9, 8, 1}};

    for (int s = 0; s < subdivisions; ++s) {
        std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> midpoint;
        auto mid = [&](std::uint32_t a, std::uint32_t b) -> std::uint32_t {
            auto key = std::make_pair(std::min(a, b), std::max(a, b));
            auto it = midpoint.find(key);
            if (it != midpoint.end()) return it->second;
            Vec3 m = (verts[a] + verts[b]).normalized();
            verts.push_back(m);
            std::uint32_t idx = static_cast<std::uint32_t>(verts.size() - 1);
            midpoint[key] = idx;
            return idx;
        };
        std::vector<std::array<std::uint32_t, 3>> next;
        next.reserve(tris.size() * 4);
        for (const auto& tr : tris) {
            std::uint32_t a = mid(tr[0], tr[1]);
            std::uint32_t b = mid(tr[1], tr[2]);
            std::uint32_t c = mid(tr[2], tr[0]);
            next.push_back({tr[0], a, c});
            next.push_back({tr[1], b, a});
            next.push_back({tr[2], c, b});
            next.push_back({a, b, c});
        }
        tris = std::move(next);
    }

    TriMesh m;
    m.vertices.reserve(verts.size());
    for (const auto& v : verts) m.vertices.push_back(center + radius * v);
    m.faces = std::move(tris);
    m.compute_vertex_normals();
    return m;
}

}  // namespace hilo
