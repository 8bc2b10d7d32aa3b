#include "hilo/bvh.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace hilo {

namespace {

constexpr int kLeafSize = 4;
// Far-field criterion: a cluster is approximated when the query is further
// than kBeta times its bounding radius from its area centroid.
constexpr double kBeta = 2.0;

}  // namespace

BvhTree BvhTree::build(const TriMesh& mesh) {
    if (mesh.faces.empty()) throw std::runtime_error("empty geometry");
    BvhTree tree;
    tree.mesh_ = &mesh;
    const size_t n = mesh.faces.size();
    tree.tri_index_.resize(n);
    std::iota(tree.tri_index_.begin(), tree.tri_index_.end(), 0u);

    std::vector<Vec3> centroids(n);
    for (size_t f = 0; f < n; ++f) {
        const auto& t = mesh.faces[f];
        centroids[f] = (mesh.vertices[t[0]] + mesh.vertices[t[1]] + mesh.vertices[t[2]]) / 3.0;
    }

    struct Range {
        std::uint32_t start, count;
        std::int32_t parent;
        bool right_child;
    };
    std::vector<Range> stack{{0, static_cast<std::uint32_t>(n), -1, false}};
    tree.nodes_.reserve(2 * n / kLeafSize + 4);

    while (!stack.empty()) {
        Range r = stack.back();
        stack.pop_back();
        std::int32_t node_id = static_cast<std::int32_t>(tree.nodes_.size());
        tree.nodes_.emplace_back();
        if (r.parent >= 0) {
            if (r.right_child) tree.nodes_[r.parent].right = node_id;
            else tree.nodes_[r.parent].left = node_id;
        }

        Node& node = tree.nodes_.back();
        node.start = r.start;
        Aabb box;
        for (std::uint32_t i = r.start; i < r.start + r.count; ++i) {
            const auto& t = mesh.faces[tree.tri_index_[i]];
            box.expand(mesh.vertices[t[0]]);
            box.expand(mesh.vertices[t[1]]);
            box.expand(mesh.vertices[t[2]]);
        }
        node.box = box;

        if (r.count <= kLeafSize) {
            node.count = r.count;
            continue;
        }
        node.count = 0;

        Vec3 ext = box.extent();
        int axis = 0;
        if (ext.y() > ext.x()) axis = 1;
        if (ext.z() > ext[axis]) axis = 2;
        auto begin = tree.tri_index_.begin() + r.start;
        auto mid = begin + r.count / 2;
        auto end = begin + r.count;
        std::nth_element(begin, mid, end, [&](std::uint32_t a, std::uint32_t b) {
            return centroids[a][axis] < centroids[b][axis];
        });
        std::uint32_t left_count = r.count / 2;
        // push right first so the left child is visited (and numbered) first
        stack.push_back({r.start + left_count, r.count - left_count, node_id, true});
        stack.push_back({r.start, left_count, node_id, false});
    }

    tree.tri_a_.resize(n);
    tree.tri_b_.resize(n);
    tree.tri_c_.resize(n);
    for (size_t i = 0; i < n; ++i) {
        const auto& t = mesh.faces[tree.tri_index_[i]];
        tree.tri_a_[i] = mesh.vertices[t[0]];
        tree.tri_b_[i] = mesh.vertices[t[1]];
        tree.tri_c_[i] = mesh.vertices[t[2]];
    }

    // Cluster summaries for the winding far field, leaves first.
    for (auto it = tree.nodes_.rbegin(); it != tree.nodes_.rend(); ++it) {
        Node& node = *it;
        if (node.count > 0) {
            double total_area = 0.0;
            Vec3 centroid_sum = Vec3::Zero();
            for (std::uint32_t i = node.start; i < node.start + node.count; ++i) {
                Vec3 cross = (tree.tri_b_[i] - tree.tri_a_[i]).cross(tree.tri_c_[i] - tree.tri_a_[i]);
                node.weighted_normal += 0.5 * cross;
                double area = 0.5 * cross.norm();
                total_area += area;
                centroid_sum += area * (tree.tri_a_[i] + tree.tri_b_[i] + tree.tri_c_[i]) / 3.0;
            }
            node.area_centroid = total_area > 0 ? Vec3(centroid_sum / total_area) : node.box.center();
        } else {
            const Node& l = tree.nodes_[node.left];
            const Node& rn = tree.nodes_[node.right];
            node.weighted_normal = l.weighted_normal + rn.weighted_normal;
            double la = l.weighted_normal.norm(), ra = rn.weighted_normal.norm();
            // area-weighted centroid of the two children; plain average if degenerate
            double wl = la + ra > 0 ? la / (la + ra) : 0.5;
            node.area_centroid = wl * l.area_centroid + (1.0 - wl) * rn.area_centroid;
        }
        // conservative radius: farthest box corner from the centroid
        double r2 = 0.0;
        for (int cx = 0; cx < 2; ++cx)
            for (int cy = 0; cy < 2; ++cy)
                for (int cz = 0; cz < 2; ++cz) {
                    Vec3 corner(cx ? node.box.hi.x() : node.box.lo.x(),
                                cy ? node.box.hi.y() : node.box.lo.y(),
                                cz ? node.box.hi.z() : node.box.lo.z());
                    r2 = std::max(r2, (corner - node.area_centroid).squaredNorm());
                }
        node.radius = std::sqrt(r2);
    }
    return tree;
}

SurfaceSample BvhTree::closest_point(const Vec3& p) const {
    double best_d2 = std::numeric_limits<double>::max();
    Vec3 best_point = Vec3::Zero();
    std::uint32_t best_slot = 0;

    // explicit stack, nearer child first
    std::int32_t stack[64];
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
        std::int32_t id = stack[--top];
        const Node& node = nodes_[id];
        if (node.box.sq_dist(p) >= best_d2) continue;
        if (node.count > 0) {
            for (std::uint32_t i = node.start; i < node.start + node.count; ++i) {
                Vec3 q = closest_point_on_triangle(p, tri_a_[i], tri_b_[i], tri_c_[i]);
                double d2 = (p - q).squaredNorm();
                if (d2 < best_d2) {
                    best_d2 = d2;
                    best_point = q;
                    best_slot = i;
                }
            }
        } else {
            double dl = nodes_[node.left].box.sq_dist(p);
            double dr = nodes_[node.right].box.sq_dist(p);
            if (dl < dr) {
                stack[top++] = node.right;
                stack[top++] = node.left;
            } else {
                stack[top++] = node.left;
                stack[top++] = node.right;
            }
        }
    }

    SurfaceSample s;
    s.query_point = p;
    s.closest_point = best_point;
    s.signed_distance = std::sqrt(best_d2);
    s.face = tri_index_[best_slot];
    const auto& t = mesh_->faces[s.face];
    Vec3 bc = barycentric(best_point, tri_a_[best_slot], tri_b_[best_slot], tri_c_[best_slot]);
    Vec3 n = bc.x() * mesh_->vertex_normals[t[0]] + bc.y() * mesh_->vertex_normals[t[1]] +
             bc.z() * mesh_->vertex_normals[t[2]];
    double len = n.norm();
    s.body_normal = len > 1e-300 ? Vec3(n / len) : mesh_->face_normal(s.face);
    return s;
}

std::optional<RayHit> BvhTree::raycast(const Vec3& origin, const Vec3& direction) const {
    if (direction.squaredNorm() <= 0.0) throw std::runtime_error("raycast: zero direction");
    Vec3 inv_dir(1.0 / direction.x(), 1.0 / direction.y(), 1.0 / direction.z());
    double best_t = std::numeric_limits<double>::max();
    std::int64_t best_slot = -1;

    std::int32_t stack[64];
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
        std::int32_t id = stack[--top];
        const Node& node = nodes_[id];
        if (!node.box.ray_intersects(origin, inv_dir, best_t)) continue;
        if (node.count > 0) {
            for (std::uint32_t i = node.start; i < node.start + node.count; ++i) {
                auto t = ray_triangle(origin, direction, tri_a_[i], tri_b_[i], tri_c_[i]);
                if (t && *t < best_t) {
                    best_t = *t;
                    best_slot = i;
                }
            }
        } else {
            stack[top++] = node.right;
            stack[top++] = node.left;
        }
    }
    if (best_slot < 0) return std::nullopt;

    RayHit hit;
    hit.t = best_t;
    hit.point = origin + best_t * direction;
    hit.face = tri_index_[best_slot];
    const auto& t = mesh_->faces[hit.face];
    Vec3 bc = barycentric(hit.point, tri_a_[best_slot], tri_b_[best_slot], tri_c_[best_slot]);
    Vec3 n = bc.x() * mesh_->vertex_normals[t[0]] + bc.y() * mesh_->vertex_normals[t[1]] +
             bc.z() * mesh_->vertex_normals[t[2]];
    double len = n.norm();
    hit.normal = len > 1e-300 ? Vec3(n / len) : mesh_->face_normal(hit.face);
    return hit;
}

double BvhTree::winding_recursive(const Vec3& p, std::int32_t id, bool exact) const {
    const Node& node = nodes_[id];
    if (!exact) {
        double d2 = (p - node.area_centroid).squaredNorm();
        if (d2 > kBeta * kBeta * node.radius * node.radius && node.radius > 0.0) {
            // far field: dipole of the cluster's area-weighted normal
            Vec3 r = node.area_centroid - p;
            double d = std::sqrt(d2);
            return node.weighted_normal.dot(r) / (4.0 * M_PI * d * d2);
        }
    }
    if (node.count > 0) {
        double w = 0.0;
        for (std::uint32_t i = node.start; i < node.start + node.count; ++i)
            w += triangle_solid_angle(p, tri_a_[i], tri_b_[i], tri_c_[i]);
        return w / (4.0 * M_PI);
    }
    return winding_recursive(p, node.left, exact) + winding_recursive(p, node.right, exact);
}

double BvhTree::winding_number(const Vec3& p, bool exact) const {
    return winding_recursive(p, 0, exact);
}

SurfaceSample signed_distance(const BvhTree& tree, const TriMesh& mesh, const Vec3& p,
                              bool watertight) {
    SurfaceSample s = tree.closest_point(p);
    (void)mesh;
    if (!watertight) {
        s.sign_valid = false;
        return s;
    }
    if (inside_test(tree, p)) s.signed_distance = -s.signed_distance;
    return s;
}

bool inside_test(const BvhTree& tree, const Vec3& p) {
    // deterministic tie-breaks: points on (or numerically at) the surface are outside
    SurfaceSample nearest = tree.closest_point(p);
    if (nearest.signed_distance < 1e-9) return false;
    double w = tree.winding_number(p);
    if (std::abs(w - 0.5) < 1e-6) return false;
    return w > 0.5;
}

}  // namespace hilo
