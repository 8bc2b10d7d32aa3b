#include "hilo/metrics.hpp"

#include <cmath>
#include <limits>

#include "hilo/rng.hpp"

namespace hilo {

std::vector<Vec3> metric_surface_samples(const TriMesh& mesh, int n_samples, std::uint64_t seed) {
    SurfaceSampler sampler(mesh);
    Rng rng(derive_seed(seed, "metric-samples"));
    std::vector<Vec3> points;
    points.reserve(n_samples);
    for (int i = 0; i < n_samples; ++i) points.push_back(sampler.sample(rng).point);
    return points;
}

double mean_distance_to_surface(const std::vector<Vec3>& points, const BvhTree& tree) {
    double acc = 0.0;
    for (const auto& p : points) acc += tree.closest_point(p).signed_distance;
    return acc / static_cast<double>(points.size());
}

double p2s(const TriMesh& gt, const TriMesh& recon, int n_samples, std::uint64_t seed) {
    if (gt.empty()) throw std::runtime_error("p2s: empty ground-truth mesh");
    if (recon.empty()) return std::numeric_limits<double>::infinity();
    BvhTree tree = BvhTree::build(recon);
    std::vector<Vec3> points = metric_surface_samples(gt, n_samples, seed);
    return 100.0 * mean_distance_to_surface(points, tree);
}

double chamfer(const TriMesh& gt, const TriMesh& recon, int n_samples, std::uint64_t seed) {
    double forward = p2s(gt, recon, n_samples, seed);
    double backward = p2s(recon, gt, n_samples, seed);
    return 0.5 * (forward + backward);
}

namespace {

struct NormalImage {
    int res;
    std::vector<Vec3> rgb;       // mapped normals, (0,0,0) background
    std::vector<bool> covered;
};

NormalImage render_normals(const TriMesh& mesh, const BvhTree& tree, const Aabb& frame,
                           double yaw, int res) {
    NormalImage img;
    img.res = res;
    img.rgb.assign(static_cast<size_t>(res) * res, Vec3::Zero());
    img.covered.assign(static_cast<size_t>(res) * res, false);

    const double c = std::cos(yaw), s = std::sin(yaw);
    const Vec3 forward(-s, 0, -c);  // camera looks at the scene center
    const Vec3 right(c, 0, -s);
    const Vec3 up(0, 1, 0);
    const Vec3 center = frame.center();
    const double side = 1.05 * frame.diagonal();
    const double start_offset = frame.diagonal();  // origin plane outside the frame
    (void)mesh;

    for (int j = 0; j < res; ++j) {
        for (int i = 0; i < res; ++i) {
            double u = ((i + 0.5) / res - 0.5) * side;
            double v = ((j + 0.5) / res - 0.5) * side;
            Vec3 origin = center + u * right + v * up - start_offset * forward;
            auto hit = tree.raycast(origin, forward);
            if (!hit) continue;
            size_t idx = static_cast<size_t>(j) * res + i;
            img.covered[idx] = true;
            img.rgb[idx] = 0.5 * (hit->normal + Vec3::Ones());
        }
    }
    return img;
}

}  // namespace

double normals_error(const TriMesh& gt, const TriMesh& recon, const NormalRenderConfig& cfg) {
    if (gt.empty() || recon.empty()) return std::numeric_limits<double>::infinity();
    BvhTree gt_tree = BvhTree::build(gt);
    BvhTree recon_tree = BvhTree::build(recon);
    Aabb frame = gt.bounds();
    frame.expand(recon.bounds());

    double err_sum = 0.0;
    std::int64_t covered = 0;
    for (int view = 0; view < cfg.viewpoints; ++view) {
        double yaw = 2.0 * M_PI * view / cfg.viewpoints;
        NormalImage a = render_normals(gt, gt_tree, frame, yaw, cfg.resolution);
        NormalImage b = render_normals(recon, recon_tree, frame, yaw, cfg.resolution);
        for (size_t k = 0; k < a.rgb.size(); ++k) {
            if (!a.covered[k] && !b.covered[k]) continue;
            ++covered;
            err_sum += (a.rgb[k] - b.rgb[k]).norm();
        }
    }
    if (covered == 0) return std::numeric_limits<double>::infinity();
    return err_sum / static_cast<double>(covered);
}

MetricsReport evaluate_pair(const TriMesh& gt, const TriMesh& recon, int n_samples,
                            std::uint64_t seed, const NormalRenderConfig& render_cfg) {
    MetricsReport r;
    r.chamfer_cm = chamfer(gt, recon, n_samples, seed);
    r.p2s_cm = p2s(gt, recon, n_samples, seed);
    r.normals = normals_error(gt, recon, render_cfg);
    r.sample_count = n_samples;
    r.viewpoints = render_cfg.viewpoints;
    return r;
}

}  // namespace hilo
