#include "hilo/proxy_body.hpp"

#include <cmath>
#include <stdexcept>

#include "hilo/marching_cubes.hpp"

namespace hilo {

void BodyDims::validate() const {
    const double dims[] = {torso_len, torso_radius, head_len,    head_radius, arm_radius,
                           leg_radius, upper_arm_len, forearm_len, thigh_len,  shin_len};
    for (double d : dims)
        if (!(d > 0.0)) throw std::runtime_error("body dimensions must be positive");
}

double capsule_sdf(const Capsule& c, const Vec3& p) {
    Vec3 ab = c.b - c.a;
    double len2 = ab.squaredNorm();
    double t = len2 > 0.0 ? std::clamp((p - c.a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    return (p - (c.a + t * ab)).norm() - c.radius;
}

double capsule_union_sdf(const std::vector<Capsule>& capsules, const Vec3& p) {
    double d = std::numeric_limits<double>::max();
    for (const auto& c : capsules) d = std::min(d, capsule_sdf(c, p));
    return d;
}

namespace {

Eigen::Matrix3d rot_x(double a) {
    Eigen::Matrix3d m;
    m << 1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a);
    return m;
}
Eigen::Matrix3d rot_y(double a) {
    Eigen::Matrix3d m;
    m << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
    return m;
}
Eigen::Matrix3d rot_z(double a) {
    Eigen::Matrix3d m;
    m << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
    return m;
}

}  // namespace

std::vector<Capsule> body_capsules(const ProxyBody& body, const BodyDims& dims) {
    dims.validate();
    if (body.theta_s.size() != kShapeParams || body.theta_p.size() != kPoseParams)
        throw std::runtime_error("proxy body parameter dimensions do not match the skeleton");
    const auto& s = body.theta_s;
    const auto& q = body.theta_p;

    const double torso_len = dims.torso_len * std::exp(s[0]);
    const double torso_r = dims.torso_radius * std::exp(s[0]);
    const double head_len = dims.head_len * std::exp(s[1]);
    const double head_r = dims.head_radius * std::exp(s[1]);
    const double arm_r = dims.arm_radius * std::exp(s[2]);
    const double leg_r = dims.leg_radius * std::exp(s[3]);
    const double ua_len = dims.upper_arm_len * std::exp(s[4]);
    const double fa_len = dims.forearm_len * std::exp(s[5]);
    const double thigh_len = dims.thigh_len * std::exp(s[6]);
    const double shin_len = dims.shin_len * std::exp(s[7]);

    std::vector<Capsule> out;
    out.reserve(10);
    const Vec3 neck(0, torso_len, 0);
    out.push_back({Vec3(0, 0, 0), neck, torso_r});                       // torso
    out.push_back({neck, neck + Vec3(0, head_len + head_r, 0), head_r}); // head

    // arms: shoulder joints just inside the torso below the neck; T-pose
    // along +/-x; shoulder = Rz then Ry about the joint, elbow bends about z
    const double shoulder_y = torso_len - 0.35 * torso_r;
    for (int side = 0; side < 2; ++side) {
        const double sgn = side == 0 ? 1.0 : -1.0;  // left = +x
        const Vec3 joint(sgn * 0.5 * torso_r, shoulder_y, 0);
        const double a_z = q[side == 0 ? 0 : 3];
        const double a_y = q[side == 0 ? 1 : 4];
        const double a_el = q[side == 0 ? 2 : 5];
        Eigen::Matrix3d shoulder = rot_z(sgn * a_z) * rot_y(sgn * a_y);
        Vec3 dir_ua = shoulder * Vec3(sgn, 0, 0);
        Vec3 elbow = joint + ua_len * dir_ua;
        Vec3 dir_fa = shoulder * rot_z(sgn * a_el) * Vec3(sgn, 0, 0);
        Vec3 wrist = elbow + fa_len * dir_fa;
        out.push_back({joint, elbow, arm_r});
        out.push_back({elbow, wrist, arm_r});
    }

    // legs: hip joints inside the torso base; straight down; hip and knee
    // both rotate about x (sagittal swing)
    for (int side = 0; side < 2; ++side) {
        const double sgn = side == 0 ? 1.0 : -1.0;
        const Vec3 joint(sgn * 0.55 * torso_r, 0.02, 0);
        const double a_hip = q[side == 0 ? 6 : 8];
        const double a_knee = q[side == 0 ? 7 : 9];
        Vec3 dir_thigh = rot_x(a_hip) * Vec3(0, -1, 0);
        Vec3 knee = joint + thigh_len * dir_thigh;
        Vec3 dir_shin = rot_x(a_hip + a_knee) * Vec3(0, -1, 0);
        Vec3 ankle = knee + shin_len * dir_shin;
        out.push_back({joint, knee, leg_r});
        out.push_back({knee, ankle, leg_r});
    }
    return out;
}

TriMesh generate_body(const ProxyBody& body, const BodyDims& dims, int mc_resolution) {
    if (mc_resolution < 8) throw std::runtime_error("generate_body: resolution too small");
    std::vector<Capsule> capsules = body_capsules(body, dims);

    Aabb box;
    for (const auto& c : capsules) {
        box.expand(c.a + Vec3::Constant(c.radius));
        box.expand(c.a - Vec3::Constant(c.radius));
        box.expand(c.b + Vec3::Constant(c.radius));
        box.expand(c.b - Vec3::Constant(c.radius));
    }
    Vec3 ext = box.extent();
    double spacing = ext.maxCoeff() / (mc_resolution - 5);  // two-cell margin per side
    Vec3 center = box.center();
    Vec3 origin = center - 0.5 * spacing * Vec3::Constant(mc_resolution - 1);

    ScalarGrid grid;
    grid.nx = grid.ny = grid.nz = mc_resolution;
    grid.origin = origin;
    grid.spacing = spacing;
    grid.values.resize(static_cast<size_t>(mc_resolution) * mc_resolution * mc_resolution);
    size_t idx = 0;
    for (int z = 0; z < mc_resolution; ++z)
        for (int y = 0; y < mc_resolution; ++y)
            for (int x = 0; x < mc_resolution; ++x, ++idx)
                grid.values[idx] = -capsule_union_sdf(capsules, grid.point(x, y, z));

    TriMesh mesh = marching_cubes(grid, 0.0);
    mesh.validate();
    return mesh;
}

TriMesh generate_target(const TriMesh& body_mesh, const ClothingSpec& spec, bool* warning) {
    if (spec.lf_offset < 0) throw std::runtime_error("generate_target: lf_offset must be >= 0");
    TriMesh target = body_mesh;
    for (size_t i = 0; i < target.vertices.size(); ++i) {
        double u = body_mesh.vertices[i].y();
        double displacement = spec.lf_offset + spec.hf_amp * std::sin(spec.hf_freq * u);
        target.vertices[i] += displacement * body_mesh.vertex_normals[i];
    }
    target.compute_vertex_normals();

    if (warning) {
        *warning = false;
        for (std::uint32_t f = 0; f < target.faces.size(); ++f) {
            if (target.face_area(f) <= 1e-12 ||
                target.face_normal(f).dot(body_mesh.face_normal(f)) < 0.0) {
                *warning = true;  // collapsed or flipped by the displacement
                break;
            }
        }
    }
    return target;
}

void perturb_params(ProxyBody& body, double s1, double s2, Rng& rng, bool per_component) {
    if (s1 < 0 || s2 < 0) throw std::runtime_error("perturb_params: scales must be >= 0");
    if (!per_component) {
        double mu = rng.normal();
        body.theta_s.array() += s1 * mu;
        body.theta_p.array() += s2 * mu;
        return;
    }
    for (int i = 0; i < body.theta_s.size(); ++i) body.theta_s[i] += s1 * rng.normal();
    for (int i = 0; i < body.theta_p.size(); ++i) body.theta_p[i] += s2 * rng.normal();
}

NormalFeature normal_features(const SurfaceSample& body_sample, const BvhTree& target_tree) {
    NormalFeature f;
    f.body_normal = body_sample.body_normal;
    f.cloth_normal = target_tree.closest_point(body_sample.query_point).body_normal;
    return f;
}

}  // namespace hilo
