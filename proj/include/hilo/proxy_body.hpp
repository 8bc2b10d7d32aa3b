// Synthetic articulated body: a fixed capsule-graph skeleton posed by joint
// angles, its surface extracted by marching cubes over the analytic
// capsule-union distance field. Shape parameters are log-scales on the base
// dimensions, so every real-valued parameter vector is a valid body. The
// "clothed" target displaces the body surface outward with an optional
// sinusoidal wrinkle along the height coordinate.
#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "hilo/bvh.hpp"
#include "hilo/rng.hpp"
#include "hilo/trimesh.hpp"

namespace hilo {

constexpr int kShapeParams = 8;  // torso, head, arm radius, leg radius, 4 limb lengths
constexpr int kPoseParams = 10;  // 2 per shoulder, elbows, hips, knees

struct ProxyBody {
    Eigen::VectorXd theta_s = Eigen::VectorXd::Zero(kShapeParams);
    Eigen::VectorXd theta_p = Eigen::VectorXd::Zero(kPoseParams);
};

// Base dimensions of the unscaled skeleton (scene units, ~1.7 unit figure).
struct BodyDims {
    double torso_len = 0.50;
    double torso_radius = 0.15;
    double head_len = 0.08;
    double head_radius = 0.09;
    double arm_radius = 0.045;
    double leg_radius = 0.06;
    double upper_arm_len = 0.26;
    double forearm_len = 0.24;
    double thigh_len = 0.38;
    double shin_len = 0.36;

    void validate() const;  // all dimensions must be positive
};

struct Capsule {
    Vec3 a, b;
    double radius;
};

// Signed distance to one capsule / the union (exact sign, min combination).
double capsule_sdf(const Capsule& c, const Vec3& p);
double capsule_union_sdf(const std::vector<Capsule>& capsules, const Vec3& p);

// Posed skeleton. theta_s entries are log-scales: effective = base * exp(theta).
// Index map: 0 torso (length and radius), 1 head, 2 arm radius, 3 leg radius,
// 4 upper-arm length, 5 forearm length, 6 thigh length, 7 shin length.
// theta_p: 0/1 left shoulder (about z, about y), 2 left elbow, 3/4 right
// shoulder, 5 right elbow, 6 left hip (about x), 7 left knee, 8 right hip,
// 9 right knee. T-pose at zero: torso up +y, arms along +/-x, legs down -y.
std::vector<Capsule> body_capsules(const ProxyBody& body, const BodyDims& dims);

// Surface of the capsule union via marching cubes at the given lattice
// resolution. Deterministic; watertight by construction.
TriMesh generate_body(const ProxyBody& body, const BodyDims& dims, int mc_resolution = 96);

struct ClothingSpec {
    double lf_offset = 0.05;  // uniform outward displacement ("puffiness")
    double hf_amp = 0.0;      // wrinkle amplitude
    double hf_freq = 20.0;    // wrinkle frequency along the height coordinate
};

// Vertices displaced by (lf + hf_amp * sin(freq * y)) along the vertex normal;
// y is the undisplaced vertex height. Sets *warning when the displacement
// flips or collapses triangles (reported, not fatal).
TriMesh generate_target(const TriMesh& body_mesh, const ClothingSpec& spec,
                        bool* warning = nullptr);

// One scalar draw perturbs every component: theta_s += s1*mu, theta_p += s2*mu.
// per_component draws an independent scalar per entry instead.
void perturb_params(ProxyBody& body, double s1, double s2, Rng& rng,
                    bool per_component = false);

struct NormalFeature {
    Vec3 body_normal;   // barycentric normal at the closest body point
    Vec3 cloth_normal;  // barycentric normal at the closest target point
};

// The target normal stands in for a predicted clothed-surface normal: it is
// an oracle read straight off the ground-truth target mesh.
NormalFeature normal_features(const SurfaceSample& body_sample, const BvhTree& target_tree);

}  // namespace hilo
