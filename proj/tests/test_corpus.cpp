#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "hilo/corpus.hpp"
#include "hilo/metrics.hpp"
#include "hilo/proxy_body.hpp"

using namespace hilo;

namespace {

std::string file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("capsule sdf: segment distance minus radius, union is the min") {
    Capsule c{Vec3(0, 0, 0), Vec3(0, 1, 0), 0.25};
    CHECK(capsule_sdf(c, Vec3(0, 0.5, 0)) == doctest::Approx(-0.25));
    CHECK(capsule_sdf(c, Vec3(1, 0.5, 0)) == doctest::Approx(0.75));
    CHECK(capsule_sdf(c, Vec3(0, 2, 0)) == doctest::Approx(0.75));
    // degenerate segment = sphere
    Capsule s{Vec3(1, 0, 0), Vec3(1, 0, 0), 0.5};
    CHECK(capsule_sdf(s, Vec3(3, 0, 0)) == doctest::Approx(1.5));

    std::vector<Capsule> both = {c, s};
    Vec3 p(0.9, 0.2, 0.1);
    CHECK(capsule_union_sdf(both, p) ==
          doctest::Approx(std::min(capsule_sdf(c, p), capsule_sdf(s, p))));
}

TEST_CASE("skeleton: ten capsules, hand-checked forward kinematics") {
    ProxyBody body;
    BodyDims dims;
    auto capsules = body_capsules(body, dims);
    CHECK(capsules.size() == 10);

    // T-pose: left wrist sits at shoulder + upper-arm + forearm along +x
    const Vec3 shoulder(0.5 * dims.torso_radius, dims.torso_len - 0.35 * dims.torso_radius, 0);
    CHECK((capsules[2].a - shoulder).norm() < 1e-12);
    Vec3 wrist_t = shoulder + Vec3(dims.upper_arm_len + dims.forearm_len, 0, 0);
    CHECK((capsules[3].b - wrist_t).norm() < 1e-12);

    // left elbow bent 90 degrees: forearm direction rotates about z
    body.theta_p[2] = M_PI / 2;
    capsules = body_capsules(body, dims);
    Vec3 elbow = shoulder + Vec3(dims.upper_arm_len, 0, 0);
    CHECK((capsules[2].b - elbow).norm() < 1e-9);
    Eigen::Matrix3d rz = Eigen::AngleAxisd(M_PI / 2, Vec3::UnitZ()).toRotationMatrix();
    Vec3 wrist_expected = elbow + dims.forearm_len * (rz * Vec3(1, 0, 0));
    CHECK((capsules[3].b - wrist_expected).norm() < 1e-9);

    // shoulder rotations compose Rz then Ry about the joint
    body = ProxyBody{};
    body.theta_p[0] = 0.4;
    body.theta_p[1] = -0.3;
    capsules = body_capsules(body, dims);
    Eigen::Matrix3d rot = (Eigen::AngleAxisd(0.4, Vec3::UnitZ()) *
                           Eigen::AngleAxisd(-0.3, Vec3::UnitY()))
                              .toRotationMatrix();
    Vec3 elbow_expected = shoulder + dims.upper_arm_len * (rot * Vec3(1, 0, 0));
    CHECK((capsules[2].b - elbow_expected).norm() < 1e-9);

    // right knee: hip and knee rotate about x, angles add
    body = ProxyBody{};
    body.theta_p[8] = 0.5;
    body.theta_p[9] = 0.7;
    capsules = body_capsules(body, dims);
    const Capsule& shin = capsules[9];
    Eigen::Matrix3d rx = Eigen::AngleAxisd(1.2, Vec3::UnitX()).toRotationMatrix();
    Vec3 ankle_dir = rx * Vec3(0, -1, 0);
    CHECK(((shin.b - shin.a).normalized() - ankle_dir).norm() < 1e-9);
}

TEST_CASE("generate_body: watertight genus-0 figure, deterministic") {
    ProxyBody body;
    TriMesh mesh = generate_body(body, BodyDims{}, 64);
    CHECK(mesh.is_watertight());
    CHECK(mesh.euler_characteristic() == 2);
    CHECK(mesh.signed_volume() > 0.0);

    TriMesh again = generate_body(body, BodyDims{}, 64);
    CHECK(mesh.vertices == again.vertices);
    CHECK(mesh.faces == again.faces);

    // doubling every limb radius strictly grows the volume
    ProxyBody fat = body;
    fat.theta_s[0] = std::log(2.0);  // torso
    fat.theta_s[2] = std::log(2.0);  // arm radius
    fat.theta_s[3] = std::log(2.0);  // leg radius
    TriMesh fat_mesh = generate_body(fat, BodyDims{}, 64);
    CHECK(fat_mesh.signed_volume() > mesh.signed_volume());

    BodyDims bad;
    bad.arm_radius = 0.0;
    CHECK_THROWS(generate_body(body, bad, 64));

    ProxyBody wrong;
    wrong.theta_p = Eigen::VectorXd::Zero(3);
    CHECK_THROWS(generate_body(wrong, BodyDims{}, 64));
}

TEST_CASE("generate_target: identity, offset distance, wrinkle monotonicity") {
    TriMesh sphere = make_icosphere(0.5, 3);

    ClothingSpec none{0.0, 0.0, 20.0};
    TriMesh same = generate_target(sphere, none);
    CHECK(same.vertices == sphere.vertices);

    ClothingSpec puffy{0.05, 0.0, 20.0};
    TriMesh offset = generate_target(sphere, puffy);
    CHECK(offset.is_watertight());
    BvhTree sphere_tree = BvhTree::build(sphere);
    for (size_t i = 0; i < offset.vertices.size(); i += 37) {
        SurfaceSample s = signed_distance(sphere_tree, sphere, offset.vertices[i], true);
        CHECK(s.signed_distance == doctest::Approx(0.05).epsilon(0.02));
    }

    // normal-image distance to the base grows with wrinkle amplitude
    double prev = normals_error(sphere, offset, {128, 4});
    for (double amp : {0.01, 0.02}) {
        ClothingSpec wrinkled{0.05, amp, 20.0};
        TriMesh target = generate_target(sphere, wrinkled);
        double err = normals_error(sphere, target, {128, 4});
        CHECK(err > prev);
        prev = err;
    }

    CHECK_THROWS(generate_target(sphere, ClothingSpec{-0.1, 0.0, 20.0}));
}

TEST_CASE("perturb_params: shared scalar, reproducible, correct spread") {
    ProxyBody body;
    Rng rng(derive_seed(99, "noise"));
    ProxyBody untouched = body;
    perturb_params(body, 0.0, 0.0, rng);
    CHECK(body.theta_s == untouched.theta_s);
    CHECK(body.theta_p == untouched.theta_p);

    // one scalar draw shifts every component by the same amount, scaled per group
    ProxyBody shifted;
    Rng rng2(derive_seed(7, "noise"));
    perturb_params(shifted, 0.1, 0.3, rng2);
    double shape_shift = shifted.theta_s[0];
    for (int i = 0; i < kShapeParams; ++i)
        CHECK(shifted.theta_s[i] == doctest::Approx(shape_shift).epsilon(1e-12));
    for (int i = 0; i < kPoseParams; ++i)
        CHECK(shifted.theta_p[i] == doctest::Approx(3.0 * shape_shift).epsilon(1e-12));

    // same seed, same perturbation
    ProxyBody replay;
    Rng rng3(derive_seed(7, "noise"));
    perturb_params(replay, 0.1, 0.3, rng3);
    CHECK(replay.theta_s == shifted.theta_s);

    // empirical std over many draws matches the scale within 3%
    Rng rng4(derive_seed(11, "noise"));
    double acc = 0.0, acc2 = 0.0;
    const int trials = 10000;
    for (int i = 0; i < trials; ++i) {
        ProxyBody b;
        perturb_params(b, 0.2, 0.2, rng4);
        acc += b.theta_s[3];
        acc2 += b.theta_s[3] * b.theta_s[3];
    }
    double std_dev = std::sqrt(acc2 / trials - (acc / trials) * (acc / trials));
    CHECK(std::abs(std_dev - 0.2) / 0.2 < 0.03);

    // per-component mode decorrelates the components
    ProxyBody per_comp;
    Rng rng5(derive_seed(13, "noise"));
    perturb_params(per_comp, 0.5, 0.5, rng5, true);
    CHECK(per_comp.theta_s[0] != per_comp.theta_s[1]);
}

TEST_CASE("normal features: symmetric cases and wrinkle slope") {
    TriMesh body = make_icosphere(0.5, 4);
    BvhTree body_tree = BvhTree::build(body);

    // sphere body, concentric sphere target: both normals radial
    TriMesh target = generate_target(body, ClothingSpec{0.05, 0.0, 20.0});
    BvhTree target_tree = BvhTree::build(target);
    for (const Vec3& p : {Vec3(0.7, 0, 0), Vec3(0, 0.6, 0.3), Vec3(-0.4, 0.4, 0.4)}) {
        SurfaceSample s = signed_distance(body_tree, body, p, true);
        NormalFeature nf = normal_features(s, target_tree);
        Vec3 radial = p.normalized();
        CHECK(nf.body_normal.dot(radial) > 0.995);
        CHECK(nf.cloth_normal.dot(radial) > 0.995);
        CHECK(std::abs(nf.body_normal.norm() - 1.0) < 1e-6);
        CHECK(std::abs(nf.cloth_normal.norm() - 1.0) < 1e-6);
    }

    // far above the head of a T-pose figure both normals point up
    TriMesh figure = generate_body(ProxyBody{}, BodyDims{}, 64);
    BvhTree figure_tree = BvhTree::build(figure);
    TriMesh figure_target = generate_target(figure, ClothingSpec{0.03, 0.0, 20.0});
    BvhTree figure_target_tree = BvhTree::build(figure_target);
    Vec3 above(0, 2.5, 0);
    SurfaceSample s = signed_distance(figure_tree, figure, above, true);
    NormalFeature nf = normal_features(s, figure_target_tree);
    CHECK(nf.body_normal.dot(Vec3(0, 1, 0)) > 0.95);
    CHECK(nf.cloth_normal.dot(Vec3(0, 1, 0)) > 0.95);

    // wrinkled target: cloth normal tilts by the analytic wrinkle slope
    const double R = 0.5, lf = 0.04, amp = 0.02, freq = 20.0;
    TriMesh wrinkled = generate_target(body, ClothingSpec{lf, amp, freq});
    BvhTree wrinkled_tree = BvhTree::build(wrinkled);
    int checked = 0;
    for (double ang = -0.6; ang <= 0.6; ang += 0.13) {
        Vec3 dir(std::cos(ang), std::sin(ang), 0);
        Vec3 p = (R + lf + 0.08) * dir;
        SurfaceSample bs = signed_distance(body_tree, body, p, true);
        NormalFeature f = normal_features(bs, wrinkled_tree);
        Vec3 cp = wrinkled_tree.closest_point(p).closest_point;
        Vec3 u = cp.normalized();
        double y = R * u.y();
        double cos_phi = std::sqrt(std::max(0.0, 1.0 - u.y() * u.y()));
        double delta = lf + amp * std::sin(freq * y);
        double slope = amp * freq * std::cos(freq * y) * R * cos_phi / (R + delta);
        double expected_tilt = std::atan(std::abs(slope));
        double measured = std::acos(std::clamp(f.cloth_normal.dot(u), -1.0, 1.0));
        CHECK(std::abs(measured - expected_tilt) < 5.0 * M_PI / 180.0);
        ++checked;
    }
    CHECK(checked >= 9);
}

TEST_CASE("corpus generation: files, manifest, determinism, noise variants") {
    namespace fs = std::filesystem;
    std::string dir = (fs::temp_directory_path() / "hilo_test_corpus").string();
    fs::remove_all(dir);

    CorpusConfig cfg;
    cfg.subjects = 2;
    cfg.body_kind = "sphere";
    cfg.sphere_subdiv = 2;
    cfg.clothing = {0.05, 0.01, 20.0};
    cfg.noise_levels = {0.1, 0.5};
    cfg.seed = 42;
    CorpusManifest manifest = generate_corpus(cfg, dir);

    CHECK(manifest.entries.size() == 2 * (1 + 2));
    CHECK(fs::exists(dir + "/sub000_body.ply"));
    CHECK(fs::exists(dir + "/sub000_target.ply"));
    CHECK(fs::exists(dir + "/sub001_noise2_body.ply"));

    CorpusManifest back = read_manifest(dir + "/manifest.txt");
    REQUIRE(back.entries.size() == manifest.entries.size());
    for (size_t i = 0; i < back.entries.size(); ++i) {
        CHECK(back.entries[i].subject_id == manifest.entries[i].subject_id);
        CHECK(back.entries[i].params.theta_s == manifest.entries[i].params.theta_s);
        CHECK(back.entries[i].body_file == manifest.entries[i].body_file);
    }
    // noise variants share the clean target
    const CorpusEntry& noisy = back.find("sub000/n1");
    CHECK(noisy.s1 == 0.1);
    CHECK(noisy.target_file == back.find("sub000").target_file);
    CHECK_THROWS_WITH_AS(back.find("nope"), doctest::Contains("available"), std::runtime_error);

    // regeneration with the same seed is byte-identical
    std::string dir2 = (fs::temp_directory_path() / "hilo_test_corpus2").string();
    fs::remove_all(dir2);
    generate_corpus(cfg, dir2);
    for (const auto& entry : fs::directory_iterator(dir)) {
        std::string name = entry.path().filename().string();
        CHECK(file_bytes(dir + "/" + name) == file_bytes(dir2 + "/" + name));
    }
    fs::remove_all(dir);
    fs::remove_all(dir2);
}
