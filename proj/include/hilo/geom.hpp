// Small geometric primitives shared across the library: axis-aligned boxes,
// point/triangle queries and ray/triangle intersection.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace hilo {

using Vec3 = Eigen::Vector3d;

struct Aabb {
    Vec3 lo{std::numeric_limits<double>::max(), std::numeric_limits<double>::max(),
            std::numeric_limits<double>::max()};
    Vec3 hi{std::numeric_limits<double>::lowest(), std::numeric_limits<double>::lowest(),
            std::numeric_limits<double>::lowest()};

    void expand(const Vec3& p) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    void expand(const Aabb& b) {
        lo = lo.cwiseMin(b.lo);
        hi = hi.cwiseMax(b.hi);
    }
    Vec3 center() const { return 0.5 * (lo + hi); }
    Vec3 extent() const { return hi - lo; }
    double diagonal() const { return (hi - lo).norm(); }
    bool contains(const Aabb& b) const {
        return (lo.array() <= b.lo.array()).all() && (hi.array() >= b.hi.array()).all();
    }

    // Squared distance from p to the box (0 when inside).
    double sq_dist(const Vec3& p) const {
        double d = 0.0;
        for (int a = 0; a < 3; ++a) {
            double v = p[a];
            if (v < lo[a]) d += (lo[a] - v) * (lo[a] - v);
            else if (v > hi[a]) d += (v - hi[a]) * (v - hi[a]);
        }
        return d;
    }

    // Slab test; returns entry/exit parameters if the ray touches the box.
    bool ray_intersects(const Vec3& o, const Vec3& inv_dir, double t_max) const {
        double t0 = 0.0, t1 = t_max;
        for (int a = 0; a < 3; ++a) {
            double ta = (lo[a] - o[a]) * inv_dir[a];
            double tb = (hi[a] - o[a]) * inv_dir[a];
            if (ta > tb) std::swap(ta, tb);
            t0 = std::max(t0, ta);
            t1 = std::min(t1, tb);
            if (t0 > t1) return false;
        }
        return true;
    }
};

// Closest point on triangle (a,b,c) to p. Ericson, Real-Time Collision Detection 5.1.5.
inline Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    Vec3 ab = b - a, ac = c - a, ap = p - a;
    double d1 = ab.dot(ap), d2 = ac.dot(ap);
    if (d1 <= 0.0 && d2 <= 0.0) return a;

    Vec3 bp = p - b;
    double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0.0 && d4 <= d3) return b;

    double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
        double v = d1 / (d1 - d3);
        return a + v * ab;
    }

    Vec3 cp = p - c;
    double d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0.0 && d5 <= d6) return c;

    double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
        double w = d2 / (d2 - d6);
        return a + w * ac;
    }

    double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
        double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + w * (c - b);
    }

    double denom = 1.0 / (va + vb + vc);
    double v = vb * denom, w = vc * denom;
    return a + v * ab + w * ac;
}

// Barycentric coordinates of p with respect to triangle (a,b,c); assumes p in the
// triangle's plane (or is the projection of interest).
inline Vec3 barycentric(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    Vec3 v0 = b - a, v1 = c - a, v2 = p - a;
    double d00 = v0.dot(v0), d01 = v0.dot(v1), d11 = v1.dot(v1);
    double d20 = v2.dot(v0), d21 = v2.dot(v1);
    double denom = d00 * d11 - d01 * d01;
    if (std::abs(denom) < 1e-300) return Vec3(1.0, 0.0, 0.0);
    double v = (d11 * d20 - d01 * d21) / denom;
    double w = (d00 * d21 - d01 * d20) / denom;
    return Vec3(1.0 - v - w, v, w);
}

// Moller-Trumbore ray/triangle test. Returns t (distance along unit-independent dir)
// or nothing when the ray misses. Hits with t <= t_min are ignored.
inline std::optional<double> ray_triangle(const Vec3& orig, const Vec3& dir, const Vec3& a,
                                          const Vec3& b, const Vec3& c, double t_min = 1e-9) {
    const double eps = 1e-14;
    Vec3 e1 = b - a, e2 = c - a;
    Vec3 pvec = dir.cross(e2);
    double det = e1.dot(pvec);
    if (std::abs(det) < eps) return std::nullopt;
    double inv_det = 1.0 / det;
    Vec3 tvec = orig - a;
    double u = tvec.dot(pvec) * inv_det;
    if (u < -1e-12 || u > 1.0 + 1e-12) return std::nullopt;
    Vec3 qvec = tvec.cross(e1);
    double v = dir.dot(qvec) * inv_det;
    if (v < -1e-12 || u + v > 1.0 + 1e-12) return std::nullopt;
    double t = e2.dot(qvec) * inv_det;
    if (t <= t_min) return std::nullopt;
    return t;
}

// Signed solid angle of triangle (a,b,c) seen from p, via van Oosterom-Strackee.
inline double triangle_solid_angle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    Vec3 va = a - p, vb = b - p, vc = c - p;
    double la = va.norm(), lb = vb.norm(), lc = vc.norm();
    double num = va.dot(vb.cross(vc));
    double den = la * lb * lc + va.dot(vb) * lc + vb.dot(vc) * la + vc.dot(va) * lb;
    return 2.0 * std::atan2(num, den);
}

}  // namespace hilo
