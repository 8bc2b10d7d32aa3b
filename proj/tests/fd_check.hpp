// Central-difference oracle for the field network. Each probe re-evaluates
// the true forward objective with one parameter displaced; computations that
// provably cannot change (earlier layers, unaffected gate channels) are reused
// from the base pass, and the first affected linear layer is updated with an
// exact rank-one correction, so the sweep over every parameter of the default
// network stays cheap. Leaky-rectifier kinks are detected (a pre-activation
// changing sign between the two probes) and retried with a smaller step.
#pragma once

#include <atomic>
#include <cmath>
#include <string>
#include <thread>
#include <vector>

#include "hilo/field_net.hpp"

namespace hilo::fdtest {

struct FdReport {
    double max_rel_err = 0.0;
    std::string worst;
    size_t checked = 0;
    size_t kink_retries = 0;
    size_t failures = 0;  // entries above tolerance
};

inline double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

class FastFd {
  public:
    FastFd(const FieldNetwork& net, const Eigen::MatrixXd& features, const FeatureVolume& vol,
           const Eigen::VectorXd& coeffs)
        : net_(net), vol_(vol), coeffs_(coeffs) {
        out_ = phi_si_forward(net_, features, vol_, cache_);
        hidden_count_ = net_.spec.hidden_layers();
        if (net_.gate_cfg.enabled && net_.gate_cfg.mode == GateMode::Pointwise)
            throw std::runtime_error("FastFd covers the global gate mode only");
    }

    double objective() const { return coeffs_.dot(out_); }

    struct Probe {
        enum Kind { LinearW, LinearB, GateW, GateB, OutGateW, OutGateB } kind;
        int layer;  // linear layer or gate index
        int row;    // output unit / channel
        int col;    // input index; -1 for bias
    };

    std::vector<Probe> enumerate_probes() const {
        std::vector<Probe> probes;
        const int n_linear = static_cast<int>(net_.weights.size());
        for (int l = 0; l < n_linear; ++l) {
            for (int r = 0; r < net_.weights[l].rows(); ++r) {
                for (int c = 0; c < net_.weights[l].cols(); ++c)
                    probes.push_back({Probe::LinearW, l, r, c});
                probes.push_back({Probe::LinearB, l, r, -1});
            }
        }
        if (net_.gate_cfg.enabled) {
            for (int j = 0; j < hidden_count_; ++j) {
                const auto& conv = net_.gates[j].conv;
                int width = conv.in_channels * 27;
                for (int o = 0; o < conv.out_channels; ++o) {
                    for (int i = 0; i < width; ++i) probes.push_back({Probe::GateW, j, o, i});
                    probes.push_back({Probe::GateB, j, o, -1});
                }
            }
        }
        if (net_.gate_cfg.output_scalar) {
            int width = net_.output_gate.conv.in_channels * 27;
            for (int i = 0; i < width; ++i) probes.push_back({Probe::OutGateW, 0, 0, i});
            probes.push_back({Probe::OutGateB, 0, 0, -1});
        }
        return probes;
    }

    double analytic(const FieldGradients& g, const Probe& p) const {
        switch (p.kind) {
            case Probe::LinearW: return g.d_weights[p.layer](p.row, p.col);
            case Probe::LinearB: return g.d_biases[p.layer][p.row];
            case Probe::GateW:
                return g.d_gates[p.layer]
                    .weights[static_cast<size_t>(p.row) * net_.feature_channels * 27 + p.col];
            case Probe::GateB: return g.d_gates[p.layer].bias[p.row];
            case Probe::OutGateW: return g.d_output_gate.weights[p.col];
            case Probe::OutGateB: return g.d_output_gate.bias[0];
        }
        return 0.0;
    }

    // Exact objective under a displaced parameter; `kink` reports a hidden
    // pre-activation sign change relative to the base pass.
    double eval(const Probe& p, double delta, bool& kink) const {
        switch (p.kind) {
            case Probe::LinearW:
            case Probe::LinearB: {
                int l = p.layer;
                Eigen::VectorXd direction = p.col >= 0
                                                ? Eigen::VectorXd(layer_input(l).col(p.col))
                                                : Eigen::VectorXd(Eigen::VectorXd::Ones(n()));
                if (l == hidden_count_)  // output layer: only the final linear changes
                    return squash(cache_.out_pre + delta * direction);
                Eigen::VectorXd z_col = cache_.pre[l].col(p.row) + delta * direction;
                kink |= sign_changed(cache_.pre[l].col(p.row), z_col);
                Eigen::VectorXd h_col = act(z_col);
                if (net_.gate_cfg.enabled) h_col *= cache_.gate_value[l][p.row];
                return propagate_column(l, p.row, h_col, kink);
            }
            case Probe::GateW:
            case Probe::GateB: {
                int j = p.layer;
                double m_new = cache_.gate_pre[j][p.row] +
                               delta * (p.col >= 0 ? cache_.summary[p.col] : 1.0);
                double g_new = 1.0 / (1.0 + std::exp(-m_new));
                Eigen::VectorXd h_col = act(Eigen::VectorXd(cache_.pre[j].col(p.row))) * g_new;
                return propagate_column(j, p.row, h_col, kink);
            }
            case Probe::OutGateW:
            case Probe::OutGateB: {
                double m_new = cache_.out_gate_pre +
                               delta * (p.col >= 0 ? cache_.summary[p.col] : 1.0);
                double g_new = 1.0 / (1.0 + std::exp(-m_new));
                return coeffs_.dot(cache_.out_sigmoid) * g_new;
            }
        }
        return 0.0;
    }

    double central_difference(const Probe& p, double h0, size_t& retries) const {
        double h = h0;
        double fd = 0.0;
        for (int attempt = 0; attempt < 4; ++attempt) {
            bool kink = false;
            double up = eval(p, h, kink);
            double down = eval(p, -h, kink);
            fd = (up - down) / (2.0 * h);
            if (!kink) return fd;
            ++retries;
            h *= 0.1;
        }
        return fd;
    }

    // Central difference w.r.t. one input feature (row p, column c).
    double feature_fd(int point, int col, double h0, size_t& retries) const {
        double h = h0;
        double fd = 0.0;
        for (int attempt = 0; attempt < 4; ++attempt) {
            bool kink = false;
            double up = eval_feature(point, col, h, kink);
            double down = eval_feature(point, col, -h, kink);
            fd = (up - down) / (2.0 * h);
            if (!kink) return fd;
            ++retries;
            h *= 0.1;
        }
        return fd;
    }

    // Central difference w.r.t. one voxel of the feature volume (gate path).
    double volume_fd(size_t value_index, double h0, size_t& retries) const {
        double h = h0;
        double fd = 0.0;
        for (int attempt = 0; attempt < 4; ++attempt) {
            bool kink = false;
            double up = eval_volume(value_index, h, kink);
            double down = eval_volume(value_index, -h, kink);
            fd = (up - down) / (2.0 * h);
            if (!kink) return fd;
            ++retries;
            h *= 0.1;
        }
        return fd;
    }

    // Parallel sweep of every network parameter against the analytic gradients.
    FdReport sweep(const FieldGradients& grads, double h0, double tol, int threads) const {
        std::vector<Probe> probes = enumerate_probes();
        std::vector<FdReport> partial(threads);
        std::atomic<size_t> cursor{0};
        auto worker = [&](int tid) {
            FdReport& rep = partial[tid];
            const size_t chunk = 1024;
            while (true) {
                size_t begin = cursor.fetch_add(chunk);
                if (begin >= probes.size()) break;
                size_t end = std::min(probes.size(), begin + chunk);
                for (size_t i = begin; i < end; ++i) {
                    double fd = central_difference(probes[i], h0, rep.kink_retries);
                    double an = analytic(grads, probes[i]);
                    double err = rel_err(fd, an);
                    ++rep.checked;
                    if (err > rep.max_rel_err) {
                        rep.max_rel_err = err;
                        rep.worst = describe(probes[i]);
                    }
                    if (err > tol) ++rep.failures;
                }
            }
        };
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker, t);
        for (auto& th : pool) th.join();
        FdReport total;
        for (const auto& r : partial) {
            total.checked += r.checked;
            total.kink_retries += r.kink_retries;
            total.failures += r.failures;
            if (r.max_rel_err > total.max_rel_err) {
                total.max_rel_err = r.max_rel_err;
                total.worst = r.worst;
            }
        }
        return total;
    }

    const ForwardCache& cache() const { return cache_; }

  private:
    int n() const { return static_cast<int>(cache_.input.rows()); }

    static bool sign_changed(const Eigen::Ref<const Eigen::VectorXd>& base,
                             const Eigen::VectorXd& changed) {
        for (int i = 0; i < base.size(); ++i)
            if ((base[i] > 0.0) != (changed[i] > 0.0)) return true;
        return false;
    }
    static bool sign_changed(const Eigen::MatrixXd& base, const Eigen::MatrixXd& changed) {
        for (int i = 0; i < base.size(); ++i)
            if ((base.data()[i] > 0.0) != (changed.data()[i] > 0.0)) return true;
        return false;
    }

    Eigen::VectorXd act(const Eigen::VectorXd& z) const {
        return z.unaryExpr([s = net_.spec.leaky_slope](double v) { return v > 0.0 ? v : s * v; });
    }
    Eigen::MatrixXd act(const Eigen::MatrixXd& z) const {
        return z.unaryExpr([s = net_.spec.leaky_slope](double v) { return v > 0.0 ? v : s * v; });
    }

    const Eigen::MatrixXd& layer_input(int l) const {
        return l == 0 ? cache_.input : cache_.hidden[l - 1];
    }

    double squash(const Eigen::VectorXd& out_pre) const {
        double acc = 0.0;
        for (int i = 0; i < out_pre.size(); ++i)
            acc += coeffs_[i] / (1.0 + std::exp(-out_pre[i]));
        return acc * cache_.out_gate_value;
    }

    // Hidden column `r` of layer `l` replaced by h_col; all later layers
    // recomputed (rank-one update into layer l+1, dense onward).
    double propagate_column(int l, int r, const Eigen::VectorXd& h_col, bool& kink) const {
        Eigen::VectorXd delta_h = h_col - cache_.hidden[l].col(r);
        if (l == hidden_count_ - 1)
            return squash(cache_.out_pre + delta_h * net_.weights.back()(0, r));
        Eigen::MatrixXd z = cache_.pre[l + 1];
        z.noalias() += delta_h * net_.weights[l + 1].col(r).transpose();
        return propagate_dense(l + 1, z, kink);
    }

    // Layers m.. recomputed densely from the given pre-activation of layer m.
    double propagate_dense(int m, Eigen::MatrixXd z, bool& kink) const {
        for (;; ++m) {
            kink |= sign_changed(cache_.pre[m], z);
            Eigen::MatrixXd h = act(z);
            if (net_.gate_cfg.enabled)
                h = h.array().rowwise() * cache_.gate_value[m].transpose().array();
            if (m == hidden_count_ - 1) {
                Eigen::VectorXd out_pre =
                    (h * net_.weights.back().transpose()).col(0) +
                    Eigen::VectorXd::Constant(n(), net_.biases.back()[0]);
                return squash(out_pre);
            }
            Eigen::MatrixXd z_next =
                (h * net_.weights[m + 1].transpose()).rowwise() + net_.biases[m + 1].transpose();
            z = std::move(z_next);
        }
    }

    double eval_feature(int point, int col, double delta, bool& kink) const {
        Eigen::RowVectorXd x = cache_.input.row(point);
        x[col] += delta;
        for (int m = 0; m < hidden_count_; ++m) {
            Eigen::RowVectorXd z = x * net_.weights[m].transpose() + net_.biases[m].transpose();
            for (int i = 0; i < z.size(); ++i)
                if ((cache_.pre[m](point, i) > 0.0) != (z[i] > 0.0)) kink = true;
            x = z.unaryExpr([s = net_.spec.leaky_slope](double v) { return v > 0.0 ? v : s * v; });
            if (net_.gate_cfg.enabled)
                x = x.array() * cache_.gate_value[m].transpose().array();
        }
        double out_pre = (x * net_.weights.back().transpose())(0) + net_.biases.back()[0];
        Eigen::VectorXd out_all = cache_.out_pre;
        out_all[point] = out_pre;
        return squash(out_all);
    }

    double eval_volume(size_t value_index, double delta, bool& kink) const {
        // one voxel shifts the pooled summary of its channel by delta/V per
        // valid tap; every gate then changes, so the MLP is recomputed densely
        const size_t plane = vol_.cell_count();
        const int c = static_cast<int>(value_index / plane);
        size_t rem = value_index % plane;
        const int d = vol_.resolution[0], hh = vol_.resolution[1], w = vol_.resolution[2];
        const int z = static_cast<int>(rem / (static_cast<size_t>(hh) * w));
        rem %= static_cast<size_t>(hh) * w;
        const int y = static_cast<int>(rem / w);
        const int x = static_cast<int>(rem % w);

        std::vector<double> summary = cache_.summary;
        const double inv = 1.0 / static_cast<double>(plane);
        int tap = 0;
        for (int kz = -1; kz <= 1; ++kz)
            for (int ky = -1; ky <= 1; ++ky)
                for (int kx = -1; kx <= 1; ++kx, ++tap) {
                    // voxel (z,y,x) lies in the clipped region of this tap iff
                    // its shifted source index is in range
                    int zz = z - kz, yy = y - ky, xx = x - kx;
                    if (zz < 0 || zz >= d || yy < 0 || yy >= hh || xx < 0 || xx >= w) continue;
                    summary[static_cast<size_t>(c) * 27 + tap] += delta * inv;
                }

        std::vector<Eigen::VectorXd> gate_values(hidden_count_);
        for (int j = 0; j < hidden_count_; ++j) {
            const auto& conv = net_.gates[j].conv;
            Eigen::VectorXd m(conv.out_channels);
            for (int o = 0; o < conv.out_channels; ++o) {
                double acc = conv.bias[o];
                const double* w_o =
                    conv.weights.data() + static_cast<size_t>(o) * net_.feature_channels * 27;
                for (size_t i = 0; i < static_cast<size_t>(net_.feature_channels) * 27; ++i)
                    acc += w_o[i] * summary[i];
                m[o] = acc;
            }
            gate_values[j] = m.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
        }

        Eigen::MatrixXd h;
        for (int m = 0; m < hidden_count_; ++m) {
            Eigen::MatrixXd z_m = m == 0 ? cache_.pre[0]
                                         : ((h * net_.weights[m].transpose()).rowwise() +
                                            net_.biases[m].transpose());
            kink |= sign_changed(cache_.pre[m], z_m);
            h = act(z_m);
            h = h.array().rowwise() * gate_values[m].transpose().array();
        }
        Eigen::VectorXd out_pre = (h * net_.weights.back().transpose()).col(0) +
                                  Eigen::VectorXd::Constant(n(), net_.biases.back()[0]);
        double gate_scale = 1.0;
        if (net_.gate_cfg.output_scalar) {
            const auto& conv = net_.output_gate.conv;
            double acc = conv.bias[0];
            for (size_t i = 0; i < static_cast<size_t>(net_.feature_channels) * 27; ++i)
                acc += conv.weights[i] * summary[i];
            gate_scale = 1.0 / (1.0 + std::exp(-acc));
        }
        double obj = 0.0;
        for (int i = 0; i < out_pre.size(); ++i)
            obj += coeffs_[i] / (1.0 + std::exp(-out_pre[i]));
        return obj * gate_scale;
    }

    std::string describe(const Probe& p) const {
        const char* names[] = {"linear.w", "linear.b", "gate.w", "gate.b", "outgate.w", "outgate.b"};
        return std::string(names[p.kind]) + "[" + std::to_string(p.layer) + "](" +
               std::to_string(p.row) + "," + std::to_string(p.col) + ")";
    }

    const FieldNetwork& net_;
    const FeatureVolume& vol_;
    Eigen::VectorXd coeffs_;
    ForwardCache cache_;
    Eigen::VectorXd out_;
    int hidden_count_ = 0;
};

}  // namespace hilo::fdtest
