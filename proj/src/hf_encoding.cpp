#include "hilo/hf_encoding.hpp"

#include <cmath>
#include <stdexcept>

namespace hilo {

double progressive_weight(int k, double beta) {
    if (k < 0) throw std::invalid_argument("progressive_weight: band index must be >= 0");
    double d = beta - k;
    if (d < 0.0) return 0.0;
    if (d >= 1.0) return 1.0;
    return 0.5 * (1.0 - std::cos(d * M_PI));
}

Eigen::VectorXd hf_encode(double s, const HfConfig& cfg, double beta) {
    if (!std::isfinite(s)) throw std::invalid_argument("hf_encode: non-finite distance");
    Eigen::VectorXd out(cfg.dim());
    int i = 0;
    if (cfg.include_raw) out[i++] = s;
    for (int k = 0; k < cfg.num_bands; ++k) {
        double w = progressive_weight(k, beta);
        double arg = std::ldexp(M_PI, k) * s;  // 2^k pi s
        out[i++] = w * std::sin(arg);
        out[i++] = w * std::cos(arg);
    }
    return out;
}

Eigen::VectorXd hf_encode_grad(double s, const HfConfig& cfg, double beta) {
    if (!std::isfinite(s)) throw std::invalid_argument("hf_encode_grad: non-finite distance");
    Eigen::VectorXd out(cfg.dim());
    int i = 0;
    if (cfg.include_raw) out[i++] = 1.0;
    for (int k = 0; k < cfg.num_bands; ++k) {
        double w = progressive_weight(k, beta);
        double freq = std::ldexp(M_PI, k);
        double arg = freq * s;
        out[i++] = w * freq * std::cos(arg);
        out[i++] = -w * freq * std::sin(arg);
    }
    return out;
}

}  // namespace hilo
