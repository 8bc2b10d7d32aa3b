// High-frequency encoding of the signed distance: sin/cos bands at
// frequencies 2^k pi weighted by an annealing schedule, plus the analytic
// derivative of the encoding. Pure functions, safe from any thread.
#pragma once

#include <Eigen/Dense>

namespace hilo {

struct HfConfig {
    int num_bands = 5;        // bands k = 0 .. num_bands-1
    bool include_raw = true;  // prepend the raw distance (always at weight 1)

    int dim() const { return (include_raw ? 1 : 0) + 2 * num_bands; }
};

struct ProgressiveSchedule {
    std::int64_t anneal_iters = 2000;  // iterations to reach full weight
    double max_beta = 5.0;             // equals the number of bands

    // beta grows linearly with the iteration and saturates at max_beta.
    // anneal_iters == 0 means the schedule is always fully on.
    double beta_at(std::int64_t iter) const {
        if (anneal_iters <= 0) return max_beta;
        double frac = static_cast<double>(iter) / static_cast<double>(anneal_iters);
        return max_beta * std::min(1.0, frac);
    }
};

// Annealing weight of band k at progress beta:
//   0                          when beta - k < 0
//   (1 - cos((beta - k) pi))/2 when 0 <= beta - k < 1
//   1                          when beta - k >= 1
// Continuous and nondecreasing in beta; the boundary beta - k = 1 evaluates
// to 1 in both middle and last branch.
double progressive_weight(int k, double beta);

// [s?, w_0 sin(2^0 pi s), w_0 cos(2^0 pi s), ..., w_{L} sin(2^L pi s), w_L cos(2^L pi s)]
// With beta >= num_bands every weight is 1 (the plain full-frequency encoding).
Eigen::VectorXd hf_encode(double s, const HfConfig& cfg, double beta);

// Entrywise derivative with respect to s: 1 for the raw entry,
// w_k 2^k pi [cos(2^k pi s), -sin(2^k pi s)] per band.
Eigen::VectorXd hf_encode_grad(double s, const HfConfig& cfg, double beta);

}  // namespace hilo
