#pragma once

#include <vector>

namespace scenealign {

// Diffusion process constants. beta[t] is indexed 1..T (beta[0] unused);
// alpha_bar[0] == 1 by convention so t = 0 is the identity corruption.
struct NoiseSchedule {
    int T = 0;
    std::vector<double> beta;       // size T+1
    std::vector<double> alpha;      // size T+1, alpha[t] = 1 - beta[t]
    std::vector<double> alpha_bar;  // size T+1, cumulative product, alpha_bar[0] = 1

    double sqrt_ab(int t) const;
    double sqrt_one_minus_ab(int t) const;

    // Throws RangeError unless 0 < beta_t < 1 and alpha_bar is strictly decreasing.
    void validate() const;
};

// Linear beta ramp, the standard DDPM default.
NoiseSchedule make_linear_schedule(int T = 50, double beta_start = 1e-4, double beta_end = 0.02);

// Arbitrary betas; validation optional so degenerate schedules (e.g. all-zero
// beta) can be constructed for algebraic tests.
NoiseSchedule make_schedule_from_betas(const std::vector<double>& betas, bool validated = true);

}  // namespace scenealign
