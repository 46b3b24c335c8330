#include "scenealign/schedule.hpp"

#include <cmath>

#include "scenealign/error.hpp"

namespace scenealign {

double NoiseSchedule::sqrt_ab(int t) const { return std::sqrt(alpha_bar[t]); }
double NoiseSchedule::sqrt_one_minus_ab(int t) const { return std::sqrt(1.0 - alpha_bar[t]); }

void NoiseSchedule::validate() const {
    if (T < 1 || static_cast<int>(beta.size()) != T + 1 ||
        static_cast<int>(alpha_bar.size()) != T + 1)
        throw RangeError("schedule: inconsistent sizes");
    if (alpha_bar[0] != 1.0) throw RangeError("schedule: alpha_bar[0] must be 1");
    for (int t = 1; t <= T; ++t) {
        if (!(beta[t] > 0.0 && beta[t] < 1.0))
            throw RangeError("schedule: beta_t outside (0, 1)");
        if (!(alpha_bar[t] < alpha_bar[t - 1]))
            throw RangeError("schedule: alpha_bar not strictly decreasing");
    }
}

NoiseSchedule make_schedule_from_betas(const std::vector<double>& betas, bool validated) {
    NoiseSchedule ns;
    ns.T = static_cast<int>(betas.size());
    ns.beta.assign(ns.T + 1, 0.0);
    ns.alpha.assign(ns.T + 1, 1.0);
    ns.alpha_bar.assign(ns.T + 1, 1.0);
    for (int t = 1; t <= ns.T; ++t) {
        ns.beta[t] = betas[t - 1];
        ns.alpha[t] = 1.0 - ns.beta[t];
        ns.alpha_bar[t] = ns.alpha_bar[t - 1] * ns.alpha[t];
    }
    if (validated) ns.validate();
    return ns;
}

NoiseSchedule make_linear_schedule(int T, double beta_start, double beta_end) {
    std::vector<double> betas(T);
    for (int i = 0; i < T; ++i)
        betas[i] = T == 1 ? beta_start : beta_start + (beta_end - beta_start) * i / (T - 1);
    return make_schedule_from_betas(betas);
}

}  // namespace scenealign
