#include "agfra/access.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "agfra/types.hpp"

namespace agfra {

double avg_aoi(int delta, double p, double q) {
    if (delta < 1) throw std::invalid_argument("delta must be >= 1");
    if (p < 0.0 || p > 1.0 || q < 0.0 || q > 1.0)
        throw std::invalid_argument("p and q must lie in [0,1]");
    const double pq = p * q;
    if (pq <= 0.0) return kInf;
    return 0.5 * delta + 1.0 / pq - delta / (2.0 * (delta * pq + 1.0 - pq));
}

int s_max(int pilot_len, int total_devices) {
    if (pilot_len < 1) throw std::invalid_argument("pilot_len must be >= 1");
    if (total_devices < 2) throw std::invalid_argument("total_devices must be >= 2");
    int best = 0;
    for (int st = 1; st <= total_devices; ++st) {
        const double phi = st * std::log2(1.0 + static_cast<double>(total_devices) / st);
        if (phi <= pilot_len)
            best = st;
        else
            break;  // phi is increasing in st
    }
    return best;
}

double success_rate(int delta, double p, int n_monitor, int age_max,
                    int n_alarm_active, int pilot_len, int total_devices) {
    if (delta < 1 || delta > age_max)
        throw std::invalid_argument("delta must lie in [1, age_max]");
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("p must lie in [0,1]");

    const int budget = s_max(pilot_len, total_devices) - n_alarm_active;
    if (budget < 0) return 0.0;  // overloaded by the alarm devices alone

    const int population = static_cast<int>(
        std::floor(static_cast<double>(age_max - delta) / age_max * n_monitor));
    if (population <= 0 || p == 0.0) return 1.0;
    if (budget >= population) return 1.0;
    if (p == 1.0) return 0.0;  // population > budget active for sure

    // Binomial CDF P(K_t <= budget) in log-space; coefficients via lgamma.
    const double log_p = std::log(p);
    const double log_1p = std::log1p(-p);
    std::vector<double> terms(static_cast<std::size_t>(budget) + 1);
    double max_term = -kInf;
    for (int k = 0; k <= budget; ++k) {
        const double log_coef = std::lgamma(population + 1.0) - std::lgamma(k + 1.0) -
                                std::lgamma(population - k + 1.0);
        terms[k] = log_coef + k * log_p + (population - k) * log_1p;
        if (terms[k] > max_term) max_term = terms[k];
    }
    double sum = 0.0;
    for (double t : terms) sum += std::exp(t - max_term);
    const double q = std::exp(max_term) * sum;
    return q < 1.0 ? q : 1.0;
}

void GridSpec::validate() const {
    if (!(p_step > 0.0) || delta_step < 1)
        throw std::invalid_argument("grid steps must be positive");
    if (p_min < 0.0 || p_max > 1.0 || p_min > p_max)
        throw std::invalid_argument("p range must satisfy 0 <= p_min <= p_max <= 1");
    if (delta_min < 1 || delta_min > delta_max)
        throw std::invalid_argument("delta range must satisfy 1 <= delta_min <= delta_max");
}

std::optional<AccessParams> optimize_access(const GridSpec& grid, int n_monitor, int age_max,
                                            int n_alarm_active, int pilot_len,
                                            int total_devices) {
    grid.validate();
    const int n_p = static_cast<int>(std::floor((grid.p_max - grid.p_min) / grid.p_step + 1e-9)) + 1;

    std::optional<AccessParams> best;
    for (int delta = grid.delta_min; delta <= std::min(grid.delta_max, age_max);
         delta += grid.delta_step) {
        for (int ip = 0; ip < n_p; ++ip) {
            const double p = std::min(grid.p_min + ip * grid.p_step, grid.p_max);
            const double q =
                success_rate(delta, p, n_monitor, age_max, n_alarm_active, pilot_len, total_devices);
            const double aoi = avg_aoi(delta, p, q);
            if (!std::isfinite(aoi)) continue;
            if (!best || aoi < best->avg_aoi) best = AccessParams{delta, p, q, aoi};
        }
    }
    return best;
}

}  // namespace agfra
