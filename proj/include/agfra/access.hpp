#pragma once

#include <optional>

namespace agfra {

// Stationary average AoI of one MD under the age-based random access scheme
// with threshold delta, access probability p and per-attempt success
// probability q:
//
//   delta/2 + 1/(pq) - delta / (2 (delta pq + 1 - pq))
//
// Here delta counts the AoI value from which the device starts transmitting
// (ages 1..delta-1 are silent). Returns +infinity when p*q == 0.
double avg_aoi(int delta, double p, double q);

// Largest sparsity S_t with S_t * log2(1 + S/S_t) <= M, i.e. the maximum
// number of simultaneously active devices the l1 decoder is expected to
// resolve with M measurements out of S total devices. phi is monotone in
// S_t, so a linear scan suffices.
int s_max(int pilot_len, int total_devices);

// Probability that the number of active MDs stays within the decoder budget
// s_max - n_alarm_active, where the active-MD count is binomial with
// population floor(((age_max - delta)/age_max) * n_monitor) and parameter p.
// The k = 0 term is included, so an empty eligible population gives 1.
// Evaluated in log-space. Returns 0 when n_alarm_active alone exceeds s_max.
double success_rate(int delta, double p, int n_monitor, int age_max,
                    int n_alarm_active, int pilot_len, int total_devices);

struct AccessParams {
    int delta = 1;
    double p = 0.0;
    double q = 0.0;       // success rate at the optimum
    double avg_aoi = 0.0; // objective value at the optimum
};

struct GridSpec {
    double p_min = 0.0;
    double p_max = 1.0;
    double p_step = 0.01;
    int delta_min = 1;
    int delta_max = 100;
    int delta_step = 1;

    void validate() const;  // throws std::invalid_argument
};

// Exhaustive two-dimensional search minimizing avg_aoi over the grid.
// Deterministic tie-break: smaller delta first, then smaller p. Returns
// nullopt when every grid point diverges (p*q == 0 everywhere).
std::optional<AccessParams> optimize_access(const GridSpec& grid, int n_monitor, int age_max,
                                            int n_alarm_active, int pilot_len,
                                            int total_devices);

}  // namespace agfra
