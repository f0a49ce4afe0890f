#pragma once

#include <Eigen/Dense>
#include <vector>

#include "agfra/types.hpp"

namespace agfra {

// Coherence quantities of a column-normalized pilot and the convergence
// constants they induce for a given sparsity level s:
//   mu1 = max_{i != j} |P_i^T P_j|
//   mu2 = same maximum, skipping pairs whose first column is gated
//   c_p = max |P_{i,j}| over all entries
//   rate_c     = -log(mu1 s - mu1 + mu2 s)
//   error_const = 2 s c_p / (1 - mu1 s - mu2 s + mu1), +inf when rate_c <= 0
//   s_admissible = largest s' with s' <= (1 + mu1)/(mu1 + mu2)
struct CoherenceReport {
    double mu1 = 0.0;
    double mu2 = 0.0;
    double c_p = 0.0;
    int sparsity = 0;
    double rate_c = 0.0;
    double error_const = 0.0;
    int s_admissible = 0;
};

// Throws std::invalid_argument unless P has unit-norm columns.
CoherenceReport coherence(const Eigen::MatrixXd& pilot, const std::vector<int>& gated,
                          int sparsity = 2);

// One certification sample: bounded sparse truth and l1-bounded noise.
struct CertInstance {
    Eigen::VectorXd truth;
    Eigen::VectorXd noise;
};

// Membership bounds of the sample class: |truth_i| <= bound_b,
// ||truth||_0 <= sparsity, ||noise||_1 <= noise_l1, truth zero on the gate.
struct HClass {
    double bound_b = 1.0;
    int sparsity = 2;
    double noise_l1 = 0.0;
};

struct LayerCert {
    double theta = 0.0;          // schedule value producing this layer
    double sup_l1_error = 0.0;   // sup over the dataset after the layer
    double sup_l2_error = 0.0;
    double bound = 0.0;          // s B exp(-c l) + C sigma at this depth
    double margin = 0.0;         // bound - sup_l2_error
    bool l1_recursion_ok = false;
};

struct CertReport {
    CoherenceReport coh;
    std::vector<LayerCert> layers;  // depth 1..L
    bool support_inclusion_ok = false;
    bool l1_recursion_ok = false;
    bool all_margins_nonneg = false;

    bool passed() const { return support_inclusion_ok && l1_recursion_ok && all_margins_nonneg; }
};

// Layer thresholds built sequentially over the dataset:
// theta^l = mu2 * sup_q ||h^l_q - h*_q||_1 + c_p * sigma, where the h^l are
// produced by the unit-step gated iteration run with the already-fixed
// earlier thresholds.
Eigen::VectorXd theta_schedule(const Eigen::MatrixXd& pilot, const std::vector<int>& gated,
                               const std::vector<CertInstance>& data, const HClass& h,
                               int layers);

// Runs the unit-step iteration h <- eta(h - P^T (P h - y); gate, theta^l)
// with the schedule above and checks, at every depth: exact support
// inclusion, the per-layer l1 recursion, and the l2 error bound. Throws
// std::domain_error when s exceeds the admissible range (the bound would be
// vacuous), std::invalid_argument when the dataset leaves the class.
CertReport certify_bound(const Eigen::MatrixXd& pilot, const std::vector<int>& gated,
                         const std::vector<CertInstance>& data, const HClass& h, int layers);

struct CertProblem {
    Eigen::MatrixXd pilot;
    std::vector<int> gated;
    std::vector<CertInstance> data;
    HClass h;
};

// Draws Gaussian pilots until the requested sparsity is admissible, then
// samples class members supported away from the gated set. Throws
// std::domain_error when max_tries pilots all fail.
CertProblem make_cert_problem(int total_devices, int pilot_len, int sparsity, double bound_b,
                              double noise_l1, double gated_fraction, int n_instances,
                              int max_tries, Rng& rng);

}  // namespace agfra
