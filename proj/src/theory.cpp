#include "agfra/theory.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "agfra/solvers.hpp"

namespace agfra {

CoherenceReport coherence(const Eigen::MatrixXd& pilot, const std::vector<int>& gated,
                          int sparsity) {
    if (!columns_normalized(pilot, 1e-9))
        throw std::invalid_argument("coherence requires unit-norm pilot columns");
    if (sparsity < 1) throw std::invalid_argument("sparsity must be >= 1");

    const int cols = static_cast<int>(pilot.cols());
    std::vector<std::uint8_t> is_gated(cols, 0);
    for (int i : gated) {
        if (i < 0 || i >= cols) throw std::invalid_argument("gated index out of range");
        is_gated[i] = 1;
    }

    const Eigen::MatrixXd gram = pilot.transpose() * pilot;
    CoherenceReport rep;
    rep.sparsity = sparsity;
    for (int i = 0; i < cols; ++i) {
        for (int j = 0; j < cols; ++j) {
            if (i == j) continue;
            const double a = std::abs(gram(i, j));
            rep.mu1 = std::max(rep.mu1, a);
            if (!is_gated[i]) rep.mu2 = std::max(rep.mu2, a);
        }
    }
    rep.c_p = pilot.cwiseAbs().maxCoeff();

    const double contraction = rep.mu1 * sparsity - rep.mu1 + rep.mu2 * sparsity;
    rep.rate_c = -std::log(contraction);
    rep.error_const =
        contraction < 1.0 ? 2.0 * sparsity * rep.c_p / (1.0 - contraction) : kInf;
    if (rep.mu1 + rep.mu2 > 0.0) {
        rep.s_admissible = static_cast<int>(std::floor((1.0 + rep.mu1) / (rep.mu1 + rep.mu2)));
        rep.s_admissible = std::min(rep.s_admissible, cols);
    } else {
        rep.s_admissible = cols;  // orthonormal columns
    }
    return rep;
}

namespace {

void check_membership(const std::vector<CertInstance>& data, const HClass& h,
                      const std::vector<std::uint8_t>& is_gated, int cols) {
    if (data.empty()) throw std::invalid_argument("certification dataset is empty");
    for (const CertInstance& inst : data) {
        if (inst.truth.size() != cols)
            throw std::invalid_argument("truth length does not match pilot columns");
        int nnz = 0;
        for (int i = 0; i < inst.truth.size(); ++i) {
            if (inst.truth[i] == 0.0) continue;
            ++nnz;
            if (std::abs(inst.truth[i]) > h.bound_b + 1e-12)
                throw std::invalid_argument("truth entry exceeds the magnitude bound");
            if (is_gated[i])
                throw std::invalid_argument("truth is nonzero on a gated coordinate");
        }
        if (nnz > h.sparsity) throw std::invalid_argument("truth exceeds the sparsity bound");
        if (inst.noise.lpNorm<1>() > h.noise_l1 + 1e-12)
            throw std::invalid_argument("noise exceeds the l1 bound");
    }
}

}  // namespace

CertReport certify_bound(const Eigen::MatrixXd& pilot, const std::vector<int>& gated,
                         const std::vector<CertInstance>& data, const HClass& h, int layers) {
    CertReport rep;
    rep.coh = coherence(pilot, gated, h.sparsity);

    const int cols = static_cast<int>(pilot.cols());
    std::vector<std::uint8_t> is_gated(cols, 0);
    for (int i : gated) is_gated[i] = 1;
    check_membership(data, h, is_gated, cols);

    if (!(rep.coh.rate_c > 0.0))
        throw std::domain_error(
            "sparsity " + std::to_string(h.sparsity) + " exceeds the admissible range (max " +
            std::to_string(rep.coh.s_admissible) + "): the error bound is vacuous");

    AgeGate gate;
    gate.open.assign(static_cast<std::size_t>(cols), 1);
    for (int i : gated) gate.open[i] = 0;

    // Unit-step iteration shared across the dataset.
    const Eigen::MatrixXd gram_step =
        Eigen::MatrixXd::Identity(cols, cols) - pilot.transpose() * pilot;
    const std::size_t n = data.size();
    std::vector<Eigen::VectorXd> iterates(n, Eigen::VectorXd::Zero(cols));
    std::vector<Eigen::VectorXd> bias(n);
    for (std::size_t q = 0; q < n; ++q)
        bias[q] = pilot.transpose() * (pilot * data[q].truth + data[q].noise);

    const double s = h.sparsity;
    const double contraction = std::exp(-rep.coh.rate_c);
    rep.support_inclusion_ok = true;
    rep.l1_recursion_ok = true;
    rep.all_margins_nonneg = true;

    std::vector<double> l1_error(n), support_size(n);
    double sup_l1 = 0.0;
    for (std::size_t q = 0; q < n; ++q) {
        l1_error[q] = data[q].truth.lpNorm<1>();
        support_size[q] = static_cast<double>((data[q].truth.array() != 0.0).count());
        sup_l1 = std::max(sup_l1, l1_error[q]);
    }

    for (int l = 0; l < layers; ++l) {
        const double theta = rep.coh.mu2 * sup_l1 + rep.coh.c_p * h.noise_l1;
        LayerCert layer;
        layer.theta = theta;
        layer.l1_recursion_ok = true;
        for (std::size_t q = 0; q < n; ++q) {
            const Eigen::VectorXd v = bias[q] + gram_step * iterates[q];
            iterates[q] = age_gated_threshold(v, gate, theta);
            for (int i = 0; i < cols; ++i) {
                if (data[q].truth[i] == 0.0 && iterates[q][i] != 0.0)
                    rep.support_inclusion_ok = false;
            }
            const Eigen::VectorXd err = iterates[q] - data[q].truth;
            const double err_l1 = err.lpNorm<1>();
            // Per-instance step of the l1 recursion, with a little float slack.
            const double cells = support_size[q];
            const double rhs = rep.coh.mu1 * (cells - 1.0) * l1_error[q] + theta * cells +
                               cells * rep.coh.c_p * h.noise_l1;
            if (err_l1 > rhs + 1e-9 * (1.0 + rhs)) layer.l1_recursion_ok = false;
            l1_error[q] = err_l1;
            layer.sup_l1_error = std::max(layer.sup_l1_error, err_l1);
            layer.sup_l2_error = std::max(layer.sup_l2_error, err.norm());
        }

        layer.bound = s * h.bound_b * std::pow(contraction, l + 1) +
                      rep.coh.error_const * h.noise_l1;
        layer.margin = layer.bound - layer.sup_l2_error;

        rep.l1_recursion_ok = rep.l1_recursion_ok && layer.l1_recursion_ok;
        rep.all_margins_nonneg = rep.all_margins_nonneg && layer.margin >= 0.0;
        rep.layers.push_back(layer);
        sup_l1 = layer.sup_l1_error;
    }
    return rep;
}

Eigen::VectorXd theta_schedule(const Eigen::MatrixXd& pilot, const std::vector<int>& gated,
                               const std::vector<CertInstance>& data, const HClass& h,
                               int layers) {
    const CertReport rep = certify_bound(pilot, gated, data, h, layers);
    Eigen::VectorXd thetas(layers);
    for (int l = 0; l < layers; ++l) thetas[l] = rep.layers[l].theta;
    return thetas;
}

CertProblem make_cert_problem(int total_devices, int pilot_len, int sparsity, double bound_b,
                              double noise_l1, double gated_fraction, int n_instances,
                              int max_tries, Rng& rng) {
    if (gated_fraction < 0.0 || gated_fraction >= 1.0)
        throw std::invalid_argument("gated_fraction must lie in [0,1)");
    const int n_gated = static_cast<int>(std::floor(gated_fraction * total_devices));
    if (total_devices - n_gated < sparsity)
        throw std::invalid_argument("not enough ungated coordinates for the sparsity");

    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> gauss;

    CertProblem prob;
    prob.h = HClass{bound_b, sparsity, noise_l1};
    for (int attempt = 0; attempt < max_tries; ++attempt) {
        Eigen::MatrixXd pilot = gaussian_pilot(pilot_len, total_devices, rng);

        std::vector<int> perm(total_devices);
        for (int i = 0; i < total_devices; ++i) perm[i] = i;
        for (int i = total_devices - 1; i > 0; --i) {
            std::uniform_int_distribution<int> pick(0, i);
            std::swap(perm[i], perm[pick(rng)]);
        }
        std::vector<int> gated(perm.begin(), perm.begin() + n_gated);
        std::sort(gated.begin(), gated.end());

        const CoherenceReport rep = coherence(pilot, gated, sparsity);
        if (!(rep.rate_c > 0.0) || rep.s_admissible < sparsity) continue;

        prob.pilot = std::move(pilot);
        prob.gated = std::move(gated);
        std::vector<int> free_idx(perm.begin() + n_gated, perm.end());
        prob.data.clear();
        for (int q = 0; q < n_instances; ++q) {
            CertInstance inst;
            inst.truth = Eigen::VectorXd::Zero(total_devices);
            // s distinct ungated coordinates, magnitudes in [0.3 B, B].
            for (int i = static_cast<int>(free_idx.size()) - 1; i > 0; --i) {
                std::uniform_int_distribution<int> pick(0, i);
                std::swap(free_idx[i], free_idx[pick(rng)]);
            }
            for (int k = 0; k < sparsity; ++k) {
                const double mag = (0.3 + 0.7 * unif(rng)) * bound_b;
                inst.truth[free_idx[k]] = unif(rng) < 0.5 ? mag : -mag;
            }
            inst.noise = Eigen::VectorXd::Zero(pilot_len);
            if (noise_l1 > 0.0) {
                for (int i = 0; i < pilot_len; ++i) inst.noise[i] = gauss(rng);
                inst.noise *= noise_l1 * unif(rng) / inst.noise.lpNorm<1>();
            }
            prob.data.push_back(std::move(inst));
        }
        return prob;
    }
    throw std::domain_error("no admissible pilot found in " + std::to_string(max_tries) +
                            " tries; shrink the sparsity or enlarge the pilot");
}

}  // namespace agfra
