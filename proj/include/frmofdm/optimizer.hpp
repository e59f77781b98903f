#pragma once

#include "frmofdm/rate.hpp"

#include <functional>
#include <vector>

namespace frmofdm {

// Auxiliary variables of the full-covariance WMMSE pass: the (K-1)x(K-1)
// error weight, the (K-1)xMK receive filter, and the quadratic/linear
// coefficients of the resulting phase subproblem.
struct WmmseState {
    arma::cx_mat weight; // Sigma, Hermitian positive definite
    arma::cx_mat filter; // Phi
    arma::cx_mat quad;   // Lambda, N x N Hermitian
    arma::cx_vec lin;    // alpha, length N
};

// Per-subcarrier counterpart used by the recursive pass. Entry k covers the
// two-block observation of symbol k.
struct RaoState {
    arma::vec weight;                      // Sigma_k > 0
    arma::cx_mat filter;                   // 2M x (K-1), column k = phi_k
    std::vector<arma::cx_mat> noise_block; // Q^{/theta}_k, M x M, k = 1..K
    arma::cx_mat quad;                     // Lambda' accumulated
    arma::cx_vec lin;                      // alpha' accumulated
};

// Which linear coefficient the recursive pass assembles. `consistent` is the
// exact gradient of the per-SC WMMSE surrogate (monotone by construction);
// `truncated` drops the interference side of the linear term and keeps a
// unit constant on the filter pull.
enum class RaoCoefficients { consistent, truncated };

struct OptimizerOptions {
    arma::uword outer_iters = 200;
    arma::uword mm_iters = 100;
    bool early_stop = true;
    double early_stop_rel = 1e-6;
    RaoCoefficients rao_coefficients = RaoCoefficients::consistent;
};

// Per-outer-iteration record. stats_seconds covers only the statistics
// update (the part whose cost scales with K), not the MM inner solver.
struct IterationRecord {
    arma::uword iteration;
    double surrogate;
    double stats_seconds;
};

using TraceSink = std::function<void(const IterationRecord&, const PhaseConfig&)>;

/// Minimize theta^H quad theta + 2 Re{theta^H lin} over unit-modulus theta by
/// majorization-minimization. Throws if quad is not Hermitian or if a step
/// increases the objective beyond slack.
PhaseConfig mm_solve(const arma::cx_mat& quad, const arma::cx_vec& lin, const PhaseConfig& init,
                     arma::uword iters);

/// Value of the MM objective, for tests and monotonicity checks.
double mm_objective(const arma::cx_mat& quad, const arma::cx_vec& lin, const PhaseConfig& theta);

/// WMMSE weight/filter update at fixed phases (exact MMSE expressions).
void ao_update_sigma_phi(const PhaseConfig& theta, const ChannelRealization& ch, double power,
                         double noise_var, arma::cx_mat& weight, arma::cx_mat& filter);

/// Assemble the phase-subproblem coefficients from the current weight and
/// filter via the block-selected products of the stacked channels.
void ao_build_lambda_alpha(const arma::cx_mat& weight, const arma::cx_mat& filter,
                           const ChannelRealization& ch, arma::cx_mat& quad, arma::cx_vec& lin);

/// WMMSE surrogate value f(theta, Sigma, Phi) in nats; non-decreasing across
/// full AO iterations.
double ao_surrogate(const PhaseConfig& theta, const ChannelRealization& ch, double power,
                    double noise_var, const arma::cx_mat& weight, const arma::cx_mat& filter);

/// Full alternating optimization of the sum rate over unit-modulus phases.
PhaseConfig ao_optimize(const ChannelRealization& ch, double power, double noise_var,
                        const OptimizerOptions& opt, Rng& rng, const TraceSink& trace = nullptr);

/// Per-subcarrier statistics of the recursive pass; never touches an MK x MK
/// matrix.
RaoState rao_update(const PhaseConfig& theta, const ChannelRealization& ch, double power,
                    double noise_var,
                    RaoCoefficients coeffs = RaoCoefficients::consistent);

/// Sum of the per-SC surrogates f_k in nats.
double rao_surrogate(const PhaseConfig& theta, const ChannelRealization& ch, double power,
                     double noise_var, const RaoState& state);

/// Recursive alternating optimization; O(K M^3) statistics per iteration.
PhaseConfig rao_optimize(const ChannelRealization& ch, double power, double noise_var,
                         const OptimizerOptions& opt, Rng& rng, const TraceSink& trace = nullptr);

} // namespace frmofdm
