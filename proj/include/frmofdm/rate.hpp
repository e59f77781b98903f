#pragma once

#include "frmofdm/frm.hpp"

namespace frmofdm {

// Transmission scheme selector shared by the rate and experiment layers.
// ris_ofdm keeps every element static (pure passive beamforming), no_ris
// drops the reflected path entirely.
enum class Scheme { frm, orm, ris_ofdm, no_ris };

Scheme scheme_from_string(const std::string& name);
std::string scheme_to_string(Scheme s);

// Gaussian-approximation covariance of the stacked receive vector and its
// phase-dependent / phase-independent split.
struct CovarianceModel {
    arma::cx_mat Q;          // MK x MK
    arma::cx_mat Q_theta;    // P * H_theta * H_theta^H
    arma::cx_mat Q_no_theta; // theta-independent part plus noise
    arma::cx_mat H_theta;    // MK x (K-1) block bi-diagonal effective channel
};

/// Full covariance with both signal components, assembled term by term, plus
/// the split; throws if the two routes disagree beyond 1e-10 relative.
CovarianceModel covariance_full(const PhaseConfig& theta, const ChannelRealization& ch,
                                double power, double noise_var);

/// Covariance of the receive vector under a given scheme (frm delegates to
/// covariance_full).
arma::cx_mat covariance_scheme(Scheme scheme, const PhaseConfig& theta,
                               const ChannelRealization& ch, double power, double noise_var);

/// Gaussian-approximation sum rate (log2 det Q - MK log2 sigma^2) / K in bpcu
/// per SC. If the Hermitian factorization needs a diagonal jitter, the amount
/// used is stored in *jitter_used (0 otherwise).
double sum_rate(const PhaseConfig& theta, const ChannelRealization& ch, double power,
                double noise_var, double* jitter_used = nullptr);

double sum_rate_scheme(Scheme scheme, const PhaseConfig& theta, const ChannelRealization& ch,
                       double power, double noise_var, double* jitter_used = nullptr);

/// Conditional linear map from the active symbols to y at a fixed RIS state:
/// block bi-diagonal with blocks h^UB_k + H_k Theta s and (frm only)
/// H~_{k+1} Theta (1-s).
arma::cx_mat conditional_map(Scheme scheme, const ChannelRealization& ch,
                             const PhaseConfig& theta, const arma::vec& state);

/// I(x; y | s): Monte-Carlo average over RIS messages of the conditional
/// Gaussian rate. ris_blocks = 0 degenerates to the all-static state (one
/// deterministic evaluation).
double conditional_rate_user(const PhaseConfig& theta, const ChannelRealization& ch, double power,
                             double noise_var, arma::uword ris_blocks, arma::uword group_size,
                             arma::uword n_samples, Rng& rng, Scheme scheme = Scheme::frm);

/// I(s; y | x): plug-in mixture-entropy Monte-Carlo with full enumeration of
/// the 2^B RIS hypotheses; only feasible for B <= 12. Result is capped by the
/// entropy bound B/K.
double conditional_rate_ris(const Constellation& cons, const PhaseConfig& theta,
                            const ChannelRealization& ch, double power, double noise_var,
                            arma::uword ris_blocks, arma::uword group_size, arma::uword n_samples,
                            Rng& rng, Scheme scheme = Scheme::frm);

// Exhaustive-enumeration mutual-information estimates for tiny instances,
// used as ground truth against the Gaussian approximation.
struct MutualInfoEstimate {
    double joint;          // I(x,s;y)
    double user_given_ris; // I(x;y|s)
    double ris_given_user; // I(s;y|x)
    double ris_marginal;   // I(s;y)
};

MutualInfoEstimate exact_mutual_info_oracle(const Constellation& cons, const PhaseConfig& theta,
                                            const ChannelRealization& ch, double power,
                                            double noise_var, arma::uword ris_blocks,
                                            arma::uword group_size, arma::uword n_samples,
                                            Rng& rng, Scheme scheme = Scheme::frm);

} // namespace frmofdm
