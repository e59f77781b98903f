#pragma once

#include "frmofdm/rate.hpp"

#include <vector>

namespace frmofdm {

// Scalar complex Gaussian belief.
struct GaussStat {
    cx mean{0.0, 0.0};
    double var = 0.0;
};

// Means/variances of the composite channels seen by x_k (same-SC path) and
// x_{k-1} (shifted path) under the current RIS-bit belief; K x M each.
struct CompositeStats {
    arma::cx_mat mean_same;
    arma::mat var_same;
    arma::cx_mat mean_shift;
    arma::mat var_shift;
};

// Outputs of maximum-ratio combining per subcarrier: scalar observations and
// the Gaussian beliefs of the four effective gains. The self gains have unit
// mean by construction. Subcarriers whose combiner norm vanishes are flagged
// invalid and produce uniform messages.
struct MrcStats {
    arma::cx_vec fwd_obs, bwd_obs;        // y^F_k, y^B_k
    arma::vec fwd_self_var;               // gain multiplying x_k in the forward branch
    arma::cx_vec fwd_cross_mean;          // gain multiplying x_{k-1} in the forward branch
    arma::vec fwd_cross_var;
    arma::cx_vec bwd_cross_mean;          // gain multiplying x_k in the backward branch
    arma::vec bwd_cross_var;
    arma::vec bwd_self_var;               // gain multiplying x_{k-1} in the backward branch
    arma::vec fwd_noise_var, bwd_noise_var;
    std::vector<bool> fwd_valid, bwd_valid;
};

// Normalized discrete messages over the constellation plus the resulting
// posterior moments. forward row k holds the message from y_k into x_k,
// backward row k the message from y_{k+1} into x_k (k = 1..K-1).
struct MessageTable {
    arma::mat forward;
    arma::mat backward;
    arma::cx_vec post_mean;
    arma::vec post_var;
    arma::uvec hard;
};

// Belief on the RIS bits; means live in [0,1], variances in [0, 1/4].
struct CBelief {
    arma::vec mean;
    arma::vec var;
    arma::uword group_size = 1;

    static CBelief uninformative(arma::uword num_blocks, arma::uword l) {
        CBelief b;
        b.mean = 0.5 * arma::ones(num_blocks);
        b.var = 0.25 * arma::ones(num_blocks);
        b.group_size = l;
        return b;
    }

    arma::vec state_mean() const {
        arma::vec s(mean.n_elem * group_size);
        for (arma::uword b = 0; b < mean.n_elem; ++b)
            s.subvec(b * group_size, (b + 1) * group_size - 1).fill(mean[b]);
        return s;
    }
    arma::vec state_var() const {
        arma::vec s(var.n_elem * group_size);
        for (arma::uword b = 0; b < var.n_elem; ++b)
            s.subvec(b * group_size, (b + 1) * group_size - 1).fill(var[b]);
        return s;
    }
};

struct GampConfig {
    arma::uword iters = 30;
    double damping = 0.7;
};

struct BmpConfig {
    arma::uword max_iters = 10;
    double epsilon = 1e-3;
    GampConfig gamp;
    // Alternative pairing for the bit model: the shifted-path offset and
    // coefficients use the same-SC symbol estimate instead of the previous
    // one.
    bool literal_c_offset = false;
};

struct BmpResult {
    arma::uvec x_hard;              // constellation indices, length K-1
    arma::uvec c_hard;              // bits, length B
    arma::cx_vec x_mean;
    arma::vec x_var;
    CBelief c_belief;
    std::vector<double> residual_trace; // one entry per iteration
    arma::uword iterations = 0;
    bool gamp_diverged = false;
};

/// Composite-channel beliefs from the current RIS-bit belief (exact first and
/// second moments of the per-element Bernoulli mixture).
CompositeStats update_xi_stats(const CBelief& belief, const PhaseConfig& theta,
                               const ChannelRealization& ch);

/// Maximum-ratio compression of the M-antenna observation to one scalar per
/// subcarrier and branch, with the matching effective noise variances.
MrcStats mrc_stats(const CompositeStats& xi, const arma::cx_vec& y, const ChannelRealization& ch,
                   double noise_var);

/// Forward sweep of the Markov-chain messages (log-domain, normalized rows).
arma::mat forward_recursion(const MrcStats& mrc, const std::vector<cx>& symbols,
                            arma::uword num_sc);

/// Backward sweep; row k holds the message from y_{k+1} into x_k.
arma::mat backward_recursion(const MrcStats& mrc, const std::vector<cx>& symbols,
                             arma::uword num_sc);

/// Combine both message directions with the uniform prior into posterior
/// moments and hard decisions (ties break to the lowest constellation index).
void posterior_x(const arma::mat& forward, const arma::mat& backward,
                 const std::vector<cx>& symbols, arma::cx_vec& mean, arma::vec& var,
                 arma::uvec& hard);

/// GAMP on the linearized RIS-bit model with Bernoulli(1/2) priors. Returns
/// the previous belief with diverged=true if the iteration loses stability.
CBelief gamp_detect_c(const arma::cx_vec& x_mean, const arma::vec& x_var,
                      const PhaseConfig& theta, const ChannelRealization& ch,
                      const arma::cx_vec& y, double noise_var, const CBelief& previous,
                      const GampConfig& cfg, bool literal_offset, bool* diverged);

/// Joint detection of user symbols and RIS bits from one receive frame.
BmpResult bmp_detect(const arma::cx_vec& y, const PhaseConfig& theta,
                     const ChannelRealization& ch, double noise_var, const Constellation& cons,
                     double power, arma::uword ris_blocks, arma::uword group_size,
                     const BmpConfig& cfg);

/// Exhaustive joint MAP over all symbol/bit hypotheses; feasible only while
/// |X|^(K-1) * 2^B <= 2^20.
void map_oracle(const arma::cx_vec& y, const PhaseConfig& theta, const ChannelRealization& ch,
                const Constellation& cons, double power, arma::uword ris_blocks,
                arma::uword group_size, arma::uvec& x_hard, arma::uvec& c_hard);

/// Symbol detection with the RIS state revealed (the x-side genie bound).
arma::uvec detect_x_genie(const arma::cx_vec& y, const PhaseConfig& theta,
                          const ChannelRealization& ch, double noise_var,
                          const Constellation& cons, double power, const RisMessage& truth);

/// RIS-bit detection with the symbols revealed (the c-side genie bound).
arma::uvec detect_c_genie(const arma::cx_vec& y, const PhaseConfig& theta,
                          const ChannelRealization& ch, double noise_var,
                          const Constellation& cons, double power, const OfdmFrame& truth,
                          arma::uword ris_blocks, arma::uword group_size, const GampConfig& cfg);

} // namespace frmofdm
