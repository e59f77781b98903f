#pragma once

#include "frmofdm/channel.hpp"
#include "frmofdm/constellation.hpp"

namespace frmofdm {

// Unit-modulus reflection phases, one per RIS element.
struct PhaseConfig {
    arma::cx_vec phases;

    PhaseConfig() = default;
    explicit PhaseConfig(arma::cx_vec v) : phases(std::move(v)) { validate(); }

    void validate() const {
        for (const auto& t : phases)
            require(std::abs(std::abs(t) - 1.0) <= 1e-12, "phase config: entries must be unit modulus");
    }

    arma::uword size() const { return phases.n_elem; }

    static PhaseConfig all_ones(arma::uword n) {
        return PhaseConfig(arma::cx_vec(n, arma::fill::ones));
    }

    static PhaseConfig random(arma::uword n, Rng& rng) {
        arma::cx_vec v(n);
        for (auto& t : v) t = rng.unit_phase();
        return PhaseConfig(std::move(v));
    }
};

/// Block expansion s = c kron 1_L: element n copies bit ceil(n/L).
arma::vec group_expand(const arma::uvec& bits, arma::uword group_size);

// RIS payload: B bits, each driving a block of L adjacent elements.
// state[n] = 1 keeps element n static, 0 puts it in the hopping state.
struct RisMessage {
    arma::uvec bits;
    arma::uword group_size = 1;
    arma::vec state;

    RisMessage() = default;
    RisMessage(arma::uvec c, arma::uword l)
        : bits(std::move(c)), group_size(l), state(group_expand(bits, l)) {}

    static RisMessage random(arma::uword num_blocks, arma::uword l, Rng& rng) {
        arma::uvec c(num_blocks);
        for (auto& b : c) b = rng.bernoulli_half() ? 1 : 0;
        return RisMessage(std::move(c), l);
    }

    static RisMessage all_on(arma::uword num_blocks, arma::uword l) {
        return RisMessage(arma::uvec(num_blocks, arma::fill::ones), l);
    }
};

// One OFDM symbol: K-1 active subcarriers, the Kth left blank so hopped
// energy never leaves the band. Entries are constellation points scaled to
// E|x_k|^2 = power.
struct OfdmFrame {
    arma::cx_vec symbols;     // length K-1
    arma::uvec sym_indices;   // constellation index per active SC
    double power = 1.0;

    arma::uword num_sc() const { return symbols.n_elem + 1; }

    /// x_k with the guard convention x_0 = x_K = 0; k may be 0..K.
    cx at(arma::uword k) const {
        if (k == 0 || k > symbols.n_elem) return cx(0.0, 0.0);
        return symbols[k - 1];
    }

    static OfdmFrame random(const Constellation& cons, arma::uword num_sc, double power,
                            Rng& rng) {
        OfdmFrame f;
        f.power = power;
        f.symbols.set_size(num_sc - 1);
        f.sym_indices.set_size(num_sc - 1);
        const double amp = std::sqrt(power);
        for (arma::uword k = 0; k + 1 < num_sc; ++k) {
            const auto idx = rng.below(cons.size());
            f.sym_indices[k] = idx;
            f.symbols[k] = amp * cons.points[idx];
        }
        return f;
    }
};

// Stacked receive vector, K blocks of M antennas.
struct RxFrame {
    arma::cx_vec y; // length M*K
    double noise_var = 0.0;

    arma::cx_vec block(arma::uword k, arma::uword num_rx) const {
        return y.subvec((k - 1) * num_rx, k * num_rx - 1);
    }
};

/// Block bi-diagonal effective channel of the equivalent MIMO system,
/// MK x (K-1): diagonal block k = h^UB_k + H_k*theta/2, sub-diagonal block
/// k = H~_{k+1}*theta/2.
arma::cx_mat build_effective_channel(const ChannelRealization& ch, const PhaseConfig& theta);

/// Frequency-domain receive model: y_k = x_k (h^UB_k + H_k Theta s)
/// + x_{k-1} H~_k Theta (1 - s) + w_k.
RxFrame simulate_rx(const OfdmFrame& frame, const RisMessage& msg, const PhaseConfig& theta,
                    const ChannelRealization& ch, double noise_var, Rng& rng);

/// On-off baseline: elements with state 0 reflect nothing, the shifted-SC
/// term disappears.
RxFrame simulate_rx_orm(const OfdmFrame& frame, const RisMessage& msg, const PhaseConfig& theta,
                        const ChannelRealization& ch, double noise_var, Rng& rng);

/// Oversampled continuous-time reference: synthesizes the OFDM waveform,
/// applies per-element phase trajectories and tap convolutions, and projects
/// back onto the subcarriers. Noiseless by construction; the frequency-domain
/// model must agree with it to machine-level accuracy.
RxFrame simulate_time_domain(const OfdmFrame& frame, const RisMessage& msg,
                             const PhaseConfig& theta, const ChannelRealization& ch,
                             arma::uword oversample = 8);

} // namespace frmofdm
