#pragma once

#include "frmofdm/geometry.hpp"
#include "frmofdm/rng.hpp"

#include <optional>
#include <vector>

namespace frmofdm {

// Signal-model dimensions and small-scale fading setup shared by every
// module. N = ris_blocks * group_size always.
struct SystemConfig {
    arma::uword num_rx = 2;       // M
    arma::uword num_sc = 8;       // K, even
    arma::uword num_elements = 8; // N
    arma::uword ris_blocks = 8;   // B
    arma::uword group_size = 1;   // L
    arma::uword taps_direct = 8;  // L_d
    arma::uword taps_user_ris = 8;
    arma::uword taps_ris_bs = 6;
    double kappa_user_ris_db = 3.0;
    double kappa_ris_bs_db = 10.0;

    void validate() const {
        require(num_sc >= 2 && num_sc % 2 == 0, "system: K must be even and >= 2");
        require(num_rx >= 1, "system: M must be positive");
        require(num_elements == ris_blocks * group_size, "system: N must equal B*L");
        require(taps_direct >= 2 && taps_user_ris >= 2 && taps_ris_bs >= 2,
                "system: tap counts must be >= 2");
        require(taps_direct <= num_sc && taps_user_ris <= num_sc && taps_ris_bs <= num_sc,
                "system: tap delays must stay below K");
    }
};

// One scalar link: complex gains at strictly increasing integer delays
// (units of the sample period T/K).
struct TapVector {
    arma::cx_vec coefficients;
    std::vector<arma::uword> delays;

    void validate() const {
        require(coefficients.n_elem == delays.size(), "taps: gain/delay length mismatch");
        require(!delays.empty(), "taps: empty");
        for (std::size_t i = 1; i < delays.size(); ++i)
            require(delays[i] > delays[i - 1], "taps: delays must be strictly increasing");
    }

    double total_power() const {
        double p = 0.0;
        for (const auto& g : coefficients) p += std::norm(g);
        return p;
    }
};

// Frequency-domain channels of all three links plus the per-subcarrier
// cascades of the reflected path. Slices follow the stacked convention of the
// system model: cascade_same has an all-zero slice at SC K (it multiplies the
// blank symbol) and cascade_shift an all-zero slice at SC 1 (nothing precedes
// the first SC).
struct ChannelRealization {
    arma::uword num_rx = 0;       // M
    arma::uword num_sc = 0;       // K
    arma::uword num_elements = 0; // N

    arma::cx_mat h_ub;  // K x M direct link
    arma::cx_mat h_ur;  // K x N user-RIS link
    arma::cx_cube h_rb; // M x N x K RIS-BS link

    arma::cx_cube cascade_same;  // M x N x K: H_k = H^RB_k diag(h^UR_k), slice K zero
    arma::cx_cube cascade_shift; // M x N x K: H~_k = H^RB_k diag(h^UR_{k-1}), slice 1 zero

    std::vector<TapVector> taps_direct;               // per BS antenna
    std::vector<TapVector> taps_user_ris;             // per RIS element
    std::vector<std::vector<TapVector>> taps_ris_bs;  // [m][n]

    /// Direct-link vector at SC k (1-based), zeroed at k = K where the blank
    /// symbol makes it unobservable.
    arma::cx_vec direct_at(arma::uword k) const {
        if (k == num_sc) return arma::cx_vec(num_rx, arma::fill::zeros);
        return h_ub.row(k - 1).st();
    }

    const arma::cx_mat& same_at(arma::uword k) const { return cascade_same.slice(k - 1); }
    const arma::cx_mat& shift_at(arma::uword k) const { return cascade_shift.slice(k - 1); }

    /// MK x N stack of the same-SC cascades (block K zero).
    arma::cx_mat stacked_same() const;
    /// MK x N stack of the shifted-SC cascades (block 1 zero).
    arma::cx_mat stacked_shift() const;
    /// MK stack of the direct link with block K zeroed.
    arma::cx_vec stacked_direct() const;
};

/// 2D array steering vector a_az kron a_el for azimuth/elevation (radians).
/// The exponent signs differ between the two factors on purpose; that is how
/// the underlying model is defined.
arma::cx_vec steering_vector(double azimuth, double elevation, const GeometryConfig& geometry);

/// Free-space loss of the cascaded user-RIS-BS path (linear power gain).
double path_loss_cascaded(const GeometryConfig& geometry);

/// Direct-link power law beta0 * d^(-alpha), linear power gain.
double path_loss_direct(double dist_m, const GeometryConfig& geometry);

/// Small-scale taps of one scalar link at delays 0,1,...,tap_count-1 with unit
/// expected total power. With kappa the first tap is the deterministic LoS
/// component sqrt(kappa/(1+kappa)) * los_component and the rest are i.i.d.
/// CSCG carrying the remaining 1/(1+kappa); without kappa all taps are CSCG.
TapVector gen_taps(arma::uword tap_count, std::optional<double> kappa_db, cx los_component,
                   Rng& rng);

/// Per-subcarrier response: entry k = sum_l g_l exp(-j*2*pi*(k-1+shift)*tau_l/K).
/// shift = -1 evaluates the previous subcarrier's response.
arma::cx_vec freq_response(const TapVector& taps, arma::uword num_sc, int shift = 0);

/// Draw every link of one coherence block and assemble the per-SC cascades.
/// Deterministic for a given rng state.
ChannelRealization gen_channel_realization(const GeometryConfig& geometry,
                                           const SystemConfig& system, Rng& rng);

/// Rebuild the cascade cubes from h_ub/h_ur/h_rb; used after tests overwrite
/// the raw links.
void rebuild_cascades(ChannelRealization& ch);

} // namespace frmofdm
