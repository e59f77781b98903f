#include "frmofdm/frm.hpp"

namespace frmofdm {

arma::vec group_expand(const arma::uvec& bits, arma::uword group_size) {
    require(group_size >= 1, "group_expand: group size must be >= 1");
    arma::vec s(bits.n_elem * group_size);
    for (arma::uword b = 0; b < bits.n_elem; ++b)
        for (arma::uword l = 0; l < group_size; ++l) s[b * group_size + l] = double(bits[b]);
    return s;
}

arma::cx_mat build_effective_channel(const ChannelRealization& ch, const PhaseConfig& theta) {
    const arma::uword M = ch.num_rx, K = ch.num_sc;
    require(theta.size() == ch.num_elements, "effective channel: theta length mismatch");
    arma::cx_mat h_eff(M * K, K - 1, arma::fill::zeros);
    for (arma::uword k = 1; k <= K - 1; ++k) {
        h_eff.submat((k - 1) * M, k - 1, k * M - 1, k - 1) =
            ch.direct_at(k) + 0.5 * ch.same_at(k) * theta.phases;
        h_eff.submat(k * M, k - 1, (k + 1) * M - 1, k - 1) =
            0.5 * ch.shift_at(k + 1) * theta.phases;
    }
    return h_eff;
}

namespace {

RxFrame simulate_impl(const OfdmFrame& frame, const RisMessage& msg, const PhaseConfig& theta,
                      const ChannelRealization& ch, double noise_var, Rng& rng,
                      bool with_shift_term) {
    const arma::uword M = ch.num_rx, K = ch.num_sc;
    require(frame.num_sc() == K, "simulate_rx: frame size mismatch");
    require(msg.state.n_elem == ch.num_elements && theta.size() == ch.num_elements,
            "simulate_rx: RIS dimension mismatch");
    const arma::cx_vec on = theta.phases % arma::conv_to<arma::cx_vec>::from(msg.state);
    const arma::cx_vec off = theta.phases - on; // Theta (1 - s)
    RxFrame rx;
    rx.noise_var = noise_var;
    rx.y.set_size(M * K);
    for (arma::uword k = 1; k <= K; ++k) {
        arma::cx_vec yk(M, arma::fill::zeros);
        if (k < K) yk += frame.at(k) * (ch.h_ub.row(k - 1).st() + ch.same_at(k) * on);
        if (with_shift_term && k >= 2) yk += frame.at(k - 1) * (ch.shift_at(k) * off);
        if (noise_var > 0.0) yk += cgauss_vec(rng, M, noise_var);
        rx.y.subvec((k - 1) * M, k * M - 1) = yk;
    }
    return rx;
}

} // namespace

RxFrame simulate_rx(const OfdmFrame& frame, const RisMessage& msg, const PhaseConfig& theta,
                    const ChannelRealization& ch, double noise_var, Rng& rng) {
    return simulate_impl(frame, msg, theta, ch, noise_var, rng, true);
}

RxFrame simulate_rx_orm(const OfdmFrame& frame, const RisMessage& msg, const PhaseConfig& theta,
                        const ChannelRealization& ch, double noise_var, Rng& rng) {
    return simulate_impl(frame, msg, theta, ch, noise_var, rng, false);
}

RxFrame simulate_time_domain(const OfdmFrame& frame, const RisMessage& msg,
                             const PhaseConfig& theta, const ChannelRealization& ch,
                             arma::uword oversample) {
    const arma::uword M = ch.num_rx, K = ch.num_sc, N = ch.num_elements;
    require(oversample >= 4, "simulate_time_domain: oversample too small for the hopped tones");
    require(frame.num_sc() == K, "simulate_time_domain: frame size mismatch");
    const arma::uword ns = oversample * K;

    // Cyclic delay by whole samples: CP removal makes every tap convolution
    // circular over the symbol period.
    auto delayed = [&](const arma::cx_vec& sig, arma::uword delay_taps) {
        const arma::uword d = (delay_taps * oversample) % ns;
        arma::cx_vec out(ns);
        for (arma::uword i = 0; i < ns; ++i) out[i] = sig[(i + ns - d) % ns];
        return out;
    };
    auto convolve = [&](const arma::cx_vec& sig, const TapVector& taps) {
        arma::cx_vec out(ns, arma::fill::zeros);
        for (arma::uword l = 0; l < taps.delays.size(); ++l)
            out += taps.coefficients[l] * delayed(sig, taps.delays[l]);
        return out;
    };

    arma::cx_vec x_t(ns, arma::fill::zeros);
    for (arma::uword k = 1; k <= K - 1; ++k)
        for (arma::uword i = 0; i < ns; ++i)
            x_t[i] += frame.at(k) * std::polar(1.0, 2.0 * kPi * double(k - 1) * double(i) / double(ns));

    // Per-element reflected waveform: tap convolution of the incident signal,
    // then the element's phase trajectory (static, or rotating at 1/T).
    arma::cx_mat reflected(ns, N);
    for (arma::uword n = 0; n < N; ++n) {
        arma::cx_vec incident = convolve(x_t, ch.taps_user_ris[n]);
        for (arma::uword i = 0; i < ns; ++i) {
            cx traj = theta.phases[n];
            if (msg.state[n] == 0.0)
                traj *= std::polar(1.0, 2.0 * kPi * double(i) / double(ns));
            reflected(i, n) = traj * incident[i];
        }
    }

    RxFrame rx;
    rx.noise_var = 0.0;
    rx.y.set_size(M * K);
    for (arma::uword m = 0; m < M; ++m) {
        arma::cx_vec y_t = convolve(x_t, ch.taps_direct[m]);
        for (arma::uword n = 0; n < N; ++n)
            y_t += convolve(reflected.col(n), ch.taps_ris_bs[m][n]);
        for (arma::uword k = 1; k <= K; ++k) {
            cx acc(0.0, 0.0);
            for (arma::uword i = 0; i < ns; ++i)
                acc += y_t[i] * std::polar(1.0, -2.0 * kPi * double(k - 1) * double(i) / double(ns));
            rx.y[(k - 1) * M + m] = acc / double(ns);
        }
    }
    return rx;
}

} // namespace frmofdm
