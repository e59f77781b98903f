#include "frmofdm/rate.hpp"

#include "frmofdm/block_select.hpp"
#include "frmofdm/parallel.hpp"

#include <algorithm>

namespace frmofdm {

Scheme scheme_from_string(const std::string& name) {
    if (name == "frm") return Scheme::frm;
    if (name == "orm") return Scheme::orm;
    if (name == "ris-ofdm") return Scheme::ris_ofdm;
    if (name == "no-ris") return Scheme::no_ris;
    throw std::invalid_argument("unknown scheme: " + name);
}

std::string scheme_to_string(Scheme s) {
    switch (s) {
        case Scheme::frm: return "frm";
        case Scheme::orm: return "orm";
        case Scheme::ris_ofdm: return "ris-ofdm";
        case Scheme::no_ris: return "no-ris";
    }
    return "?";
}

namespace {

// Stacked MK x N channels with the system-model conventions: block K of the
// same-SC stack and block 1 of the shifted stack are zero. The stacked direct
// link is zeroed at block K as well, since the blank Kth symbol never excites
// it; keeping it would double-count a component the receive vector cannot
// contain.
struct Stacks {
    arma::cx_mat same;   // MK x N
    arma::cx_mat shift;  // MK x N
    arma::cx_vec direct; // MK
};

Stacks build_stacks(const ChannelRealization& ch) {
    return Stacks{ch.stacked_same(), ch.stacked_shift(), ch.stacked_direct()};
}

double log2_det_hermitian(const arma::cx_mat& q, double* jitter_used) {
    if (jitter_used) *jitter_used = 0.0;
    arma::cx_mat chol_fac;
    if (arma::chol(chol_fac, q)) {
        double acc = 0.0;
        for (arma::uword i = 0; i < q.n_rows; ++i) acc += std::log2(std::real(chol_fac(i, i)));
        return 2.0 * acc;
    }
    const double jitter = 1e-12 * std::real(arma::trace(q)) / double(q.n_rows);
    if (jitter_used) *jitter_used = jitter;
    arma::cx_mat loaded = q + jitter * arma::eye<arma::cx_mat>(q.n_rows, q.n_rows);
    if (!arma::chol(chol_fac, loaded))
        throw std::runtime_error("sum_rate: covariance not positive definite even after jitter");
    double acc = 0.0;
    for (arma::uword i = 0; i < q.n_rows; ++i) acc += std::log2(std::real(chol_fac(i, i)));
    return 2.0 * acc;
}

} // namespace

CovarianceModel covariance_full(const PhaseConfig& theta, const ChannelRealization& ch,
                                double power, double noise_var) {
    const arma::uword M = ch.num_rx, K = ch.num_sc, N = ch.num_elements;
    require(theta.size() == N, "covariance: theta length mismatch");
    const Stacks st = build_stacks(ch);
    const arma::cx_mat big_theta = arma::diagmat(theta.phases);
    const arma::mat c_ss = 0.25 * arma::ones(N, N) + 0.25 * arma::eye(N, N);
    const arma::vec mean_s = 0.5 * arma::ones(N);

    const arma::cx_mat h_on = st.same * big_theta;   // H Theta
    const arma::cx_mat ht_on = st.shift * big_theta; // H~ Theta
    const arma::cx_vec ht_theta = ht_on * arma::cx_vec(arma::ones(N), arma::zeros(N));
    const arma::cx_vec h_mean = h_on * arma::cx_vec(mean_s, arma::zeros(N));
    const arma::cx_vec ht_mean = ht_on * arma::cx_vec(mean_s, arma::zeros(N));
    const arma::cx_mat css_c(c_ss, arma::zeros(N, N));

    const arma::cx_mat same_block =
        st.direct * st.direct.t() + h_on * css_c * h_on.t() + st.direct * h_mean.t() +
        h_mean * st.direct.t();
    const arma::cx_mat shift_block = ht_theta * ht_theta.t() + ht_on * css_c * ht_on.t() -
                                     ht_theta * ht_mean.t() - ht_mean * ht_theta.t();
    const arma::cx_mat upper_block = st.direct * (ht_theta - ht_mean).t() +
                                     h_mean * ht_theta.t() - h_on * css_c * ht_on.t();
    const arma::cx_mat lower_block = (ht_theta - ht_mean) * st.direct.t() +
                                     ht_theta * h_mean.t() - ht_on * css_c * h_on.t();

    CovarianceModel model;
    model.Q = power * (block_diag_select(same_block, M, M) + block_diag_select(shift_block, M, M) +
                       block_superdiag_select(upper_block, M, M) +
                       block_subdiag_select(lower_block, M, M)) +
              noise_var * arma::eye<arma::cx_mat>(M * K, M * K);

    model.H_theta = build_effective_channel(ch, theta);
    model.Q_theta = power * model.H_theta * model.H_theta.t();
    model.Q_no_theta =
        0.25 * power * block_diag_select(st.same * st.same.t() + st.shift * st.shift.t(), M, M) -
        0.25 * power * block_superdiag_select(st.same * st.shift.t(), M, M) -
        0.25 * power * block_subdiag_select(st.shift * st.same.t(), M, M) +
        noise_var * arma::eye<arma::cx_mat>(M * K, M * K);

    const double scale = std::max(1e-300, arma::abs(model.Q).max());
    const double gap = arma::abs(model.Q - (model.Q_theta + model.Q_no_theta)).max();
    if (gap > 1e-10 * scale)
        throw std::runtime_error("covariance: split Q != Q_theta + Q_no_theta beyond tolerance");
    return model;
}

arma::cx_mat covariance_scheme(Scheme scheme, const PhaseConfig& theta,
                               const ChannelRealization& ch, double power, double noise_var) {
    if (scheme == Scheme::frm) return covariance_full(theta, ch, power, noise_var).Q;
    const arma::uword M = ch.num_rx, K = ch.num_sc, N = ch.num_elements;
    const Stacks st = build_stacks(ch);
    arma::cx_mat q = noise_var * arma::eye<arma::cx_mat>(M * K, M * K);
    if (scheme == Scheme::orm) {
        const arma::cx_mat big_theta = arma::diagmat(theta.phases);
        const arma::mat c_ss = 0.25 * arma::ones(N, N) + 0.25 * arma::eye(N, N);
        const arma::cx_mat css_c(c_ss, arma::zeros(N, N));
        const arma::cx_mat h_on = st.same * big_theta;
        const arma::cx_vec h_mean = 0.5 * h_on * arma::cx_vec(arma::ones(N), arma::zeros(N));
        q += power * block_diag_select(st.direct * st.direct.t() + h_on * css_c * h_on.t() +
                                           st.direct * h_mean.t() + h_mean * st.direct.t(),
                                       M, M);
    } else if (scheme == Scheme::ris_ofdm) {
        const arma::cx_vec v = st.direct + st.same * theta.phases;
        q += power * block_diag_select(v * v.t(), M, M);
    } else { // no_ris
        q += power * block_diag_select(st.direct * st.direct.t(), M, M);
    }
    return q;
}

double sum_rate(const PhaseConfig& theta, const ChannelRealization& ch, double power,
                double noise_var, double* jitter_used) {
    return sum_rate_scheme(Scheme::frm, theta, ch, power, noise_var, jitter_used);
}

double sum_rate_scheme(Scheme scheme, const PhaseConfig& theta, const ChannelRealization& ch,
                       double power, double noise_var, double* jitter_used) {
    require(noise_var > 0.0, "sum_rate: noise variance must be positive");
    const arma::cx_mat q = covariance_scheme(scheme, theta, ch, power, noise_var);
    const double ld = log2_det_hermitian(q, jitter_used);
    if (!std::isfinite(ld)) throw std::runtime_error("sum_rate: non-finite log determinant");
    return (ld - double(q.n_rows) * std::log2(noise_var)) / double(ch.num_sc);
}

arma::cx_mat conditional_map(Scheme scheme, const ChannelRealization& ch,
                             const PhaseConfig& theta, const arma::vec& state) {
    const arma::uword M = ch.num_rx, K = ch.num_sc;
    const arma::cx_vec on = theta.phases % arma::conv_to<arma::cx_vec>::from(state);
    const arma::cx_vec off = theta.phases - on;
    arma::cx_mat g(M * K, K - 1, arma::fill::zeros);
    for (arma::uword k = 1; k <= K - 1; ++k) {
        arma::cx_vec diag_blk = ch.direct_at(k);
        if (scheme != Scheme::no_ris)
            diag_blk += ch.same_at(k) * (scheme == Scheme::ris_ofdm ? theta.phases : on);
        g.submat((k - 1) * M, k - 1, k * M - 1, k - 1) = diag_blk;
        if (scheme == Scheme::frm)
            g.submat(k * M, k - 1, (k + 1) * M - 1, k - 1) = ch.shift_at(k + 1) * off;
    }
    return g;
}

double conditional_rate_user(const PhaseConfig& theta, const ChannelRealization& ch, double power,
                             double noise_var, arma::uword ris_blocks, arma::uword group_size,
                             arma::uword n_samples, Rng& rng, Scheme scheme) {
    const arma::uword K = ch.num_sc;
    const double snr = power / noise_var;
    auto rate_for = [&](const arma::vec& state) {
        const arma::cx_mat g = conditional_map(scheme, ch, theta, state);
        const arma::cx_mat gram = arma::eye<arma::cx_mat>(K - 1, K - 1) + snr * g.t() * g;
        return log2_det_hermitian(gram, nullptr) / double(K);
    };
    if (ris_blocks == 0 || scheme == Scheme::ris_ofdm || scheme == Scheme::no_ris)
        return rate_for(arma::ones(ch.num_elements));
    require(n_samples >= 1, "conditional_rate_user: need at least one sample");
    require(ris_blocks * group_size == ch.num_elements, "conditional_rate_user: B*L != N");
    const std::uint64_t stream_seed = rng.next_u64();
    const double total = par::reduce_chunked<double>(
        n_samples, par::worker_count(), 0.0,
        [&](double& acc, std::size_t lo, std::size_t hi) {
            for (std::size_t i = lo; i < hi; ++i) {
                Rng local = Rng::substream(stream_seed, i);
                acc += rate_for(RisMessage::random(ris_blocks, group_size, local).state);
            }
        });
    return total / double(n_samples);
}

namespace {

// Mean receive vectors of all 2^B RIS hypotheses for a fixed symbol vector
// are x-linear combinations of these per-hypothesis block channels.
struct HypothesisChannels {
    std::vector<arma::cx_mat> maps; // MK x (K-1) per RIS hypothesis
};

HypothesisChannels enumerate_ris_maps(Scheme scheme, const ChannelRealization& ch,
                                      const PhaseConfig& theta, arma::uword ris_blocks,
                                      arma::uword group_size) {
    HypothesisChannels hc;
    const arma::uword n_hyp = arma::uword(1) << ris_blocks;
    hc.maps.reserve(n_hyp);
    for (arma::uword h = 0; h < n_hyp; ++h) {
        arma::uvec bits(ris_blocks);
        for (arma::uword b = 0; b < ris_blocks; ++b) bits[b] = (h >> b) & 1u;
        hc.maps.push_back(conditional_map(scheme, ch, theta, group_expand(bits, group_size)));
    }
    return hc;
}

double log_sum_exp(const std::vector<double>& v) {
    double mx = v[0];
    for (double x : v) mx = std::max(mx, x);
    double acc = 0.0;
    for (double x : v) acc += std::exp(x - mx);
    return mx + std::log(acc);
}

} // namespace

double conditional_rate_ris(const Constellation& cons, const PhaseConfig& theta,
                            const ChannelRealization& ch, double power, double noise_var,
                            arma::uword ris_blocks, arma::uword group_size, arma::uword n_samples,
                            Rng& rng, Scheme scheme) {
    if (ris_blocks > 12)
        throw std::invalid_argument(
            "conditional_rate_ris: 2^B mixture enumeration infeasible for B > 12; "
            "use the entropy bound B/K instead");
    require(ris_blocks >= 1, "conditional_rate_ris: need B >= 1");
    require(n_samples >= 1, "conditional_rate_ris: need samples");
    const arma::uword K = ch.num_sc, MK = ch.num_rx * ch.num_sc;
    const HypothesisChannels hc = enumerate_ris_maps(scheme, ch, theta, ris_blocks, group_size);
    const arma::uword n_hyp = hc.maps.size();
    const std::uint64_t stream_seed = rng.next_u64();

    // H(y|x) by Monte-Carlo over (x, c, w); subtracting the noise entropy
    // leaves I(s;y|x) = H(y|x) - H(y|x,s).
    const double total_nats = par::reduce_chunked<double>(
        n_samples, par::worker_count(), 0.0,
        [&](double& acc, std::size_t lo, std::size_t hi) {
            std::vector<double> logp(n_hyp);
            for (std::size_t i = lo; i < hi; ++i) {
                Rng local = Rng::substream(stream_seed, i);
                OfdmFrame frame = OfdmFrame::random(cons, K, power, local);
                const arma::uword h_true = local.next_u64() & (n_hyp - 1);
                arma::cx_vec y =
                    hc.maps[h_true] * frame.symbols + cgauss_vec(local, MK, noise_var);
                for (arma::uword h = 0; h < n_hyp; ++h) {
                    const arma::cx_vec d = y - hc.maps[h] * frame.symbols;
                    logp[h] = -std::real(arma::cdot(d, d)) / noise_var;
                }
                // -log p(y|x), dropping constants that cancel against H(w)
                acc += -(log_sum_exp(logp) - std::log(double(n_hyp)));
            }
        });
    // H(y|x) - H(w) = E[-log p(y|x)] - MK(log(pi sigma^2) + 1); the shared
    // -MK log(pi sigma^2) constant was dropped from logp above.
    const double nats = total_nats / double(n_samples) - double(MK);
    const double bits_per_sc = nats / std::log(2.0) / double(K);
    // the estimand lives in [0, B/K]; Monte-Carlo noise may leave the box
    return std::clamp(bits_per_sc, 0.0, double(ris_blocks) / double(K));
}

MutualInfoEstimate exact_mutual_info_oracle(const Constellation& cons, const PhaseConfig& theta,
                                            const ChannelRealization& ch, double power,
                                            double noise_var, arma::uword ris_blocks,
                                            arma::uword group_size, arma::uword n_samples,
                                            Rng& rng, Scheme scheme) {
    const arma::uword K = ch.num_sc, MK = ch.num_rx * ch.num_sc;
    const arma::uword n_x = [&] {
        arma::uword v = 1;
        for (arma::uword k = 0; k + 1 < K; ++k) v *= cons.size();
        return v;
    }();
    const arma::uword n_c = arma::uword(1) << ris_blocks;
    require(double(n_x) * double(n_c) <= 65536.0,
            "exact_mutual_info_oracle: instance too large to enumerate");
    const HypothesisChannels hc = enumerate_ris_maps(scheme, ch, theta, ris_blocks, group_size);

    // All hypothesis means, indexed [c * n_x + x].
    arma::cx_mat means(MK, n_x * n_c);
    const double amp = std::sqrt(power);
    std::vector<arma::cx_vec> symbol_vecs(n_x);
    for (arma::uword xi = 0; xi < n_x; ++xi) {
        arma::cx_vec sym(K - 1);
        arma::uword rem = xi;
        for (arma::uword k = 0; k + 1 < K; ++k) {
            sym[k] = amp * cons.points[rem % cons.size()];
            rem /= cons.size();
        }
        symbol_vecs[xi] = sym;
    }
    for (arma::uword ci = 0; ci < n_c; ++ci)
        for (arma::uword xi = 0; xi < n_x; ++xi)
            means.col(ci * n_x + xi) = hc.maps[ci] * symbol_vecs[xi];

    struct Sums {
        double joint = 0.0, given_x = 0.0, given_c = 0.0;
        Sums& operator+=(const Sums& o) {
            joint += o.joint;
            given_x += o.given_x;
            given_c += o.given_c;
            return *this;
        }
    };
    const std::uint64_t stream_seed = rng.next_u64();
    const Sums total = par::reduce_chunked<Sums>(
        n_samples, par::worker_count(), Sums{},
        [&](Sums& acc, std::size_t lo, std::size_t hi) {
            std::vector<double> lp_all(n_x * n_c), lp_x(n_c), lp_c(n_x);
            for (std::size_t i = lo; i < hi; ++i) {
                Rng local = Rng::substream(stream_seed, i);
                const arma::uword xi = local.below(n_x);
                const arma::uword ci = local.below(n_c);
                const arma::cx_vec y =
                    means.col(ci * n_x + xi) + cgauss_vec(local, MK, noise_var);
                for (arma::uword c2 = 0; c2 < n_c; ++c2)
                    for (arma::uword x2 = 0; x2 < n_x; ++x2) {
                        const arma::cx_vec d = y - means.col(c2 * n_x + x2);
                        lp_all[c2 * n_x + x2] = -std::real(arma::cdot(d, d)) / noise_var;
                    }
                for (arma::uword c2 = 0; c2 < n_c; ++c2) lp_x[c2] = lp_all[c2 * n_x + xi];
                for (arma::uword x2 = 0; x2 < n_x; ++x2) lp_c[x2] = lp_all[ci * n_x + x2];
                acc.joint += -(log_sum_exp(lp_all) - std::log(double(n_x * n_c)));
                acc.given_x += -(log_sum_exp(lp_x) - std::log(double(n_c)));
                acc.given_c += -(log_sum_exp(lp_c) - std::log(double(n_x)));
            }
        });

    const double inv = 1.0 / double(n_samples);
    const double to_bits = 1.0 / std::log(2.0) / double(K);
    MutualInfoEstimate est{};
    est.joint = (total.joint * inv - double(MK)) * to_bits;
    est.ris_given_user = (total.given_x * inv - double(MK)) * to_bits;
    est.user_given_ris = (total.given_c * inv - double(MK)) * to_bits;
    est.ris_marginal = est.joint - est.user_given_ris;
    return est;
}

} // namespace frmofdm
