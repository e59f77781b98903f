#include "frmofdm/optimizer.hpp"

#include "frmofdm/block_select.hpp"

#include <chrono>

namespace frmofdm {

namespace {

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Largest algebraic eigenvalue via power iteration on the shifted matrix
// quad + c*I with c >= spectral radius, so indefinite inputs are handled.
// The returned value is inflated slightly; overshooting keeps the majorizer
// valid, undershooting would not.
double largest_eigenvalue(const arma::cx_mat& quad, Rng* seed_rng = nullptr) {
    const arma::uword n = quad.n_rows;
    const double shift = arma::norm(quad, "fro");
    if (shift == 0.0) return 0.0;
    arma::cx_vec v(n);
    Rng fallback(0x5eedULL);
    Rng& rng = seed_rng ? *seed_rng : fallback;
    for (auto& x : v) x = rng.cgauss();
    v /= arma::norm(v);
    double prev = 0.0;
    for (int it = 0; it < 500; ++it) {
        arma::cx_vec w = quad * v + shift * v;
        const double nw = arma::norm(w);
        if (nw == 0.0) return -shift;
        v = w / nw;
        const double ray = std::real(arma::cdot(v, quad * v));
        if (it > 0 && std::abs(ray - prev) <= 1e-9 * std::max(1.0, std::abs(ray))) {
            prev = ray;
            break;
        }
        prev = ray;
    }
    return prev + 1e-8 * shift;
}

} // namespace

double mm_objective(const arma::cx_mat& quad, const arma::cx_vec& lin, const PhaseConfig& theta) {
    return std::real(arma::cdot(theta.phases, quad * theta.phases)) +
           2.0 * std::real(arma::cdot(theta.phases, lin));
}

PhaseConfig mm_solve(const arma::cx_mat& quad, const arma::cx_vec& lin, const PhaseConfig& init,
                     arma::uword iters) {
    const arma::uword n = quad.n_rows;
    require(lin.n_elem == n && init.size() == n, "mm_solve: dimension mismatch");
    const double scale = std::max(1e-300, arma::abs(quad).max());
    if (arma::abs(quad - quad.t()).max() > 1e-10 * scale)
        throw std::invalid_argument("mm_solve: quadratic coefficient must be Hermitian");
    const arma::cx_mat herm = 0.5 * (quad + quad.t());
    const double lam = largest_eigenvalue(herm);

    arma::cx_vec theta = init.phases;
    double obj = mm_objective(herm, lin, PhaseConfig(theta));
    for (arma::uword it = 0; it < iters; ++it) {
        const arma::cx_vec q = lam * theta - herm * theta - lin;
        for (arma::uword i = 0; i < n; ++i) {
            const double a = std::abs(q[i]);
            if (a > 0.0) theta[i] = q[i] / a; // arg(0) undefined: keep previous phase
        }
        const double next = mm_objective(herm, lin, PhaseConfig(theta));
        if (next > obj + 1e-9 + 1e-12 * std::abs(obj))
            throw std::runtime_error("mm_solve: objective increased, majorization violated");
        obj = next;
    }
    return PhaseConfig(theta);
}

void ao_update_sigma_phi(const PhaseConfig& theta, const ChannelRealization& ch, double power,
                         double noise_var, arma::cx_mat& weight, arma::cx_mat& filter) {
    require(noise_var > 0.0, "ao_update_sigma_phi: noise variance must be positive");
    const CovarianceModel cov = covariance_full(theta, ch, power, noise_var);
    const arma::uword km1 = ch.num_sc - 1;
    // Phi = C_xy C_yy^{-1} with C_xy = P (H_theta)^H; solve instead of invert.
    const arma::cx_mat cyx = power * cov.H_theta; // MK x (K-1)
    filter = arma::solve(cov.Q, cyx, arma::solve_opts::likely_sympd).t();
    arma::cx_mat mmse = power * arma::eye<arma::cx_mat>(km1, km1) - filter * cyx;
    mmse = 0.5 * (mmse + mmse.t());
    weight = arma::inv_sympd(mmse);
}

void ao_build_lambda_alpha(const arma::cx_mat& weight, const arma::cx_mat& filter,
                           const ChannelRealization& ch, arma::cx_mat& quad, arma::cx_vec& lin) {
    const arma::uword M = ch.num_rx;
    const arma::cx_mat same = ch.stacked_same();
    const arma::cx_mat shift = ch.stacked_shift();
    const arma::cx_vec direct = ch.stacked_direct();

    const arma::cx_mat w_full = filter.t() * weight * filter; // Phi^H Sigma Phi, MK x MK
    const arma::cx_mat w_diag = block_diag_select(w_full, M, M);
    const arma::cx_mat w_sup = block_superdiag_select(w_full, M, M);
    const arma::cx_mat w_sub = block_subdiag_select(w_full, M, M);

    quad = same.t() * w_diag * same + shift.t() * w_diag * shift + same.t() * w_sup * shift +
           shift.t() * w_sub * same;
    quad = 0.5 * (quad + quad.t());

    const arma::cx_mat v_full = weight * filter; // Sigma Phi, (K-1) x MK
    const arma::cx_mat v_diag = block_diag_select(v_full, 1, M);
    const arma::cx_mat v_sup = block_superdiag_select(v_full, 1, M);

    // Linear coefficient of the scalar objective; both pieces carry the same
    // factor two so that 2(quad*theta + lin) is the exact gradient.
    const arma::cx_rowvec row_direct = direct.t() * (w_diag * same + w_sup * shift);
    const arma::cx_rowvec row_filter =
        arma::ones<arma::cx_rowvec>(v_full.n_rows) * (v_diag * same + v_sup * shift);
    lin = 2.0 * (row_direct - row_filter).t();
}

double ao_surrogate(const PhaseConfig& theta, const ChannelRealization& ch, double power,
                    double noise_var, const arma::cx_mat& weight, const arma::cx_mat& filter) {
    const CovarianceModel cov = covariance_full(theta, ch, power, noise_var);
    const arma::uword km1 = ch.num_sc - 1;
    const arma::cx_mat fh = filter * cov.H_theta; // (K-1) x (K-1)
    arma::cx_mat err = power * arma::eye<arma::cx_mat>(km1, km1) - power * fh - power * fh.t() +
                       filter * cov.Q * filter.t();
    err = 0.5 * (err + err.t());
    const cx logdet_w = arma::log_det(weight);
    return std::real(logdet_w) - std::real(arma::trace(weight * err));
}

namespace {

template <class UpdateFn, class SurrogateFn>
PhaseConfig alternate(const ChannelRealization& ch, const OptimizerOptions& opt, Rng& rng,
                      const TraceSink& trace, UpdateFn&& update, SurrogateFn&& surrogate,
                      const char* who) {
    PhaseConfig theta = PhaseConfig::random(ch.num_elements, rng);
    double prev = 0.0;
    bool have_prev = false;
    bool enforce_monotone = true;
    for (arma::uword it = 1; it <= opt.outer_iters; ++it) {
        const auto t0 = std::chrono::steady_clock::now();
        arma::cx_mat quad;
        arma::cx_vec lin;
        update(theta, quad, lin, enforce_monotone);
        const double stats_seconds = seconds_since(t0);
        theta = mm_solve(quad, lin, theta, opt.mm_iters);
        const double f = surrogate(theta);
        if (trace) trace(IterationRecord{it, f, stats_seconds}, theta);
        if (have_prev && enforce_monotone && f < prev - 1e-8 * std::max(1.0, std::abs(prev)))
            throw std::runtime_error(std::string(who) + ": surrogate decreased beyond tolerance");
        if (have_prev && opt.early_stop &&
            std::abs(f - prev) <= opt.early_stop_rel * std::max(1.0, std::abs(prev)))
            break;
        prev = f;
        have_prev = true;
    }
    return theta;
}

} // namespace

PhaseConfig ao_optimize(const ChannelRealization& ch, double power, double noise_var,
                        const OptimizerOptions& opt, Rng& rng, const TraceSink& trace) {
    arma::cx_mat weight;
    arma::cx_mat filter;
    return alternate(
        ch, opt, rng, trace,
        [&](const PhaseConfig& theta, arma::cx_mat& quad, arma::cx_vec& lin, bool&) {
            ao_update_sigma_phi(theta, ch, power, noise_var, weight, filter);
            ao_build_lambda_alpha(weight, filter, ch, quad, lin);
        },
        [&](const PhaseConfig& theta) {
            return ao_surrogate(theta, ch, power, noise_var, weight, filter);
        },
        "ao_optimize");
}

RaoState rao_update(const PhaseConfig& theta, const ChannelRealization& ch, double power,
                    double noise_var, RaoCoefficients coeffs) {
    require(noise_var > 0.0, "rao_update: noise variance must be positive");
    const arma::uword M = ch.num_rx, K = ch.num_sc, N = ch.num_elements;
    require(theta.size() == N, "rao_update: theta length mismatch");
    const double sqrt_p = std::sqrt(power);

    RaoState st;
    st.weight.set_size(K - 1);
    st.filter.set_size(2 * M, K - 1);
    st.quad.zeros(N, N);
    st.lin.zeros(N);
    st.noise_block.resize(K + 1);
    for (arma::uword k = 1; k <= K; ++k) {
        arma::cx_mat q = 0.25 * power *
                             (ch.same_at(k) * ch.same_at(k).t() +
                              ch.shift_at(k) * ch.shift_at(k).t()) +
                         noise_var * arma::eye<arma::cx_mat>(M, M);
        st.noise_block[k] = 0.5 * (q + q.t());
    }

    for (arma::uword k = 1; k <= K - 1; ++k) {
        const arma::cx_vec diag_blk = ch.direct_at(k) + 0.5 * ch.same_at(k) * theta.phases;
        const arma::cx_vec sub_blk = 0.5 * ch.shift_at(k + 1) * theta.phases;
        arma::cx_vec u(2 * M);
        u.head(M) = diag_blk;
        u.tail(M) = sub_blk;

        // The next symbol's signal rides on the second observation block and
        // is folded into its noise covariance.
        const arma::cx_vec v_next = ch.direct_at(k + 1) + 0.5 * ch.same_at(k + 1) * theta.phases;
        arma::cx_mat cyy(2 * M, 2 * M, arma::fill::zeros);
        cyy.submat(0, 0, M - 1, M - 1) = st.noise_block[k];
        cyy.submat(M, M, 2 * M - 1, 2 * M - 1) =
            st.noise_block[k + 1] + power * v_next * v_next.t();
        cyy += power * u * u.t();
        cyy = 0.5 * (cyy + cyy.t());

        arma::cx_vec sol;
        if (!arma::solve(sol, cyy, u, arma::solve_opts::likely_sympd))
            throw std::runtime_error("rao_update: per-SC covariance is singular");
        const double quad_form = std::real(arma::cdot(u, sol));
        const double denom = 1.0 - power * quad_form;
        if (!(denom > 0.0))
            throw std::runtime_error("rao_update: per-SC MMSE left no residual error");
        const double sigma_k = 1.0 / denom;
        const arma::cx_vec phi = sqrt_p * sol;

        st.weight[k - 1] = sigma_k;
        st.filter.col(k - 1) = phi;

        const arma::cx_vec phi_top = phi.head(M);
        const arma::cx_vec phi_bot = phi.tail(M);
        const arma::cx_vec w_signal =
            ch.same_at(k).t() * phi_top + ch.shift_at(k + 1).t() * phi_bot; // U^H phi
        const arma::cx_vec w_interf = ch.same_at(k + 1).t() * phi_bot;
        st.quad += sigma_k * (w_signal * w_signal.t() + w_interf * w_interf.t());

        const cx phi_dot_direct = arma::cdot(phi_top, ch.direct_at(k));
        if (coeffs == RaoCoefficients::truncated) {
            st.lin += sigma_k * (2.0 * phi_dot_direct - 1.0) * w_signal;
        } else {
            const cx phi_dot_next = arma::cdot(phi_bot, ch.direct_at(k + 1));
            st.lin += sigma_k * ((2.0 * phi_dot_direct - 2.0 / sqrt_p) * w_signal +
                                 2.0 * phi_dot_next * w_interf);
        }
    }
    st.quad = 0.5 * (st.quad + st.quad.t());
    return st;
}

double rao_surrogate(const PhaseConfig& theta, const ChannelRealization& ch, double power,
                     double noise_var, const RaoState& st) {
    (void)noise_var;
    const arma::uword M = ch.num_rx, K = ch.num_sc;
    const double sqrt_p = std::sqrt(power);
    double f = 0.0;
    for (arma::uword k = 1; k <= K - 1; ++k) {
        arma::cx_vec u(2 * M);
        u.head(M) = ch.direct_at(k) + 0.5 * ch.same_at(k) * theta.phases;
        u.tail(M) = 0.5 * ch.shift_at(k + 1) * theta.phases;
        const arma::cx_vec v_next = ch.direct_at(k + 1) + 0.5 * ch.same_at(k + 1) * theta.phases;
        const arma::cx_vec phi = st.filter.col(k - 1);
        const arma::cx_vec phi_top = phi.head(M);
        const arma::cx_vec phi_bot = phi.tail(M);
        const cx pu = arma::cdot(phi, u);
        double mse = 1.0 - 2.0 * sqrt_p * std::real(pu) + power * std::norm(pu) +
                     std::real(arma::cdot(phi_top, st.noise_block[k] * phi_top)) +
                     std::real(arma::cdot(phi_bot, st.noise_block[k + 1] * phi_bot)) +
                     power * std::norm(arma::cdot(phi_bot, v_next));
        f += std::log(st.weight[k - 1]) - st.weight[k - 1] * mse;
    }
    return f;
}

PhaseConfig rao_optimize(const ChannelRealization& ch, double power, double noise_var,
                         const OptimizerOptions& opt, Rng& rng, const TraceSink& trace) {
    RaoState st;
    return alternate(
        ch, opt, rng, trace,
        [&](const PhaseConfig& theta, arma::cx_mat& quad, arma::cx_vec& lin,
            bool& enforce_monotone) {
            st = rao_update(theta, ch, power, noise_var, opt.rao_coefficients);
            quad = st.quad;
            lin = st.lin;
            // The truncated coefficients drop part of the linear term, so the
            // inner solve no longer matches the surrogate exactly; track it
            // without enforcing monotonicity in that mode.
            enforce_monotone = (opt.rao_coefficients == RaoCoefficients::consistent);
        },
        [&](const PhaseConfig& theta) {
            return rao_surrogate(theta, ch, power, noise_var, st);
        },
        "rao_optimize");
}

} // namespace frmofdm
