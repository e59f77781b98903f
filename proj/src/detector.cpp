#include "frmofdm/detector.hpp"

namespace frmofdm {

namespace {

constexpr double kNormGuard = 1e-12; // relative combiner-norm floor

std::vector<cx> scaled_points(const Constellation& cons, double power) {
    std::vector<cx> pts(cons.points);
    const double amp = std::sqrt(power);
    for (auto& p : pts) p *= amp;
    return pts;
}

double log_cn(cx z, cx mean, double var) {
    return -std::log(kPi * var) - std::norm(z - mean) / var;
}

void normalize_log_row(arma::mat& table, arma::uword row, const arma::vec& logs) {
    const double mx = logs.max();
    if (!std::isfinite(mx)) {
        table.row(row).fill(1.0 / double(logs.n_elem));
        return;
    }
    arma::vec w = arma::exp(logs - mx);
    const double s = arma::accu(w);
    if (!(s > 0.0) || !std::isfinite(s))
        throw std::runtime_error("message recursion: degenerate message row");
    table.row(row) = (w / s).t();
}

} // namespace

CompositeStats update_xi_stats(const CBelief& belief, const PhaseConfig& theta,
                               const ChannelRealization& ch) {
    const arma::uword M = ch.num_rx, K = ch.num_sc, N = ch.num_elements;
    const arma::vec s_mean = belief.state_mean();
    const arma::vec s_var = belief.state_var();
    require(s_mean.n_elem == N && theta.size() == N, "update_xi_stats: dimension mismatch");

    CompositeStats st;
    st.mean_same.set_size(K, M);
    st.var_same.set_size(K, M);
    st.mean_shift.set_size(K, M);
    st.var_shift.set_size(K, M);
    for (arma::uword k = 1; k <= K; ++k) {
        const arma::cx_mat& hs = ch.same_at(k);
        const arma::cx_mat& ht = ch.shift_at(k);
        for (arma::uword m = 0; m < M; ++m) {
            cx mu_same = ch.h_ub(k - 1, m);
            double var_same = 0.0;
            cx mu_shift(0.0, 0.0);
            double var_shift = 0.0;
            for (arma::uword n = 0; n < N; ++n) {
                const cx a = hs(m, n) * theta.phases[n];
                const cx b = ht(m, n) * theta.phases[n];
                mu_same += a * s_mean[n];
                mu_shift += b * (1.0 - s_mean[n]);
                var_same += std::norm(a) * s_var[n];
                var_shift += std::norm(b) * s_var[n];
            }
            st.mean_same(k - 1, m) = mu_same;
            st.var_same(k - 1, m) = var_same;
            st.mean_shift(k - 1, m) = mu_shift;
            st.var_shift(k - 1, m) = var_shift;
        }
    }
    return st;
}

MrcStats mrc_stats(const CompositeStats& xi, const arma::cx_vec& y, const ChannelRealization& ch,
                   double noise_var) {
    const arma::uword M = ch.num_rx, K = ch.num_sc;
    require(y.n_elem == M * K, "mrc_stats: observation length mismatch");
    MrcStats st;
    st.fwd_obs.zeros(K);
    st.bwd_obs.zeros(K);
    st.fwd_self_var.zeros(K);
    st.fwd_cross_mean.zeros(K);
    st.fwd_cross_var.zeros(K);
    st.bwd_cross_mean.zeros(K);
    st.bwd_cross_var.zeros(K);
    st.bwd_self_var.zeros(K);
    st.fwd_noise_var.zeros(K);
    st.bwd_noise_var.zeros(K);
    st.fwd_valid.assign(K, false);
    st.bwd_valid.assign(K, false);

    for (arma::uword k = 0; k < K; ++k) {
        const arma::cx_vec yk = y.subvec(k * M, (k + 1) * M - 1);
        const arma::cx_vec mu_f = xi.mean_same.row(k).st();
        const arma::cx_vec mu_b = xi.mean_shift.row(k).st();
        const double nf = std::real(arma::cdot(mu_f, mu_f));
        const double nb = std::real(arma::cdot(mu_b, mu_b));
        const double floor_f = kNormGuard * std::max(nb, 1e-300);
        const double floor_b = kNormGuard * std::max(nf, 1e-300);

        if (nf > floor_f && nf > 0.0) {
            st.fwd_valid[k] = true;
            st.fwd_obs[k] = arma::cdot(mu_f, yk) / nf;
            double sv = 0.0, cv = 0.0;
            for (arma::uword m = 0; m < M; ++m) {
                sv += std::norm(mu_f[m]) * xi.var_same(k, m);
                cv += std::norm(mu_f[m]) * xi.var_shift(k, m);
            }
            st.fwd_self_var[k] = sv / (nf * nf);
            st.fwd_cross_mean[k] = arma::cdot(mu_f, mu_b) / nf;
            st.fwd_cross_var[k] = cv / (nf * nf);
            st.fwd_noise_var[k] = noise_var / nf;
        }
        if (nb > floor_b && nb > 0.0) {
            st.bwd_valid[k] = true;
            st.bwd_obs[k] = arma::cdot(mu_b, yk) / nb;
            double sv = 0.0, cv = 0.0;
            for (arma::uword m = 0; m < M; ++m) {
                cv += std::norm(mu_b[m]) * xi.var_same(k, m);
                sv += std::norm(mu_b[m]) * xi.var_shift(k, m);
            }
            st.bwd_cross_mean[k] = arma::cdot(mu_b, mu_f) / nb;
            st.bwd_cross_var[k] = cv / (nb * nb);
            st.bwd_self_var[k] = sv / (nb * nb);
            st.bwd_noise_var[k] = noise_var / nb;
        }
    }
    return st;
}

arma::mat forward_recursion(const MrcStats& mrc, const std::vector<cx>& symbols,
                            arma::uword num_sc) {
    const arma::uword n_sym = symbols.size();
    arma::mat fwd(num_sc - 1, n_sym, arma::fill::zeros);
    arma::rowvec prev; // message into x_{k-1} from y_{k-1}
    for (arma::uword k = 1; k <= num_sc - 1; ++k) {
        if (!mrc.fwd_valid[k - 1]) {
            fwd.row(k - 1).fill(1.0 / double(n_sym));
            prev = fwd.row(k - 1);
            continue;
        }
        const cx obs = mrc.fwd_obs[k - 1];
        const cx cross = mrc.fwd_cross_mean[k - 1];
        const double base = mrc.fwd_noise_var[k - 1];
        const double sv = mrc.fwd_self_var[k - 1];
        const double cv = mrc.fwd_cross_var[k - 1];
        arma::vec logs(n_sym);
        for (arma::uword i = 0; i < n_sym; ++i) {
            if (k == 1) {
                // x_0 = 0 by the guard convention
                logs[i] = log_cn(obs, symbols[i], base + std::norm(symbols[i]) * sv);
            } else {
                double mx = -arma::datum::inf;
                arma::vec terms(n_sym);
                for (arma::uword j = 0; j < n_sym; ++j) {
                    terms[j] = std::log(prev[j] + 1e-300) +
                               log_cn(obs, symbols[i] + symbols[j] * cross,
                                      base + std::norm(symbols[i]) * sv +
                                          std::norm(symbols[j]) * cv);
                    mx = std::max(mx, terms[j]);
                }
                double acc = 0.0;
                for (arma::uword j = 0; j < n_sym; ++j) acc += std::exp(terms[j] - mx);
                logs[i] = mx + std::log(acc);
            }
        }
        normalize_log_row(fwd, k - 1, logs);
        prev = fwd.row(k - 1);
    }
    return fwd;
}

arma::mat backward_recursion(const MrcStats& mrc, const std::vector<cx>& symbols,
                             arma::uword num_sc) {
    const arma::uword n_sym = symbols.size();
    arma::mat bwd(num_sc - 1, n_sym, arma::fill::zeros);
    arma::rowvec next; // message into x_k from y_{k+1}
    for (arma::uword k = num_sc; k >= 2; --k) {
        if (!mrc.bwd_valid[k - 1]) {
            bwd.row(k - 2).fill(1.0 / double(n_sym));
            next = bwd.row(k - 2);
            continue;
        }
        const cx obs = mrc.bwd_obs[k - 1];
        const cx cross = mrc.bwd_cross_mean[k - 1];
        const double base = mrc.bwd_noise_var[k - 1];
        const double sv = mrc.bwd_self_var[k - 1];
        const double cv = mrc.bwd_cross_var[k - 1];
        arma::vec logs(n_sym);
        for (arma::uword i = 0; i < n_sym; ++i) { // i indexes x_{k-1}
            if (k == num_sc) {
                // x_K = 0 by the guard convention
                logs[i] = log_cn(obs, symbols[i], base + std::norm(symbols[i]) * sv);
            } else {
                double mx = -arma::datum::inf;
                arma::vec terms(n_sym);
                for (arma::uword j = 0; j < n_sym; ++j) { // j indexes x_k
                    terms[j] = std::log(next[j] + 1e-300) +
                               log_cn(obs, symbols[j] * cross + symbols[i],
                                      base + std::norm(symbols[j]) * cv +
                                          std::norm(symbols[i]) * sv);
                    mx = std::max(mx, terms[j]);
                }
                double acc = 0.0;
                for (arma::uword j = 0; j < n_sym; ++j) acc += std::exp(terms[j] - mx);
                logs[i] = mx + std::log(acc);
            }
        }
        normalize_log_row(bwd, k - 2, logs);
        next = bwd.row(k - 2);
    }
    return bwd;
}

void posterior_x(const arma::mat& forward, const arma::mat& backward,
                 const std::vector<cx>& symbols, arma::cx_vec& mean, arma::vec& var,
                 arma::uvec& hard) {
    const arma::uword n = forward.n_rows, n_sym = symbols.size();
    mean.set_size(n);
    var.set_size(n);
    hard.set_size(n);
    for (arma::uword k = 0; k < n; ++k) {
        arma::vec w = (forward.row(k) % backward.row(k)).t();
        const double s = arma::accu(w);
        if (s > 0.0)
            w /= s;
        else
            w.fill(1.0 / double(n_sym));
        cx mu(0.0, 0.0);
        for (arma::uword i = 0; i < n_sym; ++i) mu += symbols[i] * w[i];
        double v = 0.0;
        for (arma::uword i = 0; i < n_sym; ++i) v += std::norm(symbols[i] - mu) * w[i];
        mean[k] = mu;
        var[k] = v;
        arma::uword best = 0;
        for (arma::uword i = 1; i < n_sym; ++i)
            if (w[i] > w[best] + 1e-15) best = i; // ties keep the lowest index
        hard[k] = best;
    }
}

CBelief gamp_detect_c(const arma::cx_vec& x_mean, const arma::vec& x_var,
                      const PhaseConfig& theta, const ChannelRealization& ch,
                      const arma::cx_vec& y, double noise_var, const CBelief& previous,
                      const GampConfig& cfg, bool literal_offset, bool* diverged) {
    const arma::uword M = ch.num_rx, K = ch.num_sc;
    const arma::uword B = previous.mean.n_elem, L = previous.group_size;
    if (diverged) *diverged = false;

    auto x_hat = [&](arma::uword k) -> cx {
        if (k == 0 || k >= K) return cx(0.0, 0.0);
        return x_mean[k - 1];
    };
    auto x_nu = [&](arma::uword k) -> double {
        if (k == 0 || k >= K) return 0.0;
        return x_var[k - 1];
    };

    // Stacked linear model for the bits: rows (k, m), columns b. The shifted
    // path belongs to the previous symbol, so its bit coefficient and the
    // observation offset both carry x̂_{k-1}; the literal switch moves both
    // onto x̂_k instead.
    arma::cx_mat a(M * K, B, arma::fill::zeros);
    arma::cx_vec z(M * K);
    arma::vec row_var(M * K);
    const arma::vec s_mean = previous.state_mean();
    const arma::cx_vec s_mean_c(s_mean, arma::zeros(s_mean.n_elem));
    for (arma::uword k = 1; k <= K; ++k) {
        const arma::cx_mat same_on = ch.same_at(k) * arma::diagmat(theta.phases);  // H_k Theta
        const arma::cx_mat shift_on = ch.shift_at(k) * arma::diagmat(theta.phases); // H~_k Theta
        const arma::cx_vec shift_theta = ch.shift_at(k) * theta.phases;             // H~_k theta
        const cx shift_sym = literal_offset ? x_hat(k) : x_hat(k - 1);
        const double shift_nu = literal_offset ? x_nu(k) : x_nu(k - 1);
        // plug-in composite channels under the current bit belief
        const arma::cx_vec same_plug = ch.h_ub.row(k - 1).st() + same_on * s_mean_c;
        const arma::cx_vec shift_plug = shift_theta - shift_on * s_mean_c;
        for (arma::uword m = 0; m < M; ++m) {
            const arma::uword r = (k - 1) * M + m;
            z[r] = y[r] - x_hat(k) * ch.h_ub(k - 1, m) - shift_sym * shift_theta[m];
            for (arma::uword b = 0; b < B; ++b) {
                cx same_acc(0.0, 0.0), shift_acc(0.0, 0.0);
                for (arma::uword l = 0; l < L; ++l) {
                    same_acc += same_on(m, b * L + l);
                    shift_acc += shift_on(m, b * L + l);
                }
                a(r, b) = x_hat(k) * same_acc - shift_sym * shift_acc;
            }
            row_var[r] = x_nu(k) * std::norm(same_plug[m]) +
                         shift_nu * std::norm(shift_plug[m]) + noise_var;
        }
    }

    const arma::mat a_sq = arma::square(arma::abs(a)); // elementwise |A|^2
    if (!(arma::accu(a_sq) > 0.0)) return CBelief::uninformative(B, L); // no info, keep prior

    arma::vec c_hat = previous.mean;
    arma::vec c_var = previous.var;
    arma::cx_vec dual(M * K, arma::fill::zeros);

    for (arma::uword it = 0; it < cfg.iters; ++it) {
        // Output half: per-row plug-in variances and residual dual.
        const arma::vec nu_p = a_sq * c_var;
        const arma::cx_vec p = a * arma::cx_vec(c_hat, arma::zeros(B)) - nu_p % dual;
        arma::cx_vec dual_new(M * K);
        arma::vec nu_dual(M * K);
        for (arma::uword r = 0; r < M * K; ++r) {
            dual_new[r] = (z[r] - p[r]) / (nu_p[r] + row_var[r]);
            nu_dual[r] = 1.0 / (nu_p[r] + row_var[r]);
        }
        dual = cfg.damping * dual_new + (1.0 - cfg.damping) * dual;

        // Input half: per-component pseudo-observation r_b.
        const arma::vec nu_r_inv = a_sq.t() * nu_dual;
        const arma::cx_vec corr = a.t() * dual;
        bool bad = !dual.is_finite() || !corr.is_finite();

        for (arma::uword b = 0; b < B && !bad; ++b) {
            if (!(nu_r_inv[b] > 0.0)) continue; // dead column keeps its belief
            const double nu_r = 1.0 / nu_r_inv[b];
            const cx pseudo = cx(c_hat[b], 0.0) + nu_r * corr[b];
            if (!std::isfinite(std::real(pseudo)) || !std::isfinite(std::imag(pseudo))) {
                bad = true;
                break;
            }
            // Bernoulli(1/2) denoiser on a complex Gaussian observation.
            const double llr = (2.0 * std::real(pseudo) - 1.0) / nu_r;
            const double post = llr >= 0.0 ? 1.0 / (1.0 + std::exp(-llr))
                                           : std::exp(llr) / (1.0 + std::exp(llr));
            const double clamped = std::min(1.0 - 1e-9, std::max(1e-9, post));
            const double damped = cfg.damping * clamped + (1.0 - cfg.damping) * c_hat[b];
            c_hat[b] = damped;
            c_var[b] = damped * (1.0 - damped);
        }
        if (bad) {
            if (diverged) *diverged = true;
            return previous;
        }
    }

    CBelief out;
    out.mean = c_hat;
    out.var = c_var;
    out.group_size = L;
    return out;
}

BmpResult bmp_detect(const arma::cx_vec& y, const PhaseConfig& theta,
                     const ChannelRealization& ch, double noise_var, const Constellation& cons,
                     double power, arma::uword ris_blocks, arma::uword group_size,
                     const BmpConfig& cfg) {
    const arma::uword M = ch.num_rx, K = ch.num_sc;
    require(ris_blocks * group_size == ch.num_elements, "bmp_detect: B*L != N");
    const std::vector<cx> symbols = scaled_points(cons, power);

    BmpResult res;
    res.c_belief = CBelief::uninformative(ris_blocks, group_size);
    arma::mat fwd, bwd;

    for (arma::uword it = 1; it <= cfg.max_iters; ++it) {
        const CompositeStats xi = update_xi_stats(res.c_belief, theta, ch);
        const MrcStats mrc = mrc_stats(xi, y, ch, noise_var);
        fwd = forward_recursion(mrc, symbols, K);
        bwd = backward_recursion(mrc, symbols, K);
        posterior_x(fwd, bwd, symbols, res.x_mean, res.x_var, res.x_hard);

        bool diverged = false;
        res.c_belief = gamp_detect_c(res.x_mean, res.x_var, theta, ch, y, noise_var,
                                     res.c_belief, cfg.gamp, cfg.literal_c_offset, &diverged);
        res.gamp_diverged = res.gamp_diverged || diverged;
        res.iterations = it;

        // Residual stopping rule: the fitted model should explain everything
        // except the thermal noise.
        double resid = 0.0;
        for (arma::uword k = 1; k <= K; ++k) {
            const cx xk = (k <= K - 1) ? res.x_mean[k - 1] : cx(0.0, 0.0);
            const cx xp = (k >= 2) ? res.x_mean[k - 2] : cx(0.0, 0.0);
            for (arma::uword m = 0; m < M; ++m)
                resid += std::abs(std::norm(y[(k - 1) * M + m] - xk * xi.mean_same(k - 1, m) -
                                            xp * xi.mean_shift(k - 1, m)) -
                                  noise_var);
        }
        resid /= double(M * K);
        res.residual_trace.push_back(resid);
        if (resid <= cfg.epsilon) break;
    }

    res.c_hard.set_size(ris_blocks);
    for (arma::uword b = 0; b < ris_blocks; ++b)
        res.c_hard[b] = res.c_belief.mean[b] >= 0.5 ? 1 : 0;
    return res;
}

void map_oracle(const arma::cx_vec& y, const PhaseConfig& theta, const ChannelRealization& ch,
                const Constellation& cons, double power, arma::uword ris_blocks,
                arma::uword group_size, arma::uvec& x_hard, arma::uvec& c_hard) {
    const arma::uword K = ch.num_sc;
    const arma::uword n_sym = cons.size();
    double hyp_count = std::pow(double(n_sym), double(K - 1)) * std::pow(2.0, double(ris_blocks));
    require(hyp_count <= double(1 << 20), "map_oracle: instance too large to enumerate");

    const std::vector<cx> symbols = scaled_points(cons, power);
    arma::uword n_x = 1;
    for (arma::uword k = 0; k + 1 < K; ++k) n_x *= n_sym;
    const arma::uword n_c = arma::uword(1) << ris_blocks;

    double best = arma::datum::inf;
    arma::uword best_x = 0, best_c = 0;
    arma::cx_vec sym(K - 1);
    for (arma::uword ci = 0; ci < n_c; ++ci) {
        arma::uvec bits(ris_blocks);
        for (arma::uword b = 0; b < ris_blocks; ++b) bits[b] = (ci >> b) & 1u;
        const arma::cx_mat g =
            conditional_map(Scheme::frm, ch, theta, group_expand(bits, group_size));
        for (arma::uword xi = 0; xi < n_x; ++xi) {
            arma::uword rem = xi;
            for (arma::uword k = 0; k + 1 < K; ++k) {
                sym[k] = symbols[rem % n_sym];
                rem /= n_sym;
            }
            const double d = std::pow(arma::norm(y - g * sym), 2);
            if (d < best) {
                best = d;
                best_x = xi;
                best_c = ci;
            }
        }
    }
    x_hard.set_size(K - 1);
    arma::uword rem = best_x;
    for (arma::uword k = 0; k + 1 < K; ++k) {
        x_hard[k] = rem % n_sym;
        rem /= n_sym;
    }
    c_hard.set_size(ris_blocks);
    for (arma::uword b = 0; b < ris_blocks; ++b) c_hard[b] = (best_c >> b) & 1u;
}

arma::uvec detect_x_genie(const arma::cx_vec& y, const PhaseConfig& theta,
                          const ChannelRealization& ch, double noise_var,
                          const Constellation& cons, double power, const RisMessage& truth) {
    CBelief genie;
    genie.mean = arma::conv_to<arma::vec>::from(truth.bits);
    genie.var = arma::zeros(truth.bits.n_elem);
    genie.group_size = truth.group_size;
    const std::vector<cx> symbols = scaled_points(cons, power);
    const CompositeStats xi = update_xi_stats(genie, theta, ch);
    const MrcStats mrc = mrc_stats(xi, y, ch, noise_var);
    const arma::mat fwd = forward_recursion(mrc, symbols, ch.num_sc);
    const arma::mat bwd = backward_recursion(mrc, symbols, ch.num_sc);
    arma::cx_vec mean;
    arma::vec var;
    arma::uvec hard;
    posterior_x(fwd, bwd, symbols, mean, var, hard);
    return hard;
}

arma::uvec detect_c_genie(const arma::cx_vec& y, const PhaseConfig& theta,
                          const ChannelRealization& ch, double noise_var,
                          const Constellation& cons, double power, const OfdmFrame& truth,
                          arma::uword ris_blocks, arma::uword group_size, const GampConfig& cfg) {
    (void)cons;
    (void)power;
    arma::cx_vec x_mean = truth.symbols;
    arma::vec x_var = arma::zeros(truth.symbols.n_elem);
    const CBelief prior = CBelief::uninformative(ris_blocks, group_size);
    bool diverged = false;
    const CBelief post = gamp_detect_c(x_mean, x_var, theta, ch, y, noise_var, prior, cfg, false,
                                       &diverged);
    arma::uvec bits(ris_blocks);
    for (arma::uword b = 0; b < ris_blocks; ++b) bits[b] = post.mean[b] >= 0.5 ? 1 : 0;
    return bits;
}

} // namespace frmofdm
