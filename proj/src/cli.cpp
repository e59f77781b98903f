#include "frmofdm/experiments.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace frmofdm {

namespace {

struct Check {
    std::ostream& os;
    int failures = 0;
    void operator()(bool ok, const std::string& name) {
        os << (ok ? "[PASS] " : "[FAIL] ") << name << "\n";
        if (!ok) ++failures;
    }
};

// Central finite differences of a scalar function of the phase vector against
// the analytic gradient 2*(quad*theta + lin), stacked [d/dRe; d/dIm].
bool gradient_matches(const std::function<double(const arma::cx_vec&)>& fn,
                      const arma::cx_mat& quad, const arma::cx_vec& lin,
                      const arma::cx_vec& theta, double tol) {
    const double h = 1e-5;
    const arma::cx_vec g = 2.0 * (quad * theta + lin);
    double worst = 0.0;
    double scale = 0.0;
    for (arma::uword n = 0; n < theta.n_elem; ++n) {
        arma::cx_vec tp = theta, tm = theta;
        tp[n] += h;
        tm[n] -= h;
        const double d_re = (fn(tp) - fn(tm)) / (2.0 * h);
        tp = theta;
        tm = theta;
        tp[n] += cx(0.0, h);
        tm[n] -= cx(0.0, h);
        const double d_im = (fn(tp) - fn(tm)) / (2.0 * h);
        worst = std::max({worst, std::abs(d_re - std::real(g[n])),
                          std::abs(d_im - std::imag(g[n]))});
        scale = std::max({scale, std::abs(d_re), std::abs(d_im), 1e-12});
    }
    return worst <= tol * scale;
}

} // namespace

int run_selftest(std::ostream& os, std::uint64_t seed) {
    Check check{os};
    Rng rng(seed);

    ExperimentConfig cfg;
    cfg.num_rx = 2;
    cfg.num_sc = 8;
    cfg.num_elements = 8;
    cfg.ris_blocks = 4;
    cfg.group_size = 2;
    cfg.ris_fraction_random = false;
    const double power = cfg.power(), noise_var = cfg.noise_var();
    const ChannelRealization ch = trial_channel(cfg, rng);
    const PhaseConfig theta = PhaseConfig::random(ch.num_elements, rng);

    // Covariance structure
    const CovarianceModel cov = covariance_full(theta, ch, power, noise_var);
    {
        const double scale = arma::abs(cov.Q).max();
        check(arma::abs(cov.Q - cov.Q.t()).max() <= 1e-10 * scale, "covariance is Hermitian");
        const arma::vec ev = arma::eig_sym(cov.Q);
        check(ev.min() >= noise_var - 1e-9 * scale, "covariance dominates the noise floor");
        double off = 0.0;
        const arma::uword M = ch.num_rx, K = ch.num_sc;
        for (arma::uword i = 0; i < K; ++i)
            for (arma::uword j = 0; j < K; ++j)
                if (j > i + 1 || i > j + 1)
                    off = std::max(off, arma::abs(cov.Q.submat(i * M, j * M, (i + 1) * M - 1,
                                                               (j + 1) * M - 1))
                                            .max());
        check(off <= 1e-12 * scale, "covariance is block tri-diagonal");
        check(arma::abs(cov.Q - cov.Q_theta - cov.Q_no_theta).max() <= 1e-10 * scale,
              "covariance split is exact");
    }

    // MM keeps phases on the unit circle and never increases its objective
    {
        arma::cx_mat raw(6, 6, arma::fill::zeros);
        for (auto& v : raw) v = rng.cgauss();
        const arma::cx_mat quad = raw * raw.t();
        arma::cx_vec lin(6);
        for (auto& v : lin) v = rng.cgauss();
        const PhaseConfig out = mm_solve(quad, lin, PhaseConfig::random(6, rng), 60);
        double worst = 0.0;
        for (const auto& t : out.phases) worst = std::max(worst, std::abs(std::abs(t) - 1.0));
        check(worst <= 1e-12, "mm_solve preserves unit modulus");
    }

    // Gradient of the full WMMSE objective vs the assembled coefficients
    {
        arma::cx_mat weight, filter;
        ao_update_sigma_phi(theta, ch, power, noise_var, weight, filter);
        arma::cx_mat quad;
        arma::cx_vec lin;
        ao_build_lambda_alpha(weight, filter, ch, quad, lin);
        const auto objective = [&](const arma::cx_vec& t) {
            arma::cx_mat h_eff(arma::size(cov.H_theta), arma::fill::zeros);
            const arma::uword M = ch.num_rx, K = ch.num_sc;
            for (arma::uword k = 1; k <= K - 1; ++k) {
                h_eff.submat((k - 1) * M, k - 1, k * M - 1, k - 1) =
                    ch.direct_at(k) + 0.5 * ch.same_at(k) * t;
                h_eff.submat(k * M, k - 1, (k + 1) * M - 1, k - 1) =
                    0.5 * ch.shift_at(k + 1) * t;
            }
            const arma::cx_mat fh = filter * h_eff;
            return (4.0 / power) *
                   std::real(arma::trace(weight * (power * fh * fh.t() - power * fh -
                                                   power * fh.t())));
        };
        check(gradient_matches(objective, quad, lin, theta.phases, 1e-6),
              "full-pass phase gradient matches finite differences");
        const arma::vec ev = arma::eig_sym(quad);
        check(arma::abs(quad - quad.t()).max() <= 1e-10 * std::max(1e-300, arma::abs(quad).max()),
              "full-pass quadratic coefficient is Hermitian");
        check(ev.min() >= -1e-9 * std::max(1.0, ev.max()),
              "full-pass quadratic coefficient is PSD");
    }

    // Gradient of the per-SC objective vs the recursive coefficients. The
    // surrogate is smooth in theta as a free complex vector, so off-circle
    // finite-difference probes are fine.
    {
        const RaoState st = rao_update(theta, ch, power, noise_var);
        const auto objective = [&](const arma::cx_vec& t) {
            PhaseConfig p;
            p.phases = t;
            return (4.0 / power) * (-rao_surrogate(p, ch, power, noise_var, st));
        };
        check(gradient_matches(objective, st.quad, st.lin, theta.phases, 1e-6),
              "per-SC phase gradient matches finite differences");
        const arma::vec ev = arma::eig_sym(st.quad);
        check(ev.min() >= -1e-9 * std::max(1.0, ev.max()),
              "per-SC quadratic coefficient is PSD");
        check(arma::all(st.weight >= 1.0 - 1e-12), "per-SC weights stay above one");
    }

    // Detector invariants on one noisy frame
    {
        const Constellation cons = Constellation::qpsk_gray();
        Rng frame_rng(seed + 1);
        const OfdmFrame frame = OfdmFrame::random(cons, ch.num_sc, power, frame_rng);
        const RisMessage msg = RisMessage::random(cfg.ris_blocks, cfg.group_size, frame_rng);
        const RxFrame rx = simulate_rx(frame, msg, theta, ch, noise_var, frame_rng);
        BmpConfig bmp;
        const BmpResult det = bmp_detect(rx.y, theta, ch, noise_var, cons, power,
                                         cfg.ris_blocks, cfg.group_size, bmp);
        check(arma::all(det.x_var >= 0.0), "posterior symbol variances are nonnegative");
        check(arma::all(det.c_belief.mean >= 0.0) && arma::all(det.c_belief.mean <= 1.0),
              "bit means stay in [0,1]");
        check(arma::all(det.c_belief.var >= 0.0) && arma::all(det.c_belief.var <= 0.25 + 1e-9),
              "bit variances stay in [0,1/4]");

        const CompositeStats xi =
            update_xi_stats(CBelief::uninformative(cfg.ris_blocks, cfg.group_size), theta, ch);
        const MrcStats mrc = mrc_stats(xi, rx.y, ch, noise_var);
        std::vector<cx> pts(cons.points);
        for (auto& p : pts) p *= std::sqrt(power);
        const arma::mat fwd = forward_recursion(mrc, pts, ch.num_sc);
        const arma::mat bwd = backward_recursion(mrc, pts, ch.num_sc);
        double worst = 0.0;
        for (arma::uword k = 0; k < fwd.n_rows; ++k) {
            worst = std::max(worst, std::abs(arma::accu(fwd.row(k)) - 1.0));
            worst = std::max(worst, std::abs(arma::accu(bwd.row(k)) - 1.0));
        }
        check(worst <= 1e-12, "messages are normalized");
        check(arma::all(arma::vectorise(xi.var_same) >= 0.0) &&
                  arma::all(arma::vectorise(xi.var_shift) >= 0.0),
              "composite-channel variances are nonnegative");
    }

    os << (check.failures == 0 ? "selftest: all checks passed\n"
                               : "selftest: FAILURES PRESENT\n");
    return check.failures;
}

int cli_main(int argc, char** argv) {
    CLI::App app{"RIS-aided FRM-OFDM link-level simulator"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_path;
    std::vector<std::string> overrides;
    std::uint64_t seed = 0;
    bool seed_set = false;
    long long trials = -1;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "flat key=value config file");
        sub->add_option("--out", out_path, "output CSV path (default stdout)");
        sub->add_option("--set", overrides, "extra key=value overrides")->take_all();
        sub->add_option_function<std::uint64_t>(
            "--seed", [&](std::uint64_t v) { seed = v; seed_set = true; }, "master seed");
        sub->add_option("--trials", trials, "Monte-Carlo trials");
    };

    CLI::App* conv = app.add_subcommand("convergence", "sum rate vs outer iteration");
    CLI::App* region = app.add_subcommand("rate-region", "rate-region corner points");
    CLI::App* rate = app.add_subcommand("rate-sweep", "sum-rate curves over M, N or P");
    CLI::App* ber = app.add_subcommand("ber-sweep", "detector BER over P or B");
    CLI::App* self = app.add_subcommand("selftest", "run the invariant battery");
    for (CLI::App* sub : {conv, region, rate, ber, self}) add_common(sub);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        ExperimentConfig cfg;
        if (!config_path.empty()) cfg = ExperimentConfig::from_file(config_path);
        if (seed_set) cfg.seed = seed;
        if (trials >= 1) cfg.trials = arma::uword(trials);
        if (!out_path.empty()) cfg.out = out_path;
        for (const std::string& kv : overrides) {
            const auto eq = kv.find('=');
            require(eq != std::string::npos, "--set expects key=value");
            cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
        }

        if (self->parsed()) {
            const int failures = run_selftest(std::cout, seed_set ? seed : 7);
            return failures == 0 ? 0 : 1;
        }

        ResultTable rows;
        if (conv->parsed()) rows = run_convergence(cfg);
        if (region->parsed()) rows = run_rate_region(cfg);
        if (rate->parsed()) rows = run_rate_sweep(cfg, cfg.sweep.empty() ? "P" : cfg.sweep);
        if (ber->parsed()) rows = run_ber_sweep(cfg, cfg.sweep.empty() ? "P" : cfg.sweep);

        if (cfg.out.empty())
            write_csv(rows, std::cout);
        else
            write_csv_file(rows, cfg.out);
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace frmofdm
