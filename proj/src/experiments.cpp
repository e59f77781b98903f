#include "frmofdm/experiments.hpp"

#include "frmofdm/parallel.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace frmofdm {

SystemConfig ExperimentConfig::system() const {
    SystemConfig s;
    s.num_rx = num_rx;
    s.num_sc = num_sc;
    s.num_elements = num_elements;
    s.ris_blocks = ris_blocks;
    s.group_size = group_size;
    s.taps_direct = taps_direct;
    s.taps_user_ris = taps_user_ris;
    s.taps_ris_bs = taps_ris_bs;
    return s;
}

GeometryConfig ExperimentConfig::geometry() const {
    GeometryConfig g;
    g.ris_x_fraction = ris_fraction;
    if (num_elements % 8 == 0) {
        g.array_dim_x = 8;
        g.array_dim_y = num_elements / 8;
    } else {
        g.array_dim_x = num_elements;
        g.array_dim_y = 1;
    }
    return g;
}

void ExperimentConfig::validate() const {
    system().validate();
    geometry().validate();
    require(trials >= 1, "config: trials must be >= 1");
    require(optimizer == "none" || optimizer == "ao" || optimizer == "rao",
            "config: optimizer must be none, ao or rao");
    require(channel == "physical" || channel == "unit",
            "config: channel must be physical or unit");
    require(!(scheme == Scheme::no_ris && optimizer != "none"),
            "config: no-ris has no phases to optimize");
    require(noise_dbw < 100.0 && power_dbw < 100.0, "config: implausible power levels");
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
    auto to_u = [&](const std::string& v) { return std::stoull(v); };
    auto to_d = [&](const std::string& v) { return std::stod(v); };
    if (key == "scheme") scheme = scheme_from_string(value);
    else if (key == "M") num_rx = to_u(value);
    else if (key == "K") num_sc = to_u(value);
    else if (key == "N") num_elements = to_u(value);
    else if (key == "B") ris_blocks = to_u(value);
    else if (key == "L") group_size = to_u(value);
    else if (key == "P_dbw") power_dbw = to_d(value);
    else if (key == "sigma2_dbw") noise_dbw = to_d(value);
    else if (key == "optimizer") optimizer = value;
    else if (key == "trials") trials = to_u(value);
    else if (key == "seed") seed = to_u(value);
    else if (key == "mm_iters") mm_iters = to_u(value);
    else if (key == "outer_iters") outer_iters = to_u(value);
    else if (key == "bmp_max_iters") bmp_max_iters = to_u(value);
    else if (key == "bmp_epsilon") bmp_epsilon = to_d(value);
    else if (key == "oversample") oversample = to_u(value);
    else if (key == "rate_samples") rate_samples = to_u(value);
    else if (key == "frames_per_trial") frames_per_trial = to_u(value);
    else if (key == "sweep") sweep = value;
    else if (key == "sweep_values") {
        sweep_values.clear();
        std::stringstream ss(value);
        std::string tok;
        while (std::getline(ss, tok, ',')) sweep_values.push_back(std::stod(tok));
    } else if (key == "out") out = value;
    else if (key == "ris_fraction") {
        if (value == "random") {
            ris_fraction_random = true;
        } else {
            ris_fraction_random = false;
            ris_fraction = to_d(value);
        }
    } else if (key == "taps_direct") taps_direct = to_u(value);
    else if (key == "taps_user_ris") taps_user_ris = to_u(value);
    else if (key == "taps_ris_bs") taps_ris_bs = to_u(value);
    else if (key == "channel") channel = value;
    else if (key == "direct_weight") direct_weight = to_d(value);
    else throw std::invalid_argument("config: unknown key '" + key + "'");
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    ExperimentConfig cfg;
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            const auto b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (!key.empty()) cfg.set(key, value);
    }
    return cfg;
}

void write_csv(const ResultTable& rows, std::ostream& os) {
    os << "experiment,seed,trial,sweep_var,sweep_val,metric,value\n";
    char buf[64];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%.12g", r.sweep_val);
        os << r.experiment << ',' << r.seed << ',' << r.trial << ',' << r.sweep_var << ',' << buf
           << ',' << r.metric << ',';
        std::snprintf(buf, sizeof(buf), "%.12g", r.value);
        os << buf << '\n';
    }
}

void write_csv_file(const ResultTable& rows, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open output file " + path);
    write_csv(rows, os);
}

ChannelRealization trial_channel(const ExperimentConfig& cfg, Rng& trial_rng) {
    GeometryConfig geom = cfg.geometry();
    if (cfg.ris_fraction_random) geom.ris_x_fraction = trial_rng.uniform();
    ChannelRealization ch = gen_channel_realization(geom, cfg.system(), trial_rng);
    if (cfg.channel == "unit") {
        const double scale = 1.0 / std::sqrt(double(cfg.num_elements));
        for (auto& v : ch.h_ub) v = cfg.direct_weight * trial_rng.cgauss();
        for (auto& v : ch.h_ur) v = trial_rng.cgauss();
        for (auto& v : ch.h_rb) v = scale * trial_rng.cgauss();
        rebuild_cascades(ch);
    }
    return ch;
}

PhaseConfig trial_phases(const ExperimentConfig& cfg, const ChannelRealization& ch,
                         Rng& trial_rng, const TraceSink& trace) {
    if (cfg.optimizer == "none") return PhaseConfig::random(ch.num_elements, trial_rng);
    OptimizerOptions opt;
    opt.outer_iters = cfg.outer_iters;
    opt.mm_iters = cfg.mm_iters;
    if (cfg.optimizer == "ao")
        return ao_optimize(ch, cfg.power(), cfg.noise_var(), opt, trial_rng, trace);
    return rao_optimize(ch, cfg.power(), cfg.noise_var(), opt, trial_rng, trace);
}

ChannelRealization orm_view(const ChannelRealization& ch) {
    ChannelRealization v = ch;
    v.cascade_shift.zeros();
    return v;
}

namespace {

// Runs trials in parallel, each into its own row buffer, and concatenates in
// trial order so the CSV bytes never depend on the worker count.
template <class TrialFn>
ResultTable run_trials(const ExperimentConfig& cfg, TrialFn&& fn) {
    std::vector<ResultTable> per_trial(cfg.trials);
    par::for_each_index(cfg.trials, [&](std::size_t t) {
        Rng rng = Rng::substream(cfg.seed, t);
        fn(arma::uword(t), rng, per_trial[t]);
    });
    ResultTable all;
    for (auto& rows : per_trial)
        all.insert(all.end(), rows.begin(), rows.end());
    return all;
}

void append_mean(ResultTable& rows, const std::string& experiment, std::uint64_t seed,
                 const std::string& sweep_var, double sweep_val, const std::string& metric) {
    double acc = 0.0;
    arma::uword n = 0;
    for (const auto& r : rows)
        if (r.metric == metric && r.sweep_val == sweep_val && r.sweep_var == sweep_var) {
            acc += r.value;
            ++n;
        }
    if (n > 0)
        rows.push_back({experiment, seed, 0, sweep_var, sweep_val, "mean/" + metric,
                        acc / double(n)});
}

} // namespace

ResultTable run_convergence(const ExperimentConfig& cfg) {
    cfg.validate();
    require(cfg.optimizer == "ao" || cfg.optimizer == "rao",
            "run_convergence: optimizer must be ao or rao");
    return run_trials(cfg, [&](arma::uword trial, Rng& rng, ResultTable& rows) {
        const ChannelRealization ch = trial_channel(cfg, rng);
        const auto sink = [&](const IterationRecord& rec, const PhaseConfig& theta) {
            const double rate = sum_rate(theta, ch, cfg.power(), cfg.noise_var());
            rows.push_back({"convergence", cfg.seed, trial, "iteration", double(rec.iteration),
                            "sum_rate", rate});
            rows.push_back({"convergence", cfg.seed, trial, "iteration", double(rec.iteration),
                            "surrogate", rec.surrogate});
            rows.push_back({"convergence", cfg.seed, trial, "iteration", double(rec.iteration),
                            "stats_seconds", rec.stats_seconds});
        };
        trial_phases(cfg, ch, rng, sink);
    });
}

ResultTable run_rate_region(const ExperimentConfig& cfg) {
    cfg.validate();
    require(cfg.ris_blocks <= 12, "run_rate_region: B too large for the mixture estimator");
    const Constellation cons = Constellation::qpsk_gray();
    ResultTable rows = run_trials(cfg, [&](arma::uword trial, Rng& rng, ResultTable& rows) {
        const ChannelRealization ch = trial_channel(cfg, rng);
        const PhaseConfig random_theta = PhaseConfig::random(ch.num_elements, rng);
        ExperimentConfig opt_cfg = cfg;
        if (opt_cfg.optimizer == "none") opt_cfg.optimizer = "rao";
        const PhaseConfig opt_theta = trial_phases(opt_cfg, ch, rng);
        for (const Scheme scheme : {Scheme::frm, Scheme::orm}) {
            for (const bool optimized : {false, true}) {
                const PhaseConfig& theta = optimized ? opt_theta : random_theta;
                const std::string tag =
                    scheme_to_string(scheme) + (optimized ? "_opt_" : "_random_");
                const double user = conditional_rate_user(theta, ch, cfg.power(), cfg.noise_var(),
                                                          cfg.ris_blocks, cfg.group_size,
                                                          cfg.rate_samples, rng, scheme);
                const double ris = conditional_rate_ris(cons, theta, ch, cfg.power(),
                                                        cfg.noise_var(), cfg.ris_blocks,
                                                        cfg.group_size, cfg.rate_samples, rng,
                                                        scheme);
                const double sum =
                    sum_rate_scheme(scheme, theta, ch, cfg.power(), cfg.noise_var());
                rows.push_back(
                    {"rate-region", cfg.seed, trial, "", 0.0, tag + "user_rate", user});
                rows.push_back({"rate-region", cfg.seed, trial, "", 0.0, tag + "ris_rate", ris});
                rows.push_back({"rate-region", cfg.seed, trial, "", 0.0, tag + "sum_rate", sum});
            }
        }
    });
    for (const std::string scheme : {"frm", "orm"})
        for (const std::string mode : {"_random_", "_opt_"})
            for (const std::string what : {"user_rate", "ris_rate", "sum_rate"})
                append_mean(rows, "rate-region", cfg.seed, "", 0.0, scheme + mode + what);
    return rows;
}

ResultTable run_rate_sweep(const ExperimentConfig& cfg, const std::string& sweep) {
    cfg.validate();
    require(sweep == "M" || sweep == "N" || sweep == "P", "run_rate_sweep: sweep must be M, N or P");
    require(!cfg.sweep_values.empty(), "run_rate_sweep: sweep_values must be set");
    ResultTable all;
    for (const double value : cfg.sweep_values) {
        ExperimentConfig point = cfg;
        if (sweep == "M") point.num_rx = arma::uword(value);
        if (sweep == "P") point.power_dbw = value;
        if (sweep == "N") {
            point.num_elements = arma::uword(value);
            require(point.num_elements % point.group_size == 0,
                    "run_rate_sweep: N must stay divisible by L");
            point.ris_blocks = point.num_elements / point.group_size;
        }
        point.validate();
        ResultTable rows = run_trials(point, [&](arma::uword trial, Rng& rng, ResultTable& rows) {
            const ChannelRealization ch = trial_channel(point, rng);
            const PhaseConfig theta = trial_phases(point, ch, rng);
            for (const Scheme scheme :
                 {Scheme::frm, Scheme::orm, Scheme::ris_ofdm, Scheme::no_ris}) {
                const double rate =
                    sum_rate_scheme(scheme, theta, ch, point.power(), point.noise_var());
                rows.push_back({"rate-sweep", cfg.seed, trial, sweep, value,
                                scheme_to_string(scheme) + "_sum_rate", rate});
            }
            const double user = conditional_rate_user(theta, ch, point.power(),
                                                      point.noise_var(), point.ris_blocks,
                                                      point.group_size, point.rate_samples, rng);
            rows.push_back({"rate-sweep", cfg.seed, trial, sweep, value, "frm_user_rate", user});
        });
        for (const Scheme scheme : {Scheme::frm, Scheme::orm, Scheme::ris_ofdm, Scheme::no_ris})
            append_mean(rows, "rate-sweep", cfg.seed, sweep, value,
                        scheme_to_string(scheme) + "_sum_rate");
        append_mean(rows, "rate-sweep", cfg.seed, sweep, value, "frm_user_rate");
        all.insert(all.end(), rows.begin(), rows.end());
    }
    return all;
}

ResultTable run_ber_sweep(const ExperimentConfig& cfg, const std::string& sweep) {
    cfg.validate();
    require(sweep == "P" || sweep == "B", "run_ber_sweep: sweep must be P or B");
    require(!cfg.sweep_values.empty(), "run_ber_sweep: sweep_values must be set");
    require(cfg.scheme == Scheme::frm || cfg.scheme == Scheme::orm,
            "run_ber_sweep: detection applies to frm or orm");
    const Constellation cons = Constellation::qpsk_gray();
    ResultTable all;
    for (const double value : cfg.sweep_values) {
        ExperimentConfig point = cfg;
        if (sweep == "P") point.power_dbw = value;
        if (sweep == "B") {
            point.ris_blocks = arma::uword(value);
            require(point.num_elements % point.ris_blocks == 0,
                    "run_ber_sweep: B must divide N");
            point.group_size = point.num_elements / point.ris_blocks;
        }
        point.validate();
        ResultTable rows = run_trials(point, [&](arma::uword trial, Rng& rng, ResultTable& rows) {
            const ChannelRealization ch = trial_channel(point, rng);
            const PhaseConfig theta = trial_phases(point, ch, rng);
            const ChannelRealization rx_view =
                point.scheme == Scheme::orm ? orm_view(ch) : ch;
            BmpConfig bmp;
            bmp.max_iters = point.bmp_max_iters;
            bmp.epsilon = point.bmp_epsilon;
            arma::uword xb_err = 0, xb_tot = 0, cb_err = 0, cb_tot = 0;
            arma::uword gx_err = 0, gc_err = 0;
            double iters_acc = 0.0;
            std::vector<double> residual_sum(point.bmp_max_iters, 0.0);
            std::vector<arma::uword> residual_cnt(point.bmp_max_iters, 0);
            for (arma::uword f = 0; f < point.frames_per_trial; ++f) {
                const OfdmFrame frame =
                    OfdmFrame::random(cons, point.num_sc, point.power(), rng);
                const RisMessage msg =
                    RisMessage::random(point.ris_blocks, point.group_size, rng);
                const RxFrame rx =
                    point.scheme == Scheme::orm
                        ? simulate_rx_orm(frame, msg, theta, ch, point.noise_var(), rng)
                        : simulate_rx(frame, msg, theta, ch, point.noise_var(), rng);
                const BmpResult det =
                    bmp_detect(rx.y, theta, rx_view, point.noise_var(), cons, point.power(),
                               point.ris_blocks, point.group_size, bmp);
                for (arma::uword k = 0; k + 1 < point.num_sc; ++k) {
                    xb_err += cons.bit_errors(frame.sym_indices[k], det.x_hard[k]);
                    xb_tot += cons.bits_per_symbol;
                }
                for (arma::uword b = 0; b < point.ris_blocks; ++b) {
                    cb_err += (det.c_hard[b] != msg.bits[b]) ? 1 : 0;
                    ++cb_tot;
                }
                iters_acc += double(det.iterations);
                for (std::size_t i = 0; i < det.residual_trace.size(); ++i) {
                    residual_sum[i] += det.residual_trace[i];
                    ++residual_cnt[i];
                }
                const arma::uvec gx =
                    detect_x_genie(rx.y, theta, rx_view, point.noise_var(), cons, point.power(),
                                   msg);
                for (arma::uword k = 0; k + 1 < point.num_sc; ++k)
                    gx_err += cons.bit_errors(frame.sym_indices[k], gx[k]);
                const arma::uvec gc =
                    detect_c_genie(rx.y, theta, rx_view, point.noise_var(), cons, point.power(),
                                   frame, point.ris_blocks, point.group_size, bmp.gamp);
                for (arma::uword b = 0; b < point.ris_blocks; ++b)
                    gc_err += (gc[b] != msg.bits[b]) ? 1 : 0;
            }
            const double fx = double(xb_tot), fc = double(cb_tot);
            rows.push_back({"ber-sweep", cfg.seed, trial, sweep, value, "ber_x",
                            double(xb_err) / fx});
            rows.push_back({"ber-sweep", cfg.seed, trial, sweep, value, "ber_c",
                            double(cb_err) / fc});
            rows.push_back({"ber-sweep", cfg.seed, trial, sweep, value, "ber_x_genie",
                            double(gx_err) / fx});
            rows.push_back({"ber-sweep", cfg.seed, trial, sweep, value, "ber_c_genie",
                            double(gc_err) / fc});
            rows.push_back({"ber-sweep", cfg.seed, trial, sweep, value, "bmp_iterations",
                            iters_acc / double(point.frames_per_trial)});
            // per-iteration residual trace, averaged over the frames that
            // were still iterating
            for (std::size_t i = 0; i < residual_cnt.size(); ++i)
                if (residual_cnt[i] > 0)
                    rows.push_back({"ber-sweep", cfg.seed, trial, sweep, value,
                                    "bmp_residual_iter" + std::to_string(i + 1),
                                    residual_sum[i] / double(residual_cnt[i])});
        });
        for (const char* metric : {"ber_x", "ber_c", "ber_x_genie", "ber_c_genie"})
            append_mean(rows, "ber-sweep", cfg.seed, sweep, value, metric);
        all.insert(all.end(), rows.begin(), rows.end());
    }
    return all;
}

} // namespace frmofdm
