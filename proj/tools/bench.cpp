// Serial vs OpenMP timing on the Monte-Carlo workloads that dominate the
// experiment harness, plus an equality check between both paths.

#include "frmofdm/experiments.hpp"
#include "frmofdm/parallel.hpp"

#include <chrono>
#include <cstdio>

using namespace frmofdm;

namespace {

double now_s() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

struct Workload {
    const char* name;
    std::size_t n;
    std::function<double(bool serial)> run; // returns a checksum
};

} // namespace

int main() {
    setenv("OPENBLAS_NUM_THREADS", "1", 0); // keep BLAS off the OpenMP workers
    ExperimentConfig cfg;
    cfg.num_rx = 2;
    cfg.num_sc = 8;
    cfg.num_elements = 16;
    cfg.ris_blocks = 16;
    cfg.group_size = 1;
    cfg.trials = 64;
    cfg.frames_per_trial = 4;
    Rng rng(99);
    const ChannelRealization ch = trial_channel(cfg, rng);
    const PhaseConfig theta = PhaseConfig::random(ch.num_elements, rng);
    const Constellation cons = Constellation::qpsk_gray();
    const double power = cfg.power(), noise_var = cfg.noise_var();

    std::vector<Workload> workloads;

    workloads.push_back({"sample covariance (20000 frames)", 20000, [&](bool serial) {
        const std::size_t frames = 20000;
        const arma::uword mk = ch.num_rx * ch.num_sc;
        arma::cx_mat acc = par::reduce_chunked<arma::cx_mat>(
            frames, par::worker_count(), arma::cx_mat(mk, mk, arma::fill::zeros),
            [&](arma::cx_mat& sum, std::size_t lo, std::size_t hi) {
                for (std::size_t i = lo; i < hi; ++i) {
                    Rng local = Rng::substream(4242, i);
                    const OfdmFrame f = OfdmFrame::random(cons, ch.num_sc, power, local);
                    const RisMessage m =
                        RisMessage::random(cfg.ris_blocks, cfg.group_size, local);
                    const RxFrame rx = simulate_rx(f, m, theta, ch, noise_var, local);
                    sum += rx.y * rx.y.t();
                }
            },
            serial);
        return arma::accu(arma::abs(acc));
    }});

    workloads.push_back({"conditional user rate (4000 samples)", 4000, [&](bool serial) {
        (void)serial; // chunk layout fixed by worker count; see parallel.hpp
        Rng r(7);
        return conditional_rate_user(theta, ch, power, noise_var, cfg.ris_blocks,
                                     cfg.group_size, 4000, r);
    }});

    workloads.push_back({"BER trial batch (64 trials)", 64, [&](bool serial) {
        std::vector<double> ber(cfg.trials);
        par::for_each_index(
            cfg.trials,
            [&](std::size_t t) {
                Rng local = Rng::substream(cfg.seed, t);
                const ChannelRealization tch = trial_channel(cfg, local);
                const PhaseConfig tth = PhaseConfig::random(tch.num_elements, local);
                BmpConfig bmp;
                arma::uword errs = 0, bits = 0;
                for (arma::uword f = 0; f < cfg.frames_per_trial; ++f) {
                    const OfdmFrame fr = OfdmFrame::random(cons, cfg.num_sc, power, local);
                    const RisMessage ms =
                        RisMessage::random(cfg.ris_blocks, cfg.group_size, local);
                    const RxFrame rx = simulate_rx(fr, ms, tth, tch, noise_var, local);
                    const BmpResult det =
                        bmp_detect(rx.y, tth, tch, noise_var, cons, power, cfg.ris_blocks,
                                   cfg.group_size, bmp);
                    for (arma::uword k = 0; k + 1 < cfg.num_sc; ++k) {
                        errs += cons.bit_errors(fr.sym_indices[k], det.x_hard[k]);
                        bits += cons.bits_per_symbol;
                    }
                }
                ber[t] = double(errs) / double(bits);
            },
            serial);
        double acc = 0.0;
        for (double b : ber) acc += b;
        return acc;
    }});

    std::printf("%-38s %10s %10s %8s %s\n", "workload", "serial[s]", "openmp[s]", "speedup",
                "match");
    for (auto& w : workloads) {
        w.run(false); // warm caches and the OpenMP runtime before timing
        double ts = 1e9, tp = 1e9;
        double ref = 0.0, par_val = 0.0;
        for (int rep = 0; rep < 3; ++rep) { // best of three on each path
            const double t0 = now_s();
            ref = w.run(true);
            const double t1 = now_s();
            par_val = w.run(false);
            const double t2 = now_s();
            ts = std::min(ts, t1 - t0);
            tp = std::min(tp, t2 - t1);
        }
        std::printf("%-38s %10.3f %10.3f %8.2fx %s\n", w.name, ts, tp, ts / std::max(tp, 1e-9),
                    par_val == ref ? "bitwise" : "DIFFERS");
    }
    std::printf("workers: %d\n", par::worker_count());
    return 0;
}
