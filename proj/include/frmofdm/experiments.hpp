#pragma once

#include "frmofdm/detector.hpp"
#include "frmofdm/optimizer.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace frmofdm {

// One experiment invocation: dimensions, scheme, optimizer choice and
// Monte-Carlo budget. All values can come from a flat key=value config file
// with CLI overrides.
struct ExperimentConfig {
    Scheme scheme = Scheme::frm;
    arma::uword num_rx = 4;       // M
    arma::uword num_sc = 8;       // K
    arma::uword num_elements = 32; // N
    arma::uword ris_blocks = 32;  // B
    arma::uword group_size = 1;   // L
    double power_dbw = 0.0;
    double noise_dbw = -60.0;
    std::string optimizer = "none"; // none | ao | rao
    arma::uword trials = 100;
    std::uint64_t seed = 1;
    arma::uword mm_iters = 100;
    arma::uword outer_iters = 200;
    arma::uword bmp_max_iters = 10;
    double bmp_epsilon = 1e-3;
    arma::uword oversample = 8;
    arma::uword rate_samples = 200;   // Monte-Carlo samples for conditional rates
    arma::uword frames_per_trial = 10; // detection frames per trial in BER runs
    std::string sweep;                 // M | N | P | B
    std::vector<double> sweep_values;
    std::string out;
    bool ris_fraction_random = true; // redraw the RIS placement per trial
    double ris_fraction = 0.5;       // used when not random
    arma::uword taps_direct = 8, taps_user_ris = 8, taps_ris_bs = 6;
    // "physical": scene geometry with path loss. "unit": i.i.d. unit-power
    // links with the reflected path scaled by 1/sqrt(N), handy when the
    // absolute receive level matters (e.g. the detector stopping rule).
    std::string channel = "physical";
    double direct_weight = 1.0; // direct-link amplitude weight in unit profile

    double power() const { return db_to_linear(power_dbw); }
    double noise_var() const { return db_to_linear(noise_dbw); }

    SystemConfig system() const;
    GeometryConfig geometry() const;
    void validate() const;

    /// Apply one "key=value" assignment; throws on unknown keys.
    void set(const std::string& key, const std::string& value);

    static ExperimentConfig from_file(const std::string& path);
};

// One output record; every experiment emits only these.
struct ResultRow {
    std::string experiment;
    std::uint64_t seed;
    arma::uword trial;
    std::string sweep_var;
    double sweep_val;
    std::string metric;
    double value;
};

using ResultTable = std::vector<ResultRow>;

void write_csv(const ResultTable& rows, std::ostream& os);
void write_csv_file(const ResultTable& rows, const std::string& path);

/// Per-trial channel draw; redraws the RIS placement when configured to.
ChannelRealization trial_channel(const ExperimentConfig& cfg, Rng& trial_rng);

/// Phase configuration per the config's optimizer setting ("none" = random).
PhaseConfig trial_phases(const ExperimentConfig& cfg, const ChannelRealization& ch,
                         Rng& trial_rng, const TraceSink& trace = nullptr);

/// Receiver-side view of a realization under the ORM scheme (no shifted-SC
/// path).
ChannelRealization orm_view(const ChannelRealization& ch);

/// Sum rate versus outer iteration for the configured optimizer.
ResultTable run_convergence(const ExperimentConfig& cfg);

/// Rate-region corner data (RIS rate, user rate, sum rate) for FRM and ORM
/// with random and optimized phases.
ResultTable run_rate_region(const ExperimentConfig& cfg);

/// Sum-rate curves for all four schemes along an M, N or P sweep.
ResultTable run_rate_sweep(const ExperimentConfig& cfg, const std::string& sweep);

/// BER of the symbol and RIS-bit detectors (plus genie bounds) along a P or B
/// sweep.
ResultTable run_ber_sweep(const ExperimentConfig& cfg, const std::string& sweep);

/// Invariant battery; prints one line per check, returns the failure count.
int run_selftest(std::ostream& os, std::uint64_t seed = 7);

int cli_main(int argc, char** argv);

} // namespace frmofdm
