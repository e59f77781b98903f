#pragma once

#include "frmofdm/common.hpp"

#include <array>

namespace frmofdm {

using Vec3 = std::array<double, 3>;

inline double distance(const Vec3& a, const Vec3& b) {
    double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

// Scene layout and large-scale constants. The RIS sits at (50*ris_x_fraction,
// 30, 50) in the default scene; the fraction is redrawn per Monte-Carlo trial
// by the experiment harness.
struct GeometryConfig {
    Vec3 bs_position{0.0, 0.0, 50.0};
    Vec3 user_position{50.0, 0.0, 0.0};
    double ris_x_fraction = 0.5; // in [0, 1]
    double carrier_freq_hz = 915e6;
    double element_pitch_x = 3e7 / 915e6; // meters
    double element_pitch_y = 3e7 / 915e6;
    arma::uword array_dim_x = 8; // array_dim_x * array_dim_y == N
    arma::uword array_dim_y = 1;
    double gain_user_dbi = 0.0;
    double gain_ris_dbi = 5.0;
    double gain_bs_dbi = 0.0;
    double pathloss_ref_db = -30.0; // direct link reference at 1 m
    double pathloss_exp = 2.2;

    double wavelength() const { return kSpeedOfLight / carrier_freq_hz; }

    Vec3 ris_position() const { return {50.0 * ris_x_fraction, 30.0, 50.0}; }

    arma::uword num_elements() const { return array_dim_x * array_dim_y; }

    void validate() const {
        require(ris_x_fraction >= 0.0 && ris_x_fraction <= 1.0,
                "geometry: ris_x_fraction must lie in [0,1]");
        require(carrier_freq_hz > 0.0, "geometry: carrier frequency must be positive");
        require(element_pitch_x > 0.0 && element_pitch_y > 0.0,
                "geometry: element pitch must be positive");
        require(array_dim_x >= 1 && array_dim_y >= 1, "geometry: array dims must be positive");
        require(distance(user_position, ris_position()) > 0.0 &&
                    distance(ris_position(), bs_position) > 0.0 &&
                    distance(user_position, bs_position) > 0.0,
                "geometry: degenerate placement, all distances must be positive");
    }
};

} // namespace frmofdm
