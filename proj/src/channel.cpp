#include "frmofdm/channel.hpp"

namespace frmofdm {

arma::cx_vec steering_vector(double azimuth, double elevation, const GeometryConfig& geometry) {
    geometry.validate();
    const double rho = geometry.wavelength();
    const double cx_az = std::cos(azimuth) * std::sin(elevation);
    const double sx_el = std::sin(azimuth) * std::sin(elevation);
    arma::cx_vec a_az(geometry.array_dim_x);
    for (arma::uword n = 0; n < geometry.array_dim_x; ++n)
        a_az[n] = std::polar(1.0, -2.0 * kPi * geometry.element_pitch_x * double(n) / rho * cx_az);
    arma::cx_vec a_el(geometry.array_dim_y);
    for (arma::uword n = 0; n < geometry.array_dim_y; ++n)
        a_el[n] = std::polar(1.0, +2.0 * kPi * geometry.element_pitch_y * double(n) / rho * sx_el);
    return arma::kron(a_az, a_el);
}

double path_loss_cascaded(const GeometryConfig& geometry) {
    geometry.validate();
    const double d_ur = distance(geometry.user_position, geometry.ris_position());
    const double d_rb = distance(geometry.ris_position(), geometry.bs_position);
    require(d_ur > 0.0 && d_rb > 0.0, "path_loss_cascaded: degenerate geometry");
    const double g = db_to_linear(geometry.gain_user_dbi) * db_to_linear(geometry.gain_ris_dbi) *
                     db_to_linear(geometry.gain_bs_dbi);
    const double rho = geometry.wavelength();
    const double aperture = double(geometry.array_dim_x) * double(geometry.array_dim_y) *
                            geometry.element_pitch_x * geometry.element_pitch_y;
    return g * aperture * rho * rho / (64.0 * kPi * kPi * kPi * d_ur * d_rb);
}

double path_loss_direct(double dist_m, const GeometryConfig& geometry) {
    require(dist_m > 0.0, "path_loss_direct: distance must be positive");
    return db_to_linear(geometry.pathloss_ref_db) * std::pow(dist_m, -geometry.pathloss_exp);
}

TapVector gen_taps(arma::uword tap_count, std::optional<double> kappa_db, cx los_component,
                   Rng& rng) {
    require(tap_count >= 2, "gen_taps: single tap leaves no slot for the NLoS power");
    TapVector t;
    t.coefficients.set_size(tap_count);
    t.delays.resize(tap_count);
    for (arma::uword l = 0; l < tap_count; ++l) t.delays[l] = l;
    if (kappa_db) {
        const double kappa = db_to_linear(*kappa_db);
        t.coefficients[0] = std::sqrt(kappa / (1.0 + kappa)) * los_component;
        const double nlos_var = (1.0 / (1.0 + kappa)) / double(tap_count - 1);
        for (arma::uword l = 1; l < tap_count; ++l)
            t.coefficients[l] = std::sqrt(nlos_var) * rng.cgauss();
    } else {
        const double var = 1.0 / double(tap_count);
        for (arma::uword l = 0; l < tap_count; ++l)
            t.coefficients[l] = std::sqrt(var) * rng.cgauss();
    }
    return t;
}

arma::cx_vec freq_response(const TapVector& taps, arma::uword num_sc, int shift) {
    taps.validate();
    for (arma::uword d : taps.delays)
        require(d < num_sc, "freq_response: tap delay must be below K");
    arma::cx_vec h(num_sc);
    for (arma::uword k = 1; k <= num_sc; ++k) {
        cx acc(0.0, 0.0);
        const double tone = double(int(k) - 1 + shift);
        for (arma::uword l = 0; l < taps.delays.size(); ++l)
            acc += taps.coefficients[l] *
                   std::polar(1.0, -2.0 * kPi * tone * double(taps.delays[l]) / double(num_sc));
        h[k - 1] = acc;
    }
    return h;
}

namespace {

// Azimuth/elevation of a departure direction as seen by the RIS array, which
// lies in the global x-z plane (az along x with pitch d_x, el along z with
// pitch d_y) and faces the y < 30 half-space holding both user and BS.
void ris_angles(const Vec3& from_ris_to, const Vec3& ris, double& azimuth, double& elevation) {
    const double dx = from_ris_to[0] - ris[0];
    const double dy = from_ris_to[1] - ris[1];
    const double dz = from_ris_to[2] - ris[2];
    const double r = std::sqrt(dx * dx + dy * dy + dz * dz);
    azimuth = std::atan2(dz, dx);
    const double s = std::min(1.0, std::sqrt(dx * dx + dz * dz) / r);
    elevation = std::asin(s);
    (void)dy;
}

// BS modeled as a half-wavelength ULA along the global x axis.
arma::cx_vec bs_steering(const Vec3& from_bs_to, const Vec3& bs, arma::uword num_rx) {
    const double dx = from_bs_to[0] - bs[0];
    const double r = distance(from_bs_to, bs);
    const double u = dx / r;
    arma::cx_vec a(num_rx);
    for (arma::uword m = 0; m < num_rx; ++m) a[m] = std::polar(1.0, -kPi * double(m) * u);
    return a;
}

} // namespace

arma::cx_mat ChannelRealization::stacked_same() const {
    arma::cx_mat out(num_rx * num_sc, num_elements);
    for (arma::uword k = 1; k <= num_sc; ++k)
        out.rows((k - 1) * num_rx, k * num_rx - 1) = same_at(k);
    return out;
}

arma::cx_mat ChannelRealization::stacked_shift() const {
    arma::cx_mat out(num_rx * num_sc, num_elements);
    for (arma::uword k = 1; k <= num_sc; ++k)
        out.rows((k - 1) * num_rx, k * num_rx - 1) = shift_at(k);
    return out;
}

arma::cx_vec ChannelRealization::stacked_direct() const {
    arma::cx_vec out(num_rx * num_sc);
    for (arma::uword k = 1; k <= num_sc; ++k)
        out.subvec((k - 1) * num_rx, k * num_rx - 1) = direct_at(k);
    return out;
}

void rebuild_cascades(ChannelRealization& ch) {
    const arma::uword K = ch.num_sc, M = ch.num_rx, N = ch.num_elements;
    ch.cascade_same.set_size(M, N, K);
    ch.cascade_shift.set_size(M, N, K);
    ch.cascade_same.zeros();
    ch.cascade_shift.zeros();
    for (arma::uword k = 1; k <= K; ++k) {
        if (k < K)
            ch.cascade_same.slice(k - 1) =
                ch.h_rb.slice(k - 1) * arma::diagmat(ch.h_ur.row(k - 1).st());
        if (k >= 2)
            ch.cascade_shift.slice(k - 1) =
                ch.h_rb.slice(k - 1) * arma::diagmat(ch.h_ur.row(k - 2).st());
    }
}

ChannelRealization gen_channel_realization(const GeometryConfig& geometry,
                                           const SystemConfig& system, Rng& rng) {
    geometry.validate();
    system.validate();
    require(geometry.num_elements() == system.num_elements,
            "gen_channel_realization: geometry array size must match N");

    const arma::uword M = system.num_rx, K = system.num_sc, N = system.num_elements;
    const Vec3 ris = geometry.ris_position();

    ChannelRealization ch;
    ch.num_rx = M;
    ch.num_sc = K;
    ch.num_elements = N;

    // Direct link: NLoS only, power-law loss on the taps.
    const double beta_direct =
        path_loss_direct(distance(geometry.user_position, geometry.bs_position), geometry);
    ch.h_ub.set_size(K, M);
    ch.taps_direct.reserve(M);
    for (arma::uword m = 0; m < M; ++m) {
        TapVector t = gen_taps(system.taps_direct, std::nullopt, cx(1.0, 0.0), rng);
        t.coefficients *= std::sqrt(beta_direct);
        ch.h_ub.col(m) = freq_response(t, K);
        ch.taps_direct.push_back(std::move(t));
    }

    // User-RIS link: Rician with the LoS tap following the array response of
    // the user direction. Unit power; the cascaded loss lands on the RIS-BS
    // taps below so the product carries it exactly once.
    double az_user, el_user;
    ris_angles(geometry.user_position, ris, az_user, el_user);
    const arma::cx_vec a_user = steering_vector(az_user, el_user, geometry);
    ch.h_ur.set_size(K, N);
    ch.taps_user_ris.reserve(N);
    for (arma::uword n = 0; n < N; ++n) {
        TapVector t = gen_taps(system.taps_user_ris, system.kappa_user_ris_db, a_user[n], rng);
        ch.h_ur.col(n) = freq_response(t, K);
        ch.taps_user_ris.push_back(std::move(t));
    }

    // RIS-BS link: Rician with a rank-one LoS across (m, n).
    double az_bs, el_bs;
    ris_angles(geometry.bs_position, ris, az_bs, el_bs);
    const arma::cx_vec a_bs_side = steering_vector(az_bs, el_bs, geometry);
    const arma::cx_vec a_bs = bs_steering(ris, geometry.bs_position, M);
    const double pl_cascade = path_loss_cascaded(geometry);
    ch.h_rb.set_size(M, N, K);
    ch.taps_ris_bs.assign(M, {});
    for (arma::uword m = 0; m < M; ++m) {
        ch.taps_ris_bs[m].reserve(N);
        for (arma::uword n = 0; n < N; ++n) {
            TapVector t =
                gen_taps(system.taps_ris_bs, system.kappa_ris_bs_db, a_bs[m] * a_bs_side[n], rng);
            t.coefficients *= std::sqrt(pl_cascade);
            const arma::cx_vec h = freq_response(t, K);
            for (arma::uword k = 0; k < K; ++k) ch.h_rb(m, n, k) = h[k];
            ch.taps_ris_bs[m].push_back(std::move(t));
        }
    }

    rebuild_cascades(ch);
    return ch;
}

} // namespace frmofdm
