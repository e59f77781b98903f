#include "frmofdm/frm.hpp"

#include <doctest.h>

using namespace frmofdm;

namespace {

SystemConfig small_system(arma::uword m, arma::uword k, arma::uword n, arma::uword b) {
    SystemConfig s;
    s.num_rx = m;
    s.num_sc = k;
    s.num_elements = n;
    s.ris_blocks = b;
    s.group_size = n / b;
    s.taps_direct = std::min<arma::uword>(4, k);
    s.taps_user_ris = std::min<arma::uword>(4, k);
    s.taps_ris_bs = std::min<arma::uword>(3, k);
    return s;
}

GeometryConfig geometry_for(arma::uword n) {
    GeometryConfig g;
    g.array_dim_x = n;
    g.array_dim_y = 1;
    return g;
}

ChannelRealization draw(const SystemConfig& sys, std::uint64_t seed) {
    Rng rng(seed);
    return gen_channel_realization(geometry_for(sys.num_elements), sys, rng);
}

} // namespace

TEST_CASE("group expansion") {
    CHECK(arma::all(group_expand({1, 0}, 2) == arma::vec{1, 1, 0, 0}));
    CHECK(arma::all(group_expand({1, 0, 1}, 1) == arma::vec{1, 0, 1}));
    CHECK(arma::all(group_expand({1, 0, 1}, 3) == arma::vec{1, 1, 1, 0, 0, 0, 1, 1, 1}));
}

TEST_CASE("phase config enforces unit modulus") {
    CHECK_THROWS_AS(PhaseConfig(arma::cx_vec{cx(0.5, 0.0)}), std::invalid_argument);
    Rng rng(3);
    const PhaseConfig p = PhaseConfig::random(16, rng);
    for (const auto& t : p.phases) CHECK(std::abs(std::abs(t) - 1.0) <= 1e-15);
}

TEST_CASE("effective channel structure") {
    const SystemConfig sys = small_system(2, 6, 4, 4);
    ChannelRealization ch = draw(sys, 21);
    Rng rng(22);
    const PhaseConfig theta = PhaseConfig::random(4, rng);

    SUBCASE("direct-link only when the RIS cascades vanish") {
        ChannelRealization direct_only = ch;
        direct_only.h_ur.zeros();
        rebuild_cascades(direct_only);
        const arma::cx_mat h_eff = build_effective_channel(direct_only, theta);
        for (arma::uword k = 1; k + 1 <= sys.num_sc; ++k) {
            const arma::cx_vec blk = h_eff.submat((k - 1) * 2, k - 1, k * 2 - 1, k - 1);
            CHECK(arma::abs(blk - direct_only.h_ub.row(k - 1).st()).max() < 1e-14);
            const arma::cx_vec sub = h_eff.submat(k * 2, k - 1, (k + 1) * 2 - 1, k - 1);
            CHECK(arma::abs(sub).max() == 0.0);
        }
    }
    SUBCASE("smallest case K=2, M=1 by definition") {
        const SystemConfig tiny = small_system(1, 2, 4, 4);
        ChannelRealization c2 = draw(tiny, 23);
        const arma::cx_mat h_eff = build_effective_channel(c2, theta);
        REQUIRE(h_eff.n_rows == 2);
        REQUIRE(h_eff.n_cols == 1);
        const cx expect_top = c2.h_ub(0, 0) + 0.5 * arma::as_scalar(c2.same_at(1) * theta.phases);
        const cx expect_bot = 0.5 * arma::as_scalar(c2.shift_at(2) * theta.phases);
        CHECK(std::abs(h_eff(0, 0) - expect_top) < 1e-14);
        CHECK(std::abs(h_eff(1, 0) - expect_bot) < 1e-14);
    }
    SUBCASE("column support is the bi-diagonal pair of blocks") {
        const arma::cx_mat h_eff = build_effective_channel(ch, theta);
        for (arma::uword col = 0; col < h_eff.n_cols; ++col)
            for (arma::uword blk = 0; blk < sys.num_sc; ++blk) {
                const double mag =
                    arma::abs(h_eff.submat(blk * 2, col, (blk + 1) * 2 - 1, col)).max();
                if (blk == col || blk == col + 1)
                    CHECK(mag > 0.0);
                else
                    CHECK(mag == 0.0);
            }
    }
}

TEST_CASE("frequency-domain receive model") {
    const SystemConfig sys = small_system(2, 6, 4, 4);
    const ChannelRealization ch = draw(sys, 31);
    const Constellation cons = Constellation::qpsk_gray();
    Rng rng(32);
    const PhaseConfig theta = PhaseConfig::random(4, rng);
    const OfdmFrame frame = OfdmFrame::random(cons, sys.num_sc, 2.0, rng);

    SUBCASE("all-static state has no inter-SC term") {
        const RisMessage msg = RisMessage::all_on(4, 1);
        Rng noise(1);
        const RxFrame rx = simulate_rx(frame, msg, theta, ch, 0.0, noise);
        for (arma::uword k = 1; k <= sys.num_sc; ++k) {
            arma::cx_vec expect(2, arma::fill::zeros);
            if (k < sys.num_sc)
                expect = frame.at(k) * (ch.h_ub.row(k - 1).st() + ch.same_at(k) * theta.phases);
            CHECK(arma::abs(rx.block(k, 2) - expect).max() < 1e-12);
        }
    }
    SUBCASE("all-hopping state shifts every symbol one subcarrier up") {
        const RisMessage msg(arma::uvec(4, arma::fill::zeros), 1);
        Rng noise(1);
        const RxFrame rx = simulate_rx(frame, msg, theta, ch, 0.0, noise);
        for (arma::uword k = 1; k <= sys.num_sc; ++k) {
            arma::cx_vec expect(2, arma::fill::zeros);
            if (k < sys.num_sc) expect += frame.at(k) * ch.h_ub.row(k - 1).st();
            if (k >= 2) expect += frame.at(k - 1) * (ch.shift_at(k) * theta.phases);
            CHECK(arma::abs(rx.block(k, 2) - expect).max() < 1e-12);
        }
    }
    SUBCASE("guard symbols: y_1 has no previous-SC term, y_K no same-SC term") {
        Rng bits(33);
        const RisMessage msg = RisMessage::random(4, 1, bits);
        Rng noise(1);
        const RxFrame rx = simulate_rx(frame, msg, theta, ch, 0.0, noise);
        const arma::cx_vec on = theta.phases % arma::conv_to<arma::cx_vec>::from(msg.state);
        const arma::cx_vec y1_expect = frame.at(1) * (ch.h_ub.row(0).st() + ch.same_at(1) * on);
        CHECK(arma::abs(rx.block(1, 2) - y1_expect).max() < 1e-12);
        const arma::cx_vec yk_expect =
            frame.at(sys.num_sc - 1) * (ch.shift_at(sys.num_sc) * (theta.phases - on));
        CHECK(arma::abs(rx.block(sys.num_sc, 2) - yk_expect).max() < 1e-12);
    }
    SUBCASE("first subcarrier carries only noise when the direct link is gone and all hop") {
        ChannelRealization blocked = ch;
        blocked.h_ub.zeros();
        const RisMessage msg(arma::uvec(4, arma::fill::zeros), 1);
        Rng n1(77), n2(77);
        const RxFrame rx = simulate_rx(frame, msg, theta, blocked, 0.05, n1);
        const arma::cx_vec w1 = cgauss_vec(n2, 2, 0.05); // the same first noise draw
        CHECK(arma::abs(rx.block(1, 2) - w1).max() == 0.0);
    }
    SUBCASE("linearity in the symbols for a fixed noise draw") {
        Rng bits(34);
        const RisMessage msg = RisMessage::random(4, 1, bits);
        OfdmFrame doubled = frame;
        doubled.symbols *= 2.0;
        Rng n1(9), n2(9);
        const RxFrame a = simulate_rx(frame, msg, theta, ch, 0.0, n1);
        const RxFrame b = simulate_rx(doubled, msg, theta, ch, 0.0, n2);
        CHECK(arma::abs(b.y - 2.0 * a.y).max() < 1e-12);
    }
}

TEST_CASE("on-off baseline") {
    const SystemConfig sys = small_system(2, 6, 4, 4);
    const ChannelRealization ch = draw(sys, 41);
    const Constellation cons = Constellation::qpsk_gray();
    Rng rng(42);
    const PhaseConfig theta = PhaseConfig::random(4, rng);
    const OfdmFrame frame = OfdmFrame::random(cons, sys.num_sc, 1.0, rng);

    SUBCASE("all-on states coincide with the hopping scheme") {
        const RisMessage msg = RisMessage::all_on(4, 1);
        Rng n1(5), n2(5);
        const RxFrame a = simulate_rx(frame, msg, theta, ch, 1e-4, n1);
        const RxFrame b = simulate_rx_orm(frame, msg, theta, ch, 1e-4, n2);
        CHECK(arma::abs(a.y - b.y).max() == 0.0);
    }
    SUBCASE("all-off states leave only the direct link") {
        const RisMessage msg(arma::uvec(4, arma::fill::zeros), 1);
        Rng noise(1);
        const RxFrame rx = simulate_rx_orm(frame, msg, theta, ch, 0.0, noise);
        for (arma::uword k = 1; k + 1 <= sys.num_sc; ++k)
            CHECK(arma::abs(rx.block(k, 2) - frame.at(k) * ch.h_ub.row(k - 1).st()).max() <
                  1e-12);
    }
    SUBCASE("paired draws: on-off reflects strictly less signal energy") {
        double frm_energy = 0.0, orm_energy = 0.0;
        Rng draw_rng(43);
        ChannelRealization reflected_only = ch;
        reflected_only.h_ub.zeros();
        for (int trial = 0; trial < 200; ++trial) {
            const RisMessage msg = RisMessage::random(4, 1, draw_rng);
            const OfdmFrame f = OfdmFrame::random(cons, sys.num_sc, 1.0, draw_rng);
            Rng nz(1);
            const RxFrame a = simulate_rx(f, msg, theta, reflected_only, 0.0, nz);
            const RxFrame b = simulate_rx_orm(f, msg, theta, reflected_only, 0.0, nz);
            frm_energy += std::pow(arma::norm(a.y), 2);
            orm_energy += std::pow(arma::norm(b.y), 2);
        }
        CHECK(frm_energy > orm_energy);
    }
}

TEST_CASE("time-domain oracle") {
    SUBCASE("matches the frequency-domain model on random seeds") {
        const SystemConfig sys = small_system(2, 8, 8, 8);
        const Constellation cons = Constellation::qpsk_gray();
        for (std::uint64_t seed = 0; seed < 12; ++seed) {
            Rng rng(1000 + seed);
            const ChannelRealization ch = gen_channel_realization(geometry_for(8), sys, rng);
            const PhaseConfig theta = PhaseConfig::random(8, rng);
            const RisMessage msg = RisMessage::random(8, 1, rng);
            const OfdmFrame frame = OfdmFrame::random(cons, 8, 1.0, rng);
            Rng noise(1);
            const RxFrame model = simulate_rx(frame, msg, theta, ch, 0.0, noise);
            const RxFrame oracle = simulate_time_domain(frame, msg, theta, ch, 8);
            const double rel = arma::abs(model.y - oracle.y).max() / arma::abs(model.y).max();
            CHECK(rel < 1e-8);
        }
    }
    SUBCASE("single hopping element moves energy one subcarrier up") {
        SystemConfig sys = small_system(1, 8, 1, 1);
        ChannelRealization ch = draw(sys, 51);
        ch.h_ub.zeros();
        // flat single-tap links so the shift is clean
        ch.h_ur.fill(cx(1.0, 0.0));
        ch.h_rb.fill(cx(1.0, 0.0));
        rebuild_cascades(ch);
        for (auto& t : ch.taps_direct) {
            t.coefficients = {cx(0.0, 0.0)};
            t.delays = {0};
        }
        for (auto& t : ch.taps_user_ris) {
            t.coefficients = {cx(1.0, 0.0)};
            t.delays = {0};
        }
        for (auto& row : ch.taps_ris_bs)
            for (auto& t : row) {
                t.coefficients = {cx(1.0, 0.0)};
                t.delays = {0};
            }
        OfdmFrame frame;
        frame.power = 1.0;
        frame.symbols.zeros(7);
        frame.sym_indices.zeros(7);
        frame.symbols[2] = cx(1.0, 0.0); // only SC 3 active
        const RisMessage msg(arma::uvec{0}, 1);
        const PhaseConfig theta = PhaseConfig::all_ones(1);
        const RxFrame rx = simulate_time_domain(frame, msg, theta, ch, 8);
        for (arma::uword k = 1; k <= 8; ++k) {
            if (k == 4)
                CHECK(std::abs(rx.y[k - 1]) == doctest::Approx(1.0).epsilon(1e-9));
            else
                CHECK(std::abs(rx.y[k - 1]) < 1e-9);
        }
    }
    SUBCASE("undersampled grid is rejected") {
        const SystemConfig sys = small_system(1, 4, 2, 2);
        const ChannelRealization ch = draw(sys, 52);
        const Constellation cons = Constellation::qpsk_gray();
        Rng rng(53);
        const OfdmFrame frame = OfdmFrame::random(cons, 4, 1.0, rng);
        const RisMessage msg = RisMessage::random(2, 1, rng);
        const PhaseConfig theta = PhaseConfig::all_ones(2);
        CHECK_THROWS_AS(simulate_time_domain(frame, msg, theta, ch, 2), std::invalid_argument);
    }
}
