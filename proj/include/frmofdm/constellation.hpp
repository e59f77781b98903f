#pragma once

#include "frmofdm/common.hpp"

#include <vector>

namespace frmofdm {

// Unit-average-energy constellation with its bit labeling. Points are scaled
// by sqrt(P) at the modulator, never here.
struct Constellation {
    std::vector<cx> points;
    std::vector<std::vector<int>> bits; // bits[i] labels points[i]
    int bits_per_symbol = 0;

    std::size_t size() const { return points.size(); }

    static Constellation bpsk() {
        Constellation c;
        c.points = {cx(1.0, 0.0), cx(-1.0, 0.0)};
        c.bits = {{0}, {1}};
        c.bits_per_symbol = 1;
        return c;
    }

    // Gray mapping: first bit picks the sign of I, second the sign of Q, so
    // neighbors differ in one bit.
    static Constellation qpsk_gray() {
        const double a = 1.0 / std::sqrt(2.0);
        Constellation c;
        c.points = {cx(a, a), cx(a, -a), cx(-a, a), cx(-a, -a)};
        c.bits = {{0, 0}, {0, 1}, {1, 0}, {1, 1}};
        c.bits_per_symbol = 2;
        return c;
    }

    /// Index of the nearest point; ties break to the lowest index.
    std::size_t slice(cx v) const {
        std::size_t best = 0;
        double best_d = std::norm(v - points[0]);
        for (std::size_t i = 1; i < points.size(); ++i) {
            double d = std::norm(v - points[i]);
            if (d < best_d - 1e-15) {
                best_d = d;
                best = i;
            }
        }
        return best;
    }

    /// Hamming distance between the labels of two points.
    int bit_errors(std::size_t sent, std::size_t decided) const {
        int e = 0;
        for (std::size_t b = 0; b < bits[sent].size(); ++b)
            e += (bits[sent][b] != bits[decided][b]) ? 1 : 0;
        return e;
    }
};

} // namespace frmofdm
