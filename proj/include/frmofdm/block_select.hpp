#pragma once

#include <armadillo>

namespace frmofdm {

// Block-grid selections: keep the named blocks of a matrix partitioned into
// rows x cols tiles, zero everything else.

inline arma::cx_mat block_diag_select(const arma::cx_mat& a, arma::uword rows,
                                      arma::uword cols) {
    arma::cx_mat out(arma::size(a), arma::fill::zeros);
    for (arma::uword k = 0; (k + 1) * rows <= a.n_rows && (k + 1) * cols <= a.n_cols; ++k)
        out.submat(k * rows, k * cols, (k + 1) * rows - 1, (k + 1) * cols - 1) =
            a.submat(k * rows, k * cols, (k + 1) * rows - 1, (k + 1) * cols - 1);
    return out;
}

inline arma::cx_mat block_superdiag_select(const arma::cx_mat& a, arma::uword rows,
                                           arma::uword cols) {
    arma::cx_mat out(arma::size(a), arma::fill::zeros);
    for (arma::uword k = 0; (k + 1) * rows <= a.n_rows && (k + 2) * cols <= a.n_cols; ++k)
        out.submat(k * rows, (k + 1) * cols, (k + 1) * rows - 1, (k + 2) * cols - 1) =
            a.submat(k * rows, (k + 1) * cols, (k + 1) * rows - 1, (k + 2) * cols - 1);
    return out;
}

inline arma::cx_mat block_subdiag_select(const arma::cx_mat& a, arma::uword rows,
                                         arma::uword cols) {
    arma::cx_mat out(arma::size(a), arma::fill::zeros);
    for (arma::uword k = 0; (k + 2) * rows <= a.n_rows && (k + 1) * cols <= a.n_cols; ++k)
        out.submat((k + 1) * rows, k * cols, (k + 2) * rows - 1, (k + 1) * cols - 1) =
            a.submat((k + 1) * rows, k * cols, (k + 2) * rows - 1, (k + 1) * cols - 1);
    return out;
}

} // namespace frmofdm
