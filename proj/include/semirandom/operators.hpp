#ifndef SEMIRANDOM_OPERATORS_HPP
#define SEMIRANDOM_OPERATORS_HPP

#include <cmath>
#include <functional>
#include <memory>
#include <utility>

#include "semirandom/matrix.hpp"

namespace semirandom {

// Symmetric PSD operator given by its matrix-vector product.
struct LinOp {
    Index dim = 0;
    std::function<Vec(const Vec&)> apply;

    Vec operator()(const Vec& v) const {
        if (v.size() != dim) throw DimensionMismatch("operator input has wrong length");
        return apply(v);
    }
};

inline LinOp identity_op(Index dim) {
    return LinOp{dim, [](const Vec& v) { return v; }};
}

// Takes ownership of a symmetric matrix.
inline LinOp sym_matrix_op(Mat M) {
    auto m = std::make_shared<Mat>(std::move(M));
    return LinOp{m->rows(), [m](const Vec& v) -> Vec {
        return m->selfadjointView<Eigen::Lower>() * v;
    }};
}

// A^T diag(w) A as an operator, never materialized. A must outlive the operator.
inline LinOp normal_op(const RowMatrix& A, Vec w) {
    A.check_weights(w);
    auto wp = std::make_shared<Vec>(std::move(w));
    return LinOp{A.d(), [&A, wp](const Vec& v) { return A.normal_apply(*wp, v); }};
}

struct OperatorSolveResult {
    Vec x;
    Index iters = 0;
    double rel_residual = 0.0;
    bool converged = false;
};

// Conjugate gradient on an SPD operator. Stops on relative residual
// ||Mx - b|| <= tol ||b||. When progress stalls at the double-precision
// floor before reaching a very tight tol, the best iterate is accepted as
// long as it is below stagnation_accept.
inline OperatorSolveResult cg_operator_solve(const LinOp& M, const Vec& b, double tol,
                                             Index max_iters,
                                             double stagnation_accept = 1e-9) {
    const double bnorm = b.norm();
    OperatorSolveResult out;
    out.x = Vec::Zero(M.dim);
    if (bnorm == 0.0) {
        out.converged = true;
        return out;
    }
    Vec x = Vec::Zero(M.dim);
    Vec r = b;
    Vec p = r;
    double rs = r.squaredNorm();
    Vec best_x = x;
    double best_res = std::sqrt(rs) / bnorm;
    Index since_improve = 0;
    for (Index it = 0; it < max_iters; ++it) {
        Vec Mp = M(p);
        const double pMp = p.dot(Mp);
        if (!(pMp > 0.0)) break; // lost positive definiteness to roundoff
        const double alpha = rs / pMp;
        x += alpha * p;
        r -= alpha * Mp;
        const double rs_new = r.squaredNorm();
        const double rel = std::sqrt(rs_new) / bnorm;
        out.iters = it + 1;
        if (rel < best_res) {
            best_res = rel;
            best_x = x;
            since_improve = 0;
        } else if (++since_improve > 60) {
            break;
        }
        if (rel <= tol) {
            out.x = x;
            out.rel_residual = rel;
            out.converged = true;
            return out;
        }
        p = r + (rs_new / rs) * p;
        rs = rs_new;
    }
    out.x = best_x;
    out.rel_residual = best_res;
    out.converged = best_res <= std::max(tol, stagnation_accept);
    return out;
}

} // namespace semirandom

#endif
