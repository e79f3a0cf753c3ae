#ifndef SEMIRANDOM_MATRIX_HPP
#define SEMIRANDOM_MATRIX_HPP

#include <Eigen/Dense>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>

#include "semirandom/error.hpp"

namespace semirandom {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using RowMajorMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

// Data matrix stored as rows a_i with cached squared row norms and nonzero
// count. Immutable after construction.
class RowMatrix {
public:
    explicit RowMatrix(RowMajorMat rows) : rows_(std::move(rows)) {
        if (rows_.rows() < rows_.cols() || rows_.cols() < 1)
            throw InvalidArgument("RowMatrix requires n >= d >= 1, got " +
                                  std::to_string(rows_.rows()) + "x" +
                                  std::to_string(rows_.cols()));
        row_norms_sq_ = rows_.rowwise().squaredNorm();
        nnz_ = (rows_.array() != 0.0).count();
    }

    Index n() const { return rows_.rows(); }
    Index d() const { return rows_.cols(); }
    Index nnz() const { return nnz_; }
    const RowMajorMat& rows() const { return rows_; }
    auto row(Index i) const { return rows_.row(i); }
    const Vec& row_norms_sq() const { return row_norms_sq_; }

    // A x
    Vec apply(const Vec& x) const {
        if (x.size() != d()) throw DimensionMismatch("apply: x has wrong length");
        return rows_ * x;
    }

    // A^T u
    Vec apply_transpose(const Vec& u) const {
        if (u.size() != n()) throw DimensionMismatch("apply_transpose: u has wrong length");
        return rows_.transpose() * u;
    }

    // A^T diag(w) A x, computed in two passes (never materializes d x d).
    Vec normal_apply(const Vec& w, const Vec& x) const {
        check_weights(w);
        Vec u = rows_ * x;
        u.array() *= w.array();
        return rows_.transpose() * u;
    }

    // A^T diag(w) A as a dense d x d matrix.
    Mat weighted_gram(const Vec& w) const {
        check_weights(w);
        return rows_.transpose() * w.asDiagonal() * rows_;
    }

    // A^T diag(w) b
    Vec normal_rhs(const Vec& w, const Vec& b) const {
        check_weights(w);
        if (b.size() != n()) throw DimensionMismatch("normal_rhs: b has wrong length");
        return rows_.transpose() * (w.array() * b.array()).matrix();
    }

    void check_weights(const Vec& w) const {
        if (w.size() != n())
            throw DimensionMismatch("weight vector length " + std::to_string(w.size()) +
                                    " != row count " + std::to_string(n()));
    }

private:
    RowMajorMat rows_;
    Vec row_norms_sq_;
    Index nnz_ = 0;
};

namespace detail {

inline std::string format_float(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace detail

// "rmx v1" matrix file: header `rmx 1 <n> <d>`, then n lines of d
// comma-separated floats at 17 significant digits.
inline void write_rmx(const std::string& path, const RowMatrix& A) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "rmx 1 " << A.n() << " " << A.d() << "\n";
    for (Index i = 0; i < A.n(); ++i) {
        for (Index j = 0; j < A.d(); ++j) {
            if (j) out << ",";
            out << detail::format_float(A.rows()(i, j));
        }
        out << "\n";
    }
    if (!out) throw IoError("write failed: " + path);
}

inline RowMatrix read_rmx(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    std::string magic;
    int version = 0;
    Index n = 0, d = 0;
    if (!(in >> magic >> version >> n >> d) || magic != "rmx" || version != 1)
        throw IoError("bad rmx header in " + path);
    if (n < 1 || d < 1) throw IoError("bad rmx dimensions in " + path);
    std::string line;
    std::getline(in, line);
    RowMajorMat rows(n, d);
    for (Index i = 0; i < n; ++i) {
        if (!std::getline(in, line)) throw IoError("truncated rmx file: " + path);
        std::stringstream ss(line);
        std::string cell;
        for (Index j = 0; j < d; ++j) {
            if (!std::getline(ss, cell, ',')) throw IoError("short row in rmx file: " + path);
            try {
                rows(i, j) = std::stod(cell);
            } catch (const std::exception&) {
                throw IoError("unparseable value '" + cell + "' in " + path);
            }
        }
    }
    return RowMatrix(std::move(rows));
}

} // namespace semirandom

#endif
