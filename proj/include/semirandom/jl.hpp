#ifndef SEMIRANDOM_JL_HPP
#define SEMIRANDOM_JL_HPP

#include <cstdint>
#include <vector>

#include "semirandom/operators.hpp"
#include "semirandom/rng.hpp"

namespace semirandom {

// k x d sign sketch with entries +-1/sqrt(k). Entries are keyed on
// (seed, row, col) so generation order is immaterial.
struct JlSketch {
    Index k = 0;
    Index d = 0;
    std::uint64_t seed = 0;
    Mat Q; // k x d

    auto row(Index l) const { return Q.row(l); }
};

inline JlSketch jl_sketch(Index k, Index d, std::uint64_t seed) {
    if (k < 1 || d < 1) throw InvalidArgument("jl_sketch requires k >= 1 and d >= 1");
    JlSketch s;
    s.k = k;
    s.d = d;
    s.seed = seed;
    s.Q.resize(k, d);
    const double scale = 1.0 / std::sqrt(static_cast<double>(k));
    for (Index l = 0; l < k; ++l)
        for (Index j = 0; j < d; ++j)
            s.Q(l, j) = (hash3(seed, static_cast<std::uint64_t>(l),
                               static_cast<std::uint64_t>(j)) & 1ull)
                            ? scale
                            : -scale;
    return s;
}

// ||Q M v||_2^2 for each v; the (1 +- c) trace / inner-product estimator.
inline std::vector<double> sketch_norms(const JlSketch& sketch, const LinOp& M,
                                        const std::vector<Vec>& vectors) {
    if (M.dim != sketch.d) throw DimensionMismatch("sketch/operator dimension mismatch");
    std::vector<double> out;
    out.reserve(vectors.size());
    for (const Vec& v : vectors) {
        if (v.size() != sketch.d) throw DimensionMismatch("sketch_norms: vector length");
        out.push_back((sketch.Q * M(v)).squaredNorm());
    }
    return out;
}

} // namespace semirandom

#endif
