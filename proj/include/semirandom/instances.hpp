#ifndef SEMIRANDOM_INSTANCES_HPP
#define SEMIRANDOM_INSTANCES_HPP

#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "semirandom/matrix.hpp"
#include "semirandom/rng.hpp"
#include "semirandom/spectral.hpp"

namespace semirandom {

// Hard planted instance: t orthogonal rows scaled by s, n1 unit rows
// orthogonal to them (the clean set), n2 scaled random unit rows masking the
// planted block; rows shuffled.
struct HardInstanceParams {
    Index t = 0;
    Index n1 = 0;
    Index n2 = 0;
    Index d = 0;
    double s = 0.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (d < 1 || t < 0 || n1 < 0 || n2 < 0)
            throw InvalidArgument("hard instance: nonnegative sizes, d >= 1");
        if (t > d) throw InvalidArgument("hard instance requires t <= d");
        if (t + n1 + n2 < d)
            throw InvalidArgument("hard instance requires t + n1 + n2 >= d rows");
        if (!(s > 1.0)) throw InvalidArgument("hard instance requires scale s > 1");
    }
};

// Harder planted instance: the planted block hides inside a random
// t-dimensional subspace with an uneven covariance, and all of A1, A3 have
// comparable row norms, so per-row normalization does not repair tau.
struct HarderInstanceParams {
    Index t = 0;
    Index n1 = 0;
    Index n2 = 0;
    Index n3 = 0;
    Index d = 0;
    std::uint64_t seed = 0;

    void validate() const {
        if (d < 1 || t < 1 || n1 < 0 || n2 < 0 || n3 < 0)
            throw InvalidArgument("harder instance: positive t, nonnegative sizes");
        if (t % 2 != 0) throw InvalidArgument("harder instance requires even t");
        if (t > d) throw InvalidArgument("harder instance requires t <= d");
        if (n1 < 4 * t)
            throw InvalidArgument("harder instance requires n1 >= 4t for covariance concentration");
        if (t + n1 + n2 + n3 < d)
            throw InvalidArgument("harder instance requires at least d rows");
    }
};

struct PlantedInstance {
    RowMatrix A;
    std::vector<Index> planted_rows; // post-shuffle indices of the clean set
    Vec x_true;
    Vec planted_weights; // canonical reweighting certifying the planted conditioning
    std::string kind;
    std::string params_line; // key=value fragments for the metadata sidecar
    std::uint64_t seed = 0;
    double tau_raw = 0.0;
    double kappa_raw = 0.0;
    double tau_planted = 0.0;
};

namespace detail {

inline Vec gaussian_vec(CounterRng& rng, Index d) {
    Vec v(d);
    for (Index i = 0; i < d; ++i) v[i] = rng.next_gaussian();
    return v;
}

// Random orthonormal rows via Gram-Schmidt on Gaussian draws.
inline Mat random_orthonormal(CounterRng& rng, Index t, Index d) {
    Mat B(t, d);
    for (Index i = 0; i < t; ++i) {
        for (int attempt = 0;; ++attempt) {
            Vec v = gaussian_vec(rng, d);
            for (Index j = 0; j < i; ++j) v -= B.row(j).dot(v) * B.row(j).transpose();
            const double nrm = v.norm();
            if (nrm > 1e-8) {
                B.row(i) = v.transpose() / nrm;
                break;
            }
            if (attempt > 16) throw RankDeficient("failed to draw an orthonormal basis");
        }
    }
    return B;
}

// Gaussian draw projected off span(B) (rows orthonormal), renormalized.
inline Vec unit_orthogonal_to(CounterRng& rng, const Mat& B, Index d) {
    for (int attempt = 0;; ++attempt) {
        Vec v = gaussian_vec(rng, d);
        for (Index j = 0; j < B.rows(); ++j) v -= B.row(j).dot(v) * B.row(j).transpose();
        const double nrm = v.norm();
        if (nrm > 1e-8) return v / nrm;
        if (attempt > 16) throw RankDeficient("failed to draw in the orthogonal complement");
    }
}

struct ShuffledRows {
    RowMajorMat rows;
    std::vector<Index> planted_rows;
    Vec planted_weights;
};

inline ShuffledRows shuffle_blocks(CounterRng& rng, const Mat& stacked,
                                   const std::vector<bool>& planted,
                                   const Vec& canonical_weights) {
    const Index n = stacked.rows();
    std::vector<std::size_t> perm = rng.permutation(static_cast<std::size_t>(n));
    ShuffledRows out;
    out.rows.resize(n, stacked.cols());
    out.planted_weights.resize(n);
    for (Index i = 0; i < n; ++i) {
        const Index src = static_cast<Index>(perm[static_cast<std::size_t>(i)]);
        out.rows.row(i) = stacked.row(src);
        out.planted_weights[i] = canonical_weights[src];
        if (planted[static_cast<std::size_t>(src)]) out.planted_rows.push_back(i);
    }
    return out;
}

inline void rank_spot_check(const RowMatrix& A) {
    double lmax, lmin;
    if (A.d() <= kExactStatsCap) {
        SymEig e = sym_eig(A.weighted_gram(Vec::Ones(A.n())));
        lmax = e.values(A.d() - 1);
        lmin = e.values(0);
    } else {
        LinOp G = normal_op(A, Vec::Ones(A.n()));
        lmax = power_iteration_lambda_max(G);
        lmin = inverse_power_iteration_lambda_min(G);
    }
    if (!(lmin > 1e-10 * lmax))
        throw RankDeficient("generated matrix failed the full-rank spot check");
}

} // namespace detail

inline PlantedInstance gen_hard_instance(const HardInstanceParams& p) {
    p.validate();
    CounterRng rng(p.seed, 0x68617264ULL);
    const Index comp_dim = p.d - p.t;
    const Index n1_eff = comp_dim == 0 ? 0 : p.n1; // no complement to draw from
    const Index n = p.t + n1_eff + p.n2;
    if (n < p.d) throw InvalidArgument("hard instance degenerated below d rows");

    Mat basis = p.t > 0 ? detail::random_orthonormal(rng, p.t, p.d) : Mat(0, p.d);
    Mat stacked(n, p.d);
    Vec canonical = Vec::Zero(n);
    std::vector<bool> planted(static_cast<std::size_t>(n), false);
    Index r = 0;
    for (Index i = 0; i < p.t; ++i, ++r) {
        stacked.row(r) = p.s * basis.row(i);
        canonical[r] = 1.0 / (p.s * p.s);
        planted[static_cast<std::size_t>(r)] = true;
    }
    // clean rows: Gaussian draws projected off span(A1), re-normalized to
    // unit length (the construction leaves the post-projection scale open;
    // exact normalization keeps test magnitudes deterministic)
    for (Index i = 0; i < n1_eff; ++i, ++r) {
        stacked.row(r) = detail::unit_orthogonal_to(rng, basis, p.d).transpose();
        canonical[r] = 1.0;
        planted[static_cast<std::size_t>(r)] = true;
    }
    for (Index i = 0; i < p.n2; ++i, ++r) {
        Vec v = detail::gaussian_vec(rng, p.d);
        stacked.row(r) = (p.s / v.norm()) * v.transpose();
    }

    detail::ShuffledRows shuffled = detail::shuffle_blocks(rng, stacked, planted, canonical);
    PlantedInstance inst{RowMatrix(std::move(shuffled.rows)),
                         std::move(shuffled.planted_rows),
                         detail::gaussian_vec(rng, p.d),
                         std::move(shuffled.planted_weights),
                         "hard",
                         "",
                         p.seed};
    detail::rank_spot_check(inst.A);

    SpectralStats raw = condition_stats(inst.A, Vec::Ones(n));
    inst.tau_raw = raw.tau;
    inst.kappa_raw = raw.kappa;
    if ((inst.planted_weights.array() > 0.0).any()) {
        SymEig e = sym_eig(inst.A.weighted_gram(inst.planted_weights));
        const double lmin = e.values(0);
        inst.tau_planted = lmin > 0 ? inst.planted_weights.dot(inst.A.row_norms_sq()) / lmin
                                    : std::numeric_limits<double>::infinity();
    }
    std::ostringstream os;
    os << "t=" << p.t << "\nn1=" << n1_eff << "\nn2=" << p.n2 << "\nd=" << p.d
       << "\ns=" << detail::format_float(p.s);
    inst.params_line = os.str();
    return inst;
}

inline PlantedInstance gen_harder_instance(const HarderInstanceParams& p) {
    p.validate();
    CounterRng rng(p.seed, 0x68617264325ULL);
    const Index n = p.n1 + p.n2 + p.n3;
    if (n < p.d) throw InvalidArgument("harder instance degenerated below d rows");

    Mat B = detail::random_orthonormal(rng, p.t, p.d);
    const double dd = static_cast<double>(p.d);
    const double tt = static_cast<double>(p.t);
    Mat stacked(n, p.d);
    Vec canonical = Vec::Zero(n);
    std::vector<bool> planted(static_cast<std::size_t>(n), false);
    Index r = 0;
    // A1: Gaussian in span(B), covariance diag(d/t on the first t/2 coords, 1
    // after), scaled by sqrt(2d) so rows have norm roughly d.
    for (Index i = 0; i < p.n1; ++i, ++r) {
        Vec g(p.t);
        for (Index j = 0; j < p.t; ++j) {
            const double sd = j < p.t / 2 ? std::sqrt(dd / tt) : 1.0;
            g[j] = sd * rng.next_gaussian();
        }
        stacked.row(r) = std::sqrt(2.0 * dd) * (g.transpose() * B);
        canonical[r] = 1.0 / (2.0 * dd * static_cast<double>(p.n1));
        planted[static_cast<std::size_t>(r)] = true;
    }
    for (Index i = 0; i < p.n2; ++i, ++r) { // unit rows orthogonal to B
        stacked.row(r) = detail::unit_orthogonal_to(rng, B, p.d).transpose();
        canonical[r] = p.n2 > 0 ? static_cast<double>(p.d - p.t) / static_cast<double>(p.n2) : 0.0;
        planted[static_cast<std::size_t>(r)] = true;
    }
    for (Index i = 0; i < p.n3; ++i, ++r) { // norm-d rows orthogonal to B
        stacked.row(r) = dd * detail::unit_orthogonal_to(rng, B, p.d).transpose();
    }

    detail::ShuffledRows shuffled = detail::shuffle_blocks(rng, stacked, planted, canonical);
    PlantedInstance inst{RowMatrix(std::move(shuffled.rows)),
                         std::move(shuffled.planted_rows),
                         detail::gaussian_vec(rng, p.d),
                         std::move(shuffled.planted_weights),
                         "harder",
                         "",
                         p.seed};
    detail::rank_spot_check(inst.A);

    SpectralStats raw = condition_stats(inst.A, Vec::Ones(n));
    inst.tau_raw = raw.tau;
    inst.kappa_raw = raw.kappa;

    // Design properties, verified at generation: (i) the raw matrix is badly
    // conditioned on average, (ii) the canonical mixed reweighting repairs
    // tau to a small multiple of d (spectrum near all ones plus t/2
    // eigenvalues of size d/t), (iii) per-row normalization does not repair
    // it. (i) and (iii) are adversarial-masking properties and only hold once
    // the unit-row count is large (the experiments sweep n2 >= 4d), so they
    // are skipped below that.
    SymEig mixed = sym_eig(inst.A.weighted_gram(inst.planted_weights));
    const double tau_mixed =
        inst.planted_weights.dot(inst.A.row_norms_sq()) / mixed.values(0);
    inst.tau_planted = tau_mixed;
    if (tau_mixed > 20.0 * dd)
        throw Error("harder instance: mixed reweighting tau " + std::to_string(tau_mixed) +
                    " failed to concentrate near d");
    if (p.n2 >= 4 * p.d) {
        Vec row_normalized = inst.A.row_norms_sq().array().inverse();
        SpectralStats normalized = condition_stats(inst.A, row_normalized);
        if (inst.tau_raw < 4.0 * dd)
            throw Error("harder instance: raw tau " + std::to_string(inst.tau_raw) +
                        " is not large relative to d");
        if (normalized.tau < 1.3 * tau_mixed)
            throw Error("harder instance: row normalization unexpectedly repaired tau");
    }

    std::ostringstream os;
    os << "t=" << p.t << "\nn1=" << p.n1 << "\nn2=" << p.n2 << "\nn3=" << p.n3
       << "\nd=" << p.d;
    inst.params_line = os.str();
    return inst;
}

// ---------------------------------------------------------------------------
// Metadata sidecar: plain key=value lines.
// ---------------------------------------------------------------------------
inline void write_instance_metadata(const std::string& path, const PlantedInstance& inst) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "kind=" << inst.kind << "\n" << inst.params_line << "\n";
    out << "seed=" << inst.seed << "\n";
    out << "planted_rows=";
    for (std::size_t i = 0; i < inst.planted_rows.size(); ++i) {
        if (i) out << ",";
        out << inst.planted_rows[i];
    }
    out << "\n";
    auto write_vec = [&](const char* key, const Vec& v) {
        out << key << "=";
        for (Index i = 0; i < v.size(); ++i) {
            if (i) out << ",";
            out << detail::format_float(v[i]);
        }
        out << "\n";
    };
    write_vec("x_true", inst.x_true);
    write_vec("planted_weights", inst.planted_weights);
    out << "tau_raw=" << detail::format_float(inst.tau_raw) << "\n";
    out << "kappa_raw=" << detail::format_float(inst.kappa_raw) << "\n";
    out << "tau_planted=" << detail::format_float(inst.tau_planted) << "\n";
    if (!out) throw IoError("write failed: " + path);
}

struct InstanceMetadata {
    std::string kind;
    std::uint64_t seed = 0;
    std::vector<Index> planted_rows;
    Vec x_true;
    Vec planted_weights;
    double tau_raw = 0.0;
    double kappa_raw = 0.0;
    double tau_planted = 0.0;
    Index t = 0, n1 = 0, n2 = 0, n3 = 0, d = 0;
    double s = 0.0;
};

inline InstanceMetadata read_instance_metadata(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    InstanceMetadata meta;
    std::string line;
    auto parse_vec = [](const std::string& text) {
        std::vector<double> vals;
        std::stringstream ss(text);
        std::string cell;
        while (std::getline(ss, cell, ',')) if (!cell.empty()) vals.push_back(std::stod(cell));
        Vec v(static_cast<Index>(vals.size()));
        for (std::size_t i = 0; i < vals.size(); ++i) v[static_cast<Index>(i)] = vals[i];
        return v;
    };
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = line.substr(0, eq);
        const std::string val = line.substr(eq + 1);
        if (key == "kind") meta.kind = val;
        else if (key == "seed") meta.seed = std::stoull(val);
        else if (key == "t") meta.t = std::stol(val);
        else if (key == "n1") meta.n1 = std::stol(val);
        else if (key == "n2") meta.n2 = std::stol(val);
        else if (key == "n3") meta.n3 = std::stol(val);
        else if (key == "d") meta.d = std::stol(val);
        else if (key == "s") meta.s = std::stod(val);
        else if (key == "tau_raw") meta.tau_raw = std::stod(val);
        else if (key == "kappa_raw") meta.kappa_raw = std::stod(val);
        else if (key == "tau_planted") meta.tau_planted = std::stod(val);
        else if (key == "x_true") meta.x_true = parse_vec(val);
        else if (key == "planted_weights") meta.planted_weights = parse_vec(val);
        else if (key == "planted_rows") {
            std::stringstream ss(val);
            std::string cell;
            while (std::getline(ss, cell, ','))
                if (!cell.empty()) meta.planted_rows.push_back(std::stol(cell));
        }
    }
    return meta;
}

} // namespace semirandom

#endif
