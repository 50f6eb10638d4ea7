#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "seqrec/error.hpp"

namespace seqrec {

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

// y += alpha * x
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline void scale(std::span<double> x, double alpha) {
    for (double& v : x) v *= alpha;
}

inline bool all_finite(std::span<const double> x) {
    for (const double v : x) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

// Cosine similarity; throws ZeroVector when either norm vanishes.
inline double cosine_sim(std::span<const double> a, std::span<const double> b) {
    const double na = norm(a);
    const double nb = norm(b);
    if (na == 0.0 || nb == 0.0) fail(ErrorCode::ZeroVector, "cosine similarity of a zero vector is undefined");
    return dot(a, b) / (na * nb);
}

// d sim(z, t) / dz = (t_hat - sim * z_hat) / |z|
inline void cosine_sim_grad(std::span<const double> z, std::span<const double> t,
                            double sim, std::span<double> out) {
    const double nz = norm(z);
    const double nt = norm(t);
    for (std::size_t i = 0; i < z.size(); ++i) {
        out[i] = (t[i] / nt - sim * z[i] / nz) / nz;
    }
}

inline std::vector<double> to_double(std::span<const float> x) {
    return std::vector<double>(x.begin(), x.end());
}

// Cosine between a double query and a float row, accumulated in double.
// Zero-norm rows score below any true cosine so they sort last deterministically.
inline double cosine_sim_f32(std::span<const double> q, double q_norm, std::span<const float> row) {
    double d = 0.0;
    double n = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        d += q[i] * static_cast<double>(row[i]);
        n += static_cast<double>(row[i]) * static_cast<double>(row[i]);
    }
    if (n == 0.0) return -2.0;
    return d / (q_norm * std::sqrt(n));
}

}  // namespace seqrec
