#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "alphacast/errors.hpp"

namespace alphacast {

/// Iteration caps. Convergence is declared at an assignment fixed point,
/// where the center shift is exactly 0 — strictly inside any positive tol —
/// because that is the only state in which the centroid-mean and
/// nearest-assignment guarantees hold together.
struct KMeansConfig {
    int max_iter = 200;
    double tol = 1e-6;
};

/// Cluster centers plus the final point-to-cluster map. On return every
/// center is the mean of its members and every point sits with its nearest
/// center (ties to the lower index) — iteration runs to an assignment fixed
/// point, so both hold simultaneously.
struct ClusterModel {
    std::size_t k = 0;
    std::vector<std::vector<double>> centers;
    std::vector<std::uint32_t> assignments; // index-aligned with the input points
    double inertia = 0.0;
    std::uint64_t seed = 0;
};

namespace detail {

/// Uniform [0, 1) from the high 53 bits; bit-identical on every platform.
inline double u01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

/// k-means++ seeding: first center uniform, each next drawn with probability
/// proportional to the squared distance from the nearest chosen center.
inline std::vector<std::vector<double>> kmeanspp_init(const std::vector<std::vector<double>>& points,
                                                      std::size_t k, std::mt19937_64& rng) {
    const std::size_t n = points.size();
    std::vector<std::vector<double>> centers;
    centers.reserve(k);
    const std::size_t first = std::min(n - 1, static_cast<std::size_t>(u01(rng) * static_cast<double>(n)));
    centers.push_back(points[first]);

    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) d2[i] = sq_dist(points[i], centers[0]);
    while (centers.size() < k) {
        double total = 0.0;
        for (double v : d2) total += v;
        std::size_t pick = 0;
        if (total > 0.0) {
            const double r = u01(rng) * total;
            double cum = 0.0;
            pick = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                cum += d2[i];
                if (cum > r) {
                    pick = i;
                    break;
                }
            }
        } else {
            // All points coincide with chosen centers; fall back to uniform.
            pick = std::min(n - 1, static_cast<std::size_t>(u01(rng) * static_cast<double>(n)));
        }
        centers.push_back(points[pick]);
        for (std::size_t i = 0; i < n; ++i)
            d2[i] = std::min(d2[i], sq_dist(points[i], centers.back()));
    }
    return centers;
}

} // namespace detail

/// Lloyd's algorithm with k-means++ initialization. Deterministic for a given
/// seed; the objective is non-increasing across iterations; empty clusters are
/// reseeded with the point currently farthest from its own center.
inline ClusterModel kmeans(const std::vector<std::vector<double>>& points, std::size_t k,
                           std::uint64_t seed, const KMeansConfig& cfg = {}) {
    const std::size_t n = points.size();
    if (k < 1) throw Error(ErrorKind::invalid_argument, "k must be >= 1");
    if (n < k) throw Error(ErrorKind::invalid_argument, "need at least k points");
    const std::size_t dim = points[0].size();
    for (const auto& p : points)
        if (p.size() != dim) throw Error(ErrorKind::invalid_argument, "ragged point matrix");

    std::mt19937_64 rng(seed);
    ClusterModel model;
    model.k = k;
    model.seed = seed;
    model.centers = detail::kmeanspp_init(points, k, rng);

    // Reassigns each point to a strictly nearer center if one exists, so that
    // afterwards d(i, own) equals the minimum over all centers while ties keep
    // their incumbent — this is what lets duplicate centers hold members.
    auto improve_assignments = [&](std::vector<std::uint32_t>& out) {
        for (std::size_t i = 0; i < n; ++i) {
            double best = detail::sq_dist(points[i], model.centers[out[i]]);
            for (std::uint32_t j = 0; j < k; ++j) {
                const double d = detail::sq_dist(points[i], model.centers[j]);
                if (d < best) {
                    best = d;
                    out[i] = j;
                }
            }
        }
    };

    // Fills every empty cluster by relocating the farthest point whose donor
    // cluster keeps at least one member, then lets ties settle.
    auto repair_empty = [&](std::vector<std::uint32_t>& out) {
        for (std::size_t round = 0; round < 2 * k; ++round) {
            std::vector<std::size_t> counts(k, 0);
            for (auto a : out) ++counts[a];
            const auto empty = std::find(counts.begin(), counts.end(), std::size_t{0});
            if (empty == counts.end()) return;
            const auto j = static_cast<std::uint32_t>(empty - counts.begin());
            std::size_t far = n;
            double far_d = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (counts[out[i]] < 2) continue;
                const double d = detail::sq_dist(points[i], model.centers[out[i]]);
                if (d > far_d) {
                    far_d = d;
                    far = i;
                }
            }
            if (far == n) return; // unreachable while n >= k
            model.centers[j] = points[far];
            out[far] = j;
            improve_assignments(out);
        }
    };

    auto assign_all = [&](std::vector<std::uint32_t> seed_asg) {
        if (seed_asg.empty()) seed_asg.assign(n, 0);
        improve_assignments(seed_asg);
        repair_empty(seed_asg);
        double inertia = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            inertia += detail::sq_dist(points[i], model.centers[seed_asg[i]]);
        model.inertia = inertia;
        return seed_asg;
    };

    auto recompute_centers = [&](const std::vector<std::uint32_t>& asg) {
        std::vector<std::vector<double>> sums(k, std::vector<double>(dim, 0.0));
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            auto& s = sums[asg[i]];
            for (std::size_t d = 0; d < dim; ++d) s[d] += points[i][d];
            ++counts[asg[i]];
        }
        for (std::size_t j = 0; j < k; ++j)
            for (std::size_t d = 0; d < dim; ++d)
                sums[j][d] /= static_cast<double>(counts[j]);
        return sums;
    };

    std::vector<std::uint32_t> assignments = assign_all({});
    for (int iter = 0; iter < cfg.max_iter; ++iter) {
        model.centers = recompute_centers(assignments);
        auto next = assign_all(assignments);
        if (next == assignments) break; // fixed point: means and nearest agree
        assignments = std::move(next);
    }
    model.assignments = std::move(assignments);
    return model;
}

/// Default cluster-count policy: k = clamp(round(sqrt(N / 2)), 8, 64), then
/// clamped to N so tiny libraries stay valid.
inline std::size_t default_k_policy(std::size_t case_count) {
    const double raw = std::round(std::sqrt(static_cast<double>(case_count) / 2.0));
    auto k = static_cast<std::size_t>(std::clamp(raw, 8.0, 64.0));
    return std::min(k, case_count);
}

} // namespace alphacast
