#pragma once

// Shared fixtures for the unit tests: in-memory datasets on an hourly grid
// and throwaway directories for file-based assertions.

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "alphacast/core.hpp"
#include "alphacast/time.hpp"

namespace fixtures {

inline alphacast::TimeSeries make_series(std::string name, std::vector<double> values,
                                         alphacast::Instant start = 1451606400, // 2016-01-01
                                         alphacast::Instant step = 3600) {
    alphacast::TimeSeries s;
    s.name = std::move(name);
    s.values = std::move(values);
    s.timestamps.reserve(s.values.size());
    for (std::size_t i = 0; i < s.values.size(); ++i)
        s.timestamps.push_back(start + static_cast<alphacast::Instant>(i) * step);
    return s;
}

/// Hourly dataset with the given channels and split sizes; exogenous channels
/// share the endogenous grid.
inline alphacast::Dataset make_dataset(std::vector<double> endo,
                                       std::vector<std::vector<double>> exo,
                                       std::size_t train, std::size_t val, std::size_t test) {
    alphacast::Dataset d;
    d.endogenous = make_series("load", std::move(endo));
    for (std::size_t i = 0; i < exo.size(); ++i)
        d.exogenous.push_back(make_series("exo" + std::to_string(i), std::move(exo[i])));
    d.frequency = alphacast::parse_frequency("1h");
    d.profile.dataset_name = "fixture";
    d.profile.domain_description = "synthetic fixture data";
    d.profile.frequency_text = "1h";
    d.splits.train = {0, train};
    d.splits.validation = {train, train + val};
    d.splits.test = {train + val, train + val + test};
    return d;
}

/// Deterministic pseudo-random values in [-50, 50).
inline std::vector<double> noisy(std::uint64_t seed, std::size_t n) {
    std::mt19937_64 rng(seed);
    std::vector<double> x(n);
    for (auto& v : x) v = 100.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53) - 50.0;
    return x;
}

/// Unique scratch directory, removed on destruction.
struct TempDir {
    std::filesystem::path path;

    TempDir() {
        std::random_device rd;
        for (int attempt = 0; attempt < 100; ++attempt) {
            auto candidate = std::filesystem::temp_directory_path() /
                             ("alphacast-test-" + std::to_string(rd()));
            std::error_code ec;
            if (std::filesystem::create_directory(candidate, ec)) {
                path = candidate;
                return;
            }
        }
        throw std::runtime_error("could not create temp dir");
    }

    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }

    std::filesystem::path file(const std::string& name) const { return path / name; }
};

inline void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace fixtures
