#pragma once

#include <charconv>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "alphacast/core.hpp"
#include "alphacast/errors.hpp"
#include "alphacast/time.hpp"

namespace alphacast {

/// Declarative description of one on-disk dataset. Manifests are JSON files
/// whose keys match the field names below; adding a dataset never requires a
/// code change.
struct DatasetManifest {
    std::string data_path;
    std::string timestamp_column;
    std::string endogenous_column;
    std::vector<std::string> exogenous_columns;
    std::string frequency; // e.g. "1h", "15min", "1d"
    std::array<std::size_t, 3> split_sizes{0, 0, 0}; // train, validation, test
    DataProfile profile;
};

inline DatasetManifest parse_manifest_json(const nlohmann::json& j) {
    DatasetManifest m;
    try {
        m.data_path = j.at("data_path").get<std::string>();
        m.timestamp_column = j.at("timestamp_column").get<std::string>();
        m.endogenous_column = j.at("endogenous_column").get<std::string>();
        if (j.contains("exogenous_columns"))
            m.exogenous_columns = j.at("exogenous_columns").get<std::vector<std::string>>();
        m.frequency = j.at("frequency").get<std::string>();
        const auto& s = j.at("split_sizes");
        if (!s.is_array() || s.size() != 3)
            throw Error(ErrorKind::parse_error, "split_sizes must be a 3-element array");
        for (std::size_t i = 0; i < 3; ++i) m.split_sizes[i] = s[i].get<std::size_t>();
        const auto& p = j.at("profile");
        m.profile.dataset_name = p.at("dataset_name").get<std::string>();
        if (p.contains("domain_description"))
            m.profile.domain_description = p.at("domain_description").get<std::string>();
        if (p.contains("variable_descriptions"))
            m.profile.variable_descriptions =
                p.at("variable_descriptions").get<std::map<std::string, std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::parse_error, std::string("manifest: ") + e.what());
    }
    m.profile.frequency_text = m.frequency;
    return m;
}

inline nlohmann::json manifest_to_json(const DatasetManifest& m) {
    nlohmann::json j;
    j["data_path"] = m.data_path;
    j["timestamp_column"] = m.timestamp_column;
    j["endogenous_column"] = m.endogenous_column;
    j["exogenous_columns"] = m.exogenous_columns;
    j["frequency"] = m.frequency;
    j["split_sizes"] = m.split_sizes;
    j["profile"] = {{"dataset_name", m.profile.dataset_name},
                    {"domain_description", m.profile.domain_description},
                    {"variable_descriptions", m.profile.variable_descriptions}};
    return j;
}

inline DatasetManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::io_error, "cannot open manifest " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::parse_error, path.string() + ": " + e.what());
    }
    DatasetManifest m = parse_manifest_json(j);
    if (m.data_path.empty())
        throw Error(ErrorKind::parse_error, path.string() + ": empty data_path");
    // Relative data paths resolve against the manifest's own directory.
    std::filesystem::path dp(m.data_path);
    if (dp.is_relative()) m.data_path = (path.parent_path() / dp).string();
    return m;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    cells.push_back(cur);
    return cells;
}

inline double parse_cell(const std::string& cell, std::size_t row, const std::string& column) {
    const char* first = cell.data();
    const char* last = first + cell.size();
    while (first != last && (*first == ' ' || *first == '\t')) ++first;
    while (last != first && (last[-1] == ' ' || last[-1] == '\t')) --last;
    double v = 0.0;
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc{} || res.ptr != last || !std::isfinite(v))
        throw Error(ErrorKind::parse_error, "row " + std::to_string(row) + ", column '" + column +
                                                "': unparseable numeric cell '" + cell + "'");
    return v;
}

} // namespace detail

/// Loads and validates the dataset a manifest describes. Channels come out
/// ordered [endogenous, exogenous...]; timestamps must be strictly increasing
/// with constant spacing equal to the declared frequency.
inline Dataset load_dataset(const DatasetManifest& manifest) {
    std::ifstream in(manifest.data_path);
    if (!in) throw Error(ErrorKind::io_error, "cannot open data file " + manifest.data_path);

    std::string line;
    if (!std::getline(in, line))
        throw Error(ErrorKind::parse_error, manifest.data_path + ": missing header row");
    const auto header = detail::split_csv_line(line);

    auto column_index = [&](const std::string& name) -> std::size_t {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw Error(ErrorKind::unknown_column, "column '" + name + "' not in header of " +
                                                   manifest.data_path);
    };

    const std::size_t ts_col = column_index(manifest.timestamp_column);
    std::vector<std::size_t> value_cols{column_index(manifest.endogenous_column)};
    for (const auto& name : manifest.exogenous_columns) value_cols.push_back(column_index(name));
    {
        std::vector<std::size_t> sorted = value_cols;
        sorted.push_back(ts_col);
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
            throw Error(ErrorKind::invalid_argument, "manifest column names must be distinct");
    }

    Dataset ds;
    ds.profile = manifest.profile;
    ds.frequency = parse_frequency(manifest.frequency);
    ds.endogenous.name = manifest.endogenous_column;
    ds.exogenous.resize(manifest.exogenous_columns.size());
    for (std::size_t i = 0; i < ds.exogenous.size(); ++i)
        ds.exogenous[i].name = manifest.exogenous_columns[i];
    if (auto it = manifest.profile.variable_descriptions.find(manifest.endogenous_column);
        it != manifest.profile.variable_descriptions.end())
        ds.endogenous.description = it->second;
    for (auto& exo : ds.exogenous)
        if (auto it = manifest.profile.variable_descriptions.find(exo.name);
            it != manifest.profile.variable_descriptions.end())
            exo.description = it->second;

    std::size_t row = 1; // header was row 1
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != header.size())
            throw Error(ErrorKind::parse_error, "row " + std::to_string(row) + ": expected " +
                                                    std::to_string(header.size()) + " cells, got " +
                                                    std::to_string(cells.size()));
        const Instant t = parse_instant(cells[ts_col]);
        ds.endogenous.timestamps.push_back(t);
        ds.endogenous.values.push_back(
            detail::parse_cell(cells[value_cols[0]], row, manifest.endogenous_column));
        for (std::size_t e = 0; e < ds.exogenous.size(); ++e) {
            ds.exogenous[e].timestamps.push_back(t);
            ds.exogenous[e].values.push_back(
                detail::parse_cell(cells[value_cols[e + 1]], row, manifest.exogenous_columns[e]));
        }
    }
    if (ds.endogenous.values.empty())
        throw Error(ErrorKind::parse_error, manifest.data_path + ": no data rows");

    const auto& ts = ds.endogenous.timestamps;
    for (std::size_t i = 1; i < ts.size(); ++i) {
        if (ts[i] <= ts[i - 1])
            throw Error(ErrorKind::non_monotonic_timestamps,
                        "row " + std::to_string(i + 2) + ": timestamp does not increase");
        if (ts[i] - ts[i - 1] != ds.frequency.step_seconds)
            throw Error(ErrorKind::irregular_spacing,
                        "row " + std::to_string(i + 2) + ": spacing " +
                            std::to_string(ts[i] - ts[i - 1]) + "s, expected " +
                            std::to_string(ds.frequency.step_seconds) + "s");
    }

    const std::size_t total =
        manifest.split_sizes[0] + manifest.split_sizes[1] + manifest.split_sizes[2];
    if (total > ds.size())
        throw Error(ErrorKind::split_overflow, "split sizes sum to " + std::to_string(total) +
                                                   " but file has " + std::to_string(ds.size()) +
                                                   " rows");
    ds.splits.train = {0, manifest.split_sizes[0]};
    ds.splits.validation = {ds.splits.train.end, ds.splits.train.end + manifest.split_sizes[1]};
    ds.splits.test = {ds.splits.validation.end, ds.splits.validation.end + manifest.split_sizes[2]};
    return ds;
}

/// Human-readable dataset summary backing the CLI `inspect` command.
inline std::string describe_dataset(const Dataset& ds) {
    std::ostringstream out;
    out << "dataset: " << ds.profile.dataset_name << "\n";
    if (!ds.profile.domain_description.empty())
        out << "domain: " << ds.profile.domain_description << "\n";
    out << "frequency: " << ds.frequency.text << "\n";
    out << "samples: " << ds.size() << " (" << format_instant(ds.endogenous.timestamps.front())
        << " .. " << format_instant(ds.endogenous.timestamps.back()) << ")\n";
    out << "endogenous channel: " << ds.endogenous.name;
    if (!ds.endogenous.description.empty()) out << " — " << ds.endogenous.description;
    out << "\n";
    out << ds.exogenous_count() << " exogenous channels\n";
    for (const auto& exo : ds.exogenous) {
        out << "  " << exo.name;
        if (!exo.description.empty()) out << " — " << exo.description;
        out << "\n";
    }
    auto span = [](const IndexRange& r) {
        return "[" + std::to_string(r.begin) + ", " + std::to_string(r.end) + ")";
    };
    out << "splits: train " << span(ds.splits.train) << " validation " << span(ds.splits.validation)
        << " test " << span(ds.splits.test) << "\n";
    out << "season period: " << season_period(ds.frequency) << "\n";
    return out.str();
}

/// Writes the dataset back as delimited text (header + rows); the complement
/// of load_dataset for round-trip checks and synthetic corpus generation.
inline void write_dataset_csv(const Dataset& ds, const std::filesystem::path& path,
                              const std::string& timestamp_column = "date") {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::io_error, "cannot write " + path.string());
    out << timestamp_column;
    out << ',' << ds.endogenous.name;
    for (const auto& exo : ds.exogenous) out << ',' << exo.name;
    out << '\n';
    char buf[64];
    for (std::size_t i = 0; i < ds.size(); ++i) {
        out << format_instant(ds.endogenous.timestamps[i]);
        std::snprintf(buf, sizeof buf, "%.17g", ds.endogenous.values[i]);
        out << ',' << buf;
        for (const auto& exo : ds.exogenous) {
            std::snprintf(buf, sizeof buf, "%.17g", exo.values[i]);
            out << ',' << buf;
        }
        out << '\n';
    }
}

} // namespace alphacast
