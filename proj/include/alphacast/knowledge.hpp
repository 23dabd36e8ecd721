#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "alphacast/errors.hpp"
#include "alphacast/time.hpp"

namespace alphacast {

enum class KnowledgeKind { conceptual, empirical };

inline std::string_view knowledge_kind_name(KnowledgeKind k) {
    return k == KnowledgeKind::conceptual ? "conceptual" : "empirical";
}

/// Curated domain statement: a high-level concept or a data-driven pattern,
/// scoped to one dataset or to "*" for all.
struct KnowledgeEntry {
    std::string entry_id;
    KnowledgeKind kind = KnowledgeKind::conceptual;
    std::string dataset_scope = "*";
    std::vector<std::string> tags;
    std::string body;
};

/// External event with a closed time interval: holidays, weather spells,
/// campaigns — anything that explains or foreshadows a fluctuation.
struct ContextEvent {
    std::string event_id;
    std::string dataset_scope = "*";
    Instant start = 0;
    Instant end = 0;
    std::string category;
    std::string body;
};

struct KnowledgeStore {
    std::vector<KnowledgeEntry> entries;
    std::vector<ContextEvent> events;
};

namespace detail {

/// Header lines are `key: value` until the first blank line; the remainder is
/// the body. Returns pairs in file order plus the body text.
inline std::pair<std::vector<std::pair<std::string, std::string>>, std::string>
parse_entry_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::io_error, "cannot open " + path.string());
    std::vector<std::pair<std::string, std::string>> header;
    std::string line;
    bool in_body = false;
    std::ostringstream body;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (in_body) {
            body << line << '\n';
            continue;
        }
        if (line.empty()) {
            in_body = true;
            continue;
        }
        const auto colon = line.find(':');
        if (colon == std::string::npos)
            throw Error(ErrorKind::parse_error, path.string() + ": header line without ':'");
        std::string key = line.substr(0, colon);
        std::string value = line.substr(colon + 1);
        const auto ltrim = value.find_first_not_of(" \t");
        value = ltrim == std::string::npos ? "" : value.substr(ltrim);
        header.emplace_back(std::move(key), std::move(value));
    }
    std::string b = body.str();
    while (!b.empty() && (b.back() == '\n' || b.back() == ' ')) b.pop_back();
    return {std::move(header), std::move(b)};
}

inline std::vector<std::string> split_tags(const std::string& csv) {
    std::vector<std::string> tags;
    std::string cur;
    auto flush = [&] {
        const auto a = cur.find_first_not_of(" \t");
        if (a != std::string::npos) {
            const auto b = cur.find_last_not_of(" \t");
            tags.push_back(cur.substr(a, b - a + 1));
        }
        cur.clear();
    };
    for (char c : csv) {
        if (c == ',')
            flush();
        else
            cur += c;
    }
    flush();
    return tags;
}

} // namespace detail

/// Loads `knowledge/*.txt` and `context/*.txt` under `root`. Missing
/// subdirectories simply yield an empty store — the pipeline runs with no
/// knowledge at all.
inline KnowledgeStore load_corpus(const std::filesystem::path& root) {
    KnowledgeStore store;
    std::set<std::string> seen_ids;

    auto list_sorted = [](const std::filesystem::path& dir) {
        std::vector<std::filesystem::path> files;
        if (std::filesystem::is_directory(dir))
            for (const auto& e : std::filesystem::directory_iterator(dir))
                if (e.is_regular_file() && e.path().extension() == ".txt")
                    files.push_back(e.path());
        std::sort(files.begin(), files.end());
        return files;
    };

    for (const auto& path : list_sorted(root / "knowledge")) {
        auto [header, body] = detail::parse_entry_file(path);
        KnowledgeEntry entry;
        entry.body = body;
        for (const auto& [key, value] : header) {
            if (key == "id") entry.entry_id = value;
            else if (key == "kind") {
                if (value == "conceptual") entry.kind = KnowledgeKind::conceptual;
                else if (value == "empirical") entry.kind = KnowledgeKind::empirical;
                else throw Error(ErrorKind::parse_error, path.string() + ": unknown kind '" + value + "'");
            } else if (key == "scope") entry.dataset_scope = value;
            else if (key == "tags") entry.tags = detail::split_tags(value);
            else throw Error(ErrorKind::parse_error, path.string() + ": unknown header key '" + key + "'");
        }
        if (entry.entry_id.empty())
            throw Error(ErrorKind::parse_error, path.string() + ": missing id");
        if (entry.body.empty())
            throw Error(ErrorKind::parse_error, path.string() + ": empty body");
        if (!seen_ids.insert(entry.entry_id).second)
            throw Error(ErrorKind::duplicate_id, "duplicate entry id '" + entry.entry_id + "'");
        store.entries.push_back(std::move(entry));
    }

    for (const auto& path : list_sorted(root / "context")) {
        auto [header, body] = detail::parse_entry_file(path);
        ContextEvent event;
        event.body = body;
        bool has_start = false, has_end = false;
        for (const auto& [key, value] : header) {
            if (key == "id") event.event_id = value;
            else if (key == "category") event.category = value;
            else if (key == "scope") event.dataset_scope = value;
            else if (key == "start") { event.start = parse_instant(value); has_start = true; }
            else if (key == "end") { event.end = parse_instant(value); has_end = true; }
            else throw Error(ErrorKind::parse_error, path.string() + ": unknown header key '" + key + "'");
        }
        if (event.event_id.empty())
            throw Error(ErrorKind::parse_error, path.string() + ": missing id");
        if (!has_start || !has_end)
            throw Error(ErrorKind::malformed_interval, path.string() + ": missing start or end");
        if (event.start > event.end)
            throw Error(ErrorKind::malformed_interval,
                        path.string() + ": start after end");
        if (!seen_ids.insert(event.event_id).second)
            throw Error(ErrorKind::duplicate_id, "duplicate entry id '" + event.event_id + "'");
        store.events.push_back(std::move(event));
    }
    return store;
}

/// Scope and tag filter with stable ordering: conceptual entries first, then
/// by entry id; capped at `budget` so prompt size stays bounded.
inline std::vector<KnowledgeEntry> query_knowledge(const KnowledgeStore& store,
                                                   const std::string& dataset,
                                                   const std::vector<std::string>& tags_filter = {},
                                                   std::size_t budget = 12) {
    std::vector<KnowledgeEntry> out;
    for (const auto& e : store.entries) {
        if (e.dataset_scope != dataset && e.dataset_scope != "*") continue;
        if (!tags_filter.empty()) {
            bool hit = false;
            for (const auto& t : tags_filter)
                if (std::find(e.tags.begin(), e.tags.end(), t) != e.tags.end()) {
                    hit = true;
                    break;
                }
            if (!hit) continue;
        }
        out.push_back(e);
    }
    std::stable_sort(out.begin(), out.end(), [](const KnowledgeEntry& a, const KnowledgeEntry& b) {
        if (a.kind != b.kind) return a.kind == KnowledgeKind::conceptual;
        return a.entry_id < b.entry_id;
    });
    if (out.size() > budget) out.resize(budget);
    return out;
}

/// Events whose closed interval [start, end] intersects [from, to], sorted by
/// start time. Horizon-overlapping events are as queryable as past ones.
inline std::vector<ContextEvent> query_context(const KnowledgeStore& store,
                                               const std::string& dataset, Instant from,
                                               Instant to) {
    if (from > to) throw Error(ErrorKind::malformed_interval, "query interval reversed");
    std::vector<ContextEvent> out;
    for (const auto& e : store.events) {
        if (e.dataset_scope != dataset && e.dataset_scope != "*") continue;
        if (e.end < from || e.start > to) continue;
        out.push_back(e);
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const ContextEvent& a, const ContextEvent& b) {
                         if (a.start != b.start) return a.start < b.start;
                         return a.event_id < b.event_id;
                     });
    return out;
}

} // namespace alphacast
