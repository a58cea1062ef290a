#pragma once

#include <json.hpp>

#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace mensura {

// Location of a reported item inside a CMME document. Fields are 1-based;
// -1 means "not applicable".
struct Warning {
    std::string message;
    int section = -1;
    int voice = -1;
    long ordinal = -1;

    bool operator==(const Warning&) const = default;

    std::string location() const {
        std::string loc;
        if (section >= 0) loc += "section " + std::to_string(section);
        if (voice >= 0) loc += (loc.empty() ? "" : ", ") + std::string("voice ") + std::to_string(voice);
        if (ordinal >= 0) loc += (loc.empty() ? "" : ", ") + std::string("event ") + std::to_string(ordinal);
        return loc;
    }

    std::string format() const {
        std::string loc = location();
        return loc.empty() ? message : message + " [" + loc + "]";
    }
};

struct FileStats {
    long events = 0;
    long notes = 0;
    long measures = 0;
    long tuplets = 0;
    long ties = 0;

    FileStats& operator+=(const FileStats& o) {
        events += o.events;
        notes += o.notes;
        measures += o.measures;
        tuplets += o.tuplets;
        ties += o.ties;
        return *this;
    }
    bool operator==(const FileStats&) const = default;
};

// Structured record of everything a conversion wants to say about one file:
// counts, warnings, hard errors, and features that were dropped on the way.
struct ConversionReport {
    std::string file;
    FileStats counts;
    std::vector<Warning> warnings;
    std::vector<std::string> errors;
    std::vector<std::string> dropped;
    double elapsed_ms = 0.0;

    void warn(std::string msg, int section = -1, int voice = -1, long ordinal = -1) {
        warnings.push_back(Warning{std::move(msg), section, voice, ordinal});
    }
    void error(std::string msg) { errors.push_back(std::move(msg)); }
    void drop(std::string what) { dropped.push_back(std::move(what)); }

    bool ok() const { return errors.empty(); }

    void merge(const ConversionReport& o) {
        counts += o.counts;
        warnings.insert(warnings.end(), o.warnings.begin(), o.warnings.end());
        errors.insert(errors.end(), o.errors.begin(), o.errors.end());
        dropped.insert(dropped.end(), o.dropped.begin(), o.dropped.end());
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["file"] = file;
        j["counts"] = {{"events", counts.events}, {"notes", counts.notes},
                       {"measures", counts.measures}, {"tuplets", counts.tuplets},
                       {"ties", counts.ties}};
        auto warns = nlohmann::ordered_json::array();
        for (const auto& w : warnings) warns.push_back(w.format());
        j["warnings"] = warns;
        j["errors"] = errors;
        j["dropped_features"] = dropped;
        j["elapsed_ms"] = elapsed_ms;
        return j;
    }

    std::string to_text() const {
        std::ostringstream os;
        os << file << ": " << counts.events << " events, " << counts.notes << " notes, "
           << counts.measures << " measures, " << counts.tuplets << " tuplets, "
           << counts.ties << " ties\n";
        for (const auto& w : warnings) os << "  warning: " << w.format() << "\n";
        for (const auto& e : errors) os << "  error: " << e << "\n";
        for (const auto& d : dropped) os << "  dropped: " << d << "\n";
        return os.str();
    }
};

// Order-independent aggregate over a batch: files keyed by path, totals
// summed, so folding per-file reports in any order gives the same result.
struct BatchReport {
    std::map<std::string, ConversionReport> files;

    void add(ConversionReport r) { files[r.file] = std::move(r); }

    FileStats totals() const {
        FileStats t;
        for (const auto& [_, r] : files) t += r.counts;
        return t;
    }

    int error_count() const {
        int n = 0;
        for (const auto& [_, r] : files) n += static_cast<int>(r.errors.size());
        return n;
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        auto t = totals();
        j["totals"] = {{"files", files.size()}, {"events", t.events}, {"notes", t.notes},
                       {"measures", t.measures}, {"tuplets", t.tuplets}, {"ties", t.ties},
                       {"errors", error_count()}};
        auto arr = nlohmann::ordered_json::array();
        for (const auto& [_, r] : files) arr.push_back(r.to_json());
        j["files"] = arr;
        return j;
    }

    std::string to_text() const {
        std::ostringstream os;
        for (const auto& [_, r] : files) os << r.to_text();
        auto t = totals();
        os << "total: " << files.size() << " files, " << t.notes << " notes, "
           << error_count() << " errors\n";
        return os.str();
    }
};

}  // namespace mensura
