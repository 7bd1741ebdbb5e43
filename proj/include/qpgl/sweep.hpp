#ifndef QPGL_SWEEP_HPP
#define QPGL_SWEEP_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace qpgl {

inline constexpr const char* kVersion = "0.1.0";

using Json = nlohmann::ordered_json;

struct SweepConfig {
    Json doc;
    std::string digest;  // FNV-1a of the effective config text
    std::uint64_t seed = 0;
    int workers = 1;
    std::string out_dir = "out";
};

// parse errors carry the line, validation errors the offending key
SweepConfig load_config_file(const std::string& path);
SweepConfig parse_config(Json doc);

// dotted-path override "a.b.c=value"; the value is parsed as JSON when it
// parses, and taken as a string otherwise
void apply_override(Json& doc, const std::string& assignment);

struct TaskOutcome {
    std::vector<std::pair<std::string, std::string>> fields;  // column -> formatted value
    std::vector<std::string> detail_rows;                     // per-subcommand aux CSV rows
    std::string status;                                       // empty means success
};

struct SweepResult {
    std::string subcommand;
    std::vector<std::string> columns;
    std::vector<TaskOutcome> records;  // task-index order, any worker count
    Json summary;
    std::string timestamp;  // in-memory provenance only; outputs stay reproducible

    bool ok() const {
        for (const auto& r : records)
            if (!r.status.empty()) return false;
        return true;
    }
};

// executes the subcommand over its task grid and writes
// <out>/<subcommand>.csv and .json (plus aux files); exit status 0 iff no
// task errored
SweepResult run_sweep(const std::string& subcommand, const SweepConfig& cfg);

const std::vector<std::string>& sweep_subcommands();

std::string format_real(double v);  // %.17g
std::uint64_t fnv1a(const std::string& s);

}  // namespace qpgl

#endif
