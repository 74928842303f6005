#pragma once

// Experiment config files, CSV results, run manifests and the maskcov command line.

#include "maskcov/experiments.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace maskcov {

inline constexpr std::string_view kToolVersion = "0.1.0";

struct StudySpec {
    Axis axis = Axis::n;
    std::vector<double> values;
};

/// Either a validated config or every problem found in the document.
struct ParsedConfig {
    std::optional<ExperimentConfig> config;
    std::optional<StudySpec> study;
    std::vector<std::string> errors;
    /// Key-sorted compact dump of the document; empty when it is not valid JSON.
    std::string canonical;
    std::uint64_t hash = 0;

    bool ok() const { return config.has_value() && errors.empty(); }
};

/// Config document (JSON). Unknown keys are rejected at every level.
///
///   {
///     "model": {"covariance": {"kind": "ar1", "p": 64, "rho": 0.5},
///               "family": "gaussian", "df": 9},
///     "mask": {"kind": "banded", "bandwidth": 5},
///     "n": 256, "trials": 100, "seed": 1, "centered": false,
///     "eps": 0.5, "threads": 0,
///     "study": {"axis": "n", "values": [128, 256, 512]}
///   }
///
/// Covariance kinds: identity (scale), ar1 (rho), decaying (alpha),
/// rank_one_plus (lambda, delta), custom (path). Mask kinds: banded and tapered
/// (bandwidth), all_ones, custom (path). Relative paths resolve against the
/// directory holding the config file.
ParsedConfig parse_config(const std::string& path);
ParsedConfig parse_config_text(std::string_view text, const std::filesystem::path& base_dir = {});

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);

/// Seed precedence: flag, then MASKCOV_SEED, then the fallback.
std::uint64_t resolve_seed(std::optional<std::uint64_t> flag, std::uint64_t fallback);

struct RunManifest {
    std::string command;
    std::uint64_t config_hash = 0;
    std::string tool_version{kToolVersion};
    std::string started;
    std::string finished;
    std::vector<std::string> outputs;
};

/// UTC, ISO 8601 with seconds.
std::string utc_timestamp();

void write_manifest(const RunManifest& manifest, const std::string& path);

/// One parsed CSV result line.
struct CsvRow {
    double axis_value = 0.0;
    double empirical_rms = 0.0;
    double std_error = 0.0;
    double theoretical_total = 0.0;
    double theoretical_moderate = 0.0;
    double theoretical_large_dev = 0.0;
    double ratio = 0.0;
    std::uint64_t trials = 0;
    std::uint64_t seed = 0;

    friend bool operator==(const CsvRow&, const CsvRow&) = default;
};

inline constexpr std::string_view kCsvHeader =
    "axis_value,empirical_rms,std_error,theoretical_total,theoretical_moderate,"
    "theoretical_large_dev,ratio,trials,seed";

CsvRow to_csv_row(const ScalingRow& row);

/// Writes to a sibling temporary file and renames it into place.
void emit_csv(std::span<const ScalingRow> rows, const std::string& path);
void write_csv(std::ostream& out, std::span<const ScalingRow> rows);

std::vector<CsvRow> read_csv(std::istream& in);
std::vector<CsvRow> read_csv_file(const std::string& path);

/// Writes `contents` through a temporary file and a rename.
void write_file_atomic(const std::string& path, std::string_view contents);

/// Entry point of the maskcov executable. Returns 0 on success, 1 on usage or
/// validation errors and 2 when a verification check fails. Failures write one
/// JSON line to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace maskcov
