/*
 Copyright 2026 The sirnc Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#ifndef SIRNC_CLI_HPP_
#define SIRNC_CLI_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sirnc/control.hpp"
#include "sirnc/core.hpp"

// Run specs, command dispatch, CSV / manifest output and the registry of
// reproduction targets used by the sirnc command-line tool.

namespace sirnc::cli {

using KeyValues = std::map<std::string, std::string>;

/// Parses `key = value` lines. Blank lines and lines starting with '#' are
/// skipped. Throws SpecError on a malformed line or a repeated key.
KeyValues parse_spec_text(std::string_view text);
KeyValues parse_spec_file(const std::filesystem::path& path);

/// Decimal number, or a ratio "p/q" of two decimals. Throws SpecError.
double parse_number(std::string_view key, std::string_view text);

struct ParamDef {
    std::string key;
    std::string default_value;
    std::string doc;
};

struct CommandInfo {
    std::string name;
    std::string summary;
    std::vector<ParamDef> params;
};

/// Every command with its complete parameter schema.
const std::vector<CommandInfo>& commands();
const CommandInfo& command_info(std::string_view name);

/// Command parameters after merging a spec over the schema defaults.
class Params {
public:
    /// Throws SpecError on a key that is not in the schema.
    static Params resolve(const CommandInfo& info, const KeyValues& given);

    double num(const std::string& key) const;
    std::size_t count(const std::string& key) const;
    bool flag(const std::string& key) const;
    const std::string& str(const std::string& key) const;
    /// Comma-separated numbers.
    std::vector<double> list(const std::string& key) const;

    const KeyValues& values() const { return values_; }

private:
    KeyValues values_;
};

/// One output file: a header row and columns of equal length.
struct Curve {
    std::string name;
    /// Figure panel or table the curve belongs to.
    std::string panel;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> data;

    std::size_t rows() const { return data.empty() ? 0 : data.front().size(); }
    void add_column(std::string label, std::vector<double> values);
};

struct Check {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct Bundle {
    std::vector<Curve> curves;
    /// Named scalar results written to summary.json.
    std::vector<std::pair<std::string, double>> scalars;
    std::vector<Check> checks;
    std::vector<std::string> warnings;
    /// Extra binary files (file name, bytes).
    std::vector<std::pair<std::string, std::string>> blobs;
    /// Set when the run finished but the result is flagged (outputs are still
    /// written, then the tool exits with the code's status).
    std::optional<std::pair<ErrorCode, std::string>> soft_error;

    double scalar(std::string_view name) const;

    void append(Bundle other);
    bool all_checks_pass() const;
};

/// Header, then one row per sample, every value printed with 17 significant
/// digits, LF line endings. Throws IoError on an empty curve (no file is
/// written) or when the file cannot be created.
void write_csv(const Curve& curve, const std::filesystem::path& path);
Curve read_csv(const std::filesystem::path& path);

/// SHA-256 of a file as lower-case hex.
std::string sha256_file(const std::filesystem::path& path);

struct RunRecord {
    std::string command;
    std::string target;
    KeyValues params;
    std::vector<KeyValues> variants;
    std::uint64_t seed = 42;
};

/// Writes curves, index.csv, summary.json, blobs and manifest.json (every
/// other file with its SHA-256) into `dir`. Returns the written file names.
std::vector<std::string> write_bundle(const Bundle& bundle, const RunRecord& record,
                                      const std::filesystem::path& dir);

/// Value tables of a backward recursion: magic, format version, shape, then
/// the tables as little-endian doubles.
inline constexpr std::uint32_t kValueTableVersion = 1;
std::string encode_value_table(const control::DpResult& dp);

struct ValueTableDump {
    std::uint32_t version = 0;
    std::uint64_t horizon = 0;
    std::uint64_t n_levels = 0;
    std::vector<std::vector<double>> tables;
};
ValueTableDump decode_value_table(const std::string& bytes);

struct RunContext {
    std::uint64_t seed = 42;
};

/// Runs one command on resolved parameters.
Bundle run_command(const std::string& name, const Params& params, const RunContext& ctx);

struct ReproTarget {
    std::string id;
    std::string description;
    std::string command;
    /// Fixed parameters passed to `command`.
    KeyValues params;
    /// Overlays on `params`, one run each (a single run when empty).
    std::vector<KeyValues> variants;
    /// Optional checks and derived tables from the per-variant results.
    std::function<void(const std::vector<Bundle>& runs, Bundle& out)> post;
};

const std::vector<ReproTarget>& repro_targets();
/// Every id a reproduction target must exist for, in display order.
const std::vector<std::string>& repro_ids();
const ReproTarget& find_target(std::string_view id);
Bundle reproduce(const ReproTarget& target, const RunContext& ctx);

/// Exit codes of the tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitSpec = 2;
inline constexpr int kExitNumeric = 3;
inline constexpr int kExitCheck = 4;

int exit_code_for(ErrorCode code);

struct Invocation {
    std::string command;
    std::optional<std::filesystem::path> spec;
    std::filesystem::path out_dir = "out";
    std::uint64_t seed = 42;
    std::optional<double> step;
    bool quiet = false;
    /// key=value overrides applied after the spec file.
    std::vector<std::string> overrides;
    /// reproduce only.
    std::string target;
    bool check = false;
};

/// Runs an invocation end to end and returns the exit code. On failure a
/// machine-readable error.json is written to out_dir (when possible) and the
/// same record is printed to stderr.
int run(const Invocation& inv);

}  // namespace sirnc::cli

#endif  // SIRNC_CLI_HPP_
