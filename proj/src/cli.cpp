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

#include "sirnc/cli.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>

#include "json.hpp"

namespace sirnc::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void spec_error(const std::string& msg) { throw Error(ErrorCode::SpecError, msg); }

double parse_decimal(std::string_view key, const std::string& text)
{
    if (text.empty()) {
        spec_error("empty value for '" + std::string(key) + "'");
    }
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (end != text.c_str() + text.size() || errno == ERANGE || !std::isfinite(v)) {
        spec_error("'" + std::string(key) + "': not a finite number: " + text);
    }
    return v;
}

std::string format_double(double v)
{
    std::array<char, 32> buf{};
    std::snprintf(buf.data(), buf.size(), "%.17g", v);
    return buf.data();
}

}  // namespace

KeyValues parse_spec_text(std::string_view text)
{
    KeyValues out;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) {
            nl = text.size();
        }
        const std::string line = trim(text.substr(pos, nl - pos));
        pos = nl + 1;
        ++line_no;
        if (line.empty() || line.front() == '#') {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            spec_error("line " + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key = trim(std::string_view(line).substr(0, eq));
        const std::string value = trim(std::string_view(line).substr(eq + 1));
        if (key.empty()) {
            spec_error("line " + std::to_string(line_no) + ": empty key");
        }
        if (!out.emplace(key, value).second) {
            spec_error("line " + std::to_string(line_no) + ": repeated key '" + key + "'");
        }
    }
    return out;
}

KeyValues parse_spec_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        spec_error("cannot read spec file " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_spec_text(ss.str());
}

double parse_number(std::string_view key, std::string_view text)
{
    const std::string t = trim(text);
    const auto slash = t.find('/');
    if (slash == std::string::npos) {
        return parse_decimal(key, t);
    }
    const double num = parse_decimal(key, trim(std::string_view(t).substr(0, slash)));
    const double den = parse_decimal(key, trim(std::string_view(t).substr(slash + 1)));
    if (den == 0.0) {
        spec_error("'" + std::string(key) + "': zero denominator");
    }
    return num / den;
}

const CommandInfo& command_info(std::string_view name)
{
    for (const auto& c : commands()) {
        if (c.name == name) {
            return c;
        }
    }
    spec_error("unknown command '" + std::string(name) + "'");
}

Params Params::resolve(const CommandInfo& info, const KeyValues& given)
{
    Params p;
    for (const auto& d : info.params) {
        p.values_[d.key] = d.default_value;
    }
    for (const auto& [k, v] : given) {
        auto it = p.values_.find(k);
        if (it == p.values_.end()) {
            spec_error("unknown key '" + k + "' for command " + info.name);
        }
        it->second = v;
    }
    return p;
}

const std::string& Params::str(const std::string& key) const
{
    auto it = values_.find(key);
    if (it == values_.end()) {
        throw Error(ErrorCode::InvalidArgument, "parameter '" + key + "' is not in the schema");
    }
    return it->second;
}

double Params::num(const std::string& key) const { return parse_number(key, str(key)); }

std::size_t Params::count(const std::string& key) const
{
    const double v = num(key);
    if (v < 0.0 || v != std::floor(v) || v > 1e9) {
        spec_error("'" + key + "' must be a non-negative integer");
    }
    return static_cast<std::size_t>(v);
}

bool Params::flag(const std::string& key) const
{
    const std::string& v = str(key);
    if (v == "1" || v == "true" || v == "yes") {
        return true;
    }
    if (v == "0" || v == "false" || v == "no") {
        return false;
    }
    spec_error("'" + key + "' must be a boolean");
}

std::vector<double> Params::list(const std::string& key) const
{
    std::vector<double> out;
    const std::string& v = str(key);
    if (trim(v).empty()) {
        return out;
    }
    std::size_t pos = 0;
    while (pos <= v.size()) {
        auto comma = v.find(',', pos);
        if (comma == std::string::npos) {
            comma = v.size();
        }
        out.push_back(parse_number(key, std::string_view(v).substr(pos, comma - pos)));
        pos = comma + 1;
    }
    return out;
}

void Curve::add_column(std::string label, std::vector<double> values)
{
    if (!data.empty() && values.size() != data.front().size()) {
        throw Error(ErrorCode::InvalidArgument, "column '" + label + "' has the wrong length");
    }
    columns.push_back(std::move(label));
    data.push_back(std::move(values));
}

void Bundle::append(Bundle other)
{
    for (auto& c : other.curves) {
        curves.push_back(std::move(c));
    }
    for (auto& s : other.scalars) {
        scalars.push_back(std::move(s));
    }
    for (auto& c : other.checks) {
        checks.push_back(std::move(c));
    }
    for (auto& w : other.warnings) {
        warnings.push_back(std::move(w));
    }
    for (auto& b : other.blobs) {
        blobs.push_back(std::move(b));
    }
}

double Bundle::scalar(std::string_view name) const
{
    for (const auto& [k, v] : scalars) {
        if (k == name) {
            return v;
        }
    }
    throw Error(ErrorCode::InvalidArgument, "no scalar named " + std::string(name));
}

bool Bundle::all_checks_pass() const
{
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

void write_csv(const Curve& curve, const fs::path& path)
{
    if (curve.columns.empty() || curve.rows() == 0) {
        throw Error(ErrorCode::IoError, "refusing to write empty curve '" + curve.name + "'");
    }
    if (curve.columns.size() != curve.data.size()) {
        throw Error(ErrorCode::InvalidArgument, "curve '" + curve.name + "': header and data disagree");
    }
    std::string text;
    for (std::size_t c = 0; c < curve.columns.size(); ++c) {
        text += (c ? "," : "") + curve.columns[c];
    }
    text += '\n';
    for (std::size_t r = 0; r < curve.rows(); ++r) {
        for (std::size_t c = 0; c < curve.data.size(); ++c) {
            if (c) {
                text += ',';
            }
            text += format_double(curve.data[c].at(r));
        }
        text += '\n';
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out || !out.write(text.data(), static_cast<std::streamsize>(text.size()))) {
        throw Error(ErrorCode::IoError, "cannot write " + path.string());
    }
}

Curve read_csv(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::IoError, "cannot read " + path.string());
    }
    Curve curve;
    curve.name = path.stem().string();
    std::string line;
    if (!std::getline(in, line)) {
        throw Error(ErrorCode::IoError, path.string() + ": missing header");
    }
    std::stringstream hs(line);
    for (std::string cell; std::getline(hs, cell, ',');) {
        curve.columns.push_back(cell);
    }
    curve.data.resize(curve.columns.size());
    while (std::getline(in, line)) {
        std::stringstream rs(line);
        std::size_t c = 0;
        for (std::string cell; std::getline(rs, cell, ','); ++c) {
            if (c >= curve.columns.size()) {
                throw Error(ErrorCode::IoError, path.string() + ": ragged row");
            }
            curve.data[c].push_back(parse_decimal(curve.columns[c], cell));
        }
        if (c != curve.columns.size()) {
            throw Error(ErrorCode::IoError, path.string() + ": ragged row");
        }
    }
    return curve;
}

std::string sha256_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::IoError, "cannot hash " + path.string());
    }
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    std::array<char, 1 << 16> buf{};
    while (in.read(buf.data(), buf.size()) || in.gcount() > 0) {
        EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, md.data(), &len);
    EVP_MD_CTX_free(ctx);
    std::string hex;
    static constexpr char kDigits[] = "0123456789abcdef";
    for (unsigned int k = 0; k < len; ++k) {
        hex += kDigits[md[k] >> 4];
        hex += kDigits[md[k] & 0xF];
    }
    return hex;
}

namespace {

void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out || !out.write(text.data(), static_cast<std::streamsize>(text.size()))) {
        throw Error(ErrorCode::IoError, "cannot write " + path.string());
    }
}

// JSON cannot hold inf / nan; store those as strings.
ordered_json json_number(double v)
{
    if (std::isfinite(v)) {
        return v;
    }
    return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
}

}  // namespace

std::vector<std::string> write_bundle(const Bundle& bundle, const RunRecord& record, const fs::path& dir)
{
    if (bundle.curves.empty()) {
        throw Error(ErrorCode::IoError, "nothing to write");
    }
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
    }
    std::vector<std::string> files;
    std::string index = "file,panel,columns\n";
    for (const auto& c : bundle.curves) {
        const std::string file = c.name + ".csv";
        if (std::find(files.begin(), files.end(), file) != files.end()) {
            throw Error(ErrorCode::InvalidArgument, "duplicate curve name " + c.name);
        }
        write_csv(c, dir / file);
        files.push_back(file);
        std::string cols;
        for (std::size_t k = 1; k < c.columns.size(); ++k) {
            cols += (k > 1 ? " " : "") + c.columns[k];
        }
        index += file + "," + c.panel + "," + cols + "\n";
    }
    write_text(dir / "index.csv", index);
    files.push_back("index.csv");

    ordered_json summary;
    summary["command"] = record.command;
    if (!record.target.empty()) {
        summary["target"] = record.target;
    }
    ordered_json scalars = ordered_json::object();
    for (const auto& [k, v] : bundle.scalars) {
        scalars[k] = json_number(v);
    }
    summary["scalars"] = scalars;
    ordered_json checks = ordered_json::array();
    for (const auto& c : bundle.checks) {
        checks.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
    }
    summary["checks"] = checks;
    summary["warnings"] = bundle.warnings;
    write_text(dir / "summary.json", summary.dump(2) + "\n");
    files.push_back("summary.json");

    for (const auto& [name, bytes] : bundle.blobs) {
        write_text(dir / name, bytes);
        files.push_back(name);
    }

    ordered_json manifest;
    manifest["command"] = record.command;
    if (!record.target.empty()) {
        manifest["target"] = record.target;
    }
    manifest["seed"] = record.seed;
    manifest["params"] = record.params;
    if (!record.variants.empty()) {
        manifest["variants"] = record.variants;
    }
    ordered_json outputs = ordered_json::array();
    for (const auto& f : files) {
        outputs.push_back({{"path", f}, {"bytes", fs::file_size(dir / f)}, {"sha256", sha256_file(dir / f)}});
    }
    manifest["outputs"] = outputs;
    write_text(dir / "manifest.json", manifest.dump(2) + "\n");
    files.push_back("manifest.json");
    return files;
}

namespace {

constexpr char kValueTableMagic[8] = {'S', 'I', 'R', 'N', 'C', 'V', 'T', '\0'};

template <typename T>
void put(std::string& out, T v)
{
    static_assert(std::endian::native == std::endian::little, "little-endian host required");
    char raw[sizeof(T)];
    std::memcpy(raw, &v, sizeof(T));
    out.append(raw, sizeof(T));
}

template <typename T>
T take(const std::string& in, std::size_t& pos)
{
    if (pos + sizeof(T) > in.size()) {
        throw Error(ErrorCode::IoError, "value table truncated");
    }
    T v;
    std::memcpy(&v, in.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}

}  // namespace

std::string encode_value_table(const control::DpResult& dp)
{
    std::string out(kValueTableMagic, sizeof(kValueTableMagic));
    put<std::uint32_t>(out, kValueTableVersion);
    const auto& tables = dp.table();
    put<std::uint64_t>(out, dp.horizon());
    put<std::uint64_t>(out, dp.problem().n_levels());
    put<std::uint64_t>(out, tables.size());
    for (const auto& layer : tables) {
        put<std::uint64_t>(out, layer.size());
        for (double v : layer) {
            put<double>(out, v);
        }
    }
    return out;
}

ValueTableDump decode_value_table(const std::string& bytes)
{
    if (bytes.size() < sizeof(kValueTableMagic) ||
        std::memcmp(bytes.data(), kValueTableMagic, sizeof(kValueTableMagic)) != 0) {
        throw Error(ErrorCode::IoError, "not a value table");
    }
    std::size_t pos = sizeof(kValueTableMagic);
    ValueTableDump d;
    d.version = take<std::uint32_t>(bytes, pos);
    if (d.version != kValueTableVersion) {
        throw Error(ErrorCode::IoError, "unsupported value table version " + std::to_string(d.version));
    }
    d.horizon = take<std::uint64_t>(bytes, pos);
    d.n_levels = take<std::uint64_t>(bytes, pos);
    const auto layers = take<std::uint64_t>(bytes, pos);
    for (std::uint64_t t = 0; t < layers; ++t) {
        const auto n = take<std::uint64_t>(bytes, pos);
        std::vector<double> layer(n);
        for (auto& v : layer) {
            v = take<double>(bytes, pos);
        }
        d.tables.push_back(std::move(layer));
    }
    if (pos != bytes.size()) {
        throw Error(ErrorCode::IoError, "trailing bytes in value table");
    }
    return d;
}

int exit_code_for(ErrorCode code)
{
    switch (code) {
        case ErrorCode::SpecError:
        case ErrorCode::InvalidArgument:
        case ErrorCode::IoError:
            return kExitSpec;
        default:
            return kExitNumeric;
    }
}

namespace {

int report_error(const Invocation& inv, const std::string& code, const std::string& message, int exit_code)
{
    ordered_json rec;
    rec["status"] = "error";
    rec["command"] = inv.command;
    if (!inv.target.empty()) {
        rec["target"] = inv.target;
    }
    rec["code"] = code;
    rec["exit_code"] = exit_code;
    rec["message"] = message;
    const std::string text = rec.dump() + "\n";
    std::cerr << text;
    std::error_code ec;
    fs::create_directories(inv.out_dir, ec);
    if (!ec) {
        std::ofstream out(inv.out_dir / "error.json", std::ios::binary | std::ios::trunc);
        out << text;
    }
    return exit_code;
}

KeyValues gather(const Invocation& inv)
{
    KeyValues kv;
    if (inv.spec) {
        kv = parse_spec_file(*inv.spec);
    }
    for (const auto& o : inv.overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos) {
            spec_error("override '" + o + "' is not key=value");
        }
        kv[trim(std::string_view(o).substr(0, eq))] = trim(std::string_view(o).substr(eq + 1));
    }
    if (inv.step) {
        if (!(*inv.step > 0.0)) {
            spec_error("--step must be positive");
        }
        kv["step"] = format_double(*inv.step);
    }
    return kv;
}

}  // namespace

int run(const Invocation& inv)
{
    try {
        RunContext ctx{inv.seed};
        RunRecord record;
        record.command = inv.command;
        record.seed = inv.seed;
        Bundle bundle;
        if (inv.command == "reproduce") {
            const ReproTarget& target = find_target(inv.target);
            if (inv.spec || !inv.overrides.empty() || inv.step) {
                spec_error("reproduce takes its parameters from the target registry");
            }
            record.target = target.id;
            record.params = target.params;
            record.variants = target.variants;
            bundle = reproduce(target, ctx);
        } else {
            const CommandInfo& info = command_info(inv.command);
            const Params params = Params::resolve(info, gather(inv));
            record.params = params.values();
            bundle = run_command(inv.command, params, ctx);
        }
        write_bundle(bundle, record, inv.out_dir);
        if (!inv.quiet) {
            for (const auto& w : bundle.warnings) {
                std::cerr << "warning: " << w << "\n";
            }
            for (const auto& [k, v] : bundle.scalars) {
                std::cout << k << " = " << format_double(v) << "\n";
            }
            for (const auto& c : bundle.checks) {
                std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << c.detail << "\n";
            }
            std::cout << "wrote " << bundle.curves.size() << " curve(s) to " << inv.out_dir.string() << "\n";
        }
        if (bundle.soft_error) {
            const auto& [code, msg] = *bundle.soft_error;
            return report_error(inv, std::string(to_string(code)), msg, exit_code_for(code));
        }
        if (inv.check && !bundle.all_checks_pass()) {
            std::string failed;
            for (const auto& c : bundle.checks) {
                if (!c.pass) {
                    failed += (failed.empty() ? "" : "; ") + c.name + " (" + c.detail + ")";
                }
            }
            return report_error(inv, "CheckFailed", failed, kExitCheck);
        }
        return kExitOk;
    } catch (const Error& e) {
        return report_error(inv, std::string(to_string(e.code())), e.what(), exit_code_for(e.code()));
    } catch (const std::exception& e) {
        return report_error(inv, "InternalError", e.what(), kExitNumeric);
    }
}

}  // namespace sirnc::cli
