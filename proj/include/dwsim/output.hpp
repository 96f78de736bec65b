#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "json.hpp"

#include "dwsim/config.hpp"
#include "dwsim/error.hpp"

#ifndef DWSIM_VERSION
#define DWSIM_VERSION "0.1.0"
#endif

namespace dwsim {

using json = nlohmann::ordered_json;

inline std::string format_number(double v, int precision)
{
    if (std::isnan(v))
        return "nan";
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    if (v == 0.0)
        return "0";  // folds -0
    return fmt::format("{:.{}g}", v, precision);
}

/// Column-ordered table written as RFC 4180 CSV.
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

    void add_row(std::vector<std::string> row)
    {
        if (row.size() != header_.size())
            throw NumericalError("CSV row has " + std::to_string(row.size()) + " fields, header has " +
                                 std::to_string(header_.size()));
        rows_.push_back(std::move(row));
    }

    void add_numbers(const std::vector<double>& values, int precision)
    {
        std::vector<std::string> row;
        row.reserve(values.size());
        for (double v : values)
            row.push_back(format_number(v, precision));
        add_row(std::move(row));
    }

    std::string str() const
    {
        std::string out;
        auto line = [&](const std::vector<std::string>& fields) {
            for (std::size_t i = 0; i < fields.size(); ++i) {
                if (i)
                    out += ',';
                out += quote(fields[i]);
            }
            out += "\r\n";
        };
        line(header_);
        for (const auto& r : rows_)
            line(r);
        return out;
    }

    std::size_t rows() const { return rows_.size(); }

private:
    static std::string quote(const std::string& f)
    {
        if (f.find_first_of(",\"\r\n") == std::string::npos)
            return f;
        std::string q = "\"";
        for (char c : f) {
            if (c == '"')
                q += '"';
            q += c;
        }
        return q + "\"";
    }

    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

inline std::string sha256_hex(const std::string& data)
{
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw NumericalError("SHA-256 digest failed");
    std::string hex;
    for (unsigned int i = 0; i < len; ++i)
        hex += fmt::format("{:02x}", digest[i]);
    return hex;
}

/// Simple CSV reader for numeric columns (header row required).
inline std::vector<double> read_csv_column(const std::filesystem::path& path, const std::string& column)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open CSV input " + path.string());
    auto split = [](std::string line) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        std::vector<std::string> out;
        std::string cur;
        bool quoted = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            const char c = line[i];
            if (quoted) {
                if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else if (c == '"') {
                    quoted = false;
                } else {
                    cur += c;
                }
            } else if (c == '"') {
                quoted = true;
            } else if (c == ',') {
                out.push_back(cur);
                cur.clear();
            } else {
                cur += c;
            }
        }
        out.push_back(cur);
        return out;
    };
    std::string line;
    if (!std::getline(in, line))
        throw ConfigError(path.string() + " is empty");
    const auto header = split(line);
    std::size_t col = header.size();
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == column)
            col = i;
    if (col == header.size())
        throw ConfigError("column '" + column + "' not found in " + path.string());
    std::vector<double> values;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r")
            continue;
        const auto fields = split(line);
        if (fields.size() != header.size())
            throw ConfigError(fmt::format("{}:{}: expected {} fields, found {}", path.string(), lineno,
                                          header.size(), fields.size()));
        try {
            std::size_t used = 0;
            const double v = std::stod(fields[col], &used);
            if (used != fields[col].size())
                throw std::invalid_argument("trailing characters");
            values.push_back(v);
        } catch (const std::exception&) {
            throw ConfigError(fmt::format("{}:{}: '{}' is not a number", path.string(), lineno,
                                          fields[col]));
        }
    }
    return values;
}

/// Named output files plus a manifest with config, version and checksums.
class OutputBundle {
public:
    OutputBundle(std::string command, const RunConfig& cfg) : command_(std::move(command)), cfg_(cfg) {}

    void add_file(const std::string& name, std::string contents)
    {
        files_.push_back({name, std::move(contents)});
    }
    void add_csv(const std::string& name, const CsvTable& t) { add_file(name, t.str()); }
    void add_json(const std::string& name, const json& j) { add_file(name, j.dump(2) + "\n"); }

    /// Free-form results summary stored in the manifest.
    json& summary() { return summary_; }
    void note(const std::string& text) { notes_.push_back(text); }

    json manifest() const
    {
        json m;
        m["tool"] = "dwsim";
        m["version"] = DWSIM_VERSION;
        m["command"] = command_;
        m["basis_order"] = "index = (n + N) * (2F + 1) + (m_F + F), m_F ascending from -F";
        json config = json::object();
        for (const auto& [section, keys] : cfg_.resolved) {
            json s = json::object();
            for (const auto& [k, v] : keys)
                s[k] = v;
            config[section] = s;
        }
        m["config"] = config;
        m["defaults_applied"] = cfg_.defaults_applied;
        json files = json::array();
        for (const auto& f : files_)
            files.push_back({{"name", f.name}, {"bytes", f.contents.size()}, {"sha256", sha256_hex(f.contents)}});
        m["files"] = files;
        if (!summary_.is_null())
            m["summary"] = summary_;
        m["notes"] = notes_;
        return m;
    }

    /// Writes all files and manifest.json into dir; returns the written paths.
    std::vector<std::filesystem::path> write(const std::filesystem::path& dir) const
    {
        std::error_code ec;
        std::filesystem::create_directories(dir, ec);
        if (ec)
            throw ConfigError("cannot create output directory " + dir.string() + ": " + ec.message());
        std::vector<std::filesystem::path> written;
        auto put = [&](const std::string& name, const std::string& contents) {
            const auto path = dir / name;
            std::ofstream out(path, std::ios::binary | std::ios::trunc);
            out << contents;
            if (!out)
                throw ConfigError("failed to write " + path.string());
            written.push_back(path);
        };
        for (const auto& f : files_)
            put(f.name, f.contents);
        put("manifest.json", manifest().dump(2) + "\n");
        return written;
    }

    const std::string& file(const std::string& name) const
    {
        for (const auto& f : files_)
            if (f.name == name)
                return f.contents;
        throw ConfigError("bundle has no file " + name);
    }

    std::vector<std::string> file_names() const
    {
        std::vector<std::string> n;
        for (const auto& f : files_)
            n.push_back(f.name);
        return n;
    }

private:
    struct File {
        std::string name;
        std::string contents;
    };
    std::string command_;
    RunConfig cfg_;
    std::vector<File> files_;
    json summary_;
    std::vector<std::string> notes_;
};

}  // namespace dwsim
