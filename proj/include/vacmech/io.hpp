#ifndef VACMECH_IO_HPP
#define VACMECH_IO_HPP

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "util.hpp"

namespace vacmech {

using nlohmann::json;

// ---------------------------------------------------------------- atomic files

// Write-then-rename so readers never observe a half-written file.
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
    namespace fs = std::filesystem;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot open '" + tmp.string() + "' for writing");
        out << content;
        out.flush();
        if (!out) throw Error("write to '" + tmp.string() + "' failed");
    }
    fs::rename(tmp, path);
}

// ---------------------------------------------------------------- CSV

// Tabular CSV with '#'-prefixed comment lines before the header. Numeric
// cells carry 17 significant digits so a rerun with the same backend is
// byte-identical.
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> columns) : columns_(std::move(columns)) {}

    void add_comment(const std::string& line) { comments_.push_back(line); }

    void add_row(const std::vector<double>& values) {
        if (values.size() != columns_.size()) throw ValidationError("CSV row width differs from header");
        std::vector<std::string> cells;
        cells.reserve(values.size());
        for (double v : values) cells.push_back(fmt17(v));
        rows_.push_back(std::move(cells));
    }

    void add_row(std::vector<std::string> cells) {
        if (cells.size() != columns_.size()) throw ValidationError("CSV row width differs from header");
        rows_.push_back(std::move(cells));
    }

    std::size_t row_count() const { return rows_.size(); }

    std::string serialize() const {
        std::string out;
        for (const auto& c : comments_) out += "# " + c + "\n";
        out += join(columns_);
        for (const auto& r : rows_) out += join(r);
        return out;
    }

    void write(const std::filesystem::path& path) const { atomic_write(path, serialize()); }

private:
    static std::string escape(const std::string& s) {
        if (s.find_first_of(",\"\n") == std::string::npos) return s;
        std::string q = "\"";
        for (char ch : s) {
            if (ch == '"') q += "\"\"";
            else q += ch;
        }
        q += "\"";
        return q;
    }
    static std::string join(const std::vector<std::string>& cells) {
        std::string line;
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) line += ",";
            line += escape(cells[i]);
        }
        line += "\n";
        return line;
    }

    std::vector<std::string> columns_;
    std::vector<std::string> comments_;
    std::vector<std::vector<std::string>> rows_;
};

// ---------------------------------------------------------------- JSON

inline json load_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigParseError("cannot open '" + path.string() + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigParseError(path.string() + ": " + e.what());
    }
}

inline void write_json_file(const std::filesystem::path& path, const json& j) {
    atomic_write(path, j.dump(2) + "\n");
}

// Digest of a config: hash of its canonical (sorted-key) serialization, so
// formatting and key order in the file never change the digest.
inline std::string config_digest(const json& j) { return hex64(fnv1a64(j.dump())); }

// ---------------------------------------------------------------- manifest

struct RunManifest {
    std::string config_digest;
    std::string code_version;
    std::string scenario;
    double wall_seconds = 0.0;
    std::vector<std::string> output_files;
    json convergence;  // cutoff-ladder evidence when convergence was requested
    json extra;        // scenario-level scalar results

    json to_json() const {
        json j;
        j["config_digest"] = config_digest;
        j["code_version"] = code_version;
        j["scenario"] = scenario;
        j["wall_seconds"] = wall_seconds;
        j["output_files"] = output_files;
        if (!convergence.is_null()) j["convergence"] = convergence;
        if (!extra.is_null()) j["results"] = extra;
        return j;
    }

    void write(const std::filesystem::path& path) const { write_json_file(path, to_json()); }
};

}  // namespace vacmech

#endif
