// ============================================================================
// csv.hpp - minimal CSV reading/writing for the cohort file schemas
//
// Fields never contain commas or quotes in these schemas, so no quoting
// layer is implemented. Doubles are written with std::to_chars (shortest
// form that round-trips exactly).
// ============================================================================
#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "bpsd/common.hpp"

namespace bpsd {

inline std::string format_double(double v) {
    char buf[40];
    const auto r = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, r.ptr);
}

inline std::optional<double> parse_double(std::string_view s) {
    double v = 0.0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

inline std::optional<long long> parse_int(std::string_view s) {
    long long v = 0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

inline std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.emplace_back(line.substr(start));
            break;
        }
        out.emplace_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

struct CsvRow {
    std::vector<std::string> fields;
    std::size_t line_no = 0;
};

/// Line-oriented reader that validates the header and tracks line numbers
/// for error reporting. A zero-byte file reads as an empty, headerless file.
class CsvReader {
public:
    CsvReader(const std::filesystem::path& path, std::string_view expected_header)
        : path_(path.string()), in_(path) {
        if (!in_) throw DataError(path_ + ": cannot open file");
        std::string header;
        if (std::getline(in_, header)) {
            strip_cr(header);
            if (header != expected_header)
                throw DataError(path_ + ":1: expected header '" + std::string(expected_header) +
                                "', got '" + header + "'");
            line_no_ = 1;
        }
    }

    std::optional<CsvRow> next() {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_no_;
            strip_cr(line);
            if (line.empty()) continue;
            return CsvRow{split_csv_line(line), line_no_};
        }
        return std::nullopt;
    }

    [[noreturn]] void fail(std::size_t line_no, const std::string& message) const {
        throw DataError(path_ + ":" + std::to_string(line_no) + ": " + message);
    }

    const std::string& path() const { return path_; }

private:
    static void strip_cr(std::string& s) {
        if (!s.empty() && s.back() == '\r') s.pop_back();
    }

    std::string path_;
    std::ifstream in_;
    std::size_t line_no_ = 0;
};

inline void write_text_file(const std::filesystem::path& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError(path.string() + ": cannot open for writing");
    out.write(content.data(), std::streamsize(content.size()));
    if (!out) throw DataError(path.string() + ": write failed");
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(path.string() + ": cannot open file");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// FNV-1a over raw bytes; used for the run-manifest data hash.
inline std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (const char c : bytes) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace bpsd
