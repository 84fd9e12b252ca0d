#include "proda/csv.hpp"

#include <cerrno>
#include <cstdlib>
#include <sstream>

#include <fmt/format.h>

#include "proda/errors.hpp"

namespace proda {

namespace {

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

} // namespace

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
    : os_(path), width_(header.size()) {
    if (!os_) throw FormatError("cannot write " + path.string());
    row(header);
}

void CsvWriter::row(const std::vector<std::string>& fields) {
    if (fields.size() != width_) throw FormatError("csv: row width does not match header");
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) os_ << ',';
        os_ << fields[i];
    }
    os_ << '\n';
}

std::size_t CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    throw FormatError("csv: missing column '" + name + "'");
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw FormatError("cannot read " + path.string());
    CsvTable t;
    std::string line;
    if (!std::getline(is, line)) throw FormatError(path.string() + ": empty file");
    t.header = split(line);
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        auto f = split(line);
        if (f.size() != t.header.size())
            throw FormatError(fmt::format("{}: row has {} fields, header has {}", path.string(), f.size(),
                                          t.header.size()));
        t.rows.push_back(std::move(f));
    }
    return t;
}

std::string format_real(double v) { return fmt::format("{}", v); }

double parse_real(const std::string& s) {
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0' || errno == ERANGE) throw FormatError("not a number: '" + s + "'");
    return v;
}

} // namespace proda
