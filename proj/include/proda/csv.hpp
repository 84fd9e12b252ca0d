#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace proda {

/// Minimal comma-separated writer; fields never contain commas here.
class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);
    void row(const std::vector<std::string>& fields);

private:
    std::ofstream os_;
    std::size_t width_;
};

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Index of a named column; throws FormatError when absent.
    std::size_t column(const std::string& name) const;
};

CsvTable read_csv(const std::filesystem::path& path);

/// Shortest round-trip decimal form.
std::string format_real(double v);
double parse_real(const std::string& s);

} // namespace proda
