#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace floqskin {

/// 12 significant digits, '.' decimal point regardless of locale.
std::string format_number(double x);

/// Comma-separated table with a mandatory header row.
class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);

    CsvWriter& cell(double x);
    CsvWriter& cell(long long x);
    CsvWriter& cell(const std::string& s);
    /// Ends the current row; throws if the column count does not match the header.
    void end_row();
    void row(const std::vector<double>& values);

private:
    std::ofstream out_;
    std::size_t columns_;
    std::size_t filled_ = 0;
    std::filesystem::path path_;
};

} // namespace floqskin
