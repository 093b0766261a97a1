#include "floqskin/csv.hpp"

#include "floqskin/types.hpp"

#include <charconv>
#include <cmath>

namespace floqskin {

std::string format_number(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 12);
    return {buf, res.ptr};
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
    : out_(path), columns_(header.size()), path_(path) {
    if (!out_) throw ConfigError("csv: cannot open " + path.string());
    for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
    out_ << '\n';
}

CsvWriter& CsvWriter::cell(const std::string& s) {
    if (filled_ == columns_) throw ConfigError("csv: too many columns in " + path_.string());
    out_ << (filled_++ ? "," : "") << s;
    return *this;
}

CsvWriter& CsvWriter::cell(double x) { return cell(format_number(x)); }

CsvWriter& CsvWriter::cell(long long x) { return cell(std::to_string(x)); }

void CsvWriter::end_row() {
    if (filled_ != columns_) throw ConfigError("csv: row width mismatch in " + path_.string());
    out_ << '\n';
    filled_ = 0;
}

void CsvWriter::row(const std::vector<double>& values) {
    for (double v : values) cell(v);
    end_row();
}

} // namespace floqskin
