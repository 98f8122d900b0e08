#pragma once

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <vector>

namespace microtrap::cli
{
/// Comma-separated output with fixed numeric formatting, so equal inputs give
/// byte-identical files.
class CsvWriter
{
public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);

    CsvWriter& cell(double v);
    CsvWriter& cell(long long v);
    CsvWriter& cell(int v) { return cell(static_cast<long long>(v)); }
    CsvWriter& cell(std::size_t v) { return cell(static_cast<long long>(v)); }
    CsvWriter& cell(const std::string& v);
    void row(std::initializer_list<double> values);
    void end_row();

private:
    std::ofstream out_;
    std::size_t columns_;
    std::size_t current_ = 0;
};

struct Column2
{
    std::vector<double> first;
    std::vector<double> second;
};

/// Reads a two-column numeric CSV whose header must equal `expected`, e.g.
/// {"detuning_MHz", "counts"}; a header naming other units is rejected.
[[nodiscard]] Column2 read_two_column(const std::filesystem::path& path,
                                      const std::vector<std::string>& expected);

} // namespace microtrap::cli
