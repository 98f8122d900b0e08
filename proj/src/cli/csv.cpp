#include "microtrap/cli/csv.hpp"

#include "microtrap/errors.hpp"

#include <charconv>
#include <fmt/format.h>
#include <fmt/ranges.h>
#include <sstream>

namespace microtrap::cli
{
namespace
{
std::vector<std::string> split(const std::string& line)
{
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ','))
    {
        const auto b = item.find_first_not_of(" \t\r");
        const auto e = item.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? "" : item.substr(b, e - b + 1));
    }
    return out;
}

} // namespace

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
    : out_(path), columns_(header.size())
{
    if (!out_)
        throw ConfigError(fmt::format("cannot write '{}'", path.string()));
    for (const auto& h : header)
        cell(h);
    end_row();
}

CsvWriter& CsvWriter::cell(double v)
{
    return cell(fmt::format("{:.12g}", v));
}

CsvWriter& CsvWriter::cell(long long v)
{
    return cell(fmt::format("{}", v));
}

CsvWriter& CsvWriter::cell(const std::string& v)
{
    if (current_ > 0)
        out_ << ',';
    out_ << v;
    ++current_;
    return *this;
}

void CsvWriter::row(std::initializer_list<double> values)
{
    for (double v : values)
        cell(v);
    end_row();
}

void CsvWriter::end_row()
{
    if (current_ != columns_)
        throw DomainError(fmt::format("csv row has {} cells for {} columns", current_, columns_));
    out_ << '\n';
    current_ = 0;
}

Column2 read_two_column(const std::filesystem::path& path, const std::vector<std::string>& expected)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError(fmt::format("cannot read '{}'", path.string()));
    std::string line;
    if (!std::getline(in, line))
        throw ConfigError(fmt::format("'{}' is empty", path.string()));
    const auto header = split(line);
    if (header != expected)
        throw ConfigError(fmt::format("'{}' line 1: header '{}' does not match '{}'", path.string(),
                                      fmt::join(header, ","), fmt::join(expected, ",")));
    Column2 c;
    int number = 1;
    while (std::getline(in, line))
    {
        ++number;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        const auto cells = split(line);
        if (cells.size() != 2)
            throw ConfigError(fmt::format("'{}' line {}: expected 2 columns, got {}",
                                          path.string(), number, cells.size()));
        double v[2];
        for (int k = 0; k < 2; ++k)
        {
            const auto& s = cells[static_cast<std::size_t>(k)];
            auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v[k]);
            if (ec != std::errc{} || ptr != s.data() + s.size())
                throw ConfigError(fmt::format("'{}' line {}: '{}' is not a number in column {}",
                                              path.string(), number, s, expected[static_cast<std::size_t>(k)]));
        }
        c.first.push_back(v[0]);
        c.second.push_back(v[1]);
    }
    return c;
}

} // namespace microtrap::cli
