#include "microtrap/units.hpp"

#include "microtrap/errors.hpp"

#include <charconv>
#include <fmt/format.h>

namespace microtrap
{
namespace
{
struct Split
{
    double value;
    std::string_view unit;
};

Split split_quantity(std::string_view text)
{
    const char* begin = text.data();
    const char* end = text.data() + text.size();
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr == begin)
        throw ConfigError(fmt::format("cannot parse a number from '{}'", text));
    return {value, std::string_view(ptr, static_cast<std::size_t>(end - ptr))};
}

} // namespace

double parse_quantity(std::string_view text, std::string_view expected)
{
    const auto [value, unit] = split_quantity(text);
    if (unit != expected)
        throw ConfigError(fmt::format("unit mismatch in '{}': expected '{}', got '{}'", text,
                                      expected, unit.empty() ? "<none>" : unit));
    return value;
}

double parse_angle(std::string_view text)
{
    const auto [value, unit] = split_quantity(text);
    if (unit == "deg")
        return deg_to_rad(value);
    if (unit == "rad")
        return value;
    throw ConfigError(fmt::format("angle '{}' needs a 'deg' or 'rad' suffix", text));
}

} // namespace microtrap
