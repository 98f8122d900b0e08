#pragma once

#include <string>
#include <vector>

namespace microtrap::cli
{
/// Exit codes: 0 ok, 1 numerical failure, 2 usage or configuration error.
int run(int argc, const char* const* argv);

/// Identifiers accepted by `reproduce --figure`.
[[nodiscard]] const std::vector<std::string>& figure_ids();

} // namespace microtrap::cli
