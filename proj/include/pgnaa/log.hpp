#pragma once

#include <string_view>

namespace pgnaa {

// Warnings go to stderr unless silenced (tests and sweeps silence them).
void log_warning(std::string_view message);
void set_quiet(bool quiet);
bool quiet();

}  // namespace pgnaa
