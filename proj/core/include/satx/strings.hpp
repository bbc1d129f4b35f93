// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>

namespace satx {

// Shortest decimal string that round-trips the value exactly. Model and
// feature files store reals this way so output never depends on the
// platform's printf formatting.
std::string real_to_string(double x);

// Inverse of real_to_string; accepts any decimal/scientific literal.
// Throws SchemaError on trailing garbage or empty input.
double real_from_string(std::string_view s);

}  // namespace satx
