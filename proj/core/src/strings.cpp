// SPDX-License-Identifier: Apache-2.0

#include "satx/strings.hpp"

#include <charconv>
#include <system_error>

#include "satx/errors.hpp"

namespace satx {

std::string real_to_string(double x) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  if (ec != std::errc()) throw Error("real_to_string: conversion failed");
  return std::string(buf, end);
}

double real_from_string(std::string_view s) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw SchemaError("not a real number: '" + std::string(s) + "'");
  return out;
}

}  // namespace satx
