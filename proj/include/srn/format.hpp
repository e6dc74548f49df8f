#pragma once

#include <charconv>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>

namespace srn {

/// Shortest decimal text that parses back to the identical double.
inline std::string format_double(double value)
{
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  if (res.ec != std::errc{}) { throw std::runtime_error("format_double: conversion failed"); }
  return std::string(buf, res.ptr);
}

/// Parses the whole string as a double; nullopt on any trailing garbage.
inline std::optional<double> parse_double(std::string_view text)
{
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) { text.remove_prefix(1); }
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) {
    text.remove_suffix(1);
  }
  if (!text.empty() && text.front() == '+') { text.remove_prefix(1); }
  if (text.empty()) { return std::nullopt; }
  double value = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) { return std::nullopt; }
  return value;
}

}  // namespace srn
