#include "nsrlab/text.hpp"

#include <array>
#include <charconv>
#include <cmath>

namespace nsrlab {

namespace {

std::string non_finite(double value) {
  if (std::isnan(value)) return "nan";
  return value > 0 ? "inf" : "-inf";
}

template <class... Args>
std::string to_chars_string(double value, Args... args) {
  if (!std::isfinite(value)) return non_finite(value);
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value, args...);
  return std::string(buf.data(), res.ptr);
}

}  // namespace

std::string format_double(double value) { return to_chars_string(value); }

std::string format_scientific(double value, int digits) {
  return to_chars_string(value, std::chars_format::scientific, digits);
}

std::string format_fixed(double value, int digits) {
  return to_chars_string(value, std::chars_format::fixed, digits);
}

std::string pad_right(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

std::string pad_left(std::string s, std::size_t width) {
  if (s.size() < width) s.insert(0, width - s.size(), ' ');
  return s;
}

}  // namespace nsrlab
