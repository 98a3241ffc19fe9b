// Copyright 2026 The Vmem Simulator Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "vmem/units.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <numeric>
#include <utility>

#include "vmem/error.hpp"

namespace vmem {

namespace {

constexpr std::array<std::pair<std::string_view, Errc>, 14> kErrcNames = {{
    {"ENOSPACE", Errc::kNoSpace},
    {"EFRAG_BIG", Errc::kFragBig},
    {"EALIGN", Errc::kAlign},
    {"ENOENT", Errc::kNoEnt},
    {"EINVAL", Errc::kInvalid},
    {"ESTATE", Errc::kStateMismatch},
    {"ETRANSITION", Errc::kIllegalTransition},
    {"EOVERLAP", Errc::kOverlap},
    {"EFAULT", Errc::kViolation},
    {"EEXIST", Errc::kExists},
    {"EBUSY", Errc::kBusy},
    {"ELAYOUT", Errc::kIncompatible},
    {"ETIMEDOUT", Errc::kTimeout},
    {"EDISABLED", Errc::kDisabled},
}};

Bytes unit_multiplier(char suffix) {
  switch (std::tolower(static_cast<unsigned char>(suffix))) {
    case 'b': return 1;
    case 'k': return kKiB;
    case 'm': return kMiB;
    case 'g': return kGiB;
    case 't': return kGiB * 1024;
    default: return 0;
  }
}

}  // namespace

std::string_view errc_name(Errc code) {
  for (const auto& [name, value] : kErrcNames) {
    if (value == code) return name;
  }
  return "EUNKNOWN";
}

Errc errc_from_name(std::string_view name) {
  for (const auto& [text, value] : kErrcNames) {
    if (text == name) return value;
  }
  throw VmemError(Errc::kInvalid, "unknown error code '" + std::string(name) + "'");
}

Bytes parse_size(std::string_view text) {
  if (text.empty()) throw VmemError(Errc::kInvalid, "empty size");
  // Suffix grammar: <number>[k|m|g|t][i][b], case-insensitive.
  std::string_view digits = text;
  auto lower_back = [&digits] {
    return static_cast<char>(std::tolower(static_cast<unsigned char>(digits.back())));
  };
  if (digits.size() > 1 && lower_back() == 'b') digits.remove_suffix(1);
  if (digits.size() > 1 && lower_back() == 'i') digits.remove_suffix(1);
  Bytes multiplier = 1;
  if (!std::isdigit(static_cast<unsigned char>(digits.back())) && digits.back() != '.') {
    multiplier = unit_multiplier(digits.back());
    if (multiplier == 0) {
      throw VmemError(Errc::kInvalid, "bad size suffix in '" + std::string(text) + "'");
    }
    digits.remove_suffix(1);
  }
  const auto dot = digits.find('.');
  std::string_view whole = digits.substr(0, dot);
  std::string_view frac = dot == std::string_view::npos ? std::string_view{} : digits.substr(dot + 1);
  if (whole.empty() && frac.empty()) {
    throw VmemError(Errc::kInvalid, "bad size '" + std::string(text) + "'");
  }
  Bytes int_part = 0;
  if (!whole.empty()) {
    auto [ptr, ec] = std::from_chars(whole.data(), whole.data() + whole.size(), int_part);
    if (ec != std::errc{} || ptr != whole.data() + whole.size()) {
      throw VmemError(Errc::kInvalid, "bad size '" + std::string(text) + "'");
    }
  }
  Bytes result = int_part * multiplier;
  if (!frac.empty()) {
    // Exact decimal fraction: frac_value / 10^digits of the multiplier.
    Bytes frac_value = 0;
    Bytes scale = 1;
    for (char c : frac) {
      if (!std::isdigit(static_cast<unsigned char>(c)) || scale > 1'000'000'000'000ULL) {
        throw VmemError(Errc::kInvalid, "bad size '" + std::string(text) + "'");
      }
      frac_value = frac_value * 10 + static_cast<Bytes>(c - '0');
      scale *= 10;
    }
    // frac_value * multiplier / scale must be whole; reduce first so the
    // product cannot overflow.
    const Bytes g = std::gcd(multiplier, scale);
    if (frac_value % (scale / g) != 0) {
      throw VmemError(Errc::kInvalid, "size '" + std::string(text) + "' is not a whole number of bytes");
    }
    result += frac_value / (scale / g) * (multiplier / g);
  }
  return result;
}

std::string format_size(Bytes bytes) {
  if (bytes == 0) return "0";
  constexpr std::array<std::pair<Bytes, char>, 3> kUnits = {{{kGiB, 'g'}, {kMiB, 'm'}, {kKiB, 'k'}}};
  for (const auto& [unit, suffix] : kUnits) {
    if (bytes % unit == 0) return std::to_string(bytes / unit) + suffix;
  }
  return std::to_string(bytes);
}

std::uint64_t parse_u64(std::string_view text) {
  int base = 10;
  if (text.size() > 2 && text[0] == '0' && (text[1] == 'x' || text[1] == 'X')) {
    text.remove_prefix(2);
    base = 16;
  }
  std::uint64_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value, base);
  if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size()) {
    throw VmemError(Errc::kInvalid, "bad integer '" + std::string(text) + "'");
  }
  return value;
}

std::string to_hex(std::uint64_t value) {
  std::array<char, 20> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value, 16);
  return "0x" + std::string(buf.data(), ptr);
}

}  // namespace vmem
