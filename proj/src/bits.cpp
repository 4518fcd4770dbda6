#include "treelearn/bits.hpp"

#include <sstream>

#include "treelearn/errors.hpp"

namespace treelearn {

int exact_log2(std::size_t n) {
  if (!is_power_of_two(n)) {
    throw DimensionMismatch("length " + std::to_string(n) + " is not a power of two");
  }
  int d = 0;
  while ((std::size_t{1} << d) < n) ++d;
  return d;
}

BitVector cube_point(std::size_t m, std::uint64_t index) {
  BitVector x(m);
  for (std::size_t t = 0; t < m; ++t) {
    const auto shift = m - 1 - t;
    x[t] = ((index >> shift) & 1U) ? Bit{1} : Bit{-1};
  }
  return x;
}

std::uint64_t cube_index(std::span<const Bit> x) {
  std::uint64_t index = 0;
  for (Bit b : x) index = (index << 1) | (b > 0 ? 1U : 0U);
  return index;
}

BitVector parse_bits(const std::string& text) {
  BitVector out;
  const bool signs_only = text.find_first_not_of("+-") == std::string::npos;
  if (signs_only) {
    for (char ch : text) out.push_back(ch == '+' ? Bit{1} : Bit{-1});
    if (out.empty()) throw ParseError("empty bit string");
    return out;
  }
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    auto first = tok.find_first_not_of(" \t");
    auto last = tok.find_last_not_of(" \t");
    if (first == std::string::npos) throw ParseError("empty entry in bit list '" + text + "'");
    tok = tok.substr(first, last - first + 1);
    if (tok == "1" || tok == "+1" || tok == "+") {
      out.push_back(1);
    } else if (tok == "-1" || tok == "-") {
      out.push_back(-1);
    } else {
      throw ParseError("not a +-1 value: '" + tok + "'");
    }
  }
  if (out.empty()) throw ParseError("empty bit list");
  return out;
}

std::string format_bits(std::span<const Bit> x) {
  std::string s;
  s.reserve(x.size());
  for (Bit b : x) s.push_back(b > 0 ? '+' : '-');
  return s;
}

void check_bit_vector(std::span<const Bit> x) {
  if (!is_power_of_two(x.size())) {
    throw DimensionMismatch("bit vector length " + std::to_string(x.size()) +
                            " is not a power of two");
  }
  for (Bit b : x) {
    if (!is_bit(b)) throw DimensionMismatch("bit vector entry is not +-1");
  }
}

}  // namespace treelearn
