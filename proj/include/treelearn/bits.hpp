#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace treelearn {

/// A value in {-1, +1}.
using Bit = std::int8_t;
using BitVector = std::vector<Bit>;

constexpr bool is_bit(int v) { return v == 1 || v == -1; }

constexpr bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

/// log2 of a power of two.
int exact_log2(std::size_t n);

/// The `index`-th point of {-1,+1}^m in lexicographic order with -1 < +1
/// (coordinate 0 is the most significant).
BitVector cube_point(std::size_t m, std::uint64_t index);

/// Inverse of cube_point.
std::uint64_t cube_index(std::span<const Bit> x);

/// Parses "+-+-" or "1,-1,1,-1" into bits. Throws ParseError.
BitVector parse_bits(const std::string& text);

/// Renders bits as a "+"/"-" string.
std::string format_bits(std::span<const Bit> x);

/// Throws DimensionMismatch unless every entry is +-1 and the length is a power of two.
void check_bit_vector(std::span<const Bit> x);

}  // namespace treelearn
