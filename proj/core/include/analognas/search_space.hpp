#pragma once

// NAS-Bench-201 cell search space: a 4-node DAG whose 6 edges each carry one
// of five operations.
//
// Canonical edge order (matches the NB201 string grouping by target node):
//   0: 0->1   1: 0->2   2: 1->2   3: 0->3   4: 1->3   5: 2->3
// ArchIndex is the little-endian base-5 number whose least significant digit
// is the op on edge 0.

#include <algorithm>
#include <array>
#include <compare>
#include <cstdint>
#include <initializer_list>
#include <istream>
#include <ranges>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace analognas::space {

enum class OpKind : std::uint8_t {
  skip = 0,
  zeroize = 1,
  conv3x3 = 2,
  conv1x1 = 3,
  avg_pool3x3 = 4,
};

inline constexpr int kNumOps = 5;
inline constexpr int kNumEdges = 6;
inline constexpr int kNumNodes = 4;

using ArchIndex = std::uint32_t;
inline constexpr ArchIndex kSpaceSize = 15625;  // 5^6

struct Edge {
  int from;
  int to;
};

inline constexpr std::array<Edge, kNumEdges> kEdges{{{0, 1}, {0, 2}, {1, 2}, {0, 3}, {1, 3}, {2, 3}}};

// The four structural input->output routes, as canonical edge positions.
inline constexpr std::array<std::array<int, 3>, 4> kRouteEdges{{{3, -1, -1}, {0, 4, -1}, {1, 5, -1}, {0, 2, 5}}};
inline constexpr std::array<int, 4> kRouteLengths{1, 2, 2, 3};

constexpr bool is_valid_op_code(int code) { return code >= 0 && code < kNumOps; }
OpKind op_from_code(int code);  // throws RangeError
constexpr int op_code(OpKind op) { return static_cast<int>(op); }

// NB201 op names: skip_connect, none, nor_conv_3x3, nor_conv_1x1, avg_pool_3x3.
std::string_view op_name(OpKind op);
OpKind op_from_name(std::string_view name);  // throws ParseError
// Short label for tables: skip, zero, conv3, conv1, pool.
std::string_view op_label(OpKind op);

class CellEncoding {
 public:
  constexpr CellEncoding() : ops_{} {}
  explicit constexpr CellEncoding(std::array<OpKind, kNumEdges> ops) : ops_(ops) {}
  // Throws RangeError if any code is outside [0, 4].
  static CellEncoding from_codes(std::span<const int> codes);
  static CellEncoding from_codes(std::initializer_list<int> codes) {
    return from_codes(std::span<const int>(codes.begin(), codes.size()));
  }

  constexpr OpKind op(int edge) const { return ops_[static_cast<std::size_t>(edge)]; }
  constexpr const std::array<OpKind, kNumEdges>& ops() const { return ops_; }
  CellEncoding with_op(int edge, OpKind op) const;

  int count(OpKind op) const;
  // "(a,b,c,d,e,f)"
  std::string to_tuple_string() const;

  friend constexpr bool operator==(const CellEncoding&, const CellEncoding&) = default;
  friend constexpr auto operator<=>(const CellEncoding&, const CellEncoding&) = default;

 private:
  std::array<OpKind, kNumEdges> ops_;
};

CellEncoding encode(ArchIndex index);  // throws RangeError for index >= kSpaceSize
ArchIndex decode(const CellEncoding& enc);

// All 15,625 encodings in ascending ArchIndex order.
inline auto enumerate_space() {
  return std::views::iota(ArchIndex{0}, kSpaceSize) | std::views::transform([](ArchIndex i) { return encode(i); });
}

std::string to_nb201_string(const CellEncoding& enc);
CellEncoding from_nb201_string(std::string_view text);  // throws ParseError naming the bad segment

// "(a,b,c,d,e,f)" with optional spaces.
CellEncoding from_tuple_string(std::string_view text);
// Accepts an ArchIndex, a tuple string, or an NB201 string.
CellEncoding parse_architecture(std::string_view text);

struct LabeledEdge {
  int from;
  int to;
  OpKind op;
};

struct CellGraph {
  std::array<LabeledEdge, kNumEdges> edges;

  int in_degree(int node) const;
  int out_degree(int node) const;
};

CellGraph build_cell_graph(const CellEncoding& enc);

struct OpPath {
  std::array<OpKind, 3> ops{};
  std::uint8_t length = 0;

  std::span<const OpKind> view() const { return {ops.data(), length}; }
  std::string to_string() const;  // "(2,2)"

  friend bool operator==(const OpPath& a, const OpPath& b) {
    return a.length == b.length && std::ranges::equal(a.view(), b.view());
  }
  // Lexicographic over the op sequence; a proper prefix sorts first.
  friend std::strong_ordering operator<=>(const OpPath& a, const OpPath& b);
};

// Routes that contain no zeroize edge, in route order 0->3, 0->1->3, 0->2->3, 0->1->2->3.
std::vector<OpPath> extract_paths(const CellEncoding& enc);

// One architecture per line: an ArchIndex, a tuple, or an NB201 string.
// Blank lines and lines starting with '#' are skipped.
std::vector<CellEncoding> read_architecture_list(std::istream& in);
void write_architecture_list(std::ostream& out, std::span<const CellEncoding> archs);

}  // namespace analognas::space
