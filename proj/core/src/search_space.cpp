#include "analognas/search_space.hpp"

#include <algorithm>
#include <charconv>
#include <ostream>

#include "analognas/errors.hpp"

namespace analognas::space {

namespace {

constexpr std::array<std::string_view, kNumOps> kOpNames{"skip_connect", "none", "nor_conv_3x3", "nor_conv_1x1",
                                                        "avg_pool_3x3"};
constexpr std::array<std::string_view, kNumOps> kOpLabels{"skip", "zero", "conv3", "conv1", "pool"};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

OpKind op_from_code(int code) {
  if (!is_valid_op_code(code)) throw RangeError("op code " + std::to_string(code) + " outside [0, 4]");
  return static_cast<OpKind>(code);
}

std::string_view op_name(OpKind op) { return kOpNames[static_cast<std::size_t>(op)]; }
std::string_view op_label(OpKind op) { return kOpLabels[static_cast<std::size_t>(op)]; }

OpKind op_from_name(std::string_view name) {
  for (int i = 0; i < kNumOps; ++i)
    if (kOpNames[static_cast<std::size_t>(i)] == name) return static_cast<OpKind>(i);
  throw ParseError("unknown operation name '" + std::string(name) + "'");
}

CellEncoding CellEncoding::from_codes(std::span<const int> codes) {
  if (codes.size() != kNumEdges)
    throw RangeError("cell encoding needs 6 op codes, got " + std::to_string(codes.size()));
  std::array<OpKind, kNumEdges> ops{};
  for (int e = 0; e < kNumEdges; ++e) ops[static_cast<std::size_t>(e)] = op_from_code(codes[static_cast<std::size_t>(e)]);
  return CellEncoding(ops);
}

CellEncoding CellEncoding::with_op(int edge, OpKind op) const {
  auto ops = ops_;
  ops.at(static_cast<std::size_t>(edge)) = op;
  return CellEncoding(ops);
}

int CellEncoding::count(OpKind op) const {
  return static_cast<int>(std::ranges::count(ops_, op));
}

std::string CellEncoding::to_tuple_string() const {
  std::string out = "(";
  for (int e = 0; e < kNumEdges; ++e) {
    if (e) out += ',';
    out += static_cast<char>('0' + op_code(ops_[static_cast<std::size_t>(e)]));
  }
  out += ')';
  return out;
}

CellEncoding encode(ArchIndex index) {
  if (index >= kSpaceSize) throw RangeError("arch index " + std::to_string(index) + " outside [0, 15624]");
  std::array<OpKind, kNumEdges> ops{};
  for (auto& op : ops) {
    op = static_cast<OpKind>(index % kNumOps);
    index /= kNumOps;
  }
  return CellEncoding(ops);
}

ArchIndex decode(const CellEncoding& enc) {
  ArchIndex index = 0;
  for (int e = kNumEdges - 1; e >= 0; --e) index = index * kNumOps + static_cast<ArchIndex>(op_code(enc.op(e)));
  return index;
}

std::string to_nb201_string(const CellEncoding& enc) {
  // |e01|+|e02|e12|+|e03|e13|e23|
  std::string out = "|";
  int edge = 0;
  for (int target = 1; target < kNumNodes; ++target) {
    if (target > 1) out += "+|";
    for (int source = 0; source < target; ++source, ++edge) {
      out += op_name(enc.op(edge));
      out += '~';
      out += static_cast<char>('0' + source);
      out += '|';
    }
  }
  return out;
}

CellEncoding from_nb201_string(std::string_view text) {
  const std::string_view original = text;
  text = trim(text);
  std::array<OpKind, kNumEdges> ops{};
  int edge = 0;
  std::size_t pos = 0;
  std::vector<std::string_view> groups;
  while (pos <= text.size()) {
    const auto plus = text.find('+', pos);
    const auto end = plus == std::string_view::npos ? text.size() : plus;
    groups.push_back(text.substr(pos, end - pos));
    if (plus == std::string_view::npos) break;
    pos = plus + 1;
  }
  if (groups.size() != kNumNodes - 1)
    throw ParseError("NB201 string '" + std::string(original) + "' must have 3 '+'-separated node groups");
  for (int target = 1; target < kNumNodes; ++target) {
    std::string_view group = groups[static_cast<std::size_t>(target - 1)];
    if (group.size() < 2 || group.front() != '|' || group.back() != '|')
      throw ParseError("malformed node group '" + std::string(group) + "'");
    group = group.substr(1, group.size() - 2);
    int source = 0;
    std::size_t gpos = 0;
    while (true) {
      const auto bar = group.find('|', gpos);
      const std::string_view segment = group.substr(gpos, bar == std::string_view::npos ? std::string_view::npos : bar - gpos);
      const auto tilde = segment.find('~');
      if (tilde == std::string_view::npos)
        throw ParseError("segment '" + std::string(segment) + "' is missing '~<source>'");
      const std::string_view name = segment.substr(0, tilde);
      const std::string_view src = segment.substr(tilde + 1);
      if (source >= target) throw ParseError("segment '" + std::string(segment) + "': too many edges into node " + std::to_string(target));
      if (src.size() != 1 || src[0] != static_cast<char>('0' + source))
        throw ParseError("segment '" + std::string(segment) + "': expected source node " + std::to_string(source));
      OpKind op;
      try {
        op = op_from_name(name);
      } catch (const ParseError&) {
        throw ParseError("segment '" + std::string(segment) + "': unknown operation name '" + std::string(name) + "'");
      }
      ops[static_cast<std::size_t>(edge++)] = op;
      ++source;
      if (bar == std::string_view::npos) break;
      gpos = bar + 1;
    }
    if (source != target)
      throw ParseError("node group '" + std::string(groups[static_cast<std::size_t>(target - 1)]) + "' needs " +
                       std::to_string(target) + " edges");
  }
  return CellEncoding(ops);
}

CellEncoding from_tuple_string(std::string_view text) {
  text = trim(text);
  if (text.size() < 2 || text.front() != '(' || text.back() != ')')
    throw ParseError("tuple '" + std::string(text) + "' must be of the form (a,b,c,d,e,f)");
  text = text.substr(1, text.size() - 2);
  std::vector<int> codes;
  std::size_t pos = 0;
  while (true) {
    const auto comma = text.find(',', pos);
    const std::string_view part = trim(text.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
    int value = -1;
    const auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), value);
    if (ec != std::errc{} || ptr != part.data() + part.size() || !is_valid_op_code(value))
      throw ParseError("tuple element '" + std::string(part) + "' is not an op code in [0, 4]");
    codes.push_back(value);
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  if (codes.size() != kNumEdges) throw ParseError("tuple must have 6 elements, got " + std::to_string(codes.size()));
  return CellEncoding::from_codes(codes);
}

CellEncoding parse_architecture(std::string_view text) {
  text = trim(text);
  if (text.empty()) throw ParseError("empty architecture");
  if (text.front() == '|') return from_nb201_string(text);
  if (text.front() == '(') return from_tuple_string(text);
  ArchIndex index = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), index);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    throw ParseError("'" + std::string(text) + "' is neither an arch index, a tuple, nor an NB201 string");
  if (index >= kSpaceSize) throw RangeError("arch index " + std::to_string(index) + " outside [0, 15624]");
  return encode(index);
}

int CellGraph::in_degree(int node) const {
  return static_cast<int>(std::ranges::count_if(edges, [node](const LabeledEdge& e) { return e.to == node; }));
}

int CellGraph::out_degree(int node) const {
  return static_cast<int>(std::ranges::count_if(edges, [node](const LabeledEdge& e) { return e.from == node; }));
}

CellGraph build_cell_graph(const CellEncoding& enc) {
  CellGraph g{};
  for (int e = 0; e < kNumEdges; ++e) {
    const auto& edge = kEdges[static_cast<std::size_t>(e)];
    g.edges[static_cast<std::size_t>(e)] = {edge.from, edge.to, enc.op(e)};
  }
  return g;
}

std::string OpPath::to_string() const {
  std::string out = "(";
  for (std::uint8_t i = 0; i < length; ++i) {
    if (i) out += ',';
    out += static_cast<char>('0' + op_code(ops[i]));
  }
  out += ')';
  return out;
}

std::strong_ordering operator<=>(const OpPath& a, const OpPath& b) {
  const auto n = std::min(a.length, b.length);
  for (std::uint8_t i = 0; i < n; ++i)
    if (a.ops[i] != b.ops[i]) return a.ops[i] <=> b.ops[i];
  return a.length <=> b.length;
}

std::vector<OpPath> extract_paths(const CellEncoding& enc) {
  std::vector<OpPath> paths;
  for (std::size_t r = 0; r < kRouteEdges.size(); ++r) {
    OpPath path;
    bool severed = false;
    for (int i = 0; i < kRouteLengths[r]; ++i) {
      const OpKind op = enc.op(kRouteEdges[r][static_cast<std::size_t>(i)]);
      if (op == OpKind::zeroize) {
        severed = true;
        break;
      }
      path.ops[static_cast<std::size_t>(i)] = op;
    }
    if (severed) continue;
    path.length = static_cast<std::uint8_t>(kRouteLengths[r]);
    paths.push_back(path);
  }
  return paths;
}

std::vector<CellEncoding> read_architecture_list(std::istream& in) {
  std::vector<CellEncoding> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    try {
      out.push_back(parse_architecture(t));
    } catch (const std::exception& e) {
      throw ParseError("architecture list line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void write_architecture_list(std::ostream& out, std::span<const CellEncoding> archs) {
  for (const auto& a : archs) out << to_nb201_string(a) << '\n';
}

}  // namespace analognas::space
