// Copyright 2026 The spmvd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "spmvd/graph.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <functional>

#include "json.hpp"
#include "spmvd/error.hpp"

namespace spmvd {

using ojson = nlohmann::ordered_json;

OperatorGraph::OperatorGraph() {
  nodes_[0] = OperatorNode{0, OperatorKind::Input, {}};
  children_[0] = {};
}

int OperatorGraph::add_node(int parent, OperatorKind kind, ParamMap params) {
  if (!contains(parent)) throw Error(ErrorCode::UnknownNode, "no node " + std::to_string(parent));
  if (kind == OperatorKind::Input) throw Error(ErrorCode::InvalidGraph, "INPUT can only be the root");
  const int id = next_id_++;
  nodes_[id] = OperatorNode{id, kind, std::move(params)};
  children_[id] = {};
  children_[parent].push_back(id);
  parent_[id] = parent;
  return id;
}

int OperatorGraph::add_chain(int parent, const std::vector<std::pair<OperatorKind, ParamMap>>& chain) {
  int at = parent;
  for (const auto& [kind, params] : chain) at = add_node(at, kind, params);
  return at;
}

const OperatorNode& OperatorGraph::node(int id) const {
  auto it = nodes_.find(id);
  if (it == nodes_.end()) throw Error(ErrorCode::UnknownNode, "no node " + std::to_string(id));
  return it->second;
}

OperatorNode& OperatorGraph::node(int id) {
  auto it = nodes_.find(id);
  if (it == nodes_.end()) throw Error(ErrorCode::UnknownNode, "no node " + std::to_string(id));
  return it->second;
}

const std::vector<int>& OperatorGraph::children(int id) const {
  auto it = children_.find(id);
  if (it == children_.end()) throw Error(ErrorCode::UnknownNode, "no node " + std::to_string(id));
  return it->second;
}

std::optional<int> OperatorGraph::parent(int id) const {
  if (!contains(id)) throw Error(ErrorCode::UnknownNode, "no node " + std::to_string(id));
  auto it = parent_.find(id);
  if (it == parent_.end()) return std::nullopt;
  return it->second;
}

std::vector<int> OperatorGraph::preorder() const {
  std::vector<int> out;
  std::vector<int> stack{0};
  while (!stack.empty()) {
    const int id = stack.back();
    stack.pop_back();
    out.push_back(id);
    const auto& ch = children_.at(id);
    for (auto it = ch.rbegin(); it != ch.rend(); ++it) stack.push_back(*it);
  }
  return out;
}

std::vector<int> OperatorGraph::leaves() const {
  std::vector<int> out;
  for (int id : preorder()) {
    if (children_.at(id).empty()) out.push_back(id);
  }
  return out;
}

std::vector<int> OperatorGraph::path_to(int id) const {
  std::vector<int> out;
  std::optional<int> at = id;
  if (!contains(id)) throw Error(ErrorCode::UnknownNode, "no node " + std::to_string(id));
  while (at) {
    out.push_back(*at);
    auto it = parent_.find(*at);
    at = it == parent_.end() ? std::nullopt : std::optional<int>(it->second);
  }
  std::reverse(out.begin(), out.end());
  return out;
}

std::vector<std::vector<int>> OperatorGraph::paths() const {
  std::vector<std::vector<int>> out;
  for (int leaf : leaves()) out.push_back(path_to(leaf));
  return out;
}

void OperatorGraph::remove_subtree(int id) {
  if (id == 0) throw Error(ErrorCode::InvalidGraph, "cannot remove the input node");
  const int p = parent(id).value();
  auto& siblings = children_[p];
  siblings.erase(std::find(siblings.begin(), siblings.end(), id));
  std::vector<int> stack{id};
  while (!stack.empty()) {
    const int n = stack.back();
    stack.pop_back();
    for (int c : children_[n]) stack.push_back(c);
    nodes_.erase(n);
    children_.erase(n);
    parent_.erase(n);
  }
}

OperatorGraph OperatorGraph::canonical() const {
  OperatorGraph out;
  std::map<int, int> remap{{0, 0}};
  for (int id : preorder()) {
    if (id == 0) continue;
    const auto& n = nodes_.at(id);
    remap[id] = out.add_node(remap.at(parent_.at(id)), n.kind, n.params);
  }
  return out;
}

bool operator==(const OperatorGraph& a, const OperatorGraph& b) {
  return a.nodes_ == b.nodes_ && a.children_ == b.children_;
}

// ---------------------------------------------------------------------------
// Dependency rules

namespace {

int reduction_rank(OperatorKind k) {
  if (k == OperatorKind::GmemAtomRed) return 3;
  switch (reduction_level(k).value()) {
    case Level::Bmt: return 0;
    case Level::Bmw: return 1;
    case Level::Bmtb: return 2;
  }
  return 3;
}

struct PathState {
  bool compressed = false;
  bool complete = false;
  Stage stage = Stage::Input;
  std::set<OperatorKind> seen;
  std::array<bool, 3> levels{false, false, false};
  std::array<BlockKind, 3> level_kind{};
  int reduction_rank = -1;

  bool has(Level l) const { return levels[static_cast<std::size_t>(l)]; }
};

struct RuleBreak {
  std::string rule;
  std::string message;
};

std::optional<RuleBreak> check_append(const PathState& s, OperatorKind k) {
  const std::string name(to_string(k));
  if (k == OperatorKind::Input) return RuleBreak{"input", "INPUT can only be the root"};
  if (s.complete) return RuleBreak{"terminal", name + " follows GMEM_ATOM_RED"};
  const Stage st = stage_of(k);
  if (st == Stage::Converting && s.compressed) {
    return RuleBreak{"stage-order", name + " after COMPRESS"};
  }
  if (st != Stage::Converting && !s.compressed) {
    return RuleBreak{"compress-first", name + " before COMPRESS"};
  }
  if (st < s.stage) return RuleBreak{"stage-order", name + " after a later-stage operator"};
  if (s.seen.count(k)) return RuleBreak{"duplicate", name + " appears twice on one path"};

  if (is_block_op(k)) {
    const auto lvl = static_cast<std::size_t>(block_level(k));
    for (std::size_t finer = lvl; finer < 3; ++finer) {
      if (s.levels[finer]) {
        return RuleBreak{"block-order", name + " after an equal or finer block level"};
      }
    }
  }
  if (k == OperatorKind::BmtPad && !s.has(Level::Bmt)) {
    return RuleBreak{"pad-requires-bmt", "BMT_PAD needs a prior BMT_* block"};
  }
  if (k == OperatorKind::SortBmtb) {
    if (!s.has(Level::Bmtb) || s.level_kind[0] != BlockKind::Row) {
      return RuleBreak{"sort-bmtb", "SORT_BMTB needs a prior BMTB_ROW_BLOCK"};
    }
    if (s.has(Level::Bmw) || s.has(Level::Bmt)) {
      return RuleBreak{"sort-bmtb", "SORT_BMTB must precede finer blocks"};
    }
  }
  if (is_reduction(k)) {
    if (auto lvl = reduction_level(k); lvl && !s.has(*lvl)) {
      return RuleBreak{"level-mismatch",
                       name + " needs a " + std::string(level_prefix(*lvl)) + " block level"};
    }
    if (reduction_rank(k) <= s.reduction_rank) {
      return RuleBreak{"reduction-order", name + " must run before coarser reductions"};
    }
  }
  return std::nullopt;
}

void apply(PathState& s, OperatorKind k) {
  if (k == OperatorKind::Input) return;
  s.seen.insert(k);
  s.stage = std::max(s.stage, stage_of(k));
  if (k == OperatorKind::Compress) s.compressed = true;
  if (is_block_op(k)) {
    const auto lvl = static_cast<std::size_t>(block_level(k));
    s.levels[lvl] = true;
    s.level_kind[lvl] = block_kind(k);
  }
  if (is_reduction(k)) s.reduction_rank = reduction_rank(k);
  if (k == OperatorKind::GmemAtomRed) s.complete = true;
}

PathState state_along(const OperatorGraph& g, const std::vector<int>& path) {
  PathState s;
  for (int id : path) apply(s, g.node(id).kind);
  return s;
}

}  // namespace

std::vector<Violation> validate_graph(const OperatorGraph& g, bool require_complete) {
  std::vector<Violation> out;
  std::set<int> reported;
  for (const auto& path : g.paths()) {
    PathState s;
    for (std::size_t i = 1; i < path.size(); ++i) {
      const auto& n = g.node(path[i]);
      if (auto br = check_append(s, n.kind); br && !reported.count(n.id)) {
        out.push_back({n.id, br->rule, br->message});
        reported.insert(n.id);
      }
      apply(s, n.kind);
    }
    if (require_complete && !s.complete && !reported.count(path.back())) {
      out.push_back({path.back(), "incomplete", "path does not end in GMEM_ATOM_RED"});
      reported.insert(path.back());
    }
  }
  for (int id : g.preorder()) {
    const auto& n = g.node(id);
    if (auto e = check_params(n.kind, n.params, require_complete)) {
      out.push_back({id, "params", *e});
    }
    const auto nchild = static_cast<std::int64_t>(g.children(id).size());
    if (!is_div(n.kind)) {
      if (nchild > 1) out.push_back({id, "branching", "only ROW_DIV/COL_DIV may branch"});
      continue;
    }
    const auto stripes = stripe_count(n);
    if (stripes && nchild > *stripes) {
      out.push_back({id, "branching", "more children than stripes"});
    } else if (require_complete && stripes && nchild != *stripes) {
      out.push_back({id, "branching", "one child per stripe required"});
    }
  }
  return out;
}

std::set<OperatorKind> legal_successors(const OperatorGraph& g, int node, const BanList& ban) {
  if (!g.contains(node)) throw Error(ErrorCode::UnknownNode, "no node " + std::to_string(node));
  const auto& n = g.node(node);
  const auto nchild = static_cast<std::int64_t>(g.children(node).size());
  if (nchild > 0) {
    const auto stripes = stripe_count(n);
    const bool room = is_div(n.kind) && (!stripes || nchild < *stripes);
    if (!room) return {};
  }
  const PathState s = state_along(g, g.path_to(node));
  std::set<OperatorKind> out;
  for (OperatorKind k : all_operator_kinds()) {
    if (ban.contains(k)) continue;
    if (!check_append(s, k)) out.insert(k);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

ojson params_to_json(const ParamMap& params) {
  ojson p = ojson::object();
  for (const auto& [k, v] : params) {
    std::visit([&](const auto& x) { p[k] = x; }, v);
  }
  return p;
}

[[noreturn]] void parse_fail(const std::string& where, const std::string& what) {
  throw Error(ErrorCode::ParseError, where + ": " + what);
}

ParamMap params_from_json(const ojson& j, const std::string& where) {
  if (!j.is_object()) parse_fail(where, "params must be an object");
  ParamMap out;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto& v = it.value();
    const std::string at = where + "." + it.key();
    if (v.is_number_integer()) {
      out[it.key()] = v.get<std::int64_t>();
    } else if (v.is_string()) {
      out[it.key()] = v.get<std::string>();
    } else if (v.is_array()) {
      std::vector<std::int64_t> a;
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number_integer()) parse_fail(at + "[" + std::to_string(i) + "]", "expected integer");
        a.push_back(v[i].get<std::int64_t>());
      }
      out[it.key()] = std::move(a);
    } else {
      parse_fail(at, "unsupported parameter type");
    }
  }
  return out;
}

}  // namespace

std::string serialize_graph(const OperatorGraph& g) {
  const OperatorGraph c = g.canonical();
  ojson j;
  j["nodes"] = ojson::array();
  j["edges"] = ojson::array();
  for (int id : c.preorder()) {
    const auto& n = c.node(id);
    ojson node;
    node["id"] = id;
    node["kind"] = std::string(to_string(n.kind));
    node["params"] = params_to_json(n.params);
    j["nodes"].push_back(std::move(node));
  }
  for (int id : c.preorder()) {
    for (int ch : c.children(id)) j["edges"].push_back(ojson::array({id, ch}));
  }
  return j.dump(2) + "\n";
}

OperatorGraph parse_graph(const std::string& text) {
  ojson j;
  try {
    j = ojson::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    parse_fail("byte " + std::to_string(e.byte), e.what());
  }
  if (!j.is_object() || !j.contains("nodes") || !j["nodes"].is_array()) {
    parse_fail("$", "expected an object with a nodes array");
  }
  struct Raw {
    int id;
    OperatorKind kind;
    ParamMap params;
  };
  std::map<int, Raw> raw;
  std::optional<int> input_id;
  for (std::size_t i = 0; i < j["nodes"].size(); ++i) {
    const auto& n = j["nodes"][i];
    const std::string at = "nodes[" + std::to_string(i) + "]";
    if (!n.is_object()) parse_fail(at, "expected object");
    if (!n.contains("id") || !n["id"].is_number_integer()) parse_fail(at + ".id", "expected integer");
    if (!n.contains("kind") || !n["kind"].is_string()) parse_fail(at + ".kind", "expected string");
    const int id = n["id"].get<int>();
    const auto kind = operator_kind_from_string(n["kind"].get<std::string>());
    if (!kind) parse_fail(at + ".kind", "unknown operator '" + n["kind"].get<std::string>() + "'");
    ParamMap params = n.contains("params") ? params_from_json(n["params"], at + ".params") : ParamMap{};
    if (raw.count(id)) parse_fail(at + ".id", "duplicate id " + std::to_string(id));
    if (*kind == OperatorKind::Input) {
      if (input_id) parse_fail(at + ".kind", "second INPUT node");
      input_id = id;
    }
    raw[id] = Raw{id, *kind, std::move(params)};
  }
  if (!input_id) parse_fail("nodes", "no INPUT node");

  std::map<int, std::vector<int>> children;
  std::map<int, int> parent;
  if (j.contains("edges")) {
    if (!j["edges"].is_array()) parse_fail("edges", "expected array");
    for (std::size_t i = 0; i < j["edges"].size(); ++i) {
      const auto& e = j["edges"][i];
      const std::string at = "edges[" + std::to_string(i) + "]";
      if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() || !e[1].is_number_integer()) {
        parse_fail(at, "expected [parent, child]");
      }
      const int p = e[0].get<int>(), c = e[1].get<int>();
      if (!raw.count(p)) parse_fail(at, "unknown parent " + std::to_string(p));
      if (!raw.count(c)) parse_fail(at, "unknown child " + std::to_string(c));
      if (c == *input_id) parse_fail(at, "INPUT cannot be a child");
      if (parent.count(c)) parse_fail(at, "node " + std::to_string(c) + " has two parents");
      parent[c] = p;
      children[p].push_back(c);
    }
  }

  OperatorGraph g;
  std::size_t attached = 1;
  std::function<void(int, int)> attach = [&](int raw_id, int new_id) {
    for (int c : children[raw_id]) {
      const int nid = g.add_node(new_id, raw[c].kind, raw[c].params);
      ++attached;
      attach(c, nid);
    }
  };
  g.node(0).params = raw[*input_id].params;
  attach(*input_id, 0);
  if (attached != raw.size()) parse_fail("edges", "graph is not connected to the INPUT node");
  return g;
}

std::string graph_id(const OperatorGraph& g) {
  const std::string s = serialize_graph(g);
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string describe(const OperatorGraph& g) {
  std::function<std::string(int)> rec = [&](int id) -> std::string {
    std::string out;
    const auto& ch = g.children(id);
    if (id != 0) out = std::string(to_string(g.node(id).kind));
    if (ch.empty()) return out;
    if (ch.size() == 1) return out + (id != 0 ? ">" : "") + rec(ch[0]);
    out += "[";
    for (std::size_t i = 0; i < ch.size(); ++i) out += (i ? " | " : "") + rec(ch[i]);
    return out + "]";
  };
  return rec(0);
}

}  // namespace spmvd
