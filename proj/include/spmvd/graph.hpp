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

#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "spmvd/operators.hpp"

namespace spmvd {

/// Operators excluded from graph growth. See search.hpp for how the built-in
/// rules are derived from matrix statistics.
struct BanList {
  std::set<OperatorKind> kinds;

  bool contains(OperatorKind k) const { return kinds.count(k) != 0; }
  friend bool operator==(const BanList&, const BanList&) = default;
};

/// Rooted tree of operators. Node 0 is always the INPUT node. Only ROW_DIV and
/// COL_DIV nodes may have more than one child (one per stripe).
class OperatorGraph {
 public:
  OperatorGraph();

  int root() const { return 0; }
  int add_node(int parent, OperatorKind kind, ParamMap params = {});
  /// Adds a chain of nodes below `parent`; returns the id of the last one.
  int add_chain(int parent, const std::vector<std::pair<OperatorKind, ParamMap>>& chain);

  bool contains(int id) const { return nodes_.count(id) != 0; }
  const OperatorNode& node(int id) const;
  OperatorNode& node(int id);
  const std::vector<int>& children(int id) const;
  std::optional<int> parent(int id) const;

  /// Node ids in depth-first preorder.
  std::vector<int> preorder() const;
  std::vector<int> leaves() const;
  /// Root-to-node id list.
  std::vector<int> path_to(int id) const;
  /// Root-to-leaf paths in depth-first order.
  std::vector<std::vector<int>> paths() const;
  std::size_t size() const { return nodes_.size(); }

  /// Removes `id` and everything below it. The root cannot be removed.
  void remove_subtree(int id);

  /// Renumbers nodes in depth-first preorder (children keep their order).
  OperatorGraph canonical() const;

  friend bool operator==(const OperatorGraph& a, const OperatorGraph& b);

 private:
  std::map<int, OperatorNode> nodes_;
  std::map<int, std::vector<int>> children_;
  std::map<int, int> parent_;
  int next_id_ = 1;
};

struct Violation {
  int node = 0;
  std::string rule;
  std::string message;
};

/// Checks every root-to-leaf path against the operator dependency rules.
/// With `require_complete`, every leaf must be GMEM_ATOM_RED, every DIV node
/// must have exactly one child per stripe, and every parameter must be set.
std::vector<Violation> validate_graph(const OperatorGraph& g, bool require_complete = false);

/// Kinds that may be appended below `node` without breaking any rule, minus
/// the banned ones. Throws UnknownNode when `node` is not in `g`.
std::set<OperatorKind> legal_successors(const OperatorGraph& g, int node, const BanList& ban = {});

/// Canonical JSON text: {"nodes":[...],"edges":[[parent,child],...]}.
std::string serialize_graph(const OperatorGraph& g);
OperatorGraph parse_graph(const std::string& text);

/// Stable 64-bit FNV-1a hash of the canonical serialization, as 16 hex digits.
std::string graph_id(const OperatorGraph& g);

/// Compact one-line description such as "COMPRESS>BMT_ROW_BLOCK>...".
std::string describe(const OperatorGraph& g);

}  // namespace spmvd
