#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "spateval/parser.hpp"
#include "spateval/relation.hpp"

#include "json.hpp"

namespace spateval {

/// Relation graph: nodes in first-mention order, edges are the triples with
/// exact duplicates removed. No self-loops.
struct SpatialGraph {
  std::vector<ObjectName> nodes;
  std::vector<SpatialTriple> edges;

  bool has_node(std::string_view name) const;
};

SpatialGraph build_graph(const std::vector<ObjectName>& objects,
                         const std::vector<SpatialTriple>& triples);

/// Integer-lattice embedding of a graph around a center object. One lattice
/// unit is one relation step; positions accumulate relation vectors along the
/// BFS shortest path from the center.
struct SpatialSphere {
  ObjectName center;
  // (name, position) in BFS assignment order, center first.
  std::vector<std::pair<std::string, Vec3>> positions;
  bool inconsistent = false;               // conflicting multi-path position seen
  std::vector<std::string> unreachable;    // nodes not connected to the center

  const Vec3* find(std::string_view name) const;
  nlohmann::json to_json() const;
};

/// BFS from the center over undirected adjacency. Traversing edge (s, rel, r)
/// from r assigns position[s] = position[r] + relation_vector(rel); from s it
/// assigns position[r] = position[s] - relation_vector(rel). The first
/// assignment wins; a later conflicting one only sets `inconsistent`.
SpatialSphere build_sphere(const SpatialGraph& graph, const ObjectName& center);

}  // namespace spateval
