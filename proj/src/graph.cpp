#include "spateval/graph.hpp"

#include <deque>
#include <unordered_map>

#include "spateval/error.hpp"

namespace spateval {

bool SpatialGraph::has_node(std::string_view name) const {
  for (const auto& n : nodes)
    if (n.name == name) return true;
  return false;
}

SpatialGraph build_graph(const std::vector<ObjectName>& objects,
                         const std::vector<SpatialTriple>& triples) {
  SpatialGraph g;
  std::unordered_map<std::string, std::size_t> index;
  auto add_node = [&](const ObjectName& o) {
    if (index.emplace(o.name, g.nodes.size()).second) g.nodes.push_back(o);
  };
  for (const auto& o : objects) add_node(o);

  for (const auto& t : triples) {
    if (t.subject.name == t.reference.name)
      throw Error(ErrorCode::SelfLoop,
                  "self-relation on object '" + t.subject.name + "'");
    add_node(t.subject);
    add_node(t.reference);
    bool duplicate = false;
    for (const auto& e : g.edges) {
      if (e == t) {
        duplicate = true;
        break;
      }
    }
    if (!duplicate) g.edges.push_back(t);
  }
  return g;
}

const Vec3* SpatialSphere::find(std::string_view name) const {
  for (const auto& [n, pos] : positions)
    if (n == name) return &pos;
  return nullptr;
}

nlohmann::json SpatialSphere::to_json() const {
  nlohmann::json pos = nlohmann::json::object();
  for (const auto& [name, p] : positions) pos[name] = {p.x, p.y, p.z};
  return {{"center", center.name},
          {"positions", pos},
          {"inconsistent", inconsistent},
          {"unreachable", unreachable}};
}

SpatialSphere build_sphere(const SpatialGraph& graph, const ObjectName& center) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < graph.nodes.size(); ++i)
    index.emplace(graph.nodes[i].name, i);

  const auto center_it = index.find(center.name);
  if (center_it == index.end())
    throw Error(ErrorCode::CenterNotInGraph,
                "center object '" + center.name + "' is not in the graph");

  struct Arc {
    std::size_t neighbor;
    Vec3 step;  // position[neighbor] = position[node] + step
  };
  std::vector<std::vector<Arc>> adjacency(graph.nodes.size());
  for (const auto& e : graph.edges) {
    const std::size_t s = index.at(e.subject.name);
    const std::size_t r = index.at(e.reference.name);
    const Vec3 v = relation_vector(e.relation);
    adjacency[r].push_back({s, v});                  // from reference to subject
    adjacency[s].push_back({r, Vec3{} - v});         // from subject to reference
  }

  SpatialSphere sphere;
  sphere.center = graph.nodes[center_it->second];

  std::vector<bool> assigned(graph.nodes.size(), false);
  std::vector<Vec3> position(graph.nodes.size());
  std::deque<std::size_t> queue;

  assigned[center_it->second] = true;
  position[center_it->second] = Vec3{0, 0, 0};
  sphere.positions.emplace_back(center.name, Vec3{0, 0, 0});
  queue.push_back(center_it->second);

  while (!queue.empty()) {
    const std::size_t u = queue.front();
    queue.pop_front();
    for (const auto& arc : adjacency[u]) {
      const Vec3 implied = position[u] + arc.step;
      if (!assigned[arc.neighbor]) {
        assigned[arc.neighbor] = true;
        position[arc.neighbor] = implied;
        sphere.positions.emplace_back(graph.nodes[arc.neighbor].name, implied);
        queue.push_back(arc.neighbor);
      } else if (!(position[arc.neighbor] == implied)) {
        sphere.inconsistent = true;
      }
    }
  }

  for (std::size_t i = 0; i < graph.nodes.size(); ++i)
    if (!assigned[i]) sphere.unreachable.push_back(graph.nodes[i].name);
  return sphere;
}

}  // namespace spateval
