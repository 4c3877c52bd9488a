#include "svr/forest.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>

#include "svr/growth.hpp"

namespace svr {

const char* to_string(VesselKind kind) {
  return kind == VesselKind::arterial ? "arterial" : "venous";
}

const char* to_string(Layer layer) {
  return layer == Layer::superficial ? "superficial" : "deep";
}

const char* to_string(NodeOrigin origin) {
  switch (origin) {
    case NodeOrigin::growth: return "growth";
    case NodeOrigin::microaneurysm: return "microaneurysm";
    case NodeOrigin::neovascular: return "neovascular";
  }
  return "unknown";
}

NodeId VesselForest::add_root(Vec3 position, double radius, VesselKind kind, Layer layer,
                              Vec3 heading) {
  const auto id = static_cast<NodeId>(nodes_.size());
  VesselNode n;
  n.position = position;
  n.radius = radius;
  n.tree = static_cast<std::int32_t>(trees_.size());
  nodes_.push_back(n);
  trees_.push_back(TreeInfo{id, kind, layer, heading});
  return id;
}

NodeId VesselForest::add_child(NodeId parent, Vec3 position, double radius, NodeOrigin origin) {
  auto& p = node(parent);
  const int slot = p.children[0] == kNoNode ? 0 : (p.children[1] == kNoNode ? 1 : -1);
  if (slot < 0) throw std::logic_error("vessel node already has two children");
  const auto id = static_cast<NodeId>(nodes_.size());
  p.children[static_cast<std::size_t>(slot)] = id;
  VesselNode n;
  n.position = position;
  n.radius = radius;
  n.parent = parent;
  n.tree = p.tree;
  n.origin = origin;
  nodes_.push_back(n);
  return id;
}

Vec3 VesselForest::direction(NodeId id) const {
  const auto& n = node(id);
  if (n.is_root()) return tree_of(id).heading;
  const Vec3 d = n.position - node(n.parent).position;
  const double len = norm(d);
  if (len <= 0.0) return tree_of(id).heading;
  return d * (1.0 / len);
}

std::vector<NodeId> VesselForest::growth_leaves() const {
  std::vector<NodeId> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& n = nodes_[i];
    if (n.origin == NodeOrigin::growth && !n.is_root() && growth_children(static_cast<NodeId>(i)).empty())
      out.push_back(static_cast<NodeId>(i));
  }
  return out;
}

std::vector<NodeId> VesselForest::growth_children(NodeId id) const {
  std::vector<NodeId> out;
  for (NodeId c : node(id).children)
    if (c != kNoNode && node(c).origin == NodeOrigin::growth) out.push_back(c);
  return out;
}

std::vector<NodeId> VesselForest::remove_nodes(std::span<const NodeId> ids) {
  std::vector<char> removed(nodes_.size(), 0);
  for (NodeId id : ids) {
    if (node(id).is_root()) throw std::logic_error("cannot remove a root node");
    removed[static_cast<std::size_t>(id)] = 1;
  }
  for (NodeId id : ids)
    for (NodeId c : node(id).children)
      if (c != kNoNode && !removed[static_cast<std::size_t>(c)])
        throw std::logic_error("removal set is not closed under descendants");

  std::vector<NodeId> remap(nodes_.size(), kNoNode);
  NodeId next = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (!removed[i]) remap[i] = next++;

  std::vector<VesselNode> kept;
  kept.reserve(static_cast<std::size_t>(next));
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (removed[i]) continue;
    VesselNode n = nodes_[i];
    if (n.parent != kNoNode) n.parent = remap[static_cast<std::size_t>(n.parent)];
    std::array<NodeId, 2> children{kNoNode, kNoNode};
    std::size_t slot = 0;
    for (NodeId c : n.children)
      if (c != kNoNode && remap[static_cast<std::size_t>(c)] != kNoNode)
        children[slot++] = remap[static_cast<std::size_t>(c)];
    n.children = children;
    kept.push_back(n);
  }
  nodes_ = std::move(kept);
  for (auto& t : trees_) t.root = remap[static_cast<std::size_t>(t.root)];
  return remap;
}

std::vector<NodeId> VesselForest::post_order() const {
  std::vector<NodeId> order;
  order.reserve(nodes_.size());
  std::vector<std::pair<NodeId, int>> stack;
  for (const auto& t : trees_) {
    stack.emplace_back(t.root, 0);
    while (!stack.empty()) {
      auto& [id, next_child] = stack.back();
      if (next_child < 2) {
        const NodeId c = node(id).children[static_cast<std::size_t>(next_child++)];
        if (c != kNoNode) stack.emplace_back(c, 0);
      } else {
        order.push_back(id);
        stack.pop_back();
      }
    }
  }
  return order;
}

template <typename Rule>
void VesselForest::bottom_up(Rule&& rule) {
  for (NodeId id : post_order()) {
    auto& n = node(id);
    if (n.origin != NodeOrigin::growth) continue;
    const auto kids = growth_children(id);
    rule(n, kids);
  }
}

void VesselForest::assign_radii(double terminal_radius, double kappa) {
  bottom_up([&](VesselNode& n, const std::vector<NodeId>& kids) {
    if (kids.empty())
      n.radius = terminal_radius;
    else if (kids.size() == 1)
      n.radius = node(kids[0]).radius;
    else
      n.radius = murray_parent_radius(node(kids[0]).radius, node(kids[1]).radius, kappa);
  });
}

void VesselForest::recompute_radii(double kappa) {
  bottom_up([&](VesselNode& n, const std::vector<NodeId>& kids) {
    if (kids.size() == 1)
      n.radius = node(kids[0]).radius;
    else if (kids.size() == 2)
      n.radius = murray_parent_radius(node(kids[0]).radius, node(kids[1]).radius, kappa);
  });
}

void VesselForest::restore_murray(double kappa) {
  bottom_up([&](VesselNode& n, const std::vector<NodeId>& kids) {
    if (kids.size() == 2)
      n.radius = murray_parent_radius(node(kids[0]).radius, node(kids[1]).radius, kappa);
  });
}

std::vector<std::array<NodeId, 2>> VesselForest::edges() const {
  std::vector<std::array<NodeId, 2>> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].parent != kNoNode) out.push_back({nodes_[i].parent, static_cast<NodeId>(i)});
  return out;
}

std::string VesselForest::serialize() const {
  std::string out;
  char line[256];
  for (const auto& t : trees_) {
    std::snprintf(line, sizeof line, "tree %d %s %s %a %a %a\n", t.root, to_string(t.kind),
                  to_string(t.layer), t.heading.x, t.heading.y, t.heading.z);
    out += line;
  }
  for (const auto& n : nodes_) {
    std::snprintf(line, sizeof line, "node %a %a %a %a %d %d %d %d %s\n", n.position.x,
                  n.position.y, n.position.z, n.radius, n.parent, n.children[0], n.children[1],
                  n.tree, to_string(n.origin));
    out += line;
  }
  return out;
}

}  // namespace svr
