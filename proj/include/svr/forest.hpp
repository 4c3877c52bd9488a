#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "svr/geometry.hpp"

namespace svr {

using NodeId = std::int32_t;
inline constexpr NodeId kNoNode = -1;

enum class VesselKind : std::uint8_t { arterial, venous };
enum class Layer : std::uint8_t { superficial, deep };

/// What created a node. Only growth nodes take part in the branching law;
/// microaneurysm and neovascular appendages hang off the tree outside it.
enum class NodeOrigin : std::uint8_t { growth, microaneurysm, neovascular };

const char* to_string(VesselKind kind);
const char* to_string(Layer layer);
const char* to_string(NodeOrigin origin);

/// A node together with the segment that connects it to its parent. `radius`
/// is the radius of that segment (for roots, the trunk radius at the root).
struct VesselNode {
  Vec3 position;
  double radius = 0.0;
  NodeId parent = kNoNode;
  std::array<NodeId, 2> children{kNoNode, kNoNode};
  std::int32_t tree = 0;
  NodeOrigin origin = NodeOrigin::growth;

  bool is_root() const { return parent == kNoNode; }
  int child_count() const { return (children[0] != kNoNode) + (children[1] != kNoNode); }
  bool is_leaf() const { return child_count() == 0; }
  bool operator==(const VesselNode&) const = default;
};

struct TreeInfo {
  NodeId root = kNoNode;
  VesselKind kind = VesselKind::arterial;
  Layer layer = Layer::superficial;
  /// Initial growth heading used as the root's direction (unit length).
  Vec3 heading;
  bool operator==(const TreeInfo&) const = default;
};

/// Rooted binary trees stored as one flat node array. Node ids are indices
/// into that array and stay stable until `remove_nodes` compacts it.
class VesselForest {
 public:
  NodeId add_root(Vec3 position, double radius, VesselKind kind, Layer layer, Vec3 heading);
  /// Throws std::logic_error when the parent already has two children.
  NodeId add_child(NodeId parent, Vec3 position, double radius,
                   NodeOrigin origin = NodeOrigin::growth);

  const VesselNode& node(NodeId id) const { return nodes_[static_cast<std::size_t>(id)]; }
  VesselNode& node(NodeId id) { return nodes_[static_cast<std::size_t>(id)]; }
  std::span<const VesselNode> nodes() const { return nodes_; }
  std::size_t size() const { return nodes_.size(); }
  bool empty() const { return nodes_.empty(); }

  const std::vector<TreeInfo>& trees() const { return trees_; }
  const TreeInfo& tree_of(NodeId id) const { return trees_[static_cast<std::size_t>(node(id).tree)]; }
  VesselKind kind_of(NodeId id) const { return tree_of(id).kind; }

  /// Unit direction of the segment entering `id`; the tree heading for roots
  /// and for zero-length segments.
  Vec3 direction(NodeId id) const;

  /// Leaves among growth nodes, excluding roots, in id order.
  std::vector<NodeId> growth_leaves() const;

  /// Children of `id` created by growth (appendages skipped).
  std::vector<NodeId> growth_children(NodeId id) const;

  /// Removes `ids` and compacts the array. The set must be closed under
  /// descendants and may not contain roots. Returns the old-to-new id map
  /// (kNoNode for removed nodes).
  std::vector<NodeId> remove_nodes(std::span<const NodeId> ids);

  /// Leaves get `terminal_radius`; single-child nodes copy their child;
  /// bifurcations get the Murray combination of their children.
  void assign_radii(double terminal_radius, double kappa);

  /// Same bottom-up pass as assign_radii but leaves keep their radius.
  void recompute_radii(double kappa);

  /// Recomputes only growth bifurcations from their children, leaving every
  /// other radius as is.
  void restore_murray(double kappa);

  /// Post-order (children before parents) listing of every node.
  std::vector<NodeId> post_order() const;

  /// Edges as (parent, child) pairs in child-id order.
  std::vector<std::array<NodeId, 2>> edges() const;

  /// Stable text form: one line per node, hex-float coordinates. Equal
  /// strings imply bit-identical forests.
  std::string serialize() const;

  bool operator==(const VesselForest&) const = default;

 private:
  template <typename Rule>
  void bottom_up(Rule&& rule);

  std::vector<VesselNode> nodes_;
  std::vector<TreeInfo> trees_;
};

}  // namespace svr
