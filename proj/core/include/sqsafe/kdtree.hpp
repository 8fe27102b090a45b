#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

namespace sqsafe {

/// Static 3-d tree over a point set for nearest-neighbour queries. Points
/// are copied; ids refer to positions in the input span.
class KdTree {
 public:
  explicit KdTree(std::span<const Eigen::Vector3d> points);

  /// Id of the point closest to `query`; ties go to the lowest id.
  /// Returns -1 for an empty tree.
  int nearest(const Eigen::Vector3d& query) const;

  int size() const { return static_cast<int>(points_.size()); }

 private:
  struct Node {
    int id;       // point stored at this node
    int axis;     // split axis, -1 for leaves
    int left = -1;
    int right = -1;
  };

  int build(std::vector<int>& ids, int begin, int end, int depth);
  void search(int node, const Eigen::Vector3d& q, int& best, double& best_d2) const;

  std::vector<Eigen::Vector3d> points_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

}  // namespace sqsafe
