#pragma once

#include <cstddef>
#include <vector>

#include "dugma/geometry.h"

namespace dugma {

// Static k-d tree over a point set for exact nearest-neighbour queries.
template <int Dim>
class KdTree {
 public:
  using PointList = typename PointCloud<Dim>::PointList;

  explicit KdTree(PointList points);

  std::size_t size() const { return points_.size(); }

  // Index of the nearest stored point and its squared distance. The tree
  // must not be empty.
  std::pair<std::size_t, double> Nearest(const Vec<Dim>& query) const;

 private:
  struct Node {
    std::size_t begin = 0;
    std::size_t end = 0;
    int axis = -1;  // -1 for leaves
    double split = 0.0;
    int left = -1;
    int right = -1;
  };

  int Build(std::size_t begin, std::size_t end);
  void Search(int node, const Vec<Dim>& query, std::size_t& best,
              double& best_d2) const;

  PointList points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace dugma
