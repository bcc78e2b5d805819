#include "dugma/nearest_neighbor.h"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace dugma {
namespace {

constexpr std::size_t kLeafSize = 8;

}  // namespace

template <int Dim>
KdTree<Dim>::KdTree(PointList points) : points_(std::move(points)) {
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  if (!points_.empty()) Build(0, points_.size());
}

template <int Dim>
int KdTree<Dim>::Build(std::size_t begin, std::size_t end) {
  const int index = static_cast<int>(nodes_.size());
  nodes_.push_back(Node{begin, end});
  if (end - begin <= kLeafSize) return index;

  Vec<Dim> lo = points_[order_[begin]];
  Vec<Dim> hi = lo;
  for (std::size_t k = begin; k < end; ++k) {
    lo = lo.cwiseMin(points_[order_[k]]);
    hi = hi.cwiseMax(points_[order_[k]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  if (hi(axis) == lo(axis)) return index;  // all points coincide

  const std::size_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid,
                   order_.begin() + end, [&](std::size_t a, std::size_t b) {
                     return points_[a](axis) < points_[b](axis);
                   });
  const double split = points_[order_[mid]](axis);
  const int left = Build(begin, mid);
  const int right = Build(mid, end);
  nodes_[index].axis = axis;
  nodes_[index].split = split;
  nodes_[index].left = left;
  nodes_[index].right = right;
  return index;
}

template <int Dim>
void KdTree<Dim>::Search(int node, const Vec<Dim>& query, std::size_t& best,
                         double& best_d2) const {
  const Node& n = nodes_[node];
  if (n.axis < 0) {
    for (std::size_t k = n.begin; k < n.end; ++k) {
      const double d2 = (points_[order_[k]] - query).squaredNorm();
      if (d2 < best_d2 || (d2 == best_d2 && order_[k] < best)) {
        best_d2 = d2;
        best = order_[k];
      }
    }
    return;
  }
  const double diff = query(n.axis) - n.split;
  const int near = diff < 0.0 ? n.left : n.right;
  const int far = diff < 0.0 ? n.right : n.left;
  Search(near, query, best, best_d2);
  if (diff * diff <= best_d2) Search(far, query, best, best_d2);
}

template <int Dim>
std::pair<std::size_t, double> KdTree<Dim>::Nearest(
    const Vec<Dim>& query) const {
  if (points_.empty()) {
    throw std::invalid_argument("nearest-neighbour query on an empty tree");
  }
  std::size_t best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  Search(0, query, best, best_d2);
  return {best, best_d2};
}

template class KdTree<2>;
template class KdTree<3>;

}  // namespace dugma
