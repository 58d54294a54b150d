#pragma once

#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "temporal_heads/common.hpp"

namespace temporal_heads {

/// Dense row-major tensor of rank 1-3, double precision.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);
  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<int> shape, double v);
  static Tensor from(std::vector<int> shape, std::vector<double> data);

  int rank() const { return static_cast<int>(shape_.size()); }
  const std::vector<int>& shape() const { return shape_; }
  int dim(int axis) const { return shape_[static_cast<size_t>(axis)]; }
  int numel() const { return static_cast<int>(data_.size()); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& vec() { return data_; }
  const std::vector<double>& vec() const { return data_; }

  double& operator[](int i) { return data_[static_cast<size_t>(i)]; }
  double operator[](int i) const { return data_[static_cast<size_t>(i)]; }
  double& at(int i, int j) { return data_[static_cast<size_t>(i * shape_[1] + j)]; }
  double at(int i, int j) const { return data_[static_cast<size_t>(i * shape_[1] + j)]; }
  double& at(int c, int i, int j) {
    return data_[static_cast<size_t>((c * shape_[1] + i) * shape_[2] + j)];
  }
  double at(int c, int i, int j) const {
    return data_[static_cast<size_t>((c * shape_[1] + i) * shape_[2] + j)];
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  bool all_finite() const;
  void fill(double v);
  std::string shape_str() const;

 private:
  std::vector<int> shape_;
  std::vector<double> data_;
};

std::string shape_str(const std::vector<int>& shape);

using NodeId = int;

/// Dynamic reverse-mode tape. Nodes are created in topological order by
/// construction (an op only references existing nodes), so backward runs in
/// descending creation order over the nodes reachable from the root and
/// touches each exactly once. A graph is single-threaded; distinct graphs
/// are independent.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, NodeId)>;

  NodeId leaf(Tensor value);
  NodeId make_node(Tensor value, std::vector<NodeId> parents, BackwardFn backward);

  const Tensor& value(NodeId id) const { return nodes_[static_cast<size_t>(id)].value; }
  Tensor& value_mut(NodeId id) { return nodes_[static_cast<size_t>(id)].value; }
  const Tensor& grad(NodeId id) const { return nodes_[static_cast<size_t>(id)].grad; }
  Tensor& grad_mut(NodeId id) { return nodes_[static_cast<size_t>(id)].grad; }

  /// Seeds the root gradient with 1 and accumulates gradients into every
  /// reachable node. Root must be scalar (numel 1). Running twice without
  /// zero_grad() in between is an error.
  void backward(NodeId root);
  void zero_grad();
  int size() const { return static_cast<int>(nodes_.size()); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<NodeId> parents;
    BackwardFn backward;
  };
  // Deque keeps value()/grad() references stable while new nodes are added.
  std::deque<Node> nodes_;
  bool backward_done_ = false;
};

// Core differentiable ops. Each registers its backward rule on the graph.
NodeId matmul(Graph& g, NodeId a, NodeId b);
NodeId add(Graph& g, NodeId a, NodeId b);
NodeId sub(Graph& g, NodeId a, NodeId b);
NodeId mul(Graph& g, NodeId a, NodeId b);
NodeId scale(Graph& g, NodeId a, double c);
NodeId add_bias(Graph& g, NodeId x, NodeId b);  // [B x D] + [D]
NodeId relu(Graph& g, NodeId x);
NodeId sigmoid(Graph& g, NodeId x);
NodeId tanh(Graph& g, NodeId x);
NodeId sum(Graph& g, NodeId x);  // -> [1]
NodeId transpose(Graph& g, NodeId x);
NodeId reshape(Graph& g, NodeId x, std::vector<int> shape);
NodeId slice_rows(Graph& g, NodeId x, int r0, int r1);
NodeId concat_vec(Graph& g, const std::vector<NodeId>& xs);       // rank-1, axis 0
NodeId concat_rows(Graph& g, const std::vector<NodeId>& xs);      // rank-2, axis 0
NodeId concat_channels(Graph& g, const std::vector<NodeId>& xs);  // rank-3, axis 0
NodeId channels_to_rows(Graph& g, NodeId x);                      // [C x D x T] -> [(D*T) x C]
NodeId rows_to_channels(Graph& g, NodeId x, int d, int t);        // inverse of the above

}  // namespace temporal_heads
