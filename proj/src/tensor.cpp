#include "temporal_heads/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <utility>

namespace temporal_heads {

namespace {

int checked_numel(const std::vector<int>& shape) {
  if (shape.empty() || shape.size() > 3) {
    throw DimensionError("tensor rank must be 1-3, got " + shape_str(shape));
  }
  long long n = 1;
  for (int e : shape) {
    if (e <= 0) throw DimensionError("tensor extents must be positive, got " + shape_str(shape));
    n *= e;
  }
  return static_cast<int>(n);
}

}  // namespace

std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
  data_.assign(static_cast<size_t>(checked_numel(shape_)), 0.0);
}

Tensor Tensor::full(std::vector<int> shape, double v) {
  Tensor t(std::move(shape));
  t.fill(v);
  return t;
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> data) {
  const int n = checked_numel(shape);
  if (static_cast<size_t>(n) != data.size()) {
    throw DimensionError("tensor data length " + std::to_string(data.size()) +
                         " does not match shape " + temporal_heads::shape_str(shape));
  }
  Tensor t;
  t.shape_ = std::move(shape);
  t.data_ = std::move(data);
  return t;
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Tensor::fill(double v) { data_.assign(data_.size(), v); }

std::string Tensor::shape_str() const { return temporal_heads::shape_str(shape_); }

NodeId Graph::leaf(Tensor value) { return make_node(std::move(value), {}, nullptr); }

NodeId Graph::make_node(Tensor value, std::vector<NodeId> parents, BackwardFn backward) {
  Node n;
  n.grad = Tensor::zeros(value.shape());
  n.value = std::move(value);
  n.parents = std::move(parents);
  n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

void Graph::backward(NodeId root) {
  if (backward_done_) {
    throw ContractError("backward called twice without zero_grad");
  }
  Node& r = nodes_[static_cast<size_t>(root)];
  if (r.value.numel() != 1) {
    throw ContractError("backward root must be scalar, got " + r.value.shape_str());
  }
  // Mark the ancestry of the root; creation ids already order it topologically.
  std::vector<char> reachable(nodes_.size(), 0);
  std::vector<NodeId> stack{root};
  reachable[static_cast<size_t>(root)] = 1;
  while (!stack.empty()) {
    const NodeId id = stack.back();
    stack.pop_back();
    for (NodeId p : nodes_[static_cast<size_t>(id)].parents) {
      if (!reachable[static_cast<size_t>(p)]) {
        reachable[static_cast<size_t>(p)] = 1;
        stack.push_back(p);
      }
    }
  }
  r.grad[0] = 1.0;
  for (NodeId id = root; id >= 0; --id) {
    if (!reachable[static_cast<size_t>(id)]) continue;
    Node& n = nodes_[static_cast<size_t>(id)];
    if (n.backward) n.backward(*this, id);
  }
  backward_done_ = true;
}

void Graph::zero_grad() {
  for (Node& n : nodes_) n.grad.fill(0.0);
  backward_done_ = false;
}

namespace {

void require_rank(const Tensor& t, int rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) +
                         ", got " + t.shape_str());
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                         b.shape_str());
  }
}

}  // namespace

NodeId matmul(Graph& g, NodeId a, NodeId b) {
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  require_rank(av, 2, "matmul");
  require_rank(bv, 2, "matmul");
  const int m = av.dim(0), k = av.dim(1), k2 = bv.dim(0), n = bv.dim(1);
  if (k != k2) {
    throw DimensionError("matmul: inner dimensions disagree, " + av.shape_str() + " * " +
                         bv.shape_str());
  }
  Tensor out({m, n});
  for (int i = 0; i < m; ++i) {
    for (int p = 0; p < k; ++p) {
      const double aip = av.at(i, p);
      if (aip == 0.0) continue;
      for (int j = 0; j < n; ++j) out.at(i, j) += aip * bv.at(p, j);
    }
  }
  return g.make_node(std::move(out), {a, b}, [a, b, m, k, n](Graph& gg, NodeId self) {
    const Tensor& d = gg.grad(self);
    const Tensor& av2 = gg.value(a);
    const Tensor& bv2 = gg.value(b);
    Tensor& da = gg.grad_mut(a);
    Tensor& db = gg.grad_mut(b);
    // dA = dC * B^T
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) {
        const double dij = d.at(i, j);
        if (dij == 0.0) continue;
        for (int p = 0; p < k; ++p) da.at(i, p) += dij * bv2.at(p, j);
      }
    }
    // dB = A^T * dC
    for (int p = 0; p < k; ++p) {
      for (int i = 0; i < m; ++i) {
        const double aip = av2.at(i, p);
        if (aip == 0.0) continue;
        for (int j = 0; j < n; ++j) db.at(p, j) += aip * d.at(i, j);
      }
    }
  });
}

NodeId add(Graph& g, NodeId a, NodeId b) {
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  require_same_shape(av, bv, "add");
  Tensor out = av;
  for (int i = 0; i < out.numel(); ++i) out[i] += bv[i];
  return g.make_node(std::move(out), {a, b}, [a, b](Graph& gg, NodeId self) {
    const Tensor& d = gg.grad(self);
    Tensor& da = gg.grad_mut(a);
    Tensor& db = gg.grad_mut(b);
    for (int i = 0; i < d.numel(); ++i) {
      da[i] += d[i];
      db[i] += d[i];
    }
  });
}

NodeId sub(Graph& g, NodeId a, NodeId b) {
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  require_same_shape(av, bv, "sub");
  Tensor out = av;
  for (int i = 0; i < out.numel(); ++i) out[i] -= bv[i];
  return g.make_node(std::move(out), {a, b}, [a, b](Graph& gg, NodeId self) {
    const Tensor& d = gg.grad(self);
    Tensor& da = gg.grad_mut(a);
    Tensor& db = gg.grad_mut(b);
    for (int i = 0; i < d.numel(); ++i) {
      da[i] += d[i];
      db[i] -= d[i];
    }
  });
}

NodeId mul(Graph& g, NodeId a, NodeId b) {
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  require_same_shape(av, bv, "mul");
  Tensor out = av;
  for (int i = 0; i < out.numel(); ++i) out[i] *= bv[i];
  return g.make_node(std::move(out), {a, b}, [a, b](Graph& gg, NodeId self) {
    const Tensor& d = gg.grad(self);
    const Tensor& av2 = gg.value(a);
    const Tensor& bv2 = gg.value(b);
    Tensor& da = gg.grad_mut(a);
    Tensor& db = gg.grad_mut(b);
    for (int i = 0; i < d.numel(); ++i) {
      da[i] += d[i] * bv2[i];
      db[i] += d[i] * av2[i];
    }
  });
}

NodeId scale(Graph& g, NodeId a, double c) {
  Tensor out = g.value(a);
  for (int i = 0; i < out.numel(); ++i) out[i] *= c;
  return g.make_node(std::move(out), {a}, [a, c](Graph& gg, NodeId self) {
    const Tensor& d = gg.grad(self);
    Tensor& da = gg.grad_mut(a);
    for (int i = 0; i < d.numel(); ++i) da[i] += c * d[i];
  });
}

NodeId add_bias(Graph& g, NodeId x, NodeId b) {
  const Tensor& xv = g.value(x);
  const Tensor& bv = g.value(b);
  require_rank(xv, 2, "add_bias");
  require_rank(bv, 1, "add_bias");
  const int rows = xv.dim(0), cols = xv.dim(1);
  if (bv.dim(0) != cols) {
    throw DimensionError("add_bias: bias length " + bv.shape_str() + " does not match " +
                         xv.shape_str());
  }
  Tensor out = xv;
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) out.at(i, j) += bv[j];
  }
  return g.make_node(std::move(out), {x, b}, [x, b, rows, cols](Graph& gg, NodeId self) {
    const Tensor& d = gg.grad(self);
    Tensor& dx = gg.grad_mut(x);
    Tensor& db = gg.grad_mut(b);
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < cols; ++j) {
        dx.at(i, j) += d.at(i, j);
        db[j] += d.at(i, j);
      }
    }
  });
}

NodeId relu(Graph& g, NodeId x) {
  Tensor out = g.value(x);
  for (int i = 0; i < out.numel(); ++i) out[i] = out[i] > 0.0 ? out[i] : 0.0;
  return g.make_node(std::move(out), {x}, [x](Graph& gg, NodeId self) {
    const Tensor& d = gg.grad(self);
    const Tensor& xv = gg.value(x);
    Tensor& dx = gg.grad_mut(x);
    for (int i = 0; i < d.numel(); ++i) {
      if (xv[i] > 0.0) dx[i] += d[i];
    }
  });
}

NodeId sigmoid(Graph& g, NodeId x) {
  Tensor out = g.value(x);
  for (int i = 0; i < out.numel(); ++i) out[i] = 1.0 / (1.0 + std::exp(-out[i]));
  return g.make_node(std::move(out), {x}, [x](Graph& gg, NodeId self) {
    const Tensor& d = gg.grad(self);
    const Tensor& y = gg.value(self);
    Tensor& dx = gg.grad_mut(x);
    for (int i = 0; i < d.numel(); ++i) dx[i] += d[i] * y[i] * (1.0 - y[i]);
  });
}

NodeId tanh(Graph& g, NodeId x) {
  Tensor out = g.value(x);
  for (int i = 0; i < out.numel(); ++i) out[i] = std::tanh(out[i]);
  return g.make_node(std::move(out), {x}, [x](Graph& gg, NodeId self) {
    const Tensor& d = gg.grad(self);
    const Tensor& y = gg.value(self);
    Tensor& dx = gg.grad_mut(x);
    for (int i = 0; i < d.numel(); ++i) dx[i] += d[i] * (1.0 - y[i] * y[i]);
  });
}

NodeId sum(Graph& g, NodeId x) {
  const Tensor& xv = g.value(x);
  double s = 0.0;
  for (int i = 0; i < xv.numel(); ++i) s += xv[i];
  return g.make_node(Tensor::from({1}, {s}), {x}, [x](Graph& gg, NodeId self) {
    const double d = gg.grad(self)[0];
    Tensor& dx = gg.grad_mut(x);
    for (int i = 0; i < dx.numel(); ++i) dx[i] += d;
  });
}

NodeId transpose(Graph& g, NodeId x) {
  const Tensor& xv = g.value(x);
  require_rank(xv, 2, "transpose");
  const int m = xv.dim(0), n = xv.dim(1);
  Tensor out({n, m});
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) out.at(j, i) = xv.at(i, j);
  }
  return g.make_node(std::move(out), {x}, [x, m, n](Graph& gg, NodeId self) {
    const Tensor& d = gg.grad(self);
    Tensor& dx = gg.grad_mut(x);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) dx.at(i, j) += d.at(j, i);
    }
  });
}

NodeId reshape(Graph& g, NodeId x, std::vector<int> shape) {
  const Tensor& xv = g.value(x);
  Tensor out = Tensor::from(std::move(shape), xv.vec());
  if (out.numel() != xv.numel()) {
    throw DimensionError("reshape: element count changes " + xv.shape_str() + " -> " +
                         out.shape_str());
  }
  return g.make_node(std::move(out), {x}, [x](Graph& gg, NodeId self) {
    const Tensor& d = gg.grad(self);
    Tensor& dx = gg.grad_mut(x);
    for (int i = 0; i < d.numel(); ++i) dx[i] += d[i];
  });
}

NodeId slice_rows(Graph& g, NodeId x, int r0, int r1) {
  const Tensor& xv = g.value(x);
  require_rank(xv, 2, "slice_rows");
  const int rows = xv.dim(0), cols = xv.dim(1);
  if (r0 < 0 || r1 > rows || r0 >= r1) {
    throw ContractError("slice_rows: invalid window [" + std::to_string(r0) + "," +
                        std::to_string(r1) + ") of " + std::to_string(rows) + " rows");
  }
  Tensor out({r1 - r0, cols});
  for (int i = r0; i < r1; ++i) {
    for (int j = 0; j < cols; ++j) out.at(i - r0, j) = xv.at(i, j);
  }
  return g.make_node(std::move(out), {x}, [x, r0, r1, cols](Graph& gg, NodeId self) {
    const Tensor& d = gg.grad(self);
    Tensor& dx = gg.grad_mut(x);
    for (int i = r0; i < r1; ++i) {
      for (int j = 0; j < cols; ++j) dx.at(i, j) += d.at(i - r0, j);
    }
  });
}

namespace {

NodeId concat_axis0(Graph& g, const std::vector<NodeId>& xs, int rank, const char* op) {
  if (xs.empty()) throw ContractError(std::string(op) + ": empty input list");
  std::vector<int> shape = g.value(xs[0]).shape();
  require_rank(g.value(xs[0]), rank, op);
  int total = 0;
  int block = 1;
  for (size_t a = 1; a < shape.size(); ++a) block *= shape[a];
  std::vector<int> offsets;
  for (NodeId x : xs) {
    const Tensor& v = g.value(x);
    require_rank(v, rank, op);
    for (int a = 1; a < rank; ++a) {
      if (v.dim(a) != shape[static_cast<size_t>(a)]) {
        throw DimensionError(std::string(op) + ": trailing shape mismatch " + v.shape_str() +
                             " vs " + shape_str(shape));
      }
    }
    offsets.push_back(total * block);
    total += v.dim(0);
  }
  shape[0] = total;
  Tensor out(shape);
  for (size_t i = 0; i < xs.size(); ++i) {
    const Tensor& v = g.value(xs[i]);
    double* dst = out.data() + offsets[i];
    for (int j = 0; j < v.numel(); ++j) dst[j] = v[j];
  }
  return g.make_node(std::move(out), xs, [xs, offsets](Graph& gg, NodeId self) {
    const Tensor& d = gg.grad(self);
    for (size_t i = 0; i < xs.size(); ++i) {
      Tensor& dx = gg.grad_mut(xs[i]);
      const double* src = d.data() + offsets[i];
      for (int j = 0; j < dx.numel(); ++j) dx[j] += src[j];
    }
  });
}

}  // namespace

NodeId concat_vec(Graph& g, const std::vector<NodeId>& xs) {
  return concat_axis0(g, xs, 1, "concat_vec");
}

NodeId concat_rows(Graph& g, const std::vector<NodeId>& xs) {
  return concat_axis0(g, xs, 2, "concat_rows");
}

NodeId concat_channels(Graph& g, const std::vector<NodeId>& xs) {
  return concat_axis0(g, xs, 3, "concat_channels");
}

NodeId channels_to_rows(Graph& g, NodeId x) {
  const Tensor& xv = g.value(x);
  require_rank(xv, 3, "channels_to_rows");
  const int c = xv.dim(0), d = xv.dim(1), t = xv.dim(2);
  Tensor out({d * t, c});
  for (int ci = 0; ci < c; ++ci) {
    for (int di = 0; di < d; ++di) {
      for (int ti = 0; ti < t; ++ti) out.at(di * t + ti, ci) = xv.at(ci, di, ti);
    }
  }
  return g.make_node(std::move(out), {x}, [x, c, d, t](Graph& gg, NodeId self) {
    const Tensor& dg = gg.grad(self);
    Tensor& dx = gg.grad_mut(x);
    for (int ci = 0; ci < c; ++ci) {
      for (int di = 0; di < d; ++di) {
        for (int ti = 0; ti < t; ++ti) dx.at(ci, di, ti) += dg.at(di * t + ti, ci);
      }
    }
  });
}

NodeId rows_to_channels(Graph& g, NodeId x, int d, int t) {
  const Tensor& xv = g.value(x);
  require_rank(xv, 2, "rows_to_channels");
  const int c = xv.dim(1);
  if (xv.dim(0) != d * t) {
    throw DimensionError("rows_to_channels: rows " + std::to_string(xv.dim(0)) +
                         " != d*t = " + std::to_string(d * t));
  }
  Tensor out({c, d, t});
  for (int ci = 0; ci < c; ++ci) {
    for (int di = 0; di < d; ++di) {
      for (int ti = 0; ti < t; ++ti) out.at(ci, di, ti) = xv.at(di * t + ti, ci);
    }
  }
  return g.make_node(std::move(out), {x}, [x, c, d, t](Graph& gg, NodeId self) {
    const Tensor& dg = gg.grad(self);
    Tensor& dx = gg.grad_mut(x);
    for (int ci = 0; ci < c; ++ci) {
      for (int di = 0; di < d; ++di) {
        for (int ti = 0; ti < t; ++ti) dx.at(di * t + ti, ci) += dg.at(ci, di, ti);
      }
    }
  });
}

}  // namespace temporal_heads
