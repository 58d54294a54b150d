#pragma once

// Brute-force reference implementations used to check the graph ops. These
// stay independent of the production code paths: plain loops, no Graph.

#include <cmath>
#include <functional>
#include <vector>

#include "temporal_heads/tensor.hpp"

namespace oracle {

using temporal_heads::Graph;
using temporal_heads::NodeId;
using temporal_heads::Tensor;

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor c({m, n});
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int p = 0; p < k; ++p) acc += a.at(i, p) * b.at(p, j);
      c.at(i, j) = acc;
    }
  }
  return c;
}

// Temporal-axis convolution with zero padding k/2, identical taps per
// feature row, mixing input channels.
inline Tensor conv1d(const Tensor& x, const Tensor& kernels, int stride) {
  const int c = x.dim(0), d = x.dim(1), t = x.dim(2);
  const int cout = kernels.dim(0), k = kernels.dim(2);
  const int pad = k / 2;
  const int tout = (t + stride - 1) / stride;
  Tensor y({cout, d, tout});
  for (int co = 0; co < cout; ++co) {
    for (int di = 0; di < d; ++di) {
      for (int to = 0; to < tout; ++to) {
        double acc = 0.0;
        for (int ci = 0; ci < c; ++ci) {
          for (int dk = 0; dk < k; ++dk) {
            const int ti = to * stride - pad + dk;
            if (ti >= 0 && ti < t) acc += x.at(ci, di, ti) * kernels.at(co, ci, dk);
          }
        }
        y.at(co, di, to) = acc;
      }
    }
  }
  return y;
}

inline std::vector<double> pool(const Tensor& x, bool take_max, int t0, int t1) {
  std::vector<double> out(static_cast<size_t>(x.dim(0)));
  for (int r = 0; r < x.dim(0); ++r) {
    if (take_max) {
      double best = x.at(r, t0);
      for (int c = t0 + 1; c < t1; ++c) best = std::max(best, x.at(r, c));
      out[static_cast<size_t>(r)] = best;
    } else {
      double s = 0.0;
      for (int c = t0; c < t1; ++c) s += x.at(r, c);
      out[static_cast<size_t>(r)] = s / (t1 - t0);
    }
  }
  return out;
}

struct LstmGates {
  Tensor wx, wh;  // [Din x H], [H x H]
  std::vector<double> bias;
};

struct LstmOut {
  std::vector<double> hidden, cell;
};

// Gate-by-gate scalar evaluation of one LSTM step.
inline LstmOut lstm_step(const std::vector<double>& x, const std::vector<double>& h,
                         const std::vector<double>& c, const LstmGates& in_g,
                         const LstmGates& forget_g, const LstmGates& out_g,
                         const LstmGates& cand_g) {
  const int hw = static_cast<int>(h.size());
  auto gate = [&](const LstmGates& g, int j) {
    double z = g.bias[static_cast<size_t>(j)];
    for (size_t d = 0; d < x.size(); ++d) z += x[d] * g.wx.at(static_cast<int>(d), j);
    for (size_t k = 0; k < h.size(); ++k) z += h[k] * g.wh.at(static_cast<int>(k), j);
    return z;
  };
  auto sigm = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
  LstmOut out;
  out.hidden.resize(static_cast<size_t>(hw));
  out.cell.resize(static_cast<size_t>(hw));
  for (int j = 0; j < hw; ++j) {
    const double ig = sigm(gate(in_g, j));
    const double fg = sigm(gate(forget_g, j));
    const double og = sigm(gate(out_g, j));
    const double cd = std::tanh(gate(cand_g, j));
    const double cj = fg * c[static_cast<size_t>(j)] + ig * cd;
    out.cell[static_cast<size_t>(j)] = cj;
    out.hidden[static_cast<size_t>(j)] = og * std::tanh(cj);
  }
  return out;
}

inline double cross_entropy_logits(const Tensor& logits, const std::vector<int>& labels) {
  const int b = logits.dim(0), c = logits.dim(1);
  double total = 0.0;
  for (int i = 0; i < b; ++i) {
    double m = logits.at(i, 0);
    for (int j = 1; j < c; ++j) m = std::max(m, logits.at(i, j));
    double s = 0.0;
    for (int j = 0; j < c; ++j) s += std::exp(logits.at(i, j) - m);
    const double p = std::exp(logits.at(i, labels[static_cast<size_t>(i)]) - m) / s;
    total += -std::log(p);
  }
  return total / b;
}

// Central-difference check of d(root)/d(leaf) for every leaf element.
// `build` must construct the same scalar function of the leaves every call.
inline double max_fd_rel_error(
    const std::function<NodeId(Graph&, const std::vector<NodeId>&)>& build,
    std::vector<Tensor> leaves, double h = 1e-5) {
  auto evaluate = [&](const std::vector<Tensor>& vals) {
    Graph g;
    std::vector<NodeId> ids;
    for (const Tensor& t : vals) ids.push_back(g.leaf(t));
    return g.value(build(g, ids))[0];
  };
  Graph g;
  std::vector<NodeId> ids;
  for (const Tensor& t : leaves) ids.push_back(g.leaf(t));
  const NodeId root = build(g, ids);
  g.backward(root);
  double worst = 0.0;
  for (size_t l = 0; l < leaves.size(); ++l) {
    const Tensor& analytic = g.grad(ids[l]);
    for (int e = 0; e < leaves[l].numel(); ++e) {
      const double saved = leaves[l][e];
      leaves[l][e] = saved + h;
      const double up = evaluate(leaves);
      leaves[l][e] = saved - h;
      const double down = evaluate(leaves);
      leaves[l][e] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double denom = std::max({std::fabs(analytic[e]), std::fabs(numeric), 1e-3});
      worst = std::max(worst, std::fabs(analytic[e] - numeric) / denom);
    }
  }
  return worst;
}

inline Tensor random_tensor(std::vector<int> shape, temporal_heads::Rng& rng, double lo = -1.0,
                            double hi = 1.0) {
  Tensor t(std::move(shape));
  for (int i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

}  // namespace oracle
