#include "temporal_heads/layers.hpp"

#include <algorithm>
#include <cmath>

namespace temporal_heads {

namespace {

void require_rank(const Tensor& t, int rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) +
                         ", got " + t.shape_str());
  }
}

}  // namespace

NodeId fully_connected(Graph& g, NodeId x, NodeId weight, NodeId bias) {
  return add_bias(g, matmul(g, x, weight), bias);
}

NodeId batch_norm(Graph& g, NodeId x, NodeId gamma, NodeId beta, Tensor& running_mean,
                  Tensor& running_var, double momentum, double epsilon, bool train,
                  bool update_running) {
  const Tensor& xv = g.value(x);
  require_rank(xv, 2, "batch_norm");
  const int rows = xv.dim(0), cols = xv.dim(1);
  if (g.value(gamma).numel() != cols || g.value(beta).numel() != cols ||
      running_mean.numel() != cols || running_var.numel() != cols) {
    throw DimensionError("batch_norm: parameter width does not match " + xv.shape_str());
  }

  if (!train) {
    Tensor inv({cols});
    for (int j = 0; j < cols; ++j) inv[j] = 1.0 / std::sqrt(running_var[j] + epsilon);
    Tensor xhat({rows, cols});
    Tensor out({rows, cols});
    const Tensor& gv = g.value(gamma);
    const Tensor& bv = g.value(beta);
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < cols; ++j) {
        const double h = (xv.at(i, j) - running_mean[j]) * inv[j];
        xhat.at(i, j) = h;
        out.at(i, j) = gv[j] * h + bv[j];
      }
    }
    return g.make_node(std::move(out), {x, gamma, beta},
                       [x, gamma, beta, rows, cols, inv = std::move(inv),
                        xhat = std::move(xhat)](Graph& gg, NodeId self) {
                         const Tensor& d = gg.grad(self);
                         const Tensor& gv2 = gg.value(gamma);
                         Tensor& dx = gg.grad_mut(x);
                         Tensor& dg = gg.grad_mut(gamma);
                         Tensor& db = gg.grad_mut(beta);
                         for (int i = 0; i < rows; ++i) {
                           for (int j = 0; j < cols; ++j) {
                             const double dij = d.at(i, j);
                             dx.at(i, j) += dij * gv2[j] * inv[j];
                             dg[j] += dij * xhat.at(i, j);
                             db[j] += dij;
                           }
                         }
                       });
  }

  if (rows < 2) {
    throw ContractError("batch_norm: train mode needs at least 2 rows, got " +
                        std::to_string(rows));
  }
  Tensor mean({cols});
  Tensor var({cols});
  for (int j = 0; j < cols; ++j) {
    double m = 0.0;
    for (int i = 0; i < rows; ++i) m += xv.at(i, j);
    m /= rows;
    double v = 0.0;
    for (int i = 0; i < rows; ++i) {
      const double c = xv.at(i, j) - m;
      v += c * c;
    }
    mean[j] = m;
    var[j] = v / rows;  // biased, for normalization
  }
  if (update_running) {
    const double unbias = static_cast<double>(rows) / (rows - 1);
    for (int j = 0; j < cols; ++j) {
      running_mean[j] = (1.0 - momentum) * running_mean[j] + momentum * mean[j];
      running_var[j] = (1.0 - momentum) * running_var[j] + momentum * var[j] * unbias;
    }
  }
  Tensor inv({cols});
  for (int j = 0; j < cols; ++j) inv[j] = 1.0 / std::sqrt(var[j] + epsilon);
  Tensor xhat({rows, cols});
  Tensor out({rows, cols});
  const Tensor& gv = g.value(gamma);
  const Tensor& bv = g.value(beta);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      const double h = (xv.at(i, j) - mean[j]) * inv[j];
      xhat.at(i, j) = h;
      out.at(i, j) = gv[j] * h + bv[j];
    }
  }
  return g.make_node(
      std::move(out), {x, gamma, beta},
      [x, gamma, beta, rows, cols, inv = std::move(inv), xhat = std::move(xhat)](Graph& gg,
                                                                                 NodeId self) {
        const Tensor& d = gg.grad(self);
        const Tensor& gv2 = gg.value(gamma);
        Tensor& dx = gg.grad_mut(x);
        Tensor& dg = gg.grad_mut(gamma);
        Tensor& db = gg.grad_mut(beta);
        // Backward through the batch statistics (biased variance).
        for (int j = 0; j < cols; ++j) {
          double sum_dxhat = 0.0;
          double sum_dxhat_xhat = 0.0;
          for (int i = 0; i < rows; ++i) {
            const double dxh = d.at(i, j) * gv2[j];
            sum_dxhat += dxh;
            sum_dxhat_xhat += dxh * xhat.at(i, j);
            dg[j] += d.at(i, j) * xhat.at(i, j);
            db[j] += d.at(i, j);
          }
          for (int i = 0; i < rows; ++i) {
            const double dxh = d.at(i, j) * gv2[j];
            dx.at(i, j) +=
                inv[j] / rows * (rows * dxh - sum_dxhat - xhat.at(i, j) * sum_dxhat_xhat);
          }
        }
      });
}

NodeId batch_norm(Graph& g, NodeId x, NodeId gamma, NodeId beta, BatchNormStats& stats,
                  bool train, bool update_running) {
  return batch_norm(g, x, gamma, beta, stats.running_mean, stats.running_var, stats.momentum,
                    stats.epsilon, train, update_running);
}

NodeId temporal_pool(Graph& g, NodeId x, PoolKind kind, int t0, int t1) {
  const Tensor& xv = g.value(x);
  require_rank(xv, 2, "temporal_pool");
  const int d = xv.dim(0), t = xv.dim(1);
  if (t0 < 0 || t1 > t || t0 >= t1) {
    throw ContractError("temporal_pool: empty or invalid window [" + std::to_string(t0) + "," +
                        std::to_string(t1) + ") of T=" + std::to_string(t));
  }
  Tensor out({d});
  if (kind == PoolKind::kMax) {
    std::vector<int> argmax(static_cast<size_t>(d));
    for (int r = 0; r < d; ++r) {
      int best = t0;
      for (int c = t0 + 1; c < t1; ++c) {
        if (xv.at(r, c) > xv.at(r, best)) best = c;
      }
      argmax[static_cast<size_t>(r)] = best;
      out[r] = xv.at(r, best);
    }
    return g.make_node(std::move(out), {x},
                       [x, d, argmax = std::move(argmax)](Graph& gg, NodeId self) {
                         const Tensor& dg = gg.grad(self);
                         Tensor& dx = gg.grad_mut(x);
                         for (int r = 0; r < d; ++r) dx.at(r, argmax[static_cast<size_t>(r)]) += dg[r];
                       });
  }
  const int len = t1 - t0;
  std::vector<double> window(static_cast<size_t>(len));
  for (int r = 0; r < d; ++r) {
    for (int c = t0; c < t1; ++c) window[static_cast<size_t>(c - t0)] = xv.at(r, c);
    std::sort(window.begin(), window.end());
    double s = 0.0;
    for (double v : window) s += v;
    out[r] = s / len;
  }
  return g.make_node(std::move(out), {x}, [x, d, t0, t1, len](Graph& gg, NodeId self) {
    const Tensor& dg = gg.grad(self);
    Tensor& dx = gg.grad_mut(x);
    for (int r = 0; r < d; ++r) {
      const double share = dg[r] / len;
      for (int c = t0; c < t1; ++c) dx.at(r, c) += share;
    }
  });
}

NodeId temporal_conv1d(Graph& g, NodeId x, NodeId kernels, int stride) {
  const Tensor& xv = g.value(x);
  const Tensor& kv = g.value(kernels);
  require_rank(xv, 3, "temporal_conv1d");
  require_rank(kv, 3, "temporal_conv1d");
  const int c = xv.dim(0), d = xv.dim(1), t = xv.dim(2);
  const int cout = kv.dim(0), cin = kv.dim(1), k = kv.dim(2);
  if (cin != c) {
    throw DimensionError("temporal_conv1d: kernel channels " + kv.shape_str() +
                         " do not match input " + xv.shape_str());
  }
  if (k % 2 == 0) {
    throw ConfigError("temporal_conv1d: kernel size must be odd, got " + std::to_string(k));
  }
  if (stride != 1 && stride != 2) {
    throw ConfigError("temporal_conv1d: stride must be 1 or 2, got " + std::to_string(stride));
  }
  const int pad = k / 2;
  const int tout = (t + stride - 1) / stride;
  Tensor out({cout, d, tout});
  for (int co = 0; co < cout; ++co) {
    for (int ci = 0; ci < c; ++ci) {
      for (int di = 0; di < d; ++di) {
        for (int to = 0; to < tout; ++to) {
          double acc = 0.0;
          const int base = to * stride - pad;
          for (int dk = 0; dk < k; ++dk) {
            const int ti = base + dk;
            if (ti < 0 || ti >= t) continue;
            acc += xv.at(ci, di, ti) * kv.at(co, ci, dk);
          }
          out.at(co, di, to) += acc;
        }
      }
    }
  }
  return g.make_node(std::move(out), {x, kernels},
                     [x, kernels, c, d, t, cout, k, pad, stride, tout](Graph& gg, NodeId self) {
                       const Tensor& dy = gg.grad(self);
                       const Tensor& xv2 = gg.value(x);
                       const Tensor& kv2 = gg.value(kernels);
                       Tensor& dx = gg.grad_mut(x);
                       Tensor& dk2 = gg.grad_mut(kernels);
                       for (int co = 0; co < cout; ++co) {
                         for (int ci = 0; ci < c; ++ci) {
                           for (int di = 0; di < d; ++di) {
                             for (int to = 0; to < tout; ++to) {
                               const double dyv = dy.at(co, di, to);
                               if (dyv == 0.0) continue;
                               const int base = to * stride - pad;
                               for (int dk = 0; dk < k; ++dk) {
                                 const int ti = base + dk;
                                 if (ti < 0 || ti >= t) continue;
                                 dx.at(ci, di, ti) += dyv * kv2.at(co, ci, dk);
                                 dk2.at(co, ci, dk) += dyv * xv2.at(ci, di, ti);
                               }
                             }
                           }
                         }
                       }
                     });
}

NodeId conv_channel_bias(Graph& g, NodeId x, NodeId bias) {
  const Tensor& xv = g.value(x);
  const Tensor& bv = g.value(bias);
  require_rank(xv, 3, "conv_channel_bias");
  require_rank(bv, 1, "conv_channel_bias");
  const int c = xv.dim(0), d = xv.dim(1), t = xv.dim(2);
  if (bv.dim(0) != c) {
    throw DimensionError("conv_channel_bias: bias " + bv.shape_str() + " does not match " +
                         xv.shape_str());
  }
  Tensor out = xv;
  for (int ci = 0; ci < c; ++ci) {
    for (int di = 0; di < d; ++di) {
      for (int ti = 0; ti < t; ++ti) out.at(ci, di, ti) += bv[ci];
    }
  }
  return g.make_node(std::move(out), {x, bias}, [x, bias, c, d, t](Graph& gg, NodeId self) {
    const Tensor& dy = gg.grad(self);
    Tensor& dx = gg.grad_mut(x);
    Tensor& db = gg.grad_mut(bias);
    for (int ci = 0; ci < c; ++ci) {
      for (int di = 0; di < d; ++di) {
        for (int ti = 0; ti < t; ++ti) {
          dx.at(ci, di, ti) += dy.at(ci, di, ti);
          db[ci] += dy.at(ci, di, ti);
        }
      }
    }
  });
}

NodeId channel_pool(Graph& g, NodeId x, PoolKind kind) {
  const Tensor& xv = g.value(x);
  require_rank(xv, 3, "channel_pool");
  const int c = xv.dim(0), d = xv.dim(1), t = xv.dim(2);
  Tensor out({1, d, t});
  if (kind == PoolKind::kMax) {
    std::vector<int> argmax(static_cast<size_t>(d * t));
    for (int di = 0; di < d; ++di) {
      for (int ti = 0; ti < t; ++ti) {
        int best = 0;
        for (int ci = 1; ci < c; ++ci) {
          if (xv.at(ci, di, ti) > xv.at(best, di, ti)) best = ci;
        }
        argmax[static_cast<size_t>(di * t + ti)] = best;
        out.at(0, di, ti) = xv.at(best, di, ti);
      }
    }
    return g.make_node(std::move(out), {x},
                       [x, d, t, argmax = std::move(argmax)](Graph& gg, NodeId self) {
                         const Tensor& dy = gg.grad(self);
                         Tensor& dx = gg.grad_mut(x);
                         for (int di = 0; di < d; ++di) {
                           for (int ti = 0; ti < t; ++ti) {
                             dx.at(argmax[static_cast<size_t>(di * t + ti)], di, ti) +=
                                 dy.at(0, di, ti);
                           }
                         }
                       });
  }
  for (int di = 0; di < d; ++di) {
    for (int ti = 0; ti < t; ++ti) {
      double s = 0.0;
      for (int ci = 0; ci < c; ++ci) s += xv.at(ci, di, ti);
      out.at(0, di, ti) = s / c;
    }
  }
  return g.make_node(std::move(out), {x}, [x, c, d, t](Graph& gg, NodeId self) {
    const Tensor& dy = gg.grad(self);
    Tensor& dx = gg.grad_mut(x);
    for (int ci = 0; ci < c; ++ci) {
      for (int di = 0; di < d; ++di) {
        for (int ti = 0; ti < t; ++ti) dx.at(ci, di, ti) += dy.at(0, di, ti) / c;
      }
    }
  });
}

LstmState lstm_step(Graph& g, NodeId x_row, const LstmState& state, const LstmCellParams& p) {
  auto gate = [&](const LstmGateParams& gp) {
    NodeId z = add(g, matmul(g, x_row, gp.w_x), matmul(g, state.hidden, gp.w_h));
    return add(g, z, reshape(g, gp.bias, {1, g.value(gp.bias).numel()}));
  };
  const NodeId in_gate = sigmoid(g, gate(p.input_gate));
  const NodeId forget_gate = sigmoid(g, gate(p.forget_gate));
  const NodeId out_gate = sigmoid(g, gate(p.output_gate));
  const NodeId cand = tanh(g, gate(p.candidate));
  const NodeId cell = add(g, mul(g, forget_gate, state.cell), mul(g, in_gate, cand));
  const NodeId hidden = mul(g, out_gate, tanh(g, cell));
  return {hidden, cell};
}

NodeId lstm_stack(Graph& g, const std::vector<NodeId>& inputs,
                  const std::vector<LstmCellParams>& layers) {
  if (inputs.empty()) throw ContractError("lstm_stack: empty input sequence");
  if (layers.empty()) throw ContractError("lstm_stack: no layers");
  std::vector<NodeId> seq = inputs;
  NodeId last = -1;
  for (const LstmCellParams& layer : layers) {
    const int h = g.value(layer.input_gate.w_x).dim(1);
    LstmState state{g.leaf(Tensor::zeros({1, h})), g.leaf(Tensor::zeros({1, h}))};
    std::vector<NodeId> outputs;
    outputs.reserve(seq.size());
    for (NodeId x : seq) {
      state = lstm_step(g, x, state, layer);
      outputs.push_back(state.hidden);
    }
    last = state.hidden;
    seq = std::move(outputs);
  }
  return last;
}

NodeId softmax_rows(Graph& g, NodeId logits) {
  const Tensor& zv = g.value(logits);
  require_rank(zv, 2, "softmax");
  if (!zv.all_finite()) throw ContractError("softmax: logits must be finite");
  const int rows = zv.dim(0), cols = zv.dim(1);
  Tensor out({rows, cols});
  for (int i = 0; i < rows; ++i) {
    double m = zv.at(i, 0);
    for (int j = 1; j < cols; ++j) m = std::max(m, zv.at(i, j));
    double s = 0.0;
    for (int j = 0; j < cols; ++j) {
      const double e = std::exp(zv.at(i, j) - m);
      out.at(i, j) = e;
      s += e;
    }
    for (int j = 0; j < cols; ++j) out.at(i, j) /= s;
  }
  return g.make_node(std::move(out), {logits}, [logits, rows, cols](Graph& gg, NodeId self) {
    const Tensor& d = gg.grad(self);
    const Tensor& y = gg.value(self);
    Tensor& dz = gg.grad_mut(logits);
    for (int i = 0; i < rows; ++i) {
      double dot = 0.0;
      for (int j = 0; j < cols; ++j) dot += d.at(i, j) * y.at(i, j);
      for (int j = 0; j < cols; ++j) dz.at(i, j) += y.at(i, j) * (d.at(i, j) - dot);
    }
  });
}

NodeId dropout(Graph& g, NodeId x, double p, bool train, Rng* rng) {
  if (p < 0.0 || p >= 1.0) {
    throw ConfigError("dropout: rate must be in [0, 1), got " + std::to_string(p));
  }
  if (!train || p == 0.0) return x;
  if (rng == nullptr) throw ContractError("dropout: train mode needs an RNG");
  const Tensor& xv = g.value(x);
  const double keep = 1.0 - p;
  std::vector<char> mask(static_cast<size_t>(xv.numel()));
  Tensor out = xv;
  for (int i = 0; i < xv.numel(); ++i) {
    if (rng->uniform01() < p) {
      mask[static_cast<size_t>(i)] = 0;
      out[i] = 0.0;
    } else {
      mask[static_cast<size_t>(i)] = 1;
      out[i] /= keep;
    }
  }
  return g.make_node(std::move(out), {x}, [x, keep, mask = std::move(mask)](Graph& gg, NodeId self) {
    const Tensor& d = gg.grad(self);
    Tensor& dx = gg.grad_mut(x);
    for (int i = 0; i < d.numel(); ++i) {
      if (mask[static_cast<size_t>(i)]) dx[i] += d[i] / keep;
    }
  });
}

}  // namespace temporal_heads
