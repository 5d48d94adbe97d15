#include "mmt/autodiff.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>

#include "mmt/error.hpp"

namespace mmt::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

ConstMap view(const Tensor& t) { return ConstMap(t.data(), t.rows(), t.cols()); }
MutMap view(Tensor& t) { return MutMap(t.data(), t.rows(), t.cols()); }

Tape& same_tape(Var a, Var b) {
  if (!a.valid() || !b.valid()) throw InvalidInputError("operation on an unbound variable");
  if (&a.tape() != &b.tape()) throw InvalidInputError("operands live on different tapes");
  return a.tape();
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

Tensor as_matrix(Tensor t) {
  if (t.rank() == 2) return t;
  if (t.rank() == 1) return t.reshaped({1, t.size()});
  throw DimensionError("autodiff values must be rank 1 or 2, got " + shape_str(t.shape()));
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)

}  // namespace

const Tensor& Var::value() const { return tape_->value(id_); }

// ---- tape ---------------------------------------------------------------

const Tensor& Tape::value(std::size_t id) const {
  const Node& n = nodes_[id];
  return n.external ? *n.external : n.value;
}

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{as_matrix(std::move(value)), nullptr, {}, {}, false});
  return Var(this, nodes_.size() - 1);
}

Var Tape::variable(Tensor value) {
  nodes_.push_back(Node{as_matrix(std::move(value)), nullptr, {}, {}, true});
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(const ParameterSet& set, std::size_t index) {
  const auto key = std::make_pair(&set, index);
  if (auto it = param_nodes_.find(key); it != param_nodes_.end()) return Var(this, it->second);
  const Tensor& v = set[index].value;
  if (v.rank() != 2) {
    throw DimensionError("parameter '" + set[index].name + "' must be a matrix, got " + shape_str(v.shape()));
  }
  nodes_.push_back(Node{{}, &v, {}, {}, true});
  param_nodes_.emplace(key, nodes_.size() - 1);
  return Var(this, nodes_.size() - 1);
}

Var Tape::push(Tensor value, std::span<const Var> inputs, Backward backward) {
  if (!value.all_finite()) throw NumericError("non-finite value produced by forward operation");
  bool needs = false;
  for (const Var& in : inputs) {
    if (&in.tape() != this) throw InvalidInputError("input from a different tape");
    needs = needs || nodes_[in.id()].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), nullptr, {}, needs ? std::move(backward) : Backward{}, needs});
  return Var(this, nodes_.size() - 1);
}

Tensor& Tape::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Tensor(value(id).shape());
  return n.grad;
}

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_[v.id()];
  if (!n.grad.empty()) return n.grad;
  return Tensor(value(v.id()).shape());
}

void Tape::backward(Var scalar_output) {
  if (&scalar_output.tape() != this) throw InvalidInputError("backward target belongs to another tape");
  if (backward_done_) throw InvalidInputError("backward() already ran on this tape");
  if (value(scalar_output.id()).size() != 1) {
    throw DimensionError("backward target must be a scalar, got " + shape_str(value(scalar_output.id()).shape()));
  }
  backward_done_ = true;
  grad_buffer(scalar_output.id())[0] = 1.0;
  for (std::size_t i = scalar_output.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.empty() || !n.backward) continue;
    n.backward(*this, i);
  }
}

void Tape::accumulate_gradients(const ParameterSet& set, Gradients& out) const {
  for (const auto& [key, node] : param_nodes_) {
    if (key.first != &set) continue;
    const Tensor& g = nodes_[node].grad;
    if (g.empty()) continue;
    Tensor& dst = out[key.second];
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
  }
}

void Tape::record_attention(std::size_t q_len, std::size_t k_len, std::size_t dim) {
  attention_shapes_.emplace_back(q_len, k_len);
  // QK^T and PV, multiply-adds counted once each.
  attention_flops_ += 2ULL * q_len * k_len * dim;
}

// ---- elementwise / linear algebra ---------------------------------------

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.rows()) {
    throw DimensionError("matmul: inner dimensions disagree, " + shape_str(av.shape()) + " x " +
                         shape_str(bv.shape()));
  }
  Tensor out({av.rows(), bv.cols()});
  view(out).noalias() = view(av) * view(bv);
  const std::size_t ia = a.id(), ib = b.id();
  const Var ins[] = {a, b};
  return t.push(std::move(out), ins, [ia, ib](Tape& tp, std::size_t self) {
    const auto g = view(tp.grad_ref(self));
    if (tp.requires_grad(ia)) view(tp.grad_buffer(ia)).noalias() += g * view(tp.value(ib)).transpose();
    if (tp.requires_grad(ib)) view(tp.grad_buffer(ib)).noalias() += view(tp.value(ia)).transpose() * g;
  });
}

Var add(Var a, Var b) {
  Tape& t = same_tape(a, b);
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  view(out) += view(b.value());
  const std::size_t ia = a.id(), ib = b.id();
  const Var ins[] = {a, b};
  return t.push(std::move(out), ins, [ia, ib](Tape& tp, std::size_t self) {
    const auto g = view(tp.grad_ref(self));
    if (tp.requires_grad(ia)) view(tp.grad_buffer(ia)) += g;
    if (tp.requires_grad(ib)) view(tp.grad_buffer(ib)) += g;
  });
}

Var sub(Var a, Var b) {
  Tape& t = same_tape(a, b);
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  view(out) -= view(b.value());
  const std::size_t ia = a.id(), ib = b.id();
  const Var ins[] = {a, b};
  return t.push(std::move(out), ins, [ia, ib](Tape& tp, std::size_t self) {
    const auto g = view(tp.grad_ref(self));
    if (tp.requires_grad(ia)) view(tp.grad_buffer(ia)) += g;
    if (tp.requires_grad(ib)) view(tp.grad_buffer(ib)) -= g;
  });
}

Var mul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  view(out).array() *= view(b.value()).array();
  const std::size_t ia = a.id(), ib = b.id();
  const Var ins[] = {a, b};
  return t.push(std::move(out), ins, [ia, ib](Tape& tp, std::size_t self) {
    const auto g = view(tp.grad_ref(self));
    if (tp.requires_grad(ia)) view(tp.grad_buffer(ia)).array() += g.array() * view(tp.value(ib)).array();
    if (tp.requires_grad(ib)) view(tp.grad_buffer(ib)).array() += g.array() * view(tp.value(ia)).array();
  });
}

Var scale(Var a, double factor) {
  Tape& t = a.tape();
  Tensor out = a.value();
  view(out) *= factor;
  const std::size_t ia = a.id();
  const Var ins[] = {a};
  return t.push(std::move(out), ins, [ia, factor](Tape& tp, std::size_t self) {
    view(tp.grad_buffer(ia)) += factor * view(tp.grad_ref(self));
  });
}

Var add_row(Var a, Var row) {
  Tape& t = same_tape(a, row);
  const Tensor& av = a.value();
  const Tensor& rv = row.value();
  if (rv.rows() != 1 || rv.cols() != av.cols()) {
    throw DimensionError("add_row: row " + shape_str(rv.shape()) + " does not broadcast over " +
                         shape_str(av.shape()));
  }
  Tensor out = av;
  view(out).rowwise() += view(rv).row(0);
  const std::size_t ia = a.id(), ir = row.id();
  const Var ins[] = {a, row};
  return t.push(std::move(out), ins, [ia, ir](Tape& tp, std::size_t self) {
    const auto g = view(tp.grad_ref(self));
    if (tp.requires_grad(ia)) view(tp.grad_buffer(ia)) += g;
    if (tp.requires_grad(ir)) view(tp.grad_buffer(ir)) += g.colwise().sum();
  });
}

Var repeat_rows(Var row, std::size_t n) {
  Tape& t = row.tape();
  const Tensor& rv = row.value();
  if (rv.rows() != 1) throw DimensionError("repeat_rows expects a single row, got " + shape_str(rv.shape()));
  if (n == 0) throw DimensionError("repeat_rows: count must be positive");
  Tensor out({n, rv.cols()});
  view(out).rowwise() = view(rv).row(0);
  const std::size_t ir = row.id();
  const Var ins[] = {row};
  return t.push(std::move(out), ins, [ir](Tape& tp, std::size_t self) {
    view(tp.grad_buffer(ir)) += view(tp.grad_ref(self)).colwise().sum();
  });
}

Var gelu(Var x) {
  Tape& t = x.tape();
  Tensor out = x.value();
  std::vector<double> th(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = out[i];
    th[i] = std::tanh(kGeluC * (v + 0.044715 * v * v * v));
    out[i] = 0.5 * v * (1.0 + th[i]);
  }
  const std::size_t ix = x.id();
  const Var ins[] = {x};
  return t.push(std::move(out), ins, [ix, th = std::move(th)](Tape& tp, std::size_t self) {
    const Tensor& xv = tp.value(ix);
    const Tensor& g = tp.grad_ref(self);
    Tensor& dx = tp.grad_buffer(ix);
    for (std::size_t i = 0; i < xv.size(); ++i) {
      const double v = xv[i];
      const double du = kGeluC * (1.0 + 3.0 * 0.044715 * v * v);
      dx[i] += g[i] * (0.5 * (1.0 + th[i]) + 0.5 * v * (1.0 - th[i] * th[i]) * du);
    }
  });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  Tape& t = same_tape(x, gain);
  same_tape(x, bias);
  const Tensor& xv = x.value();
  const std::size_t n = xv.rows(), c = xv.cols();
  if (gain.value().size() != c || bias.value().size() != c) {
    throw DimensionError("layer_norm: gain/bias must have " + std::to_string(c) + " entries");
  }
  auto xhat = std::make_shared<Tensor>(Shape{n, c});
  auto inv_std = std::make_shared<std::vector<double>>(n);
  Tensor out({n, c});
  const Tensor& gv = gain.value();
  const Tensor& bv = bias.value();
  for (std::size_t r = 0; r < n; ++r) {
    const auto row = xv.row(r);
    double mu = 0.0;
    for (double v : row) mu += v;
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (double v : row) var += (v - mu) * (v - mu);
    var /= static_cast<double>(c);
    const double is = 1.0 / std::sqrt(var + eps);
    if (!std::isfinite(is)) throw NumericError("layer_norm: zero variance row with eps = 0");
    (*inv_std)[r] = is;
    for (std::size_t j = 0; j < c; ++j) {
      const double h = (row[j] - mu) * is;
      xhat->at(r, j) = h;
      out.at(r, j) = gv[j] * h + bv[j];
    }
  }
  const std::size_t ix = x.id(), ig = gain.id(), ib = bias.id();
  const Var ins[] = {x, gain, bias};
  return t.push(std::move(out), ins, [ix, ig, ib, xhat, inv_std](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad_ref(self);
    const Tensor& gv = tp.value(ig);
    const std::size_t n = g.rows(), c = g.cols();
    if (tp.requires_grad(ig) || tp.requires_grad(ib)) {
      Tensor& dg = tp.grad_buffer(ig);
      Tensor& db = tp.grad_buffer(ib);
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t j = 0; j < c; ++j) {
          dg[j] += g.at(r, j) * xhat->at(r, j);
          db[j] += g.at(r, j);
        }
      }
    }
    if (!tp.requires_grad(ix)) return;
    Tensor& dx = tp.grad_buffer(ix);
    const double inv_c = 1.0 / static_cast<double>(c);
    for (std::size_t r = 0; r < n; ++r) {
      double m1 = 0.0, m2 = 0.0;
      for (std::size_t j = 0; j < c; ++j) {
        const double dh = g.at(r, j) * gv[j];
        m1 += dh;
        m2 += dh * xhat->at(r, j);
      }
      m1 *= inv_c;
      m2 *= inv_c;
      for (std::size_t j = 0; j < c; ++j) {
        const double dh = g.at(r, j) * gv[j];
        dx.at(r, j) += (*inv_std)[r] * (dh - m1 - xhat->at(r, j) * m2);
      }
    }
  });
}

Var softmax(Var x, int axis) {
  if (axis != 0 && axis != 1) throw DimensionError("softmax: axis must be 0 or 1 for a matrix");
  Tape& t = x.tape();
  Tensor out = x.value();
  auto m = view(out);
  if (axis == 1) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      m.row(r).array() -= m.row(r).maxCoeff();
      m.row(r) = m.row(r).array().exp();
      m.row(r) /= m.row(r).sum();
    }
  } else {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      m.col(c).array() -= m.col(c).maxCoeff();
      m.col(c) = m.col(c).array().exp();
      m.col(c) /= m.col(c).sum();
    }
  }
  const std::size_t ix = x.id();
  const Var ins[] = {x};
  return t.push(std::move(out), ins, [ix, axis](Tape& tp, std::size_t self) {
    const auto y = view(tp.value(self));
    const auto g = view(tp.grad_ref(self));
    auto dx = view(tp.grad_buffer(ix));
    if (axis == 1) {
      const Eigen::VectorXd dots = (g.array() * y.array()).rowwise().sum();
      dx.array() += y.array() * (g.array().colwise() - dots.array());
    } else {
      const Eigen::RowVectorXd dots = (g.array() * y.array()).colwise().sum();
      dx.array() += y.array() * (g.array().rowwise() - dots.array());
    }
  });
}

// ---- attention ------------------------------------------------------------

Var attention(Var q, Var k, Var v, std::size_t heads) {
  Tape& t = same_tape(q, k);
  same_tape(q, v);
  const Tensor& qv = q.value();
  const Tensor& kv = k.value();
  const Tensor& vv = v.value();
  const std::size_t d = qv.cols();
  if (heads == 0 || d % heads != 0) {
    throw ConfigError("attention: embedding dimension " + std::to_string(d) + " is not divisible by " +
                      std::to_string(heads) + " heads");
  }
  if (kv.cols() != d || vv.cols() != d || kv.rows() != vv.rows()) {
    throw DimensionError("attention: q " + shape_str(qv.shape()) + ", k " + shape_str(kv.shape()) + ", v " +
                         shape_str(vv.shape()) + " are incompatible");
  }
  const std::size_t nq = qv.rows(), nk = kv.rows(), dh = d / heads;
  const double sc = 1.0 / std::sqrt(static_cast<double>(dh));
  auto probs = std::make_shared<std::vector<RowMat>>(heads);
  Tensor out({nq, d});
  auto O = view(out);
  const auto Q = view(qv), K = view(kv), V = view(vv);
  for (std::size_t h = 0; h < heads; ++h) {
    const auto off = static_cast<Eigen::Index>(h * dh);
    const auto w = static_cast<Eigen::Index>(dh);
    RowMat S = sc * (Q.middleCols(off, w) * K.middleCols(off, w).transpose());
    for (Eigen::Index r = 0; r < S.rows(); ++r) {
      S.row(r).array() -= S.row(r).maxCoeff();
      S.row(r) = S.row(r).array().exp();
      S.row(r) /= S.row(r).sum();
    }
    O.middleCols(off, w).noalias() = S * V.middleCols(off, w);
    (*probs)[h] = std::move(S);
  }
  t.record_attention(nq, nk, d);
  const std::size_t iq = q.id(), ik = k.id(), iv = v.id();
  const Var ins[] = {q, k, v};
  return t.push(std::move(out), ins, [iq, ik, iv, heads, dh, sc, probs](Tape& tp, std::size_t self) {
    const auto G = view(tp.grad_ref(self));
    const auto Q = view(tp.value(iq));
    const auto K = view(tp.value(ik));
    const auto V = view(tp.value(iv));
    const bool gq = tp.requires_grad(iq), gk = tp.requires_grad(ik), gv = tp.requires_grad(iv);
    for (std::size_t h = 0; h < heads; ++h) {
      const auto off = static_cast<Eigen::Index>(h * dh);
      const auto w = static_cast<Eigen::Index>(dh);
      const RowMat& P = (*probs)[h];
      const auto Gh = G.middleCols(off, w);
      if (gv) view(tp.grad_buffer(iv)).middleCols(off, w).noalias() += P.transpose() * Gh;
      if (!gq && !gk) continue;
      RowMat dP = Gh * V.middleCols(off, w).transpose();
      const Eigen::VectorXd dots = (dP.array() * P.array()).rowwise().sum();
      RowMat dS = P.array() * (dP.array().colwise() - dots.array());
      dS *= sc;
      if (gq) view(tp.grad_buffer(iq)).middleCols(off, w).noalias() += dS * K.middleCols(off, w);
      if (gk) view(tp.grad_buffer(ik)).middleCols(off, w).noalias() += dS.transpose() * Q.middleCols(off, w);
    }
  });
}

Var multi_head_attention(Var q, Var k, Var v, std::size_t heads, Var w_out, Var b_out) {
  return add_row(matmul(attention(q, k, v, heads), w_out), b_out);
}

// ---- structural -----------------------------------------------------------

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: nothing to concatenate");
  Tape& t = parts.front().tape();
  const std::size_t c = parts.front().cols();
  std::size_t n = 0;
  for (const Var& p : parts) {
    same_tape(parts.front(), p);
    if (p.cols() != c) throw DimensionError("concat_rows: column counts differ");
    n += p.rows();
  }
  Tensor out({n, c});
  std::vector<std::size_t> ids, offsets;
  std::size_t off = 0;
  for (const Var& p : parts) {
    const Tensor& pv = p.value();
    std::copy(pv.data(), pv.data() + pv.size(), out.data() + off * c);
    ids.push_back(p.id());
    offsets.push_back(off);
    off += pv.rows();
  }
  return t.push(std::move(out), parts, [ids, offsets](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad_ref(self);
    const std::size_t c = g.cols();
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (!tp.requires_grad(ids[i])) continue;
      Tensor& d = tp.grad_buffer(ids[i]);
      const double* src = g.data() + offsets[i] * c;
      for (std::size_t j = 0; j < d.size(); ++j) d[j] += src[j];
    }
  });
}

Var slice_rows(Var a, std::size_t begin, std::size_t end) {
  Tape& t = a.tape();
  const Tensor& av = a.value();
  if (begin >= end || end > av.rows()) {
    throw DimensionError("slice_rows: [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") out of range for " + shape_str(av.shape()));
  }
  const std::size_t c = av.cols();
  Tensor out({end - begin, c});
  std::copy(av.data() + begin * c, av.data() + end * c, out.data());
  const std::size_t ia = a.id();
  const Var ins[] = {a};
  return t.push(std::move(out), ins, [ia, begin](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad_ref(self);
    Tensor& d = tp.grad_buffer(ia);
    double* dst = d.data() + begin * g.cols();
    for (std::size_t j = 0; j < g.size(); ++j) dst[j] += g[j];
  });
}

Var gather_rows(Var a, std::span<const std::size_t> rows) {
  Tape& t = a.tape();
  const Tensor& av = a.value();
  if (rows.empty()) throw DimensionError("gather_rows: empty index list");
  const std::size_t c = av.cols();
  Tensor out({rows.size(), c});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= av.rows()) throw DimensionError("gather_rows: row index out of range");
    std::copy(av.data() + rows[i] * c, av.data() + (rows[i] + 1) * c, out.data() + i * c);
  }
  const std::size_t ia = a.id();
  const Var ins[] = {a};
  return t.push(std::move(out), ins,
                [ia, idx = std::vector<std::size_t>(rows.begin(), rows.end())](Tape& tp, std::size_t self) {
                  const Tensor& g = tp.grad_ref(self);
                  Tensor& d = tp.grad_buffer(ia);
                  const std::size_t c = g.cols();
                  for (std::size_t i = 0; i < idx.size(); ++i) {
                    for (std::size_t j = 0; j < c; ++j) d.at(idx[i], j) += g.at(i, j);
                  }
                });
}

Var sum(Var a) {
  Tape& t = a.tape();
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  const std::size_t ia = a.id();
  const Var ins[] = {a};
  return t.push(Tensor::scalar(s), ins, [ia](Tape& tp, std::size_t self) {
    const double g = tp.grad_ref(self)[0];
    for (double& v : tp.grad_buffer(ia).values()) v += g;
  });
}

Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Var mean_of(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("mean_of: no operands");
  if (parts.size() == 1) return parts.front();
  Var acc = parts.front();
  for (std::size_t i = 1; i < parts.size(); ++i) acc = add(acc, parts[i]);
  return scale(acc, 1.0 / static_cast<double>(parts.size()));
}

// ---- losses ----------------------------------------------------------------

Var cross_entropy(Var logits, std::size_t label, double weight) {
  Tape& t = logits.tape();
  const Tensor& z = logits.value();
  if (z.rows() != 1) throw DimensionError("cross_entropy expects a single logits row, got " + shape_str(z.shape()));
  if (label >= z.cols()) {
    throw DataError("label " + std::to_string(label) + " out of range for " + std::to_string(z.cols()) + " classes");
  }
  const double mx = *std::max_element(z.data(), z.data() + z.size());
  auto p = std::make_shared<std::vector<double>>(z.cols());
  double s = 0.0;
  for (std::size_t j = 0; j < z.cols(); ++j) {
    (*p)[j] = std::exp(z[j] - mx);
    s += (*p)[j];
  }
  for (double& v : *p) v /= s;
  const double loss = weight * (std::log(s) + mx - z[label]);
  const std::size_t iz = logits.id();
  const Var ins[] = {logits};
  return t.push(Tensor::scalar(loss), ins, [iz, label, weight, p](Tape& tp, std::size_t self) {
    const double g = tp.grad_ref(self)[0] * weight;
    Tensor& d = tp.grad_buffer(iz);
    for (std::size_t j = 0; j < p->size(); ++j) d[j] += g * ((*p)[j] - (j == label ? 1.0 : 0.0));
  });
}

Var masked_mse(Var prediction, const Tensor& target, std::span<const std::size_t> rows) {
  Tape& t = prediction.tape();
  const Tensor& pv = prediction.value();
  if (target.rows() != pv.rows() || target.cols() != pv.cols()) {
    throw DimensionError("masked_mse: prediction " + shape_str(pv.shape()) + " vs target " +
                         shape_str(target.shape()));
  }
  if (rows.empty()) throw DimensionError("masked_mse: no rows selected");
  const std::size_t c = pv.cols();
  const double norm = 1.0 / static_cast<double>(rows.size() * c);
  double s = 0.0;
  auto diff = std::make_shared<std::vector<double>>();
  diff->reserve(rows.size() * c);
  for (std::size_t r : rows) {
    if (r >= pv.rows()) throw DimensionError("masked_mse: row index out of range");
    for (std::size_t j = 0; j < c; ++j) {
      const double e = pv.at(r, j) - target.at(r, j);
      diff->push_back(e);
      s += e * e;
    }
  }
  const std::size_t ip = prediction.id();
  const Var ins[] = {prediction};
  return t.push(Tensor::scalar(s * norm), ins,
                [ip, norm, diff, idx = std::vector<std::size_t>(rows.begin(), rows.end())](Tape& tp,
                                                                                         std::size_t self) {
                  const double g = tp.grad_ref(self)[0] * 2.0 * norm;
                  Tensor& d = tp.grad_buffer(ip);
                  const std::size_t c = d.cols();
                  for (std::size_t i = 0; i < idx.size(); ++i) {
                    for (std::size_t j = 0; j < c; ++j) d.at(idx[i], j) += g * (*diff)[i * c + j];
                  }
                });
}

Var dropout(Var x, double rate, SplitMix64& rng) {
  if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout rate must lie in [0, 1)");
  if (rate == 0.0) return x;
  Tape& t = x.tape();
  const double keep = 1.0 - rate;
  auto mask = std::make_shared<std::vector<double>>(x.value().size());
  Tensor out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) {
    (*mask)[i] = rng.uniform() < keep ? 1.0 / keep : 0.0;
    out[i] *= (*mask)[i];
  }
  const std::size_t ix = x.id();
  const Var ins[] = {x};
  return t.push(std::move(out), ins, [ix, mask](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad_ref(self);
    Tensor& d = tp.grad_buffer(ix);
    for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * (*mask)[i];
  });
}

}  // namespace mmt::ad
