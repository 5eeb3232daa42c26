#include "gtp/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "gtp/errors.hpp"

namespace gtp {

const Matrix& Var::value() const { return tape_->value(id_); }
const Matrix& Var::grad() const { return tape_->grad(id_); }

double Var::scalar() const {
  const Matrix& v = value();
  if (v.rows() != 1 || v.cols() != 1) throw ShapeError("scalar() on " + v.shape_string() + " node");
  return v(0, 0);
}

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, false, false, {}, nullptr});
  return Var(this, nodes_.size() - 1);
}

Var Tape::param(Parameter& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var(this, it->second);
  nodes_.push_back(Node{p.value, {}, true, false, {}, &p});
  const std::size_t id = nodes_.size() - 1;
  param_nodes_.emplace(&p, id);
  return Var(this, id);
}

Var Tape::record(Matrix value, std::initializer_list<Var> inputs, BackwardFn fn) {
  return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(fn));
}

Var Tape::record(Matrix value, std::span<const Var> inputs, BackwardFn fn) {
  bool needs = false;
  for (const Var& in : inputs) {
    if (in.tape() != this) throw InvalidInput("operands live on different tapes");
    needs = needs || nodes_[in.id()].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), {}, needs, false, needs ? std::move(fn) : BackwardFn{}, nullptr});
  return Var(this, nodes_.size() - 1);
}

const Matrix& Tape::grad(std::size_t id) const {
  const Node& n = nodes_[id];
  return n.has_grad ? n.grad : empty_grad_;
}

Matrix& Tape::grad_slot(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.has_grad) {
    n.grad = Matrix(n.value.rows(), n.value.cols());
    n.has_grad = true;
  }
  return n.grad;
}

void Tape::accumulate(std::size_t id, const Matrix& g) {
  if (!nodes_[id].requires_grad) return;
  grad_slot(id) += g;
}

void Tape::backward(Var root) {
  if (root.tape() != this) throw InvalidInput("backward root belongs to another tape");
  const Matrix& rv = nodes_[root.id()].value;
  if (rv.rows() != 1 || rv.cols() != 1) {
    throw InvalidInput("backward needs a scalar root, got " + rv.shape_string());
  }
  if (!nodes_[root.id()].requires_grad) return;
  grad_slot(root.id())(0, 0) = 1.0;
  for (std::size_t i = root.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.has_grad && n.backward) n.backward(*this, i);
  }
  for (Node& n : nodes_) {
    if (n.param != nullptr && n.has_grad) n.param->grad += n.grad;
  }
}

std::vector<std::size_t> segment_bounds(std::size_t frames, std::size_t segments) {
  if (segments == 0) throw InvalidInput("segment count must be positive");
  if (frames < segments) {
    throw InvalidInput("cannot split " + std::to_string(frames) + " frames into " +
                       std::to_string(segments) + " segments");
  }
  std::vector<std::size_t> b(segments + 1);
  for (std::size_t s = 0; s <= segments; ++s) b[s] = s * frames / segments;
  return b;
}

namespace ad {
namespace {

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (!a.value().same_shape(b.value())) {
    throw ShapeError(std::string(op) + ": " + a.value().shape_string() + " vs " + b.value().shape_string());
  }
}

}  // namespace

Var matmul(Var a, Var b) {
  Matrix out = gtp::matmul(a.value(), b.value());
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape()->record(std::move(out), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(ia)) matmul_nt_acc(g, t.value(ib), t.grad_slot(ia));
    if (t.requires_grad(ib)) matmul_tn_acc(t.value(ia), g, t.grad_slot(ib));
  });
}

Var add(Var a, Var b) {
  require_same_shape(a, b, "add");
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape()->record(a.value() + b.value(), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    t.accumulate(ia, t.grad(self));
    t.accumulate(ib, t.grad(self));
  });
}

Var sub(Var a, Var b) {
  require_same_shape(a, b, "sub");
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape()->record(a.value() - b.value(), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    t.accumulate(ia, t.grad(self));
    if (t.requires_grad(ib)) t.grad_slot(ib) -= t.grad(self);
  });
}

Var mul(Var a, Var b) {
  require_same_shape(a, b, "mul");
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape()->record(std::move(out), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(ia)) {
      Matrix& s = t.grad_slot(ia);
      const Matrix& bv = t.value(ib);
      for (std::size_t i = 0; i < g.size(); ++i) s[i] += g[i] * bv[i];
    }
    if (t.requires_grad(ib)) {
      Matrix& s = t.grad_slot(ib);
      const Matrix& av = t.value(ia);
      for (std::size_t i = 0; i < g.size(); ++i) s[i] += g[i] * av[i];
    }
  });
}

Var scale(Var a, double k) {
  const std::size_t ia = a.id();
  return a.tape()->record(a.value() * k, {a}, [ia, k](Tape& t, std::size_t self) {
    Matrix& s = t.grad_slot(ia);
    const Matrix& g = t.grad(self);
    for (std::size_t i = 0; i < g.size(); ++i) s[i] += k * g[i];
  });
}

Var add_row(Var a, Var b) {
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (bv.rows() != 1 || bv.cols() != av.cols()) {
    throw ShapeError("add_row: " + av.shape_string() + " + " + bv.shape_string());
  }
  Matrix out = av;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += bv(0, c);
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape()->record(std::move(out), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    t.accumulate(ia, g);
    if (t.requires_grad(ib)) {
      Matrix& s = t.grad_slot(ib);
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) s(0, c) += g(r, c);
    }
  });
}

Var tanh(Var a) {
  Matrix out = a.value();
  for (auto& x : out.values()) x = std::tanh(x);
  const std::size_t ia = a.id();
  return a.tape()->record(std::move(out), {a}, [ia](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    const Matrix& y = t.value(self);
    Matrix& s = t.grad_slot(ia);
    for (std::size_t i = 0; i < g.size(); ++i) s[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

Var relu(Var a) {
  Matrix out = a.value();
  for (auto& x : out.values()) x = x > 0.0 ? x : 0.0;
  const std::size_t ia = a.id();
  return a.tape()->record(std::move(out), {a}, [ia](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    const Matrix& x = t.value(ia);
    Matrix& s = t.grad_slot(ia);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (x[i] > 0.0) s[i] += g[i];
  });
}

Var sigmoid(Var a) {
  Matrix out = a.value();
  for (auto& x : out.values()) x = 1.0 / (1.0 + std::exp(-x));
  const std::size_t ia = a.id();
  return a.tape()->record(std::move(out), {a}, [ia](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    const Matrix& y = t.value(self);
    Matrix& s = t.grad_slot(ia);
    for (std::size_t i = 0; i < g.size(); ++i) s[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

Var sum(Var a) {
  const std::size_t ia = a.id();
  return a.tape()->record(Matrix(1, 1, gtp::sum(a.value())), {a}, [ia](Tape& t, std::size_t self) {
    const double g = t.grad(self)(0, 0);
    for (auto& x : t.grad_slot(ia).values()) x += g;
  });
}

Var sum_squares(Var a) {
  const std::size_t ia = a.id();
  return a.tape()->record(Matrix(1, 1, squared_norm(a.value().values())), {a},
                          [ia](Tape& t, std::size_t self) {
                            const double g = t.grad(self)(0, 0);
                            const Matrix& x = t.value(ia);
                            Matrix& s = t.grad_slot(ia);
                            for (std::size_t i = 0; i < x.size(); ++i) s[i] += 2.0 * g * x[i];
                          });
}

Var mean_rows(Var a) {
  const Matrix& av = a.value();
  if (av.rows() == 0) throw InvalidInput("mean_rows of empty matrix");
  Matrix out(1, av.cols());
  for (std::size_t r = 0; r < av.rows(); ++r)
    for (std::size_t c = 0; c < av.cols(); ++c) out(0, c) += av(r, c);
  out *= 1.0 / static_cast<double>(av.rows());
  const std::size_t ia = a.id();
  return a.tape()->record(std::move(out), {a}, [ia](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    Matrix& s = t.grad_slot(ia);
    const double inv = 1.0 / static_cast<double>(s.rows());
    for (std::size_t r = 0; r < s.rows(); ++r)
      for (std::size_t c = 0; c < s.cols(); ++c) s(r, c) += g(0, c) * inv;
  });
}

Var reshape(Var a, std::size_t rows, std::size_t cols) {
  const Matrix& av = a.value();
  if (rows * cols != av.size()) {
    throw ShapeError("reshape " + av.shape_string() + " to " + std::to_string(rows) + "x" + std::to_string(cols));
  }
  Matrix out(rows, cols, std::vector<double>(av.values().begin(), av.values().end()));
  const std::size_t ia = a.id();
  return a.tape()->record(std::move(out), {a}, [ia](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    Matrix& s = t.grad_slot(ia);
    for (std::size_t i = 0; i < g.size(); ++i) s[i] += g[i];
  });
}

Var slice_rows(Var a, std::size_t begin, std::size_t end) {
  const Matrix& av = a.value();
  if (begin > end || end > av.rows()) throw ShapeError("slice_rows out of range");
  const std::size_t c = av.cols();
  Matrix out(end - begin, c,
             std::vector<double>(av.data() + begin * c, av.data() + end * c));
  const std::size_t ia = a.id();
  return a.tape()->record(std::move(out), {a}, [ia, begin, c](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    double* s = t.grad_slot(ia).data() + begin * c;
    for (std::size_t i = 0; i < g.size(); ++i) s[i] += g[i];
  });
}

Var element(Var a, std::size_t r, std::size_t c) {
  const Matrix& av = a.value();
  if (r >= av.rows() || c >= av.cols()) throw ShapeError("element index out of range");
  const std::size_t ia = a.id();
  return a.tape()->record(Matrix(1, 1, av(r, c)), {a}, [ia, r, c](Tape& t, std::size_t self) {
    t.grad_slot(ia)(r, c) += t.grad(self)(0, 0);
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw InvalidInput("concat_cols of nothing");
  const std::size_t rows = parts[0].rows();
  std::size_t cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) throw ShapeError("concat_cols row mismatch");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::vector<std::size_t> ids, offsets;
  std::size_t off = 0;
  for (const Var& p : parts) {
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < p.cols(); ++c) out(r, off + c) = p.value()(r, c);
    ids.push_back(p.id());
    offsets.push_back(off);
    off += p.cols();
  }
  return parts[0].tape()->record(std::move(out), parts, [ids, offsets](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (!t.requires_grad(ids[k])) continue;
      Matrix& s = t.grad_slot(ids[k]);
      for (std::size_t r = 0; r < s.rows(); ++r)
        for (std::size_t c = 0; c < s.cols(); ++c) s(r, c) += g(r, offsets[k] + c);
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw InvalidInput("concat_rows of nothing");
  const std::size_t cols = parts[0].cols();
  std::vector<double> data;
  std::vector<std::size_t> ids, offsets;
  std::size_t rows = 0;
  for (const Var& p : parts) {
    if (p.cols() != cols) throw ShapeError("concat_rows column mismatch");
    ids.push_back(p.id());
    offsets.push_back(rows * cols);
    rows += p.rows();
    data.insert(data.end(), p.value().values().begin(), p.value().values().end());
  }
  return parts[0].tape()->record(Matrix(rows, cols, std::move(data)), parts,
                                 [ids, offsets](Tape& t, std::size_t self) {
                                   const Matrix& g = t.grad(self);
                                   for (std::size_t k = 0; k < ids.size(); ++k) {
                                     if (!t.requires_grad(ids[k])) continue;
                                     Matrix& s = t.grad_slot(ids[k]);
                                     for (std::size_t i = 0; i < s.size(); ++i) s[i] += g[offsets[k] + i];
                                   }
                                 });
}

Var gather_rows(Var table, std::span<const std::size_t> ids) {
  const Matrix& tv = table.value();
  const std::size_t c = tv.cols();
  Matrix out(ids.size(), c);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] >= tv.rows()) throw InvalidInput("gather_rows id " + std::to_string(ids[r]) + " out of range");
    std::copy_n(tv.data() + ids[r] * c, c, out.data() + r * c);
  }
  const std::size_t it = table.id();
  std::vector<std::size_t> rows(ids.begin(), ids.end());
  return table.tape()->record(std::move(out), {table}, [it, rows, c](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    Matrix& s = t.grad_slot(it);
    for (std::size_t r = 0; r < rows.size(); ++r)
      for (std::size_t j = 0; j < c; ++j) s(rows[r], j) += g(r, j);
  });
}

Var softmax_rows(Var a, double temperature) {
  if (!(temperature > 0.0)) throw InvalidConfig("softmax temperature must be positive");
  const Matrix& av = a.value();
  if (av.cols() == 0) throw InvalidInput("softmax of empty vector");
  Matrix out(av.rows(), av.cols());
  for (std::size_t r = 0; r < av.rows(); ++r) {
    auto p = softmax(av.row(r), temperature);
    std::copy(p.begin(), p.end(), out.row(r).begin());
  }
  const std::size_t ia = a.id();
  return a.tape()->record(std::move(out), {a}, [ia, temperature](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    const Matrix& y = t.value(self);
    Matrix& s = t.grad_slot(ia);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double gy = 0.0;
      for (std::size_t c = 0; c < y.cols(); ++c) gy += g(r, c) * y(r, c);
      for (std::size_t c = 0; c < y.cols(); ++c) s(r, c) += y(r, c) * (g(r, c) - gy) / temperature;
    }
  });
}

namespace {

double row_logsumexp(std::span<const double> row) {
  const double mx = *std::max_element(row.begin(), row.end());
  double z = 0.0;
  for (double x : row) z += std::exp(x - mx);
  return mx + std::log(z);
}

}  // namespace

Var log_softmax_rows(Var a) {
  const Matrix& av = a.value();
  if (av.cols() == 0) throw InvalidInput("log_softmax of empty vector");
  Matrix out = av;
  for (std::size_t r = 0; r < av.rows(); ++r) {
    const double lse = row_logsumexp(av.row(r));
    for (auto& x : out.row(r)) x -= lse;
  }
  const std::size_t ia = a.id();
  return a.tape()->record(std::move(out), {a}, [ia](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    const Matrix& y = t.value(self);
    Matrix& s = t.grad_slot(ia);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double gs = 0.0;
      for (std::size_t c = 0; c < y.cols(); ++c) gs += g(r, c);
      for (std::size_t c = 0; c < y.cols(); ++c) s(r, c) += g(r, c) - std::exp(y(r, c)) * gs;
    }
  });
}

Var cross_entropy(Var logits, std::span<const std::size_t> targets, std::size_t ignore_id) {
  const Matrix& lv = logits.value();
  if (lv.rows() != targets.size()) {
    throw ShapeError("cross_entropy: " + std::to_string(lv.rows()) + " logit rows for " +
                     std::to_string(targets.size()) + " targets");
  }
  std::size_t counted = 0;
  double total = 0.0;
  Matrix probs(lv.rows(), lv.cols());
  for (std::size_t r = 0; r < lv.rows(); ++r) {
    if (targets[r] == ignore_id) continue;
    if (targets[r] >= lv.cols()) throw InvalidInput("cross_entropy target id out of range");
    const double lse = row_logsumexp(lv.row(r));
    total += lse - lv(r, targets[r]);
    for (std::size_t c = 0; c < lv.cols(); ++c) probs(r, c) = std::exp(lv(r, c) - lse);
    ++counted;
  }
  const double inv = counted ? 1.0 / static_cast<double>(counted) : 0.0;
  const std::size_t il = logits.id();
  std::vector<std::size_t> tg(targets.begin(), targets.end());
  return logits.tape()->record(
      Matrix(1, 1, total * inv), {logits},
      [il, tg, ignore_id, inv, probs = std::move(probs)](Tape& t, std::size_t self) {
        const double g = t.grad(self)(0, 0) * inv;
        Matrix& s = t.grad_slot(il);
        for (std::size_t r = 0; r < s.rows(); ++r) {
          if (tg[r] == ignore_id) continue;
          for (std::size_t c = 0; c < s.cols(); ++c) s(r, c) += g * probs(r, c);
          s(r, tg[r]) -= g;
        }
      });
}

Var cosine(Var u, Var v) {
  const Matrix& uv = u.value();
  const Matrix& vv = v.value();
  if (uv.size() != vv.size()) throw ShapeError("cosine: " + uv.shape_string() + " vs " + vv.shape_string());
  const double nu = std::sqrt(squared_norm(uv.values()));
  const double nv = std::sqrt(squared_norm(vv.values()));
  if (nu == 0.0) throw ZeroNormError("cosine of zero vector", 0);
  if (nv == 0.0) throw ZeroNormError("cosine of zero vector", 1);
  const double raw = dot(uv.values(), vv.values()) / (nu * nv);
  const double clamped = std::clamp(raw, -1.0, 1.0);
  const std::size_t iu = u.id(), iv = v.id();
  return u.tape()->record(Matrix(1, 1, clamped), {u, v}, [iu, iv, nu, nv, raw](Tape& t, std::size_t self) {
    const double g = t.grad(self)(0, 0);
    const Matrix& a = t.value(iu);
    const Matrix& b = t.value(iv);
    if (t.requires_grad(iu)) {
      Matrix& s = t.grad_slot(iu);
      for (std::size_t i = 0; i < a.size(); ++i) s[i] += g * (b[i] / (nu * nv) - raw * a[i] / (nu * nu));
    }
    if (t.requires_grad(iv)) {
      Matrix& s = t.grad_slot(iv);
      for (std::size_t i = 0; i < b.size(); ++i) s[i] += g * (a[i] / (nu * nv) - raw * b[i] / (nv * nv));
    }
  });
}

namespace {

std::size_t conv_out_len(std::size_t len, std::size_t kernel, std::size_t stride, std::size_t pad) {
  if (kernel == 0 || stride == 0) throw InvalidConfig("kernel and stride must be positive");
  if (len + 2 * pad < kernel) throw InvalidInput("sequence shorter than convolution kernel");
  return (len + 2 * pad - kernel) / stride + 1;
}

// Shared index walk for im2col/col2im: calls f(frame, col_row, k) for every
// in-range (output row, tap) pair.
template <typename F>
void for_each_tap(std::size_t out_rows, std::size_t in_len, std::size_t kernel, std::size_t stride,
                  std::size_t pad, F&& f) {
  for (std::size_t o = 0; o < out_rows; ++o) {
    for (std::size_t k = 0; k < kernel; ++k) {
      const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(o * stride + k) - static_cast<std::ptrdiff_t>(pad);
      if (pos < 0 || pos >= static_cast<std::ptrdiff_t>(in_len)) continue;
      f(static_cast<std::size_t>(pos), o, k);
    }
  }
}

}  // namespace

Var im2col1d(Var x, std::size_t kernel, std::size_t stride, std::size_t pad) {
  const Matrix& xv = x.value();
  const std::size_t len = xv.rows(), ch = xv.cols();
  const std::size_t out_rows = conv_out_len(len, kernel, stride, pad);
  Matrix out(out_rows, kernel * ch);
  for_each_tap(out_rows, len, kernel, stride, pad, [&](std::size_t pos, std::size_t o, std::size_t k) {
    std::copy_n(xv.data() + pos * ch, ch, out.data() + o * kernel * ch + k * ch);
  });
  const std::size_t ix = x.id();
  return x.tape()->record(std::move(out), {x}, [=](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    Matrix& s = t.grad_slot(ix);
    for_each_tap(out_rows, len, kernel, stride, pad, [&](std::size_t pos, std::size_t o, std::size_t k) {
      const double* src = g.data() + o * kernel * ch + k * ch;
      double* dst = s.data() + pos * ch;
      for (std::size_t c = 0; c < ch; ++c) dst[c] += src[c];
    });
  });
}

Var col2im1d(Var cols, std::size_t kernel, std::size_t stride, std::size_t pad, std::size_t out_len) {
  const Matrix& cv = cols.value();
  if (kernel == 0 || cv.cols() % kernel != 0) throw ShapeError("col2im1d column count not a multiple of kernel");
  const std::size_t ch = cv.cols() / kernel;
  const std::size_t in_rows = cv.rows();
  Matrix out(out_len, ch);
  for_each_tap(in_rows, out_len, kernel, stride, pad, [&](std::size_t pos, std::size_t o, std::size_t k) {
    const double* src = cv.data() + o * kernel * ch + k * ch;
    double* dst = out.data() + pos * ch;
    for (std::size_t c = 0; c < ch; ++c) dst[c] += src[c];
  });
  const std::size_t ic = cols.id();
  return cols.tape()->record(std::move(out), {cols}, [=](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    Matrix& s = t.grad_slot(ic);
    for_each_tap(in_rows, out_len, kernel, stride, pad, [&](std::size_t pos, std::size_t o, std::size_t k) {
      const double* src = g.data() + pos * ch;
      double* dst = s.data() + o * kernel * ch + k * ch;
      for (std::size_t c = 0; c < ch; ++c) dst[c] += src[c];
    });
  });
}

Var conv1d(Var x, Var weight, Var bias, std::size_t kernel, std::size_t stride, std::size_t pad) {
  if (weight.rows() != kernel * x.cols()) {
    throw ShapeError("conv1d weight " + weight.value().shape_string() + " for input with " +
                     std::to_string(x.cols()) + " channels and kernel " + std::to_string(kernel));
  }
  return add_row(matmul(im2col1d(x, kernel, stride, pad), weight), bias);
}

Var conv_transpose1d(Var x, Var weight, Var bias, std::size_t kernel, std::size_t stride, std::size_t pad) {
  if (weight.rows() != x.cols() || weight.cols() % kernel != 0) {
    throw ShapeError("conv_transpose1d weight " + weight.value().shape_string());
  }
  const std::size_t len = x.rows();
  if (len == 0 || (len - 1) * stride + kernel < 2 * pad + 1) throw InvalidInput("conv_transpose1d output would be empty");
  const std::size_t out_len = (len - 1) * stride + kernel - 2 * pad;
  return add_row(col2im1d(matmul(x, weight), kernel, stride, pad, out_len), bias);
}

Var segment_pool(Var x, std::size_t segments) {
  const Matrix& xv = x.value();
  const auto bounds = segment_bounds(xv.rows(), segments);
  const std::size_t c = xv.cols();
  Matrix out(segments, c);
  for (std::size_t s = 0; s < segments; ++s) {
    const double inv = 1.0 / static_cast<double>(bounds[s + 1] - bounds[s]);
    for (std::size_t r = bounds[s]; r < bounds[s + 1]; ++r)
      for (std::size_t j = 0; j < c; ++j) out(s, j) += xv(r, j);
    for (std::size_t j = 0; j < c; ++j) out(s, j) *= inv;
  }
  const std::size_t ix = x.id();
  return x.tape()->record(std::move(out), {x}, [ix, bounds, c, segments](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    Matrix& gs = t.grad_slot(ix);
    for (std::size_t s = 0; s < segments; ++s) {
      const double inv = 1.0 / static_cast<double>(bounds[s + 1] - bounds[s]);
      for (std::size_t r = bounds[s]; r < bounds[s + 1]; ++r)
        for (std::size_t j = 0; j < c; ++j) gs(r, j) += g(s, j) * inv;
    }
  });
}

Var segment_unpool(Var x, std::size_t frames) {
  const Matrix& xv = x.value();
  const std::size_t segments = xv.rows();
  const auto bounds = segment_bounds(frames, segments);
  const std::size_t c = xv.cols();
  Matrix out(frames, c);
  for (std::size_t s = 0; s < segments; ++s)
    for (std::size_t r = bounds[s]; r < bounds[s + 1]; ++r) std::copy_n(xv.data() + s * c, c, out.data() + r * c);
  const std::size_t ix = x.id();
  return x.tape()->record(std::move(out), {x}, [ix, bounds, c, segments](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    Matrix& gs = t.grad_slot(ix);
    for (std::size_t s = 0; s < segments; ++s)
      for (std::size_t r = bounds[s]; r < bounds[s + 1]; ++r)
        for (std::size_t j = 0; j < c; ++j) gs(s, j) += g(r, j);
  });
}

}  // namespace ad
}  // namespace gtp
