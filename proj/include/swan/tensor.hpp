#pragma once

#include <algorithm>
#include <cstring>
#include <functional>
#include <memory>
#include <span>
#include <unordered_set>

#include "swan/common.hpp"

namespace swan {

// ---------------------------------------------------------------------------
// raw kernels
//
// Fixed accumulation order everywhere: results are bit-identical from run to
// run regardless of SWANLAB_THREADS.
// ---------------------------------------------------------------------------
namespace kernels {

template <class S>
inline S dot(const S* a, const S* b, int64_t n) {
  S s0 = 0, s1 = 0, s2 = 0, s3 = 0;
  int64_t k = 0;
  for (; k + 4 <= n; k += 4) {
    s0 += a[k] * b[k];
    s1 += a[k + 1] * b[k + 1];
    s2 += a[k + 2] * b[k + 2];
    s3 += a[k + 3] * b[k + 3];
  }
  S s = (s0 + s1) + (s2 + s3);
  for (; k < n; ++k) s += a[k] * b[k];
  return s;
}

#if defined(__GNUC__) && (defined(__x86_64__) || defined(__aarch64__))
typedef float v8f __attribute__((vector_size(32)));

inline float dot(const float* a, const float* b, int64_t n) {
  v8f acc0 = {0, 0, 0, 0, 0, 0, 0, 0};
  v8f acc1 = {0, 0, 0, 0, 0, 0, 0, 0};
  int64_t k = 0;
  for (; k + 16 <= n; k += 16) {
    v8f a0, a1, b0, b1;
    std::memcpy(&a0, a + k, 32);
    std::memcpy(&b0, b + k, 32);
    std::memcpy(&a1, a + k + 8, 32);
    std::memcpy(&b1, b + k + 8, 32);
    acc0 += a0 * b0;
    acc1 += a1 * b1;
  }
  if (k + 8 <= n) {
    v8f a0, b0;
    std::memcpy(&a0, a + k, 32);
    std::memcpy(&b0, b + k, 32);
    acc0 += a0 * b0;
    k += 8;
  }
  v8f acc = acc0 + acc1;
  float s = ((acc[0] + acc[1]) + (acc[2] + acc[3])) +
            ((acc[4] + acc[5]) + (acc[6] + acc[7]));
  for (; k < n; ++k) s += a[k] * b[k];
  return s;
}
#endif

// C[M x N] = (or +=) A[M x K] * B[K x N]; ld* are row strides.
template <class S>
void mm_nn(const S* A, int64_t lda, const S* B, int64_t ldb, S* C, int64_t ldc,
           int64_t M, int64_t K, int64_t N, bool accumulate) {
  for (int64_t i = 0; i < M; ++i) {
    S* c = C + i * ldc;
    if (!accumulate) std::fill(c, c + N, S(0));
    const S* a = A + i * lda;
    for (int64_t k = 0; k < K; ++k) {
      const S aik = a[k];
      const S* b = B + k * ldb;
      for (int64_t j = 0; j < N; ++j) c[j] += aik * b[j];
    }
  }
}

// C[M x N] = (or +=) A[M x K] * B[N x K]^T; dots of contiguous rows.
template <class S>
void mm_nt(const S* A, int64_t lda, const S* B, int64_t ldb, S* C, int64_t ldc,
           int64_t M, int64_t K, int64_t N, bool accumulate) {
  for (int64_t i = 0; i < M; ++i) {
    const S* a = A + i * lda;
    S* c = C + i * ldc;
    for (int64_t j = 0; j < N; ++j) {
      S d = dot(a, B + j * ldb, K);
      c[j] = accumulate ? c[j] + d : d;
    }
  }
}

// C[K x N] += A[M x K]^T * B[M x N]
template <class S>
void mm_tn(const S* A, int64_t lda, const S* B, int64_t ldb, S* C, int64_t ldc,
           int64_t M, int64_t K, int64_t N) {
  for (int64_t i = 0; i < M; ++i) {
    const S* a = A + i * lda;
    const S* b = B + i * ldb;
    for (int64_t k = 0; k < K; ++k) {
      const S aik = a[k];
      S* c = C + k * ldc;
      for (int64_t j = 0; j < N; ++j) c[j] += aik * b[j];
    }
  }
}

}  // namespace kernels

// ---------------------------------------------------------------------------
// boolean mask, shared by softmax/attention
// ---------------------------------------------------------------------------
struct Mask {
  int64_t rows = 0, cols = 0;
  std::vector<uint8_t> allow;

  Mask() = default;
  Mask(int64_t r, int64_t c) : rows(r), cols(c), allow(static_cast<size_t>(r * c), 0) {}

  bool at(int64_t i, int64_t j) const { return allow[static_cast<size_t>(i * cols + j)] != 0; }
  void set(int64_t i, int64_t j, bool v) { allow[static_cast<size_t>(i * cols + j)] = v ? 1 : 0; }
  int64_t count() const {
    int64_t n = 0;
    for (uint8_t b : allow) n += b != 0;
    return n;
  }
};

// ---------------------------------------------------------------------------
// Tensor with define-by-run reverse-mode tape
// ---------------------------------------------------------------------------
namespace detail {

template <class S>
struct Node {
  std::vector<int64_t> shape;
  std::vector<S> data;
  std::vector<S> grad;  // allocated on first touch, zero-filled
  bool requires_grad = false;
  bool consumed = false;  // backward already ran through this root
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backfn;

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  void ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), S(0));
  }
};

inline thread_local bool g_grad_enabled = true;

}  // namespace detail

// Scoped "no tape" mode for evaluation paths.
struct NoGradGuard {
  bool prev;
  NoGradGuard() : prev(detail::g_grad_enabled) { detail::g_grad_enabled = false; }
  ~NoGradGuard() { detail::g_grad_enabled = prev; }
};

inline bool grad_enabled() { return detail::g_grad_enabled; }

template <class S>
class TensorT {
 public:
  using Node = detail::Node<S>;

  TensorT() = default;

  explicit TensorT(std::vector<int64_t> shape, bool requires_grad = false)
      : n_(std::make_shared<Node>()) {
    int64_t total = 1;
    for (int64_t e : shape) {
      if (e < 0) fail("tensor: negative extent in shape ", shape_str(shape));
      total *= e;
    }
    n_->shape = std::move(shape);
    n_->data.assign(static_cast<size_t>(total), S(0));
    n_->requires_grad = requires_grad;
  }

  TensorT(std::vector<int64_t> shape, std::vector<S> values, bool requires_grad = false)
      : TensorT(std::move(shape), requires_grad) {
    if (values.size() != n_->data.size())
      fail("tensor: ", values.size(), " values for shape ", shape_str(n_->shape));
    n_->data = std::move(values);
  }

  static TensorT scalar(S v) {
    TensorT t(std::vector<int64_t>{});
    t.values()[0] = v;
    return t;
  }

  // Deep copy of the values; no graph, no gradient.
  TensorT clone() const {
    TensorT out(n_->shape);
    out.n_->data = n_->data;
    return out;
  }

  bool defined() const { return static_cast<bool>(n_); }
  const std::vector<int64_t>& shape() const { return n_->shape; }
  int rank() const { return static_cast<int>(n_->shape.size()); }
  int64_t dim(int i) const { return n_->shape[static_cast<size_t>(i)]; }
  int64_t numel() const { return n_->numel(); }

  std::span<S> values() { return {n_->data.data(), n_->data.size()}; }
  std::span<const S> values() const { return {n_->data.data(), n_->data.size()}; }
  S item() const {
    if (numel() != 1) fail("item(): tensor has ", numel(), " elements");
    return n_->data[0];
  }

  bool requires_grad() const { return n_->requires_grad; }
  void set_requires_grad(bool v) { n_->requires_grad = v; }

  bool has_grad() const { return !n_->grad.empty(); }
  std::span<S> grad() {
    n_->ensure_grad();
    return {n_->grad.data(), n_->grad.size()};
  }
  void zero_grad() {
    if (!n_->grad.empty()) std::fill(n_->grad.begin(), n_->grad.end(), S(0));
  }

  std::shared_ptr<Node> node() const { return n_; }

  // Reverse-mode sweep from a scalar root. The recorded graph is released as
  // it is consumed; a second call on the same root is an error.
  void backward() {
    if (numel() != 1) fail("backward: root must be scalar, got shape ", shape_str(shape()));
    if (n_->consumed) fail("backward: graph already consumed for this root");
    if (!n_->backfn && n_->parents.empty())
      fail("backward: root was not produced by tracked ops");

    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, size_t>> stack;
    stack.emplace_back(n_.get(), 0);
    seen.insert(n_.get());
    while (!stack.empty()) {
      auto& [node, idx] = stack.back();
      if (idx < node->parents.size()) {
        Node* p = node->parents[idx++].get();
        if (seen.insert(p).second) stack.emplace_back(p, 0);
      } else {
        order.push_back(node);
        stack.pop_back();
      }
    }
    n_->ensure_grad();
    n_->grad[0] = S(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      if ((*it)->backfn) (*it)->backfn(**it);
    }
    for (Node* node : order) {
      node->backfn = nullptr;
      node->parents.clear();
    }
    n_->consumed = true;
  }

 private:
  std::shared_ptr<Node> n_;
};

using Tensor = TensorT<float>;

// ---------------------------------------------------------------------------
// op helpers
// ---------------------------------------------------------------------------
namespace detail {

template <class S, class... Parents>
void attach(TensorT<S>& out, std::function<void(Node<S>&)> backfn, const Parents&... parents) {
  if (!g_grad_enabled) return;
  bool tracked = (parents.requires_grad() || ...);
  if (!tracked) return;
  out.node()->requires_grad = true;
  (out.node()->parents.push_back(parents.node()), ...);
  out.node()->backfn = std::move(backfn);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// elementwise ops
// ---------------------------------------------------------------------------
template <class S>
TensorT<S> add(const TensorT<S>& a, const TensorT<S>& b) {
  if (a.shape() != b.shape())
    fail("add: shape mismatch ", shape_str(a.shape()), " vs ", shape_str(b.shape()));
  TensorT<S> out(a.shape());
  auto oa = a.values(), ob = b.values();
  auto ov = out.values();
  for (int64_t i = 0; i < a.numel(); ++i) ov[i] = oa[i] + ob[i];
  auto an = a.node(), bn = b.node();
  detail::attach<S>(
      out,
      [an, bn](detail::Node<S>& self) {
        if (an->requires_grad) {
          an->ensure_grad();
          for (size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          for (size_t i = 0; i < self.grad.size(); ++i) bn->grad[i] += self.grad[i];
        }
      },
      a, b);
  return out;
}

template <class S>
TensorT<S> sub(const TensorT<S>& a, const TensorT<S>& b) {
  if (a.shape() != b.shape())
    fail("sub: shape mismatch ", shape_str(a.shape()), " vs ", shape_str(b.shape()));
  TensorT<S> out(a.shape());
  auto oa = a.values(), ob = b.values();
  auto ov = out.values();
  for (int64_t i = 0; i < a.numel(); ++i) ov[i] = oa[i] - ob[i];
  auto an = a.node(), bn = b.node();
  detail::attach<S>(
      out,
      [an, bn](detail::Node<S>& self) {
        if (an->requires_grad) {
          an->ensure_grad();
          for (size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          for (size_t i = 0; i < self.grad.size(); ++i) bn->grad[i] -= self.grad[i];
        }
      },
      a, b);
  return out;
}

template <class S>
TensorT<S> mul(const TensorT<S>& a, const TensorT<S>& b) {
  if (a.shape() != b.shape())
    fail("mul: shape mismatch ", shape_str(a.shape()), " vs ", shape_str(b.shape()));
  TensorT<S> out(a.shape());
  auto oa = a.values(), ob = b.values();
  auto ov = out.values();
  for (int64_t i = 0; i < a.numel(); ++i) ov[i] = oa[i] * ob[i];
  auto an = a.node(), bn = b.node();
  detail::attach<S>(
      out,
      [an, bn](detail::Node<S>& self) {
        if (an->requires_grad) {
          an->ensure_grad();
          for (size_t i = 0; i < self.grad.size(); ++i)
            an->grad[i] += self.grad[i] * bn->data[i];
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          for (size_t i = 0; i < self.grad.size(); ++i)
            bn->grad[i] += self.grad[i] * an->data[i];
        }
      },
      a, b);
  return out;
}

template <class S>
TensorT<S> scale(const TensorT<S>& a, S c) {
  TensorT<S> out(a.shape());
  auto oa = a.values();
  auto ov = out.values();
  for (int64_t i = 0; i < a.numel(); ++i) ov[i] = oa[i] * c;
  auto an = a.node();
  detail::attach<S>(
      out,
      [an, c](detail::Node<S>& self) {
        an->ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i] * c;
      },
      a);
  return out;
}

template <class S>
TensorT<S> silu(const TensorT<S>& a) {
  TensorT<S> out(a.shape());
  auto oa = a.values();
  auto ov = out.values();
  for (int64_t i = 0; i < a.numel(); ++i) {
    S sg = S(1) / (S(1) + std::exp(-oa[i]));
    ov[i] = oa[i] * sg;
  }
  auto an = a.node();
  detail::attach<S>(
      out,
      [an](detail::Node<S>& self) {
        an->ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i) {
          S x = an->data[i];
          S sg = S(1) / (S(1) + std::exp(-x));
          an->grad[i] += self.grad[i] * sg * (S(1) + x * (S(1) - sg));
        }
      },
      a);
  return out;
}

template <class S>
TensorT<S> sum(const TensorT<S>& a) {
  double acc = 0;
  for (S v : a.values()) acc += static_cast<double>(v);
  TensorT<S> out = TensorT<S>::scalar(static_cast<S>(acc));
  auto an = a.node();
  detail::attach<S>(
      out,
      [an](detail::Node<S>& self) {
        an->ensure_grad();
        for (size_t i = 0; i < an->grad.size(); ++i) an->grad[i] += self.grad[0];
      },
      a);
  return out;
}

template <class S>
TensorT<S> mean(const TensorT<S>& a) {
  if (a.numel() == 0) fail("mean: empty tensor");
  S inv = S(1) / static_cast<S>(a.numel());
  double acc = 0;
  for (S v : a.values()) acc += static_cast<double>(v);
  TensorT<S> out = TensorT<S>::scalar(static_cast<S>(acc) * inv);
  auto an = a.node();
  detail::attach<S>(
      out,
      [an, inv](detail::Node<S>& self) {
        an->ensure_grad();
        for (size_t i = 0; i < an->grad.size(); ++i) an->grad[i] += self.grad[0] * inv;
      },
      a);
  return out;
}

template <class S>
TensorT<S> reshape(const TensorT<S>& a, std::vector<int64_t> new_shape) {
  int64_t total = 1;
  for (int64_t e : new_shape) total *= e;
  if (total != a.numel())
    fail("reshape: ", shape_str(a.shape()), " to ", shape_str(new_shape), " changes element count");
  TensorT<S> out(std::move(new_shape));
  std::copy(a.values().begin(), a.values().end(), out.values().begin());
  auto an = a.node();
  detail::attach<S>(
      out,
      [an](detail::Node<S>& self) {
        an->ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
      },
      a);
  return out;
}

// ---------------------------------------------------------------------------
// matmul
// ---------------------------------------------------------------------------
template <class S>
TensorT<S> matmul(const TensorT<S>& a, const TensorT<S>& b) {
  if (a.rank() != 2 || b.rank() != 2)
    fail("matmul: expects rank-2 inputs, got ", shape_str(a.shape()), " and ",
         shape_str(b.shape()));
  if (a.dim(1) != b.dim(0))
    fail("matmul: inner extents differ: ", shape_str(a.shape()), " x ", shape_str(b.shape()));
  const int64_t M = a.dim(0), K = a.dim(1), N = b.dim(1);
  TensorT<S> out({M, N});
  kernels::mm_nn(a.values().data(), K, b.values().data(), N, out.values().data(), N, M, K, N,
                 false);
  auto an = a.node(), bn = b.node();
  detail::attach<S>(
      out,
      [an, bn, M, K, N](detail::Node<S>& self) {
        if (an->requires_grad) {
          an->ensure_grad();
          // dA += G * B^T
          kernels::mm_nt(self.grad.data(), N, bn->data.data(), N, an->grad.data(), K, M, N, K,
                         true);
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          // dB += A^T * G
          kernels::mm_tn(an->data.data(), K, self.grad.data(), N, bn->grad.data(), N, M, K, N);
        }
      },
      a, b);
  return out;
}

// ---------------------------------------------------------------------------
// softmax over the last dimension, optional boolean mask
// ---------------------------------------------------------------------------
template <class S>
TensorT<S> softmax_rows(const TensorT<S>& x, const Mask* mask = nullptr) {
  if (x.rank() < 1) fail("softmax_rows: scalar input");
  const int64_t N = x.dim(x.rank() - 1);
  const int64_t rows = x.numel() / std::max<int64_t>(N, 1);
  if (mask) {
    int64_t mn = static_cast<int64_t>(mask->allow.size());
    if (mn == 0 || x.numel() % mn != 0 || mask->cols != N)
      fail("softmax_rows: mask shape ", mask->rows, "x", mask->cols,
           " incompatible with input ", shape_str(x.shape()));
  }
  TensorT<S> out(x.shape());
  auto xv = x.values();
  auto ov = out.values();
  const int64_t mask_rows = mask ? mask->rows : 0;
  for (int64_t r = 0; r < rows; ++r) {
    const S* in = xv.data() + r * N;
    S* o = ov.data() + r * N;
    const uint8_t* row_allow =
        mask ? mask->allow.data() + (r % mask_rows) * N : nullptr;
    S mx = -std::numeric_limits<S>::infinity();
    for (int64_t j = 0; j < N; ++j)
      if (!row_allow || row_allow[j]) mx = std::max(mx, in[j]);
    if (mx == -std::numeric_limits<S>::infinity())
      fail("softmax_rows: row ", r, " fully masked");
    double denom = 0;
    for (int64_t j = 0; j < N; ++j) {
      if (row_allow && !row_allow[j]) {
        o[j] = S(0);
      } else {
        o[j] = std::exp(in[j] - mx);
        denom += static_cast<double>(o[j]);
      }
    }
    const S inv = static_cast<S>(1.0 / denom);
    for (int64_t j = 0; j < N; ++j) o[j] *= inv;
  }
  auto xn = x.node();
  detail::attach<S>(
      out,
      [xn, N, rows](detail::Node<S>& self) {
        xn->ensure_grad();
        for (int64_t r = 0; r < rows; ++r) {
          const S* p = self.data.data() + r * N;
          const S* g = self.grad.data() + r * N;
          double d = 0;
          for (int64_t j = 0; j < N; ++j) d += static_cast<double>(p[j]) * g[j];
          S* gx = xn->grad.data() + r * N;
          for (int64_t j = 0; j < N; ++j) gx[j] += p[j] * (g[j] - static_cast<S>(d));
        }
      },
      x);
  return out;
}

// ---------------------------------------------------------------------------
// RMSNorm: y_i = gamma_i * x_i / sqrt(mean(x^2) + eps), per row of last dim
// ---------------------------------------------------------------------------
template <class S>
TensorT<S> rmsnorm(const TensorT<S>& x, const TensorT<S>& gamma, S eps) {
  if (x.rank() < 1) fail("rmsnorm: scalar input");
  const int64_t D = x.dim(x.rank() - 1);
  if (gamma.numel() != D)
    fail("rmsnorm: gamma has ", gamma.numel(), " entries, last extent is ", D);
  const int64_t rows = x.numel() / std::max<int64_t>(D, 1);
  TensorT<S> out(x.shape());
  auto xv = x.values();
  auto gv = gamma.values();
  auto ov = out.values();
  std::vector<S> rinv(static_cast<size_t>(rows));
  for (int64_t r = 0; r < rows; ++r) {
    const S* in = xv.data() + r * D;
    double ms = 0;
    for (int64_t j = 0; j < D; ++j) ms += static_cast<double>(in[j]) * in[j];
    ms = ms / static_cast<double>(D) + static_cast<double>(eps);
    const S ri = static_cast<S>(1.0 / std::sqrt(ms));
    rinv[static_cast<size_t>(r)] = ri;
    S* o = ov.data() + r * D;
    for (int64_t j = 0; j < D; ++j) o[j] = gv[j] * in[j] * ri;
  }
  auto xn = x.node(), gn = gamma.node();
  detail::attach<S>(
      out,
      [xn, gn, D, rows, rinv = std::move(rinv)](detail::Node<S>& self) {
        for (int64_t r = 0; r < rows; ++r) {
          const S* in = xn->data.data() + r * D;
          const S* g = self.grad.data() + r * D;
          const S ri = rinv[static_cast<size_t>(r)];
          if (gn->requires_grad) {
            gn->ensure_grad();
            for (int64_t j = 0; j < D; ++j) gn->grad[j] += g[j] * in[j] * ri;
          }
          if (xn->requires_grad) {
            xn->ensure_grad();
            double dotgx = 0;
            for (int64_t j = 0; j < D; ++j)
              dotgx += static_cast<double>(g[j]) * gn->data[j] * in[j];
            const S c = static_cast<S>(dotgx / static_cast<double>(D)) * ri * ri * ri;
            S* gx = xn->grad.data() + r * D;
            for (int64_t j = 0; j < D; ++j) gx[j] += g[j] * gn->data[j] * ri - c * in[j];
          }
        }
      },
      x, gamma);
  return out;
}

// ---------------------------------------------------------------------------
// cross entropy over [T x V] logits; optionally exposes per-position NLL
// ---------------------------------------------------------------------------
template <class S>
TensorT<S> cross_entropy(const TensorT<S>& logits, const std::vector<int>& targets,
                         std::vector<S>* per_position = nullptr) {
  if (logits.rank() != 2)
    fail("cross_entropy: logits must be [T x V], got ", shape_str(logits.shape()));
  const int64_t T = logits.dim(0), V = logits.dim(1);
  if (static_cast<int64_t>(targets.size()) != T)
    fail("cross_entropy: ", targets.size(), " targets for ", T, " positions");
  auto lv = logits.values();
  if (per_position) per_position->assign(static_cast<size_t>(T), S(0));
  double total = 0;
  std::vector<S> mx(static_cast<size_t>(T)), lse(static_cast<size_t>(T));
  for (int64_t t = 0; t < T; ++t) {
    if (targets[static_cast<size_t>(t)] < 0 || targets[static_cast<size_t>(t)] >= V)
      fail("cross_entropy: target ", targets[static_cast<size_t>(t)],
           " out of range [0,", V, ") at position ", t);
    const S* row = lv.data() + t * V;
    S m = row[0];
    for (int64_t v = 1; v < V; ++v) m = std::max(m, row[v]);
    double denom = 0;
    for (int64_t v = 0; v < V; ++v) denom += std::exp(static_cast<double>(row[v] - m));
    const S l = static_cast<S>(std::log(denom));
    mx[static_cast<size_t>(t)] = m;
    lse[static_cast<size_t>(t)] = l;
    S nll = -(row[targets[static_cast<size_t>(t)]] - m - l);
    if (per_position) (*per_position)[static_cast<size_t>(t)] = nll;
    total += static_cast<double>(nll);
  }
  TensorT<S> out = TensorT<S>::scalar(static_cast<S>(total / static_cast<double>(T)));
  auto ln = logits.node();
  detail::attach<S>(
      out,
      [ln, targets, T, V, mx = std::move(mx), lse = std::move(lse)](detail::Node<S>& self) {
        ln->ensure_grad();
        const S g = self.grad[0] / static_cast<S>(T);
        for (int64_t t = 0; t < T; ++t) {
          const S* row = ln->data.data() + t * V;
          S* gr = ln->grad.data() + t * V;
          const S m = mx[static_cast<size_t>(t)], l = lse[static_cast<size_t>(t)];
          for (int64_t v = 0; v < V; ++v) {
            S p = std::exp(row[v] - m - l);
            gr[v] += g * (p - (v == targets[static_cast<size_t>(t)] ? S(1) : S(0)));
          }
        }
      },
      logits);
  return out;
}

// ---------------------------------------------------------------------------
// embedding lookup: table [V x D], ids [T] -> [T x D]
// ---------------------------------------------------------------------------
template <class S>
TensorT<S> embedding(const TensorT<S>& table, const std::vector<int>& ids) {
  if (table.rank() != 2)
    fail("embedding: table must be [V x D], got ", shape_str(table.shape()));
  const int64_t V = table.dim(0), D = table.dim(1);
  const int64_t T = static_cast<int64_t>(ids.size());
  TensorT<S> out({T, D});
  auto tv = table.values();
  auto ov = out.values();
  for (int64_t t = 0; t < T; ++t) {
    const int id = ids[static_cast<size_t>(t)];
    if (id < 0 || id >= V)
      fail("embedding: token ", id, " out of vocab [0,", V, ") at position ", t);
    std::memcpy(ov.data() + t * D, tv.data() + static_cast<int64_t>(id) * D,
                static_cast<size_t>(D) * sizeof(S));
  }
  auto tn = table.node();
  detail::attach<S>(
      out,
      [tn, ids, D](detail::Node<S>& self) {
        tn->ensure_grad();
        for (size_t t = 0; t < ids.size(); ++t) {
          const S* g = self.grad.data() + static_cast<int64_t>(t) * D;
          S* dst = tn->grad.data() + static_cast<int64_t>(ids[t]) * D;
          for (int64_t j = 0; j < D; ++j) dst[j] += g[j];
        }
      },
      table);
  return out;
}

}  // namespace swan
