#pragma once

#include <set>

#include "swan/schedule.hpp"
#include "swan/tensor.hpp"

namespace swan {

// ---------------------------------------------------------------------------
// rotary encoding
// ---------------------------------------------------------------------------
struct RopeParams {
  int64_t head_dim = 32;
  double base = 1e6;

  void validate() const {
    if (head_dim < 2 || head_dim % 2 != 0)
      fail("rope: head_dim must be a positive even number, got ", head_dim);
    if (base <= 1.0) fail("rope: base must be > 1, got ", base);
  }
};

// Rotates each consecutive pair (x_{2i}, x_{2i+1}) by angle m * theta_i with
// theta_i = base^(-2i/head_dim) and m the token's position.
template <class S>
TensorT<S> rope_rotate(const TensorT<S>& x, const std::vector<int64_t>& positions,
                       const RopeParams& params) {
  params.validate();
  if (x.rank() != 3)
    fail("rope_rotate: expects [T x H x Dh], got ", shape_str(x.shape()));
  const int64_t T = x.dim(0), H = x.dim(1), Dh = x.dim(2);
  if (Dh != params.head_dim)
    fail("rope_rotate: head_dim ", params.head_dim, " but input last extent ", Dh);
  if (static_cast<int64_t>(positions.size()) != T)
    fail("rope_rotate: ", positions.size(), " positions for ", T, " tokens");

  const int64_t P = Dh / 2;
  std::vector<double> theta(static_cast<size_t>(P));
  for (int64_t i = 0; i < P; ++i)
    theta[static_cast<size_t>(i)] =
        std::pow(params.base, -2.0 * static_cast<double>(i) / static_cast<double>(Dh));

  // cos/sin per (position, pair), shared with the backward closure
  auto cs = std::make_shared<std::vector<S>>(static_cast<size_t>(T * P * 2));
  for (int64_t t = 0; t < T; ++t) {
    for (int64_t i = 0; i < P; ++i) {
      double ang = static_cast<double>(positions[static_cast<size_t>(t)]) *
                   theta[static_cast<size_t>(i)];
      (*cs)[static_cast<size_t>((t * P + i) * 2)] = static_cast<S>(std::cos(ang));
      (*cs)[static_cast<size_t>((t * P + i) * 2 + 1)] = static_cast<S>(std::sin(ang));
    }
  }

  TensorT<S> out(x.shape());
  auto xv = x.values();
  auto ov = out.values();
  for (int64_t t = 0; t < T; ++t) {
    for (int64_t h = 0; h < H; ++h) {
      const S* in = xv.data() + (t * H + h) * Dh;
      S* o = ov.data() + (t * H + h) * Dh;
      for (int64_t i = 0; i < P; ++i) {
        const S c = (*cs)[static_cast<size_t>((t * P + i) * 2)];
        const S s = (*cs)[static_cast<size_t>((t * P + i) * 2 + 1)];
        const S x0 = in[2 * i], x1 = in[2 * i + 1];
        o[2 * i] = x0 * c - x1 * s;
        o[2 * i + 1] = x0 * s + x1 * c;
      }
    }
  }
  auto xn = x.node();
  detail::attach<S>(
      out,
      [xn, cs, T, H, P](detail::Node<S>& self) {
        xn->ensure_grad();
        // rotation is orthogonal: pull the gradient back through the inverse angle
        for (int64_t t = 0; t < T; ++t) {
          for (int64_t h = 0; h < H; ++h) {
            const S* g = self.grad.data() + (t * H + h) * 2 * P;
            S* gx = xn->grad.data() + (t * H + h) * 2 * P;
            for (int64_t i = 0; i < P; ++i) {
              const S c = (*cs)[static_cast<size_t>((t * P + i) * 2)];
              const S s = (*cs)[static_cast<size_t>((t * P + i) * 2 + 1)];
              gx[2 * i] += g[2 * i] * c + g[2 * i + 1] * s;
              gx[2 * i + 1] += -g[2 * i] * s + g[2 * i + 1] * c;
            }
          }
        }
      },
      x);
  return out;
}

// ---------------------------------------------------------------------------
// masks
// ---------------------------------------------------------------------------
inline Mask causal_mask(int64_t T) {
  if (T < 1) fail("causal_mask: T must be >= 1, got ", T);
  Mask m(T, T);
  for (int64_t i = 0; i < T; ++i)
    for (int64_t j = 0; j <= i; ++j) m.set(i, j, true);
  return m;
}

// Token attends to itself plus the W-1 nearest predecessors.
inline Mask sliding_window_mask(int64_t T, int64_t W) {
  if (T < 1) fail("sliding_window_mask: T must be >= 1, got ", T);
  if (W < 1) fail("sliding_window_mask: window must be >= 1, got ", W);
  Mask m(T, T);
  for (int64_t i = 0; i < T; ++i)
    for (int64_t j = std::max<int64_t>(0, i - W + 1); j <= i; ++j) m.set(i, j, true);
  return m;
}

// ---------------------------------------------------------------------------
// inference-time logit scaling
// ---------------------------------------------------------------------------
struct ScalingPolicy {
  enum class Kind { None, Log, Yarn };

  Kind kind = Kind::None;
  double a = 0.0;           // Log base, > 1
  int64_t train_len = 0;    // Yarn reference length
  std::set<LayerKind> applies_to = {LayerKind::GlobalNoPE};

  static ScalingPolicy none() { return {}; }
  static ScalingPolicy log_policy(double a) {
    ScalingPolicy p;
    p.kind = Kind::Log;
    p.a = a;
    return p;
  }
  static ScalingPolicy yarn(int64_t train_len) {
    ScalingPolicy p;
    p.kind = Kind::Yarn;
    p.train_len = train_len;
    return p;
  }

  void validate() const {
    if (kind == Kind::Log && !(a > 1.0)) fail("scaling policy: log base must be > 1, got ", a);
    if (kind == Kind::Yarn && train_len < 1)
      fail("scaling policy: yarn train_len must be >= 1, got ", train_len);
  }

  bool applies(LayerKind k) const { return applies_to.count(k) > 0; }
};

inline double scale_factor(const ScalingPolicy& p, int64_t position) {
  p.validate();
  if (position < 0) fail("scale_factor: negative position ", position);
  switch (p.kind) {
    case ScalingPolicy::Kind::None:
      return 1.0;
    case ScalingPolicy::Kind::Log:
      return std::log(p.a + static_cast<double>(position)) / std::log(p.a);
    case ScalingPolicy::Kind::Yarn: {
      if (position <= p.train_len) return 1.0;
      double r = static_cast<double>(position) / static_cast<double>(p.train_len);
      return std::max(1.0, 0.1 * std::log(r) + 1.0);
    }
  }
  return 1.0;
}

template <class S>
std::vector<S> scale_vector(const ScalingPolicy& p, int64_t T) {
  std::vector<S> s(static_cast<size_t>(T));
  for (int64_t t = 0; t < T; ++t) s[static_cast<size_t>(t)] = static_cast<S>(scale_factor(p, t));
  return s;
}

// ---------------------------------------------------------------------------
// fused scaled-dot-product attention
// ---------------------------------------------------------------------------
template <class S>
struct AttentionTap {
  int layer_index = -1;
  int64_t t = 0;
  bool head_averaged = true;
  std::vector<S> probs;  // [T x T] post-softmax, averaged over heads

  S at(int64_t i, int64_t j) const { return probs[static_cast<size_t>(i * t + j)]; }
};

namespace detail {

struct MaskRows {
  std::vector<int64_t> begin, end;  // [begin, end) per query row
  std::vector<uint8_t> contiguous;
};

inline MaskRows scan_mask(const Mask& m) {
  MaskRows r;
  r.begin.resize(static_cast<size_t>(m.rows));
  r.end.resize(static_cast<size_t>(m.rows));
  r.contiguous.resize(static_cast<size_t>(m.rows));
  for (int64_t i = 0; i < m.rows; ++i) {
    int64_t first = -1, last = -1, count = 0;
    const uint8_t* row = m.allow.data() + i * m.cols;
    for (int64_t j = 0; j < m.cols; ++j) {
      if (row[j]) {
        if (first < 0) first = j;
        last = j;
        ++count;
      }
    }
    if (count == 0) fail("attend: query row ", i, " has empty mask support");
    r.begin[static_cast<size_t>(i)] = first;
    r.end[static_cast<size_t>(i)] = last + 1;
    r.contiguous[static_cast<size_t>(i)] = (count == last - first + 1) ? 1 : 0;
  }
  return r;
}

}  // namespace detail

// q,k,v: [T x H x Dh]; mask: [T x T]; one multiplicative logit scale per query
// position. Per head: softmax((q k^T) / sqrt(Dh) * scale_i) over the mask
// support, then the weighted sum of v rows.
template <class S>
TensorT<S> attend(const TensorT<S>& q, const TensorT<S>& k, const TensorT<S>& v,
                  const Mask& mask, const std::vector<S>& scale_per_query,
                  AttentionTap<S>* tap = nullptr) {
  if (q.rank() != 3 || k.shape() != q.shape() || v.shape() != q.shape())
    fail("attend: q/k/v must share shape [T x H x Dh], got ", shape_str(q.shape()), ", ",
         shape_str(k.shape()), ", ", shape_str(v.shape()));
  const int64_t T = q.dim(0), H = q.dim(1), Dh = q.dim(2);
  if (mask.rows != T || mask.cols != T)
    fail("attend: mask is ", mask.rows, "x", mask.cols, " for T=", T);
  if (static_cast<int64_t>(scale_per_query.size()) != T)
    fail("attend: ", scale_per_query.size(), " scales for ", T, " queries");
  for (int64_t i = 0; i < T; ++i) {
    S s = scale_per_query[static_cast<size_t>(i)];
    if (!(s > S(0)) || !std::isfinite(static_cast<double>(s)))
      fail("attend: scale at query ", i, " must be positive and finite");
  }
  const detail::MaskRows rows = detail::scan_mask(mask);
  const S inv_sqrt = static_cast<S>(1.0 / std::sqrt(static_cast<double>(Dh)));

  const bool tracked =
      grad_enabled() && (q.requires_grad() || k.requires_grad() || v.requires_grad());
  // per-head probabilities are kept only when backward or a tap needs them
  std::shared_ptr<std::vector<S>> probs;
  if (tracked) probs = std::make_shared<std::vector<S>>(static_cast<size_t>(H * T * T), S(0));
  if (tap) {
    tap->t = T;
    tap->head_averaged = true;
    tap->probs.assign(static_cast<size_t>(T * T), S(0));
  }

  TensorT<S> out(q.shape());
  auto qv = q.values();
  auto kv = k.values();
  auto vv = v.values();
  auto ov = out.values();
  const int64_t row_stride = H * Dh;

  std::vector<S> qh(static_cast<size_t>(T * Dh)), kh(static_cast<size_t>(T * Dh)),
      vh(static_cast<size_t>(T * Dh));
  std::vector<S> logits(static_cast<size_t>(T)), p(static_cast<size_t>(T));
  const S tap_w = tap ? static_cast<S>(1.0 / static_cast<double>(H)) : S(0);

  for (int64_t h = 0; h < H; ++h) {
    for (int64_t t = 0; t < T; ++t) {
      std::memcpy(qh.data() + t * Dh, qv.data() + t * row_stride + h * Dh,
                  static_cast<size_t>(Dh) * sizeof(S));
      std::memcpy(kh.data() + t * Dh, kv.data() + t * row_stride + h * Dh,
                  static_cast<size_t>(Dh) * sizeof(S));
      std::memcpy(vh.data() + t * Dh, vv.data() + t * row_stride + h * Dh,
                  static_cast<size_t>(Dh) * sizeof(S));
    }
    for (int64_t i = 0; i < T; ++i) {
      const int64_t jb = rows.begin[static_cast<size_t>(i)];
      const int64_t je = rows.end[static_cast<size_t>(i)];
      const uint8_t* allow =
          rows.contiguous[static_cast<size_t>(i)] ? nullptr : mask.allow.data() + i * T;
      const S mult = scale_per_query[static_cast<size_t>(i)] * inv_sqrt;
      const S* qi = qh.data() + i * Dh;
      S mx = -std::numeric_limits<S>::infinity();
      for (int64_t j = jb; j < je; ++j) {
        if (allow && !allow[j]) continue;
        S l = kernels::dot(qi, kh.data() + j * Dh, Dh) * mult;
        logits[static_cast<size_t>(j)] = l;
        mx = std::max(mx, l);
      }
      double denom = 0;
      for (int64_t j = jb; j < je; ++j) {
        if (allow && !allow[j]) continue;
        S e = std::exp(logits[static_cast<size_t>(j)] - mx);
        p[static_cast<size_t>(j)] = e;
        denom += static_cast<double>(e);
      }
      const S inv = static_cast<S>(1.0 / denom);
      S* o = ov.data() + i * row_stride + h * Dh;
      std::fill(o, o + Dh, S(0));
      for (int64_t j = jb; j < je; ++j) {
        if (allow && !allow[j]) continue;
        const S pj = p[static_cast<size_t>(j)] * inv;
        p[static_cast<size_t>(j)] = pj;
        const S* vj = vh.data() + j * Dh;
        for (int64_t d = 0; d < Dh; ++d) o[d] += pj * vj[d];
      }
      if (probs) {
        S* dst = probs->data() + (h * T + i) * T;
        for (int64_t j = jb; j < je; ++j)
          if (!allow || allow[j]) dst[j] = p[static_cast<size_t>(j)];
      }
      if (tap) {
        S* dst = tap->probs.data() + i * T;
        for (int64_t j = jb; j < je; ++j)
          if (!allow || allow[j]) dst[j] += tap_w * p[static_cast<size_t>(j)];
      }
    }
  }

  if (tracked) {
    auto qn = q.node(), kn = k.node(), vn = v.node();
    auto mask_copy = std::make_shared<Mask>(mask);
    auto scales = scale_per_query;
    detail::attach<S>(
        out,
        [qn, kn, vn, probs, mask_copy, scales, T, H, Dh, inv_sqrt](detail::Node<S>& self) {
          const detail::MaskRows rows = detail::scan_mask(*mask_copy);
          const int64_t row_stride = H * Dh;
          qn->ensure_grad();
          kn->ensure_grad();
          vn->ensure_grad();
          std::vector<S> qh(static_cast<size_t>(T * Dh)), kh(static_cast<size_t>(T * Dh)),
              vh(static_cast<size_t>(T * Dh));
          std::vector<S> gq(static_cast<size_t>(T * Dh)), gk(static_cast<size_t>(T * Dh)),
              gv(static_cast<size_t>(T * Dh));
          std::vector<S> dp(static_cast<size_t>(T));
          for (int64_t h = 0; h < H; ++h) {
            for (int64_t t = 0; t < T; ++t) {
              std::memcpy(qh.data() + t * Dh, qn->data.data() + t * row_stride + h * Dh,
                          static_cast<size_t>(Dh) * sizeof(S));
              std::memcpy(kh.data() + t * Dh, kn->data.data() + t * row_stride + h * Dh,
                          static_cast<size_t>(Dh) * sizeof(S));
              std::memcpy(vh.data() + t * Dh, vn->data.data() + t * row_stride + h * Dh,
                          static_cast<size_t>(Dh) * sizeof(S));
            }
            std::fill(gq.begin(), gq.end(), S(0));
            std::fill(gk.begin(), gk.end(), S(0));
            std::fill(gv.begin(), gv.end(), S(0));
            for (int64_t i = 0; i < T; ++i) {
              const int64_t jb = rows.begin[static_cast<size_t>(i)];
              const int64_t je = rows.end[static_cast<size_t>(i)];
              const uint8_t* allow = rows.contiguous[static_cast<size_t>(i)]
                                         ? nullptr
                                         : mask_copy->allow.data() + i * T;
              const S* go = self.grad.data() + i * row_stride + h * Dh;
              const S* pr = probs->data() + (h * T + i) * T;
              double dsum = 0;
              for (int64_t j = jb; j < je; ++j) {
                if (allow && !allow[j]) continue;
                const S d = kernels::dot(go, vh.data() + j * Dh, Dh);
                dp[static_cast<size_t>(j)] = d;
                dsum += static_cast<double>(pr[j]) * d;
                S* gvj = gv.data() + j * Dh;
                for (int64_t x = 0; x < Dh; ++x) gvj[x] += pr[j] * go[x];
              }
              const S mult = scales[static_cast<size_t>(i)] * inv_sqrt;
              const S* qi = qh.data() + i * Dh;
              S* gqi = gq.data() + i * Dh;
              for (int64_t j = jb; j < je; ++j) {
                if (allow && !allow[j]) continue;
                const S dl = pr[j] * (dp[static_cast<size_t>(j)] - static_cast<S>(dsum));
                const S c = dl * mult;
                const S* kj = kh.data() + j * Dh;
                S* gkj = gk.data() + j * Dh;
                for (int64_t x = 0; x < Dh; ++x) {
                  gqi[x] += c * kj[x];
                  gkj[x] += c * qi[x];
                }
              }
            }
            for (int64_t t = 0; t < T; ++t) {
              S* dq = qn->grad.data() + t * row_stride + h * Dh;
              S* dk = kn->grad.data() + t * row_stride + h * Dh;
              S* dv = vn->grad.data() + t * row_stride + h * Dh;
              for (int64_t x = 0; x < Dh; ++x) {
                dq[x] += gq[static_cast<size_t>(t * Dh + x)];
                dk[x] += gk[static_cast<size_t>(t * Dh + x)];
                dv[x] += gv[static_cast<size_t>(t * Dh + x)];
              }
            }
          }
        },
        q, k, v);
  }
  return out;
}

}  // namespace swan
