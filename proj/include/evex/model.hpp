#pragma once

// Trainable parameter store shared by the extractors and verifiers, plus a
// binary checkpoint format with named tensors and string metadata.
//
// Parameters: a sentence/claim projection (initialized to identity), an
// affine score calibration, a raw pair weight mapped through softplus and
// capped at 5, and two verifier heads (feedforward and graph).

#include <cstring>

#include "evex/io.hpp"

namespace evex {

struct tensor {
  std::vector<int> shape;
  vec v, g;

  int size() const {
    int n = shape.empty() ? 0 : 1;
    for (int d : shape) n *= d;
    return n;
  }
  void reset(std::vector<int> s) {
    shape = std::move(s);
    for (int d : shape)
      if (d < 1) throw dimension_error("tensor: nonpositive dimension");
    v.assign(size(), 0.0);
    g.assign(size(), 0.0);
  }
};

// row-major y = W x, W is rows x cols
inline void matvec(const tensor& w, const vec& x, vec& y) {
  const int rows = w.shape[0], cols = w.shape[1];
  if (static_cast<int>(x.size()) != cols) throw dimension_error("matvec: input length mismatch");
  y.assign(rows, 0.0);
  for (int i = 0; i < rows; ++i) {
    double acc = 0.0;
    const double* row = w.v.data() + static_cast<size_t>(i) * cols;
    for (int j = 0; j < cols; ++j) acc += row[j] * x[j];
    y[i] = acc;
  }
}

// x = W^T y
inline void matvec_t(const tensor& w, const vec& y, vec& x) {
  const int rows = w.shape[0], cols = w.shape[1];
  if (static_cast<int>(y.size()) != rows) throw dimension_error("matvec_t: input length mismatch");
  x.assign(cols, 0.0);
  for (int i = 0; i < rows; ++i) {
    const double* row = w.v.data() + static_cast<size_t>(i) * cols;
    for (int j = 0; j < cols; ++j) x[j] += row[j] * y[i];
  }
}

// G += a b^T accumulated into the gradient slot
inline void outer_acc(tensor& w, const vec& a, const vec& b) {
  const int rows = w.shape[0], cols = w.shape[1];
  if (static_cast<int>(a.size()) != rows || static_cast<int>(b.size()) != cols)
    throw dimension_error("outer_acc: shape mismatch");
  for (int i = 0; i < rows; ++i) {
    double* row = w.g.data() + static_cast<size_t>(i) * cols;
    for (int j = 0; j < cols; ++j) row[j] += a[i] * b[j];
  }
}

struct model_config {
  int dim = 64;
  int hidden = 200;
  int classes = 7;
  uint64_t seed = 1;
};

constexpr double pair_weight_cap = 5.0;

struct model_params {
  model_config cfg;
  tensor proj;               // dim x dim sentence/claim projection
  tensor calib;              // {w, b} affine score calibration
  tensor pair_raw;           // scalar, pair weight = min(softplus(raw), cap)
  tensor w1, b1, w2, b2;     // feedforward verifier
  tensor vw1, vb1, vw2, vb2, vq;  // graph verifier (vq scores node readout)

  std::vector<std::pair<const char*, tensor*>> named() {
    return {{"proj", &proj}, {"calib", &calib}, {"pair_raw", &pair_raw}, {"w1", &w1},
            {"b1", &b1},     {"w2", &w2},       {"b2", &b2},             {"vw1", &vw1},
            {"vb1", &vb1},   {"vw2", &vw2},     {"vb2", &vb2},           {"vq", &vq}};
  }

  void zero_grad() {
    for (auto& [name, t] : named()) std::fill(t->g.begin(), t->g.end(), 0.0);
  }

  double pair_weight() const { return std::min(softplus(pair_raw.v[0]), pair_weight_cap); }
  double pair_weight_draw() const {
    return softplus(pair_raw.v[0]) < pair_weight_cap ? sigmoid(pair_raw.v[0]) : 0.0;
  }
};

inline model_params make_model(const model_config& cfg) {
  if (cfg.dim < 1 || cfg.hidden < 1 || cfg.classes < 2) throw config_error("model: bad dimensions");
  model_params m;
  m.cfg = cfg;
  const int d = cfg.dim, h = cfg.hidden, c = cfg.classes;
  m.proj.reset({d, d});
  for (int i = 0; i < d; ++i) m.proj.v[static_cast<size_t>(i) * d + i] = 1.0;
  m.calib.reset({2});
  m.calib.v = {1.0, 0.0};
  m.pair_raw.reset({1});
  m.pair_raw.v[0] = std::log(std::expm1(0.5));  // softplus(raw) = 0.5
  m.w1.reset({h, 2 * d});
  m.b1.reset({h});
  m.w2.reset({c, h});
  m.b2.reset({c});
  m.vw1.reset({h, 2 * d});
  m.vb1.reset({h});
  m.vw2.reset({c, h});
  m.vb2.reset({c});
  m.vq.reset({h});

  // one derived stream per tensor keeps the init independent of fill order
  auto fill = [&](tensor& t, uint64_t tag, double scale) {
    rng_stream rng = rng_stream::derive(cfg.seed, 0x6d6f64656cull, tag);
    for (double& x : t.v) x = rng.normal() * scale;
  };
  fill(m.w1, 1, 1.0 / std::sqrt(2.0 * d));
  fill(m.w2, 2, 1.0 / std::sqrt(static_cast<double>(h)));
  fill(m.vw1, 3, 1.0 / std::sqrt(2.0 * d));
  fill(m.vw2, 4, 1.0 / std::sqrt(static_cast<double>(h)));
  fill(m.vq, 5, 1.0 / std::sqrt(static_cast<double>(h)));
  return m;
}

// ---- checkpoint format ----
// "EVCX" | u32 version | u32 n_meta | (u32 klen, key, u32 vlen, value)*
//        | u32 n_tensors | (u32 nlen, name, u32 ndims, u32 dims*, f64 data*)*
// integers and doubles are little-endian

namespace detail {

inline void put_u32(std::string& s, uint32_t x) {
  char b[4];
  std::memcpy(b, &x, 4);
  s.append(b, 4);
}

inline void put_str(std::string& s, const std::string& x) {
  put_u32(s, static_cast<uint32_t>(x.size()));
  s.append(x);
}

struct byte_reader {
  const std::string& s;
  size_t pos = 0;
  explicit byte_reader(const std::string& text) : s(text) {}
  void need(size_t n) const {
    if (pos + n > s.size()) throw config_error("checkpoint: truncated file");
  }
  uint32_t u32() {
    need(4);
    uint32_t x;
    std::memcpy(&x, s.data() + pos, 4);
    pos += 4;
    return x;
  }
  std::string str() {
    uint32_t n = u32();
    need(n);
    std::string x = s.substr(pos, n);
    pos += n;
    return x;
  }
  void f64(vec& out, size_t n) {
    need(n * 8);
    out.resize(n);
    std::memcpy(out.data(), s.data() + pos, n * 8);
    pos += n * 8;
  }
};

}  // namespace detail

using model_metadata = std::vector<std::pair<std::string, std::string>>;

inline std::string serialize_model(model_params& m, const model_metadata& meta) {
  std::string out = "EVCX";
  detail::put_u32(out, 1);
  detail::put_u32(out, static_cast<uint32_t>(meta.size()));
  for (const auto& [k, v] : meta) {
    detail::put_str(out, k);
    detail::put_str(out, v);
  }
  auto tensors = m.named();
  detail::put_u32(out, static_cast<uint32_t>(tensors.size()));
  for (auto& [name, t] : tensors) {
    detail::put_str(out, name);
    detail::put_u32(out, static_cast<uint32_t>(t->shape.size()));
    for (int d : t->shape) detail::put_u32(out, static_cast<uint32_t>(d));
    size_t bytes = t->v.size() * 8;
    size_t at = out.size();
    out.resize(at + bytes);
    std::memcpy(out.data() + at, t->v.data(), bytes);
  }
  return out;
}

inline model_params deserialize_model(const std::string& text, model_metadata* meta = nullptr) {
  detail::byte_reader r(text);
  r.need(4);
  if (text.compare(0, 4, "EVCX") != 0) throw config_error("checkpoint: bad magic");
  r.pos = 4;
  if (r.u32() != 1) throw config_error("checkpoint: unsupported version");
  uint32_t n_meta = r.u32();
  model_metadata local;
  for (uint32_t i = 0; i < n_meta; ++i) {
    std::string k = r.str();
    std::string v = r.str();
    local.emplace_back(std::move(k), std::move(v));
  }
  if (meta) *meta = local;

  std::vector<std::tuple<std::string, std::vector<int>, vec>> raw;
  uint32_t n_tensors = r.u32();
  for (uint32_t i = 0; i < n_tensors; ++i) {
    std::string name = r.str();
    uint32_t ndims = r.u32();
    if (ndims > 4) throw config_error("checkpoint: implausible rank");
    std::vector<int> shape;
    size_t n = 1;
    for (uint32_t d = 0; d < ndims; ++d) {
      uint32_t dim = r.u32();
      if (dim < 1 || dim > (1u << 24)) throw config_error("checkpoint: implausible dimension");
      shape.push_back(static_cast<int>(dim));
      n *= dim;
    }
    vec data;
    r.f64(data, n);
    raw.emplace_back(std::move(name), std::move(shape), std::move(data));
  }

  auto find = [&](const char* name) -> std::tuple<std::string, std::vector<int>, vec>& {
    for (auto& t : raw)
      if (std::get<0>(t) == name) return t;
    throw config_error(std::string("checkpoint: missing tensor ") + name);
  };

  model_config cfg;
  cfg.dim = std::get<1>(find("proj"))[0];
  cfg.hidden = std::get<1>(find("b1"))[0];
  cfg.classes = std::get<1>(find("b2"))[0];
  model_params m = make_model(cfg);
  for (auto& [name, t] : m.named()) {
    auto& [rname, rshape, rdata] = find(name);
    if (rshape != t->shape) throw config_error(std::string("checkpoint: shape mismatch for ") + name);
    t->v = rdata;
  }
  return m;
}

inline void save_model(const std::string& path, model_params& m, const model_metadata& meta = {}) {
  atomic_write_file(path, serialize_model(m, meta));
}

inline model_params load_model(const std::string& path, model_metadata* meta = nullptr) {
  return deserialize_model(read_file(path), meta);
}

}  // namespace evex
