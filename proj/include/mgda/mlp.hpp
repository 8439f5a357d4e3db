#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "mgda/errors.hpp"
#include "mgda/rng.hpp"

namespace mgda {

struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;  // row-major

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(std::size_t(r) * std::size_t(c), 0.0) {}

  double& at(int r, int c) { return data[std::size_t(r) * std::size_t(cols) + std::size_t(c)]; }
  double at(int r, int c) const { return data[std::size_t(r) * std::size_t(cols) + std::size_t(c)]; }
};

enum class Activation { relu, tanh };

// Fixed-architecture multilayer perceptron: affine layers with relu/tanh on
// hidden layers and an identity output.
struct Mlp {
  std::vector<int> layer_dims;  // [in, h1, ..., out]
  std::vector<Matrix> weights;  // weights[l]: dims[l+1] x dims[l]
  std::vector<std::vector<double>> biases;
  Activation activation = Activation::relu;

  int input_dim() const { return layer_dims.front(); }
  int output_dim() const { return layer_dims.back(); }
  int num_layers() const { return int(weights.size()); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& w : weights) n += w.data.size();
    for (const auto& b : biases) n += b.size();
    return n;
  }
};

inline Mlp make_mlp(const std::vector<int>& layer_dims, Activation act, Rng& rng) {
  if (layer_dims.size() < 2) throw ConfigError("make_mlp: need at least input and output dims");
  Mlp m;
  m.layer_dims = layer_dims;
  m.activation = act;
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    const int fan_in = layer_dims[l];
    const int fan_out = layer_dims[l + 1];
    Matrix w(fan_out, fan_in);
    const double scale = act == Activation::relu ? std::sqrt(2.0 / fan_in) : std::sqrt(1.0 / fan_in);
    for (auto& x : w.data) x = scale * rng.normal();
    m.weights.push_back(std::move(w));
    m.biases.emplace_back(std::size_t(fan_out), 0.0);
  }
  return m;
}

struct ForwardCache {
  std::vector<std::vector<double>> acts;  // acts[0] = input, acts[L] = output
  std::vector<std::vector<double>> pre;   // pre-activations per layer
};

inline std::vector<double> forward_cached(const Mlp& m, const std::vector<double>& x,
                                          ForwardCache& cache) {
  if (int(x.size()) != m.input_dim()) {
    throw ValidationError("forward: input has dim " + std::to_string(x.size()) + ", expected " +
                          std::to_string(m.input_dim()));
  }
  cache.acts.assign(1, x);
  cache.pre.clear();
  std::vector<double> cur = x;
  for (int l = 0; l < m.num_layers(); ++l) {
    const Matrix& w = m.weights[std::size_t(l)];
    std::vector<double> z(m.biases[std::size_t(l)]);
    for (int r = 0; r < w.rows; ++r) {
      const double* wr = &w.data[std::size_t(r) * std::size_t(w.cols)];
      double acc = 0.0;
      for (int c = 0; c < w.cols; ++c) acc += wr[c] * cur[std::size_t(c)];
      z[std::size_t(r)] += acc;
    }
    cache.pre.push_back(z);
    if (l + 1 < m.num_layers()) {
      if (m.activation == Activation::relu) {
        for (auto& v : z) v = v > 0.0 ? v : 0.0;
      } else {
        for (auto& v : z) v = std::tanh(v);
      }
    }
    cache.acts.push_back(z);
    cur = std::move(z);
  }
  return cur;
}

inline std::vector<double> forward(const Mlp& m, const std::vector<double>& x) {
  ForwardCache cache;
  return forward_cached(m, x, cache);
}

// Parameter gradients; shapes mirror the owning Mlp.
struct GradientTape {
  std::vector<Matrix> d_weights;
  std::vector<std::vector<double>> d_biases;

  explicit GradientTape(const Mlp& m) {
    for (const auto& w : m.weights) d_weights.emplace_back(w.rows, w.cols);
    for (const auto& b : m.biases) d_biases.emplace_back(b.size(), 0.0);
  }

  void scale(double c) {
    for (auto& w : d_weights)
      for (auto& v : w.data) v *= c;
    for (auto& b : d_biases)
      for (auto& v : b) v *= c;
  }
};

// Accumulates d(output . upstream)/d(params) into the tape and returns the
// gradient w.r.t. the input.
inline std::vector<double> backward_accumulate(const Mlp& m, const ForwardCache& cache,
                                               const std::vector<double>& upstream,
                                               GradientTape& tape) {
  if (int(upstream.size()) != m.output_dim()) {
    throw ValidationError("backward: upstream gradient has wrong dim");
  }
  std::vector<double> delta = upstream;
  for (int l = m.num_layers() - 1; l >= 0; --l) {
    const Matrix& w = m.weights[std::size_t(l)];
    if (l + 1 < m.num_layers()) {
      const auto& z = cache.pre[std::size_t(l)];
      if (m.activation == Activation::relu) {
        for (std::size_t r = 0; r < delta.size(); ++r) {
          if (z[r] <= 0.0) delta[r] = 0.0;
        }
      } else {
        for (std::size_t r = 0; r < delta.size(); ++r) {
          const double th = std::tanh(z[r]);
          delta[r] *= 1.0 - th * th;
        }
      }
    }
    const auto& input = cache.acts[std::size_t(l)];
    Matrix& dw = tape.d_weights[std::size_t(l)];
    auto& db = tape.d_biases[std::size_t(l)];
    for (int r = 0; r < w.rows; ++r) {
      const double d = delta[std::size_t(r)];
      db[std::size_t(r)] += d;
      double* dwr = &dw.data[std::size_t(r) * std::size_t(w.cols)];
      for (int c = 0; c < w.cols; ++c) dwr[c] += d * input[std::size_t(c)];
    }
    std::vector<double> prev(std::size_t(w.cols), 0.0);
    for (int r = 0; r < w.rows; ++r) {
      const double d = delta[std::size_t(r)];
      const double* wr = &w.data[std::size_t(r) * std::size_t(w.cols)];
      for (int c = 0; c < w.cols; ++c) prev[std::size_t(c)] += d * wr[c];
    }
    delta = std::move(prev);
  }
  return delta;
}

inline GradientTape backward(const Mlp& m, const std::vector<double>& x,
                             const std::vector<double>& upstream) {
  ForwardCache cache;
  forward_cached(m, x, cache);
  GradientTape tape(m);
  backward_accumulate(m, cache, upstream, tape);
  return tape;
}

struct AdamState {
  std::vector<Matrix> m_w, v_w;
  std::vector<std::vector<double>> m_b, v_b;
  long t = 0;

  explicit AdamState(const Mlp& net) {
    for (const auto& w : net.weights) {
      m_w.emplace_back(w.rows, w.cols);
      v_w.emplace_back(w.rows, w.cols);
    }
    for (const auto& b : net.biases) {
      m_b.emplace_back(b.size(), 0.0);
      v_b.emplace_back(b.size(), 0.0);
    }
  }
};

// Adaptive-moment update, in place. Throws on non-finite gradients.
inline void sgd_adam_step(Mlp& net, const GradientTape& tape, AdamState& state, double lr,
                          double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
  state.t += 1;
  const double bc1 = 1.0 - std::pow(beta1, double(state.t));
  const double bc2 = 1.0 - std::pow(beta2, double(state.t));
  const auto update = [&](double& param, double g, double& m, double& v, int layer) {
    if (!std::isfinite(g)) {
      throw RuntimeFailure("adam: non-finite gradient in layer " + std::to_string(layer));
    }
    m = beta1 * m + (1.0 - beta1) * g;
    v = beta2 * v + (1.0 - beta2) * g * g;
    param -= lr * (m / bc1) / (std::sqrt(v / bc2) + eps);
  };
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    auto& w = net.weights[l].data;
    const auto& g = tape.d_weights[l].data;
    auto& mw = state.m_w[l].data;
    auto& vw = state.v_w[l].data;
    for (std::size_t k = 0; k < w.size(); ++k) update(w[k], g[k], mw[k], vw[k], int(l));
    auto& b = net.biases[l];
    const auto& gb = tape.d_biases[l];
    auto& mb = state.m_b[l];
    auto& vb = state.v_b[l];
    for (std::size_t k = 0; k < b.size(); ++k) update(b[k], gb[k], mb[k], vb[k], int(l));
  }
}

// Warm-startable power iteration for the largest singular value. Uses a
// rank-2 subspace so convergence is governed by the sigma_1/sigma_3 gap;
// single-vector iteration stalls when the top two singular values nearly
// coincide.
struct PowerIterState {
  std::vector<double> v1, v2;  // right-subspace basis
};

inline double spectral_norm_warm(const Matrix& w, int iters, PowerIterState& st, Rng& rng) {
  if (iters < 1) throw ConfigError("spectral_norm: iters must be >= 1");
  if (w.rows == 0 || w.cols == 0) return 0.0;
  bool all_zero = true;
  for (double x : w.data) {
    if (x != 0.0) {
      all_zero = false;
      break;
    }
  }
  if (all_zero) return 0.0;

  const std::size_t n = std::size_t(w.cols);
  if (st.v1.size() != n || st.v2.size() != n) {
    st.v1.assign(n, 0.0);
    st.v2.assign(n, 0.0);
    for (auto& x : st.v1) x = rng.normal();
    for (auto& x : st.v2) x = rng.normal();
  }
  const auto apply_wtw = [&](const std::vector<double>& v, std::vector<double>& out) {
    std::vector<double> u(std::size_t(w.rows), 0.0);
    for (int r = 0; r < w.rows; ++r) {
      const double* wr = &w.data[std::size_t(r) * n];
      double acc = 0.0;
      for (std::size_t c = 0; c < n; ++c) acc += wr[c] * v[c];
      u[std::size_t(r)] = acc;
    }
    out.assign(n, 0.0);
    for (int r = 0; r < w.rows; ++r) {
      const double ur = u[std::size_t(r)];
      const double* wr = &w.data[std::size_t(r) * n];
      for (std::size_t c = 0; c < n; ++c) out[c] += wr[c] * ur;
    }
  };
  const auto dot = [n](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) s += a[k] * b[k];
    return s;
  };
  const auto normalize = [&](std::vector<double>& v) {
    const double nn = std::sqrt(dot(v, v));
    if (nn <= 0.0) {
      for (auto& x : v) x = rng.normal();
      return false;
    }
    for (auto& x : v) x /= nn;
    return true;
  };

  std::vector<double> b1, b2;
  for (int it = 0; it < iters; ++it) {
    apply_wtw(st.v1, b1);
    apply_wtw(st.v2, b2);
    st.v1 = b1;
    if (!normalize(st.v1)) continue;
    const double proj = dot(b2, st.v1);
    st.v2 = b2;
    for (std::size_t k = 0; k < n; ++k) st.v2[k] -= proj * st.v1[k];
    normalize(st.v2);
  }
  // Largest Ritz value of W^T W on span{v1, v2}.
  apply_wtw(st.v1, b1);
  apply_wtw(st.v2, b2);
  const double m11 = dot(st.v1, b1);
  const double m12 = dot(st.v1, b2);
  const double m22 = dot(st.v2, b2);
  const double mean = 0.5 * (m11 + m22);
  const double disc = std::sqrt(std::max(0.0, 0.25 * (m11 - m22) * (m11 - m22) + m12 * m12));
  return std::sqrt(std::max(0.0, mean + disc));
}

inline double spectral_norm(const Matrix& w, int iters, std::uint64_t seed) {
  Rng rng(seed);
  PowerIterState st;
  return spectral_norm_warm(w, iters, st, rng);
}

// Eq.-style projection: W -> W / max(||W||_2 / lambda, 1) for every weight
// matrix independently; biases untouched.
inline void project_weights_warm(Mlp& net, double lambda, int iters,
                                 std::vector<PowerIterState>& states, Rng& rng) {
  if (!(lambda > 0.0)) throw ConfigError("project_weights: lambda must be positive");
  states.resize(net.weights.size());
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    const double sigma = spectral_norm_warm(net.weights[l], iters, states[l], rng);
    const double factor = std::max(sigma / lambda, 1.0);
    if (factor > 1.0) {
      for (auto& x : net.weights[l].data) x /= factor;
    }
  }
}

inline Mlp project_weights(const Mlp& net, double lambda, int iters = 50,
                           std::uint64_t seed = 0x5eedULL) {
  Mlp out = net;
  Rng rng(seed);
  std::vector<PowerIterState> states;
  project_weights_warm(out, lambda, iters, states, rng);
  return out;
}

inline std::vector<double> layer_spectral_norms(const Mlp& net, int iters = 80,
                                                std::uint64_t seed = 0x5eedULL) {
  std::vector<double> norms;
  Rng rng(seed);
  for (const auto& w : net.weights) {
    PowerIterState st;
    norms.push_back(spectral_norm_warm(w, iters, st, rng));
  }
  return norms;
}

inline nlohmann::json mlp_to_json(const Mlp& m) {
  nlohmann::json j;
  j["layer_dims"] = m.layer_dims;
  j["activation"] = m.activation == Activation::relu ? "relu" : "tanh";
  nlohmann::json ws = nlohmann::json::array();
  for (const auto& w : m.weights) ws.push_back(w.data);
  j["weights"] = ws;
  j["biases"] = m.biases;
  return j;
}

inline Mlp mlp_from_json(const nlohmann::json& j) {
  Mlp m;
  m.layer_dims = j.at("layer_dims").get<std::vector<int>>();
  m.activation = j.at("activation").get<std::string>() == "relu" ? Activation::relu : Activation::tanh;
  const auto& ws = j.at("weights");
  for (std::size_t l = 0; l + 1 < m.layer_dims.size(); ++l) {
    Matrix w(m.layer_dims[l + 1], m.layer_dims[l]);
    w.data = ws.at(l).get<std::vector<double>>();
    if (w.data.size() != std::size_t(w.rows) * std::size_t(w.cols)) {
      throw ParseError("mlp: weight matrix " + std::to_string(l) + " has wrong size");
    }
    m.weights.push_back(std::move(w));
  }
  m.biases = j.at("biases").get<std::vector<std::vector<double>>>();
  return m;
}

}  // namespace mgda
