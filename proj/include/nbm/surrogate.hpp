#pragma once

// Sine-activated multilayer perceptrons, one per subdomain, with hand-derived
// reverse accumulation of parameter gradients.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "nbm/geometry.hpp"
#include "nbm/vec3.hpp"

namespace nbm {

class InvalidArchitecture : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline void validate_architecture(const std::vector<int>& sizes) {
  if (sizes.size() < 3) throw InvalidArchitecture("need an input, at least one hidden layer and an output");
  if (sizes.front() != 3) throw InvalidArchitecture("input layer must have 3 units");
  if (sizes.back() != 1) throw InvalidArchitecture("output layer must have 1 unit");
  for (int s : sizes) {
    if (s < 1) throw InvalidArchitecture("layer sizes must be positive");
  }
}

inline std::size_t parameter_count(const std::vector<int>& sizes) {
  std::size_t n = 0;
  for (std::size_t l = 1; l < sizes.size(); ++l) {
    n += static_cast<std::size_t>(sizes[l - 1]) * sizes[l] + sizes[l];
  }
  return n;
}

/// Multilayer perceptron R^3 -> R. Hidden layers apply sin(omega0 * z); the output
/// layer is affine. Parameters are stored flat: for each layer its weight matrix
/// (fan_out x fan_in, row-major) followed by its bias vector.
class SineMlp {
 public:
  SineMlp() = default;

  SineMlp(std::vector<int> layer_sizes, std::vector<double> params, double omega0 = 1.0)
      : sizes_(std::move(layer_sizes)), params_(std::move(params)), omega0_(omega0) {
    if (sizes_.size() == 2 && sizes_[0] == 3 && sizes_[1] == 1) {
      // a purely affine model is allowed for testing the output head
    } else {
      validate_architecture(sizes_);
    }
    if (params_.size() != nbm::parameter_count(sizes_)) {
      throw InvalidArchitecture("parameter vector length does not match layer sizes");
    }
    max_width_ = 0;
    std::size_t a = 0;
    std::size_t w = 0;
    act_offsets_.resize(sizes_.size());
    weight_offsets_.resize(sizes_.size() - 1);
    for (std::size_t l = 0; l < sizes_.size(); ++l) {
      max_width_ = std::max(max_width_, sizes_[l]);
      act_offsets_[l] = a;
      a += static_cast<std::size_t>(sizes_[l]);
      if (l + 1 < sizes_.size()) {
        weight_offsets_[l] = w;
        w += static_cast<std::size_t>(sizes_[l]) * sizes_[l + 1] + sizes_[l + 1];
      }
    }
    total_units_ = a;
  }

  /// Uniform weights in (-sqrt(6/fan_in), sqrt(6/fan_in)), zero biases.
  static SineMlp init(const std::vector<int>& sizes, std::mt19937_64& rng, double omega0 = 1.0) {
    if (!(sizes.size() == 2 && sizes[0] == 3 && sizes[1] == 1)) validate_architecture(sizes);
    std::vector<double> params;
    params.reserve(nbm::parameter_count(sizes));
    for (std::size_t l = 1; l < sizes.size(); ++l) {
      const double bound = std::sqrt(6.0 / sizes[l - 1]);
      std::uniform_real_distribution<double> dist(-bound, bound);
      const std::size_t nw = static_cast<std::size_t>(sizes[l - 1]) * sizes[l];
      for (std::size_t i = 0; i < nw; ++i) params.push_back(dist(rng));
      params.insert(params.end(), static_cast<std::size_t>(sizes[l]), 0.0);
    }
    return SineMlp(sizes, std::move(params), omega0);
  }

  static SineMlp init(const std::vector<int>& sizes, std::uint64_t seed, double omega0 = 1.0) {
    std::mt19937_64 rng(seed);
    return init(sizes, rng, omega0);
  }

  const std::vector<int>& layer_sizes() const { return sizes_; }
  std::span<const double> params() const { return params_; }
  std::span<double> params() { return params_; }
  std::size_t parameter_count() const { return params_.size(); }
  double omega0() const { return omega0_; }

  double forward(const Vec3& p) const {
    double buf_a[kStackWidth];
    double buf_b[kStackWidth];
    std::vector<double> heap;
    double* cur = buf_a;
    double* next = buf_b;
    if (max_width_ > kStackWidth) {
      heap.resize(2 * static_cast<std::size_t>(max_width_));
      cur = heap.data();
      next = heap.data() + max_width_;
    }
    cur[0] = p.x;
    cur[1] = p.y;
    cur[2] = p.z;
    const double* w = params_.data();
    const std::size_t layers = sizes_.size() - 1;
    for (std::size_t l = 0; l < layers; ++l) {
      const int fan_in = sizes_[l];
      const int fan_out = sizes_[l + 1];
      const double* b = w + static_cast<std::size_t>(fan_in) * fan_out;
      const bool hidden = l + 1 < layers;
      for (int o = 0; o < fan_out; ++o) {
        const double* row = w + static_cast<std::size_t>(o) * fan_in;
        double z = b[o];
        for (int i = 0; i < fan_in; ++i) z += row[i] * cur[i];
        next[o] = hidden ? std::sin(omega0_ * z) : z;
      }
      w = b + fan_out;
      std::swap(cur, next);
    }
    return cur[0];
  }

  /// Adds d(cotangent * forward(p))/d(theta) into `grad` (length parameter_count()).
  /// Returns forward(p).
  double accumulate_gradient(const Vec3& p, double cotangent, std::span<double> grad) const {
    if (grad.size() != params_.size()) throw std::invalid_argument("gradient span has wrong length");
    const std::size_t layers = sizes_.size() - 1;
    // acts holds the input and every hidden activation; dact the matching omega*cos(omega*z).
    thread_local std::vector<double> acts;
    thread_local std::vector<double> dact;
    thread_local std::vector<double> delta;
    thread_local std::vector<double> delta_prev;
    acts.resize(total_units_);
    dact.resize(total_units_);
    delta.resize(static_cast<std::size_t>(max_width_));
    delta_prev.resize(static_cast<std::size_t>(max_width_));
    const auto& offsets = act_offsets_;
    const auto& woffsets = weight_offsets_;

    acts[0] = p.x;
    acts[1] = p.y;
    acts[2] = p.z;
    double out = 0.0;
    for (std::size_t l = 0; l < layers; ++l) {
      const int fan_in = sizes_[l];
      const int fan_out = sizes_[l + 1];
      const double* w = params_.data() + woffsets[l];
      const double* b = w + static_cast<std::size_t>(fan_in) * fan_out;
      const double* in = acts.data() + offsets[l];
      const bool hidden = l + 1 < layers;
      for (int o = 0; o < fan_out; ++o) {
        const double* row = w + static_cast<std::size_t>(o) * fan_in;
        double z = b[o];
        for (int i = 0; i < fan_in; ++i) z += row[i] * in[i];
        if (hidden) {
          const double arg = omega0_ * z;
          acts[offsets[l + 1] + o] = std::sin(arg);
          dact[offsets[l + 1] + o] = omega0_ * std::cos(arg);
        } else {
          out = z;
        }
      }
    }
    if (cotangent == 0.0) return out;

    delta[0] = cotangent;
    for (std::size_t l = layers; l-- > 0;) {
      const int fan_in = sizes_[l];
      const int fan_out = sizes_[l + 1];
      const double* w = params_.data() + woffsets[l];
      double* gw = grad.data() + woffsets[l];
      double* gb = gw + static_cast<std::size_t>(fan_in) * fan_out;
      const double* in = acts.data() + offsets[l];
      for (int o = 0; o < fan_out; ++o) {
        const double d = delta[static_cast<std::size_t>(o)];
        double* grow = gw + static_cast<std::size_t>(o) * fan_in;
        for (int i = 0; i < fan_in; ++i) grow[i] += d * in[i];
        gb[o] += d;
      }
      if (l == 0) break;
      for (int i = 0; i < fan_in; ++i) {
        double s = 0.0;
        for (int o = 0; o < fan_out; ++o) s += w[static_cast<std::size_t>(o) * fan_in + i] * delta[static_cast<std::size_t>(o)];
        delta_prev[static_cast<std::size_t>(i)] = s * dact[offsets[l] + i];
      }
      std::swap(delta, delta_prev);
    }
    return out;
  }

  /// d(cotangent * forward(p))/d(theta) as a fresh vector.
  std::vector<double> backward(const Vec3& p, double cotangent) const {
    std::vector<double> g(params_.size(), 0.0);
    accumulate_gradient(p, cotangent, g);
    return g;
  }

 private:
  static constexpr int kStackWidth = 128;

  std::vector<int> sizes_;
  std::vector<double> params_;
  double omega0_ = 1.0;
  int max_width_ = 0;
  std::size_t total_units_ = 0;
  std::vector<std::size_t> act_offsets_;
  std::vector<std::size_t> weight_offsets_;
};

/// The two surrogates u- (interior) and u+ (exterior).
struct SolutionPair {
  SineMlp net_minus;
  SineMlp net_plus;

  static SolutionPair init(const std::vector<int>& sizes, std::uint64_t seed, double omega0 = 1.0) {
    std::mt19937_64 rng(seed);
    SolutionPair pair;
    pair.net_minus = SineMlp::init(sizes, rng, omega0);
    pair.net_plus = SineMlp::init(sizes, rng, omega0);
    return pair;
  }

  const SineMlp& net(Side s) const { return s == Side::Minus ? net_minus : net_plus; }
  SineMlp& net(Side s) { return s == Side::Minus ? net_minus : net_plus; }

  std::size_t parameter_count() const { return net_minus.parameter_count() + net_plus.parameter_count(); }

  /// Offset of net(s)'s parameters inside the flat parameter vector.
  std::size_t offset(Side s) const { return s == Side::Minus ? 0 : net_minus.parameter_count(); }

  double value(Side s, const Vec3& p) const { return net(s).forward(p); }

  /// Canonical flat layout: net_minus then net_plus.
  std::vector<double> flatten() const {
    std::vector<double> v;
    v.reserve(parameter_count());
    v.insert(v.end(), net_minus.params().begin(), net_minus.params().end());
    v.insert(v.end(), net_plus.params().begin(), net_plus.params().end());
    return v;
  }

  void unflatten(std::span<const double> v) {
    if (v.size() != parameter_count()) throw std::invalid_argument("parameter vector has wrong length");
    auto m = net_minus.params();
    auto p = net_plus.params();
    std::copy(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(m.size()), m.begin());
    std::copy(v.begin() + static_cast<std::ptrdiff_t>(m.size()), v.end(), p.begin());
  }
};

/// Picks the network by the side of p.
inline double evaluate_solution(const SolutionPair& pair, const LevelSet& ls, const Vec3& p) {
  return pair.value(ls.side(p), p);
}

}  // namespace nbm
