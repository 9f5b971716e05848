#pragma once

// Loop-level reference for the two-stream encoder. It reads parameter values
// by name and evaluates attention pair by pair, deciding visibility directly
// from factorization ranks rather than from precomputed masks.

#include <cmath>
#include <string>
#include <vector>

#include "ventcast/encoder/model.hpp"

namespace ventcast::testing {

class ReferenceEncoder {
 public:
  explicit ReferenceEncoder(const encoder::EncoderModel& model) : model_(model), c_(model.config()) {}

  // Log-probability of the true token at each target in `order` positions
  // >= cutoff, in factorization order.
  std::vector<double> plm_log_probs(const text::TokenSequence& seq, const std::vector<std::size_t>& order,
                                    std::size_t cutoff) const {
    const auto len = seq.ids.size();
    std::vector<std::size_t> rank(len);
    for (std::size_t r = 0; r < len; ++r) rank[order[r]] = r;
    std::vector<std::size_t> targets(order.begin() + static_cast<std::ptrdiff_t>(cutoff), order.end());

    Matrix h(len), g(targets.size());
    for (std::size_t i = 0; i < len; ++i) h[i] = row("word_emb", static_cast<std::size_t>(seq.ids[i]));
    for (auto& v : g) v = row("mask_emb", 0);

    for (std::size_t l = 0; l < c_.n_layers; ++l) {
      Matrix h_next(len), g_next(targets.size());
      for (std::size_t i = 0; i < len; ++i) {
        h_next[i] = block(l, h[i], i, h, [&](std::size_t k) { return rank[k] <= rank[i] && k < seq.true_length; });
      }
      for (std::size_t t = 0; t < targets.size(); ++t) {
        const auto pos = targets[t];
        g_next[t] = block(l, g[t], pos, h, [&](std::size_t k) { return rank[k] < rank[pos] && k < seq.true_length; });
      }
      h = std::move(h_next);
      g = std::move(g_next);
    }

    const auto vp = model_.predictable_vocab();
    std::vector<double> out;
    for (std::size_t t = 0; t < targets.size(); ++t) {
      std::vector<double> logits(vp);
      for (std::size_t v = 0; v < vp; ++v) {
        double acc = value("lm.b", v);
        for (std::size_t d = 0; d < c_.d_model; ++d) acc += g[t][d] * value("lm.w", d * vp + v);
        logits[v] = acc;
      }
      double total = 0.0;
      for (double z : logits) total += std::exp(z);
      out.push_back(logits[static_cast<std::size_t>(seq.ids[targets[t]]) - 3] - std::log(total));
    }
    return out;
  }

 private:
  using Vector = std::vector<double>;
  using Matrix = std::vector<Vector>;

  double value(const std::string& name, std::size_t flat) const { return model_.param(name).data()[flat]; }

  Vector row(const std::string& name, std::size_t r) const {
    const auto& t = model_.param(name);
    const auto n = t.cols();
    return Vector(t.data().begin() + static_cast<std::ptrdiff_t>(r * n), t.data().begin() + static_cast<std::ptrdiff_t>((r + 1) * n));
  }

  std::string lp(std::size_t l, const std::string& leaf) const { return "layer." + std::to_string(l) + "." + leaf; }

  // x · W[:, col0 : col0+width] for W stored row-major [rows x cols].
  Vector project(const Vector& x, const std::string& name, std::size_t col0, std::size_t width) const {
    const auto& t = model_.param(name);
    const auto cols = t.cols();
    Vector out(width, 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
      for (std::size_t j = 0; j < width; ++j) out[j] += x[i] * t.data()[i * cols + col0 + j];
    }
    return out;
  }

  Vector sinusoid(double distance) const {
    Vector out(c_.d_model);
    for (std::size_t j = 0; j < c_.d_model; ++j) {
      const double freq = std::pow(10000.0, -2.0 * static_cast<double>(j / 2) / static_cast<double>(c_.d_model));
      out[j] = j % 2 == 0 ? std::sin(distance * freq) : std::cos(distance * freq);
    }
    return out;
  }

  Vector layer_norm(const Vector& x, const std::string& gamma, const std::string& beta) const {
    double mu = 0.0, var = 0.0;
    for (double v : x) mu += v;
    mu /= static_cast<double>(x.size());
    for (double v : x) var += (v - mu) * (v - mu);
    var /= static_cast<double>(x.size());
    Vector out(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) {
      out[j] = value(gamma, j) * (x[j] - mu) / std::sqrt(var + 1e-5) + value(beta, j);
    }
    return out;
  }

  template <class Visible>
  Vector block(std::size_t l, const Vector& x, std::size_t pos, const Matrix& keys, Visible visible) const {
    const auto dh = c_.d_head;
    Vector attended(c_.d_model, 0.0);
    for (std::size_t head = 0; head < c_.n_heads; ++head) {
      const auto col0 = head * dh;
      auto q = project(x, lp(l, "attn.q"), col0, dh);
      std::vector<double> scores;
      std::vector<std::size_t> seen;
      for (std::size_t k = 0; k < keys.size(); ++k) {
        if (!visible(k)) continue;
        auto kk = project(keys[k], lp(l, "attn.k"), col0, dh);
        auto r = project(sinusoid(static_cast<double>(pos) - static_cast<double>(k)), lp(l, "attn.r"), col0, dh);
        double s = 0.0;
        for (std::size_t j = 0; j < dh; ++j) {
          s += (q[j] + value(lp(l, "attn.r_w_bias"), col0 + j)) * kk[j];
          s += (q[j] + value(lp(l, "attn.r_r_bias"), col0 + j)) * r[j];
        }
        scores.push_back(s / std::sqrt(static_cast<double>(dh)));
        seen.push_back(k);
      }
      if (seen.empty()) continue;
      double mx = scores[0];
      for (double s : scores) mx = std::max(mx, s);
      double total = 0.0;
      for (auto& s : scores) total += (s = std::exp(s - mx));
      for (std::size_t n = 0; n < seen.size(); ++n) {
        auto v = project(keys[seen[n]], lp(l, "attn.v"), col0, dh);
        for (std::size_t j = 0; j < dh; ++j) attended[col0 + j] += scores[n] / total * v[j];
      }
    }
    auto o = project(attended, lp(l, "attn.o"), 0, c_.d_model);
    Vector x1(c_.d_model);
    for (std::size_t j = 0; j < c_.d_model; ++j) x1[j] = x[j] + o[j];
    x1 = layer_norm(x1, lp(l, "ln1.gamma"), lp(l, "ln1.beta"));
    auto hidden = project(x1, lp(l, "ff.w1"), 0, c_.d_inner);
    for (std::size_t j = 0; j < c_.d_inner; ++j) {
      const double z = hidden[j] + value(lp(l, "ff.b1"), j);
      hidden[j] = 0.5 * z * (1.0 + std::erf(z / std::sqrt(2.0)));
    }
    auto ff = project(hidden, lp(l, "ff.w2"), 0, c_.d_model);
    Vector x2(c_.d_model);
    for (std::size_t j = 0; j < c_.d_model; ++j) x2[j] = x1[j] + ff[j] + value(lp(l, "ff.b2"), j);
    return layer_norm(x2, lp(l, "ln2.gamma"), lp(l, "ln2.beta"));
  }

  const encoder::EncoderModel& model_;
  encoder::EncoderConfig c_;
};

}  // namespace ventcast::testing
