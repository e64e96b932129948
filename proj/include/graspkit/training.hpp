// Mini-batch training loop with Adam/SGD, per-epoch CSV logging, and
// checkpointing. Single-threaded and deterministic for a fixed seed.
#pragma once

#include <chrono>
#include <cstdio>
#include <functional>
#include <numeric>

#include "graspkit/network.hpp"

namespace graspkit {
namespace net {

enum class OptimizerKind { kAdam, kSgd };

struct FitConfig {
  int epochs = 100;
  int batch_size = 8;
  double lr = 1e-3;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  bool check_finite = false;
  std::string log_csv_path;     // per-epoch CSV when non-empty
  std::string checkpoint_path;  // rewritten after every epoch when non-empty
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double eval_loss = 0.0;
  double wall_ms = 0.0;
};

struct FitResult {
  std::vector<EpochStats> history;
};

template <typename S>
struct NetSample {
  Tensor4<S> x;  // [1, in_ch, h, w]
  Tensor4<S> y;  // [1, 4, h, w]
};

template <typename S>
struct Adam {
  std::vector<S> m, v;
  long t = 0;

  void step(std::vector<S>& p, const std::vector<S>& g, const FitConfig& c) {
    if (m.empty()) {
      m.assign(p.size(), S(0));
      v.assign(p.size(), S(0));
    }
    ++t;
    const double b1 = c.adam_beta1, b2 = c.adam_beta2;
    const double corr1 = 1.0 - std::pow(b1, double(t));
    const double corr2 = 1.0 - std::pow(b2, double(t));
    for (size_t i = 0; i < p.size(); ++i) {
      double gi = double(g[i]);
      double mi = b1 * double(m[i]) + (1.0 - b1) * gi;
      double vi = b2 * double(v[i]) + (1.0 - b2) * gi * gi;
      m[i] = S(mi);
      v[i] = S(vi);
      p[i] = S(double(p[i]) - c.lr * (mi / corr1) / (std::sqrt(vi / corr2) + c.adam_eps));
    }
  }
};

/// Mean loss over a sample set; parameters are read-only here.
template <typename S>
double evaluate(const NetworkConfig& cfg, const NetLayout& layout, const std::vector<S>& params,
                const std::vector<NetSample<S>>& samples, Workspace<S>& ws) {
  if (samples.empty()) return 0.0;
  double total = 0.0;
  for (const NetSample<S>& s : samples) {
    const Tensor4<S>& pred = forward(cfg, layout, params, s.x, ws);
    total += loss_forward(pred, s.y, cfg.loss_weights);
  }
  return total / double(samples.size());
}

/// Deterministic in-place Fisher-Yates; avoids std::shuffle's
/// implementation-defined draw sequence.
inline void deterministic_shuffle(std::vector<int>& idx, Rng& rng) {
  for (size_t i = idx.size(); i > 1; --i) {
    size_t j = size_t(rng() % i);
    std::swap(idx[i - 1], idx[j]);
  }
}

/// Pulls sample index i into a caller-owned buffer; lets fit stream an
/// on-disk set that would not fit in memory.
template <typename S>
using SampleLoader = std::function<void(int, NetSample<S>&)>;

template <typename S>
FitResult fit(const NetworkConfig& cfg, std::vector<S>& params, const SampleLoader<S>& load,
              int n_train, const std::vector<NetSample<S>>& eval_set, const FitConfig& fc,
              const std::function<void(const EpochStats&)>& on_epoch = nullptr) {
  require(n_train > 0, "fit: empty training set");
  require(fc.batch_size >= 1, "fit: batch_size must be >= 1");
  NetLayout layout = compute_layout(cfg);
  require(params.size() == layout.total_params, "fit: parameter vector size mismatch");

  Workspace<S> ws;
  std::vector<S> grads(layout.total_params, S(0));
  std::vector<S> sample_grads(layout.total_params, S(0));
  Adam<S> adam;
  Tensor4<S> loss_grad;
  NetSample<S> cur;
  Rng rng(fc.seed);
  std::vector<int> idx(static_cast<size_t>(n_train));
  std::iota(idx.begin(), idx.end(), 0);

  std::FILE* csv = nullptr;
  if (!fc.log_csv_path.empty()) {
    csv = std::fopen(fc.log_csv_path.c_str(), "w");
    require(csv != nullptr, "fit: cannot open log " + fc.log_csv_path);
    std::fprintf(csv, "epoch,train_loss,eval_loss,wall_ms\n");
  }

  FitResult result;
  for (int epoch = 0; epoch < fc.epochs; ++epoch) {
    auto t0 = std::chrono::steady_clock::now();
    deterministic_shuffle(idx, rng);
    double epoch_loss = 0.0;
    size_t seen = 0;
    for (size_t start = 0; start < idx.size(); start += size_t(fc.batch_size)) {
      size_t stop = std::min(idx.size(), start + size_t(fc.batch_size));
      std::fill(grads.begin(), grads.end(), S(0));
      for (size_t i = start; i < stop; ++i) {
        load(idx[i], cur);
        const Tensor4<S>& pred = forward(cfg, layout, params, cur.x, ws, fc.check_finite);
        epoch_loss += loss_forward(pred, cur.y, cfg.loss_weights);
        loss_backward(pred, cur.y, cfg.loss_weights, loss_grad);
        std::fill(sample_grads.begin(), sample_grads.end(), S(0));
        backward(cfg, layout, params, cur.x, ws, loss_grad, sample_grads);
        for (size_t j = 0; j < grads.size(); ++j) grads[j] += sample_grads[j];
      }
      const S inv = S(1.0 / double(stop - start));
      for (S& g : grads) g *= inv;
      if (fc.optimizer == OptimizerKind::kAdam) {
        adam.step(params, grads, fc);
      } else {
        for (size_t j = 0; j < params.size(); ++j) params[j] = S(double(params[j]) - fc.lr * double(grads[j]));
      }
      seen += stop - start;
    }
    EpochStats st;
    st.epoch = epoch;
    st.train_loss = epoch_loss / double(seen);
    st.eval_loss = evaluate(cfg, layout, params, eval_set, ws);
    st.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                     .count();
    if (csv) {
      std::fprintf(csv, "%d,%.9g,%.9g,%.3f\n", st.epoch, st.train_loss, st.eval_loss, st.wall_ms);
      std::fflush(csv);
    }
    if (!fc.checkpoint_path.empty()) {
      if constexpr (std::is_same_v<S, float>) {
        save_checkpoint(fc.checkpoint_path, cfg, params);
      } else {
        std::vector<float> f32(params.begin(), params.end());
        save_checkpoint(fc.checkpoint_path, cfg, f32);
      }
    }
    result.history.push_back(st);
    if (on_epoch) on_epoch(st);
  }
  if (csv) std::fclose(csv);
  return result;
}

template <typename S>
FitResult fit(const NetworkConfig& cfg, std::vector<S>& params,
              const std::vector<NetSample<S>>& train, const std::vector<NetSample<S>>& eval_set,
              const FitConfig& fc,
              const std::function<void(const EpochStats&)>& on_epoch = nullptr) {
  SampleLoader<S> load = [&train](int i, NetSample<S>& out) { out = train[size_t(i)]; };
  return fit(cfg, params, load, int(train.size()), eval_set, fc, on_epoch);
}

}  // namespace net
}  // namespace graspkit
