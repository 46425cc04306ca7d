#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sonic {

enum class Schedule { constant, one_cycle };

std::string_view to_string(Schedule s) noexcept;
Schedule parse_schedule(std::string_view name);

/// Cosine one-cycle: warm up from max_lr / div_factor to max_lr over the first
/// pct_start of the steps, then anneal to max_lr / (div_factor * final_div_factor).
struct OneCycle {
  double max_lr = 1e-2;
  std::size_t total_steps = 1;
  double pct_start = 0.3;
  double div_factor = 25.0;
  double final_div_factor = 1e4;

  double lr_at(std::size_t step) const;
};

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

/// AdamW with decoupled weight decay. Moments are keyed by parameter block name,
/// so the update does not depend on the order in which blocks are visited.
class AdamW {
 public:
  struct Moments {
    std::vector<double> m, v;
  };

  AdamW() = default;
  explicit AdamW(AdamWConfig cfg) : cfg_(cfg) {}

  const AdamWConfig& config() const noexcept { return cfg_; }
  std::size_t steps() const noexcept { return step_; }

  /// Advances the shared step counter; call once before the per-block updates.
  void begin_step() { ++step_; }

  /// p <- p - lr * (mhat / (sqrt(vhat) + eps) + wd * p). Throws NonFiniteError
  /// naming `key` if the update produces a non-finite value.
  void update(const std::string& key, std::span<double> params, std::span<const double> grads, double lr);

  /// One full step over keyed parameter and gradient sets with identical key layout.
  template <class Params, class Grads>
  void step(Params& params, const Grads& grads, double lr) {
    std::vector<std::pair<std::string, std::span<const double>>> g;
    grads.visit([&](const std::string& key, std::span<const double> v) { g.emplace_back(key, v); });
    begin_step();
    std::size_t i = 0;
    params.visit([&](const std::string& key, std::span<double> p) {
      if (i >= g.size() || g[i].first != key) throw std::invalid_argument("gradient key mismatch at " + key);
      update(key, p, g[i++].second, lr);
    });
  }

  const std::map<std::string, Moments>& state() const noexcept { return state_; }
  void restore(std::size_t step, std::map<std::string, Moments> state) {
    step_ = step;
    state_ = std::move(state);
  }

 private:
  AdamWConfig cfg_;
  std::size_t step_ = 0;
  std::map<std::string, Moments> state_;
};

}  // namespace sonic
