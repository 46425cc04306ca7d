#include "sonic/optimizer.hpp"

#include "sonic/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace sonic {

std::string_view to_string(Schedule s) noexcept { return s == Schedule::constant ? "constant" : "one-cycle"; }

Schedule parse_schedule(std::string_view name) {
  if (name == "constant") return Schedule::constant;
  if (name == "one-cycle" || name == "one_cycle") return Schedule::one_cycle;
  throw std::invalid_argument("unknown schedule '" + std::string(name) + "'");
}

double OneCycle::lr_at(std::size_t step) const {
  const double initial = max_lr / div_factor;
  const double final_lr = initial / final_div_factor;
  if (total_steps <= 1) return max_lr;
  const double last = static_cast<double>(total_steps - 1);
  const double peak = std::max(1.0, std::floor(pct_start * static_cast<double>(total_steps)) - 1.0);
  const double s = std::min(static_cast<double>(step), last);
  auto anneal = [](double from, double to, double frac) {
    return to + (from - to) / 2.0 * (1.0 + std::cos(std::numbers::pi * frac));
  };
  if (s <= peak) return anneal(initial, max_lr, s / peak);
  return anneal(max_lr, final_lr, last > peak ? (s - peak) / (last - peak) : 1.0);
}

void AdamW::update(const std::string& key, std::span<double> params, std::span<const double> grads, double lr) {
  if (params.size() != grads.size()) throw std::invalid_argument("gradient size mismatch at " + key);
  if (step_ == 0) throw std::logic_error("AdamW::update before begin_step");
  auto& mom = state_[key];
  if (mom.m.size() != params.size()) {
    mom.m.assign(params.size(), 0.0);
    mom.v.assign(params.size(), 0.0);
  }
  const double t = static_cast<double>(step_);
  const double c1 = 1.0 - std::pow(cfg_.beta1, t);
  const double c2 = 1.0 - std::pow(cfg_.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    mom.m[i] = cfg_.beta1 * mom.m[i] + (1.0 - cfg_.beta1) * g;
    mom.v[i] = cfg_.beta2 * mom.v[i] + (1.0 - cfg_.beta2) * g * g;
    const double mhat = mom.m[i] / c1;
    const double vhat = mom.v[i] / c2;
    const double next = params[i] - lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * params[i]);
    if (!std::isfinite(next)) throw NonFiniteError("non-finite optimizer update", key);
    params[i] = next;
  }
}

}  // namespace sonic
