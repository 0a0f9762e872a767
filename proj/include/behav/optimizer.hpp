#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "behav/errors.hpp"
#include "behav/random.hpp"

namespace behav {

template <std::size_t N>
using Vec = std::array<double, N>;

template <std::size_t N>
struct BoxBounds {
  Vec<N> lower{};
  Vec<N> upper{};

  void validate() const {
    for (std::size_t i = 0; i < N; ++i)
      if (!(lower[i] <= upper[i])) throw InvalidArgument("bounds: lower > upper");
  }

  Vec<N> clip(Vec<N> x) const {
    for (std::size_t i = 0; i < N; ++i) x[i] = std::clamp(x[i], lower[i], upper[i]);
    return x;
  }

  bool contains(const Vec<N>& x) const {
    for (std::size_t i = 0; i < N; ++i)
      if (x[i] < lower[i] || x[i] > upper[i]) return false;
    return true;
  }
};

// Radical inverse of `index` in `base`.
inline double radical_inverse(std::uint64_t index, std::uint32_t base) {
  double inv = 1.0 / base, f = inv, r = 0.0;
  while (index > 0) {
    r += f * static_cast<double>(index % base);
    index /= base;
    f *= inv;
  }
  return r;
}

// Halton points with a seeded Cranley-Patterson rotation.
template <std::size_t N>
class HaltonSequence {
 public:
  explicit HaltonSequence(std::uint64_t seed) {
    static constexpr std::uint32_t kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};
    static_assert(N <= std::size(kPrimes));
    Rng rng(mix_seed(seed, 0x4a1e));
    for (std::size_t i = 0; i < N; ++i) {
      bases_[i] = kPrimes[i];
      shift_[i] = rng.uniform();
    }
  }

  // Point `index` (>= 1) in [0, 1)^N.
  Vec<N> point(std::uint64_t index) const {
    Vec<N> u{};
    for (std::size_t i = 0; i < N; ++i) {
      double v = radical_inverse(index, bases_[i]) + shift_[i];
      u[i] = v - std::floor(v);
    }
    return u;
  }

 private:
  std::array<std::uint32_t, N> bases_{};
  Vec<N> shift_{};
};

template <std::size_t N>
struct OptimizeResult {
  Vec<N> x{};
  double value = std::numeric_limits<double>::infinity();
  double best_global_value = std::numeric_limits<double>::infinity();
  int evaluations = 0;
};

struct OptimizerOptions {
  int local_starts = 3;
  double expand = 2.0;
  double contract = 0.5;
  double shrink = 0.5;
  double min_simplex = 1e-10;  // in box-normalized units
};

namespace detail {

template <std::size_t N, class F>
class BudgetedObjective {
 public:
  BudgetedObjective(F& f, const BoxBounds<N>& box, int budget) : f_(f), box_(box), budget_(budget) {}

  bool exhausted() const { return used_ >= budget_; }
  int used() const { return used_; }

  Vec<N> to_box(const Vec<N>& u) const {
    Vec<N> x{};
    for (std::size_t i = 0; i < N; ++i)
      x[i] = std::clamp(box_.lower[i] + u[i] * (box_.upper[i] - box_.lower[i]), box_.lower[i],
                        box_.upper[i]);
    return x;
  }

  double operator()(const Vec<N>& u) {
    ++used_;
    const auto x = to_box(u);
    const double v = f_(x);
    const double val = std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
    if (val < best_.value) {
      best_.value = val;
      best_.x = x;
    }
    return val;
  }

  OptimizeResult<N>& best() { return best_; }

 private:
  F& f_;
  const BoxBounds<N>& box_;
  int budget_;
  int used_ = 0;
  OptimizeResult<N> best_{};
};

// Nelder-Mead over the active (non-degenerate) coordinates of the unit box.
// The simplex lives in an unbounded coordinate y with
// u = clamp((A sin(y) + 1) / 2, 0, 1), A = kFoldAmplitude. Box faces become
// turning points the simplex can sit on or pass through instead of walls it
// flattens against, and a face is reached exactly over a range of y.
inline constexpr double kFoldAmplitude = 2.0;

template <std::size_t N, class Obj>
void nelder_mead(Obj& obj, Vec<N> start, double start_value, double step,
                 const std::vector<std::size_t>& active, int budget, const OptimizerOptions& opt) {
  const std::size_t d = active.size();
  if (d == 0 || budget <= 0) return;
  const int stop_at = obj.used() + budget;
  auto to_u = [&](const Vec<N>& y) {
    Vec<N> u = start;
    for (auto a : active) u[a] = std::clamp(0.5 * (kFoldAmplitude * std::sin(y[a]) + 1.0), 0.0, 1.0);
    return u;
  };
  auto eval = [&](const Vec<N>& y) { return obj(to_u(y)); };

  Vec<N> y0 = start;
  for (auto a : active) y0[a] = std::asin(std::clamp((2.0 * start[a] - 1.0) / kFoldAmplitude, -1.0, 1.0));
  // du/dy <= A/2, so this y-step moves u by at most `step`.
  const double ystep = 2.0 * step / kFoldAmplitude;
  std::vector<Vec<N>> pts{y0};
  std::vector<double> vals{start_value};
  for (std::size_t k = 0; k < d && obj.used() < stop_at && !obj.exhausted(); ++k) {
    Vec<N> p = y0;
    const auto i = active[k];
    p[i] += y0[i] > 0 ? -ystep : ystep;
    pts.push_back(p);
    vals.push_back(eval(p));
  }
  if (pts.size() != d + 1) return;

  std::vector<std::size_t> order(d + 1);
  while (obj.used() < stop_at && !obj.exhausted()) {
    for (std::size_t i = 0; i <= d; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
    const std::size_t best = order.front(), worst = order.back(), second = order[d - 1];

    double diameter = 0.0;
    for (std::size_t i = 0; i <= d; ++i)
      for (auto a : active) diameter = std::max(diameter, std::abs(pts[i][a] - pts[best][a]));
    if (diameter < opt.min_simplex) return;

    Vec<N> centroid = y0;
    for (auto a : active) {
      double s = 0.0;
      for (std::size_t i = 0; i <= d; ++i)
        if (i != worst) s += pts[i][a];
      centroid[a] = s / static_cast<double>(d);
    }
    auto along = [&](double t) {
      Vec<N> p = centroid;
      for (auto a : active) p[a] = centroid[a] + t * (pts[worst][a] - centroid[a]);
      return p;
    };

    const Vec<N> refl = along(-1.0);
    const double fr = eval(refl);
    if (fr < vals[best]) {
      if (obj.used() >= stop_at || obj.exhausted()) {
        pts[worst] = refl;
        vals[worst] = fr;
        return;
      }
      const Vec<N> exp = along(-opt.expand);
      const double fe = eval(exp);
      if (fe < fr) {
        pts[worst] = exp;
        vals[worst] = fe;
      } else {
        pts[worst] = refl;
        vals[worst] = fr;
      }
      continue;
    }
    if (fr < vals[second]) {
      pts[worst] = refl;
      vals[worst] = fr;
      continue;
    }
    if (obj.used() >= stop_at || obj.exhausted()) return;
    const bool outside = fr < vals[worst];
    const Vec<N> con = along(outside ? -opt.contract : opt.contract);
    const double fc = eval(con);
    if (fc < (outside ? fr : vals[worst])) {
      pts[worst] = con;
      vals[worst] = fc;
      continue;
    }
    for (std::size_t i = 0; i <= d && obj.used() < stop_at && !obj.exhausted(); ++i) {
      if (i == best) continue;
      for (auto a : active) pts[i][a] = pts[best][a] + opt.shrink * (pts[i][a] - pts[best][a]);
      vals[i] = eval(pts[i]);
    }
  }
}

}  // namespace detail

// Minimizes f over the box: half the budget on low-discrepancy samples, the
// rest split across Nelder-Mead refinements of the best few samples. Returns
// the lowest value seen, always inside the box.
template <std::size_t N, class F>
OptimizeResult<N> optimize(F&& f, const BoxBounds<N>& box, std::uint64_t seed, int budget,
                           const OptimizerOptions& opt = {}) {
  box.validate();
  if (budget < 16) throw InvalidArgument("optimize: budget must be >= 16");
  detail::BudgetedObjective<N, std::remove_reference_t<F>> obj(f, box, budget);

  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < N; ++i)
    if (box.upper[i] > box.lower[i]) active.push_back(i);

  const int n_global = budget / 2;
  const HaltonSequence<N> seq(seed);
  struct Candidate {
    Vec<N> u;
    double value;
    int index;
  };
  std::vector<Candidate> cands;
  cands.reserve(static_cast<std::size_t>(n_global));
  for (int k = 0; k < n_global; ++k) {
    const auto u = seq.point(static_cast<std::uint64_t>(k) + 1);
    cands.push_back({u, obj(u), k});
  }
  auto best_global = std::min_element(cands.begin(), cands.end(), [](const auto& a, const auto& b) {
    return a.value < b.value || (a.value == b.value && a.index < b.index);
  });
  const double best_global_value = best_global->value;

  const int starts = std::min<int>(opt.local_starts, n_global);
  std::partial_sort(cands.begin(), cands.begin() + starts, cands.end(), [](const auto& a, const auto& b) {
    return a.value < b.value || (a.value == b.value && a.index < b.index);
  });

  const double step =
      active.empty() ? 0.0 : 0.5 * std::pow(static_cast<double>(n_global), -1.0 / static_cast<double>(active.size()));
  for (int s = 0; s < starts && !obj.exhausted(); ++s) {
    const int remaining = budget - obj.used();
    const int share = remaining / (starts - s);
    detail::nelder_mead<N>(obj, cands[static_cast<std::size_t>(s)].u, cands[static_cast<std::size_t>(s)].value,
                           step, active, share, opt);
  }

  auto result = obj.best();
  result.x = box.clip(result.x);
  result.best_global_value = best_global_value;
  result.evaluations = obj.used();
  return result;
}

}  // namespace behav
