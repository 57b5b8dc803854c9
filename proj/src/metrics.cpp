// SPDX-License-Identifier: Apache-2.0
#include "vpiqa/metrics.hpp"

#include <Eigen/Core>
#include <unsupported/Eigen/NonLinearOptimization>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "vpiqa/error.hpp"

namespace vpiqa {

namespace {

void check_pair(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw InputError("correlation inputs differ in length: " + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  if (a.size() < 2) throw InputError("correlation needs at least 2 samples");
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!std::isfinite(a[i]) || !std::isfinite(b[i])) throw InputError("correlation inputs must be finite");
}

double pearson_unchecked(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw UndefinedCorrelation("correlation undefined for constant input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

bool is_constant(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
}

}  // namespace

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

double srcc(std::span<const double> preds, std::span<const double> targets) {
  check_pair(preds, targets);
  if (is_constant(preds) || is_constant(targets)) throw UndefinedCorrelation("SRCC undefined for constant input");
  const auto rp = average_ranks(preds);
  const auto rt = average_ranks(targets);
  return pearson_unchecked(rp, rt);
}

double plcc(std::span<const double> preds, std::span<const double> targets) {
  check_pair(preds, targets);
  if (is_constant(preds) || is_constant(targets)) throw UndefinedCorrelation("PLCC undefined for constant input");
  return pearson_unchecked(preds, targets);
}

double logistic4(double x, const std::array<double, 4>& b) {
  return b[1] + (b[0] - b[1]) / (1.0 + std::exp(-(x - b[2]) / b[3]));
}

namespace {

struct LogisticResiduals {
  using Scalar = double;
  enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };
  using InputType = Eigen::VectorXd;
  using ValueType = Eigen::VectorXd;
  using JacobianType = Eigen::MatrixXd;

  std::span<const double> x;
  std::span<const double> y;

  int inputs() const { return 4; }
  int values() const { return static_cast<int>(x.size()); }

  int operator()(const Eigen::VectorXd& b, Eigen::VectorXd& r) const {
    const std::array<double, 4> p{b[0], b[1], b[2], b[3]};
    for (std::size_t i = 0; i < x.size(); ++i) r[static_cast<Eigen::Index>(i)] = logistic4(x[i], p) - y[i];
    return 0;
  }

  int df(const Eigen::VectorXd& b, Eigen::MatrixXd& j) const {
    for (std::size_t i = 0; i < x.size(); ++i) {
      const auto row = static_cast<Eigen::Index>(i);
      const double u = (x[i] - b[2]) / b[3];
      const double sig = 1.0 / (1.0 + std::exp(-u));
      const double dsig = sig * (1.0 - sig);
      j(row, 0) = sig;
      j(row, 1) = 1.0 - sig;
      j(row, 2) = (b[0] - b[1]) * dsig * (-1.0 / b[3]);
      j(row, 3) = (b[0] - b[1]) * dsig * (-u / b[3]);
    }
    return 0;
  }
};

double sse(std::span<const double> x, std::span<const double> y, const std::array<double, 4>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = logistic4(x[i], b) - y[i];
    s += r * r;
  }
  return s;
}

}  // namespace

LogisticPlcc plcc_with_logistic(std::span<const double> preds, std::span<const double> targets) {
  const double raw = plcc(preds, targets);
  LogisticPlcc out{raw, false, {}, {}};
  if (preds.size() < 5) {
    out.note = "too few samples for a 4-parameter fit";
    return out;
  }

  const double n = static_cast<double>(preds.size());
  const double mx = std::accumulate(preds.begin(), preds.end(), 0.0) / n;
  const double my = std::accumulate(targets.begin(), targets.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    sxx += (preds[i] - mx) * (preds[i] - mx);
    sxy += (preds[i] - mx) * (targets[i] - my);
  }
  const double sx = std::sqrt(sxx / n);
  const double slope = sxy / sxx;
  const auto [tmin, tmax] = std::minmax_element(targets.begin(), targets.end());

  // Two starts: a conventional one spanning the target range, and one that
  // reproduces the least-squares line in the logistic's near-linear regime.
  const double wide = 100.0 * sx;
  const std::array<std::array<double, 4>, 2> starts{{
      {slope >= 0 ? *tmax : *tmin, slope >= 0 ? *tmin : *tmax, mx, sx},
      {my + 2.0 * wide * slope, my - 2.0 * wide * slope, mx, wide},
  }};

  LogisticResiduals functor{preds, targets};
  double best_sse = std::numeric_limits<double>::infinity();
  for (const auto& start : starts) {
    Eigen::VectorXd b(4);
    b << start[0], start[1], start[2], start[3];
    Eigen::LevenbergMarquardt<LogisticResiduals> lm(functor);
    lm.parameters.maxfev = 4000;
    lm.parameters.ftol = 1e-14;
    lm.parameters.xtol = 1e-14;
    const auto status = lm.minimize(b);
    using namespace Eigen::LevenbergMarquardtSpace;
    if (status == ImproperInputParameters) continue;
    const std::array<double, 4> p{b[0], b[1], b[2], b[3]};
    if (!std::all_of(p.begin(), p.end(), [](double v) { return std::isfinite(v); }) || p[3] == 0.0) continue;
    const double s = sse(preds, targets, p);
    // On near-linear data the optimum sits at b4 -> inf; the iterate at the
    // evaluation limit is still usable if it improved on its start.
    const bool capped = status == TooManyFunctionEvaluation;
    if (capped && !(s <= sse(preds, targets, start))) continue;
    if (s < best_sse) {
      best_sse = s;
      out.params = p;
      out.fitted = true;
      out.note = capped ? "logistic fit stopped at the evaluation limit" : "";
    }
  }
  if (!out.fitted) {
    out.note = "logistic fit did not converge; reporting raw PLCC";
    return out;
  }
  std::vector<double> mapped(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) mapped[i] = logistic4(preds[i], out.params);
  try {
    out.value = pearson_unchecked(mapped, targets);
  } catch (const UndefinedCorrelation&) {
    out.value = raw;
    out.fitted = false;
    out.note = "logistic fit collapsed to a constant; reporting raw PLCC";
  }
  return out;
}

}  // namespace vpiqa
