/*
 * Copyright 2026 the degreesketch authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "dsk/intersect.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace dsk {

const char* to_string(Domination d) {
  switch (d) {
    case Domination::none: return "none";
    case Domination::a_dominates_b: return "a_dominates_b";
    case Domination::a_strictly_dominates_b: return "a_strictly_dominates_b";
    case Domination::b_dominates_a: return "b_dominates_a";
    case Domination::b_strictly_dominates_a: return "b_strictly_dominates_a";
  }
  return "?";
}

CountStats count_stats(const HllSketch& a, const HllSketch& b) {
  if (!a.params().compatible_with(b.params())) {
    throw std::invalid_argument("count_stats: sketches have different parameters");
  }
  const int q = a.params().q;
  const uint32_t r = a.params().r;
  CountStats stats;
  stats.q = q;
  stats.r = r;
  stats.a_less.assign(static_cast<size_t>(q) + 2, 0);
  stats.a_greater.assign(static_cast<size_t>(q) + 2, 0);
  stats.b_less.assign(static_cast<size_t>(q) + 2, 0);
  stats.b_greater.assign(static_cast<size_t>(q) + 2, 0);
  stats.equal.assign(static_cast<size_t>(q) + 2, 0);

  auto tally = [&stats](uint8_t av, uint8_t bv) {
    if (av < bv) {
      ++stats.a_less[av];
      ++stats.b_greater[bv];
    } else if (av > bv) {
      ++stats.a_greater[av];
      ++stats.b_less[bv];
    } else {
      ++stats.equal[av];
    }
  };

  if (a.mode() == HllSketch::Mode::sparse && b.mode() == HllSketch::Mode::sparse) {
    // Walk the two sorted register lists; registers absent from both are
    // equal at zero.
    const auto& ra = a.sparse_registers();
    const auto& rb = b.sparse_registers();
    size_t i = 0, j = 0;
    uint32_t touched = 0;
    while (i < ra.size() || j < rb.size()) {
      if (j == rb.size() || (i < ra.size() && ra[i].first < rb[j].first)) {
        tally(ra[i].second, 0);
        ++i;
      } else if (i == ra.size() || rb[j].first < ra[i].first) {
        tally(0, rb[j].second);
        ++j;
      } else {
        tally(ra[i].second, rb[j].second);
        ++i;
        ++j;
      }
      ++touched;
    }
    stats.equal[0] += r - touched;
  } else {
    for (uint32_t i = 0; i < r; ++i) tally(a.register_value(i), b.register_value(i));
  }
  return stats;
}

Domination detect_domination(const CountStats& stats) {
  bool a_less_zero = true, a_greater_zero = true, b_less_zero = true, b_greater_zero = true;
  bool equal_positive_zero = true;
  for (size_t k = 0; k < stats.equal.size(); ++k) {
    a_less_zero &= stats.a_less[k] == 0;
    a_greater_zero &= stats.a_greater[k] == 0;
    b_less_zero &= stats.b_less[k] == 0;
    b_greater_zero &= stats.b_greater[k] == 0;
    if (k > 0) equal_positive_zero &= stats.equal[k] == 0;
  }
  if (a_less_zero && b_greater_zero && equal_positive_zero) {
    return Domination::a_strictly_dominates_b;
  }
  if (b_less_zero && a_greater_zero && equal_positive_zero) {
    return Domination::b_strictly_dominates_a;
  }
  if (a_less_zero && b_greater_zero) return Domination::a_dominates_b;
  if (b_less_zero && a_greater_zero) return Domination::b_dominates_a;
  return Domination::none;
}

IntersectionEstimate estimate_intersection_ie(const HllSketch& a, const HllSketch& b) {
  if (!a.params().compatible_with(b.params())) {
    throw std::invalid_argument("estimate_intersection_ie: parameter mismatch");
  }
  const double ea = a.estimate();
  const double eb = b.estimate();
  HllSketch merged = a;
  merged.merge_from(b);
  const double eu = merged.estimate();

  IntersectionEstimate est;
  est.method = IntersectionMethod::inclusion_exclusion;
  est.raw_lambda_a = eu - eb;
  est.raw_lambda_b = eu - ea;
  est.raw_lambda_x = ea + eb - eu;
  est.lambda_a = std::max(0.0, est.raw_lambda_a);
  est.lambda_b = std::max(0.0, est.raw_lambda_b);
  est.lambda_x = std::max(0.0, est.raw_lambda_x);
  est.domination = detect_domination(count_stats(a, b));
  est.converged = true;
  return est;
}

double intersection_nll(const CountStats& stats, double rate_a, double rate_b, double rate_x,
                        double grad[3]) {
  const int q = stats.q;
  double f = 0.0, fa = 0.0, fb = 0.0, fx = 0.0;

  // Registers with value k <= q scale the Poisson rates by 2^-k; a register
  // at q+1 has cumulative probability one, so it contributes only the log
  // factor at scale 2^-q and no linear term.
  double term_a = 0.0, term_b = 0.0, term_x = 0.0;
  for (int k = q; k >= 0; --k) {
    const double y = std::ldexp(1.0, -k);
    const auto ca = static_cast<double>(stats.equal[k] + stats.a_less[k] + stats.a_greater[k]);
    const auto cb = static_cast<double>(stats.equal[k] + stats.b_less[k] + stats.b_greater[k]);
    const auto cx = static_cast<double>(stats.equal[k] + stats.a_less[k] + stats.b_less[k]);
    term_a += ca * y;
    term_b += cb * y;
    term_x += cx * y;
  }

  for (int k = q + 1; k >= 1; --k) {
    const uint32_t c_eq = stats.equal[k];
    const uint32_t c_al = stats.a_less[k];
    const uint32_t c_ag = stats.a_greater[k];
    const uint32_t c_bl = stats.b_less[k];
    const uint32_t c_bg = stats.b_greater[k];
    if (c_eq == 0 && c_al == 0 && c_ag == 0 && c_bl == 0 && c_bg == 0) continue;
    const double y = std::ldexp(1.0, -std::min(k, q));

    if (c_al > 0) {
      const double m = -std::expm1(-(rate_a + rate_x) * y);
      f -= c_al * std::log(m);
      const double tmp = c_al * y * (1.0 - m) / m;
      fa -= tmp;
      fx -= tmp;
    }
    if (c_ag > 0) {
      const double m = -std::expm1(-rate_a * y);
      f -= c_ag * std::log(m);
      fa -= c_ag * y * (1.0 - m) / m;
    }
    if (c_bl > 0) {
      const double m = -std::expm1(-(rate_b + rate_x) * y);
      f -= c_bl * std::log(m);
      const double tmp = c_bl * y * (1.0 - m) / m;
      fb -= tmp;
      fx -= tmp;
    }
    if (c_bg > 0) {
      const double m = -std::expm1(-rate_b * y);
      f -= c_bg * std::log(m);
      fb -= c_bg * y * (1.0 - m) / m;
    }
    if (c_eq > 0) {
      const double ma = -std::expm1(-rate_a * y);
      const double mb = -std::expm1(-rate_b * y);
      const double mx = -std::expm1(-rate_x * y);
      const double max_ = -std::expm1(-(rate_a + rate_x) * y);
      const double mbx = -std::expm1(-(rate_b + rate_x) * y);
      const double joint = ma * mb * (1.0 - mx) + mx;
      f -= c_eq * std::log(joint);
      fa -= c_eq * y * ((1.0 - max_) * mb) / joint;
      fb -= c_eq * y * ((1.0 - mbx) * ma) / joint;
      fx -= c_eq * y * ((1.0 - mx) * (1.0 - ma * mb)) / joint;
    }
  }

  f += term_a * rate_a + term_b * rate_b + term_x * rate_x;
  fa += term_a;
  fb += term_b;
  fx += term_x;
  if (grad != nullptr) {
    grad[0] = fa;
    grad[1] = fb;
    grad[2] = fx;
  }
  return f;
}

namespace {

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<std::array<double, 3>, 3>;

double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

Vec3 matvec(const Mat3& m, const Vec3& v) {
  return {dot(m[0], v), dot(m[1], v), dot(m[2], v)};
}

double inf_norm(const Vec3& v) {
  return std::max({std::fabs(v[0]), std::fabs(v[1]), std::fabs(v[2])});
}

// Negative log-likelihood in phi = log(rate) coordinates, with chain-ruled
// gradient. Optimizing in log space keeps every rate positive and flattens
// the gradient as a rate collapses toward zero.
double nll_phi(const CountStats& stats, const Vec3& phi, Vec3& grad) {
  const double ra = std::exp(phi[0]);
  const double rb = std::exp(phi[1]);
  const double rx = std::exp(phi[2]);
  double g[3];
  const double f = intersection_nll(stats, ra, rb, rx, g);
  grad = {g[0] * ra, g[1] * rb, g[2] * rx};
  return f;
}

}  // namespace

IntersectionEstimate estimate_intersection_mle(const CountStats& stats, const HllParams& params,
                                               const IntersectionEstimate& init) {
  constexpr int kMaxIterations = 200;
  constexpr double kRelTol = 1e-4;
  // Cardinalities below this are zero for every practical purpose; the
  // projection pins collapsing coordinates so the stop criterion can fire.
  constexpr double kLambdaFloor = 1e-4;
  const double r = static_cast<double>(params.r);
  const double phi_floor = std::log(kLambdaFloor / r);

  IntersectionEstimate est;
  est.method = IntersectionMethod::mle;
  est.domination = detect_domination(stats);

  // A sketch is empty exactly when all its registers are zero: its value-0
  // tallies absorb every register.
  const bool empty_a = stats.a_less[0] + stats.equal[0] == stats.r;
  const bool empty_b = stats.b_less[0] + stats.equal[0] == stats.r;

  Vec3 phi = {std::log(std::max(0.5, init.lambda_a) / r),
              std::log(std::max(0.5, init.lambda_b) / r),
              std::log(std::max(0.5, init.lambda_x) / r)};

  bool converged = false;
  int iterations = 0;
  if (empty_a || empty_b) {
    // An all-zero sketch pins its own rate and the shared rate to zero.
    est.raw_lambda_a = empty_a ? 0.0 : init.lambda_a + init.lambda_x;
    est.raw_lambda_b = empty_b ? 0.0 : init.lambda_b + init.lambda_x;
    est.raw_lambda_x = 0.0;
    converged = true;
  } else {
    Vec3 grad;
    double f = nll_phi(stats, phi, grad);
    Mat3 h = {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
    const double g0 = inf_norm(grad);
    if (g0 > 1.0) {
      const double s = 1.0 / g0;
      for (auto& row : h) for (auto& v : row) v *= s;
    }
    for (iterations = 1; iterations <= kMaxIterations; ++iterations) {
      Vec3 dir = matvec(h, grad);
      for (auto& v : dir) v = -v;
      double slope = dot(grad, dir);
      if (slope >= 0.0) {
        dir = {-grad[0], -grad[1], -grad[2]};
        const double n = std::max(1.0, inf_norm(dir));
        for (auto& v : dir) v /= n;
        slope = dot(grad, dir);
        h = {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
      }
      double step = 1.0;
      Vec3 phi_next, grad_next;
      double f_next = f;
      bool advanced = false;
      for (int halvings = 0; halvings < 40; ++halvings) {
        bool clipped = false;
        for (int i = 0; i < 3; ++i) {
          phi_next[i] = phi[i] + step * dir[i];
          if (phi_next[i] < phi_floor) {
            phi_next[i] = phi_floor;
            clipped = true;
          }
        }
        f_next = nll_phi(stats, phi_next, grad_next);
        const bool armijo = f_next <= f + 1e-4 * step * slope;
        if (std::isfinite(f_next) && (armijo || (clipped && f_next < f))) {
          advanced = true;
          break;
        }
        step *= 0.5;
      }
      if (!advanced) {
        // Stalled: converged if the projected gradient (ignoring coordinates
        // pinned at the floor) has vanished.
        Vec3 pg = grad;
        for (int i = 0; i < 3; ++i) {
          if (phi[i] <= phi_floor + 1e-12 && pg[i] > 0.0) pg[i] = 0.0;
        }
        converged = inf_norm(pg) <= 1e-7 * std::max(1.0, std::fabs(f));
        break;
      }
      const Vec3 s = {phi_next[0] - phi[0], phi_next[1] - phi[1], phi_next[2] - phi[2]};
      const Vec3 yv = {grad_next[0] - grad[0], grad_next[1] - grad[1], grad_next[2] - grad[2]};
      const double sy = dot(s, yv);
      if (sy > 1e-12) {
        // BFGS update of the inverse Hessian.
        const double rho = 1.0 / sy;
        const Vec3 hy = matvec(h, yv);
        const double yhy = dot(yv, hy);
        Mat3 hn;
        for (int i = 0; i < 3; ++i) {
          for (int j = 0; j < 3; ++j) {
            hn[i][j] = h[i][j] - rho * (s[i] * hy[j] + hy[i] * s[j]) +
                       rho * rho * yhy * s[i] * s[j] + rho * s[i] * s[j];
          }
        }
        h = hn;
      }
      phi = phi_next;
      grad = grad_next;
      f = f_next;
      if (inf_norm(s) < kRelTol) {
        converged = true;
        break;
      }
    }
    est.raw_lambda_a = std::exp(phi[0]) * r;
    est.raw_lambda_b = std::exp(phi[1]) * r;
    est.raw_lambda_x = std::exp(phi[2]) * r;
  }

  est.lambda_a = est.raw_lambda_a;
  est.lambda_b = est.raw_lambda_b;
  est.lambda_x = est.raw_lambda_x;
  est.iterations = iterations;
  // A strictly dominated pair leaves the likelihood flat in the intersection;
  // report the optimum but flag it unreliable.
  est.converged = converged && est.domination != Domination::a_strictly_dominates_b &&
                  est.domination != Domination::b_strictly_dominates_a;
  return est;
}

IntersectionEstimate estimate_intersection_mle(const HllSketch& a, const HllSketch& b) {
  if (!a.params().compatible_with(b.params())) {
    throw std::invalid_argument("estimate_intersection_mle: parameter mismatch");
  }
  const CountStats stats = count_stats(a, b);
  const IntersectionEstimate init = estimate_intersection_ie(a, b);
  IntersectionEstimate est = estimate_intersection_mle(stats, a.params(), init);
  return est;
}

}  // namespace dsk
