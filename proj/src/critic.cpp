#include "mecsim/critic.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <numeric>

#include "mecsim/errors.hpp"

namespace mecsim {

namespace {

using clock_type = std::chrono::steady_clock;

double elapsed_us(clock_type::time_point start) {
  return std::chrono::duration<double, std::micro>(clock_type::now() - start).count();
}

// g(z) = ln(1+z) - z/(1+z), strictly increasing on (0, inf). The naive
// difference cancels catastrophically below z ~ 1e-4; a series head keeps
// full relative accuracy there.
inline double g_fun(double z) {
  if (z < 1e-4)
    return z * z * (0.5 - (2.0 / 3.0) * z + 0.75 * z * z);
  return std::log1p(z) - z / (1.0 + z);
}
// dg/dz = z / (1+z)^2.
inline double g_deriv(double z) { return z / ((1.0 + z) * (1.0 + z)); }

constexpr double kZMin = 1e-12;
constexpr double kZMax = 1e12;
const double kGMin = g_fun(kZMin);
const double kGMax = g_fun(kZMax);

// Solve g(z) = y by Newton in z with a sign-maintained bracket inside
// [kZMin, kZMax]; out-of-range targets clamp to the edge. z0 warm-starts
// the iteration (pass <= 0 for a cold series guess). Falls back to the
// geometric bracket midpoint whenever a Newton step leaves the bracket,
// which keeps the extreme-asymmetry cases overflow-free.
double g_inverse(double y, double z0, double tol, int max_iters) {
  if (y <= kGMin) return kZMin;
  if (y >= kGMax) return kZMax;
  double lo = kZMin, hi = kZMax;
  double z = z0;
  if (!(z > lo && z < hi)) z = y < 0.4 ? std::sqrt(2.0 * y) : std::exp(y + 1.0);
  z = std::clamp(z, lo, hi);
  for (int it = 0; it < max_iters; ++it) {
    double f = g_fun(z) - y;
    if (std::abs(f) <= 1e-14 * std::max(y, 1e-30)) return z;
    if (f > 0.0)
      hi = z;
    else
      lo = z;
    if (hi - lo <= tol * hi) break;
    double next = z - f / g_deriv(z);
    if (!(next > lo && next < hi)) next = std::sqrt(lo * hi);
    z = next;
  }
  return 0.5 * (lo + hi);
}

// Offloaders grouped by weight: devices sharing w_i share the same z under
// the per-device condition w_i * rate * g(z_i) / ln2 = nu. The z and nu
// fields warm-start the next evaluation of the same candidate.
struct WeightClass {
  double weight;
  double c_sum;    // sum of snr coefficients in this class
  double d;        // ln2 / (weight * rate)
  double z = 0.0;  // warm start / last solution
};

struct WptContext {
  const SystemConfig* cfg;
  std::vector<int> offloaders;  // device indices with x_i = 1
  std::vector<int> class_of;    // per offloader, index into classes
  std::vector<WeightClass> classes;
  std::vector<double> c;   // snr coefficient per offloader
  double local_sum = 0.0;  // sum_{x_i=0} w_i * cbrt(h_i)
  double rate = 0.0;       // rate_scale
  double eta = 0.0;
  double nu_warm = 0.0;
  std::vector<double> z_scratch;
};

WptContext make_wpt_context(const SystemConfig& cfg, const std::vector<double>& gains,
                            const std::vector<uint8_t>& x) {
  WptContext ctx;
  ctx.cfg = &cfg;
  ctx.rate = cfg.rate_scale();
  ctx.eta = cfg.eta();
  for (int i = 0; i < cfg.n_devices; ++i) {
    if (!std::isfinite(gains[i]))
      throw FeasibilityError("gains: must be finite (device " + std::to_string(i) + ")");
    if (x[i]) {
      ctx.offloaders.push_back(i);
      ctx.c.push_back(cfg.snr_coeff(gains[i]));
    } else {
      ctx.local_sum += cfg.weights[i] * std::cbrt(gains[i]);
    }
  }
  for (size_t j = 0; j < ctx.offloaders.size(); ++j) {
    double w = cfg.weights[ctx.offloaders[j]];
    size_t k = 0;
    for (; k < ctx.classes.size(); ++k)
      if (ctx.classes[k].weight == w) break;
    if (k == ctx.classes.size())
      ctx.classes.push_back({w, 0.0, M_LN2 / (w * ctx.rate), 0.0});
    ctx.classes[k].c_sum += ctx.c[j];
    ctx.class_of.push_back(static_cast<int>(k));
  }
  return ctx;
}

// Inner allocation at fixed a > 0 with residual budget r > 0: the full
// residual is split across offloaders by the dual condition
// w_k * rate * g(z_k) / ln2 = nu with sum tau = r. A few Newton steps
// sharpen nu, the bracket around it is certified (the monotonicity of the
// dual map is checked explicitly), and the dual bisection then runs to
// dual_tol within that bracket.
struct InnerResult {
  double value = 0.0;      // offload objective at the optimum
  double dvalue = 0.0;     // d(offload)/da at fixed tau (envelope term)
  double nu = 0.0;
};

InnerResult inner_solve(WptContext& ctx, double a, double r,
                        const SolverTolerances& tol) {
  const size_t nc = ctx.classes.size();
  InnerResult res;

  if (nc == 1) {
    // sum tau = a C / z = r pins z exactly; the dual bisection is vacuous.
    WeightClass& cl = ctx.classes[0];
    double z_true = a * cl.c_sum / r;
    cl.z = std::clamp(z_true, kZMin, kZMax);
    res.nu = cl.weight * ctx.rate * g_fun(std::clamp(z_true, 1e-300, 1e300)) / M_LN2;
    res.value = ctx.rate * cl.weight * r * std::log2(1.0 + z_true);
    res.dvalue = ctx.rate * cl.weight * cl.c_sum / ((1.0 + z_true) * M_LN2);
    ctx.nu_warm = res.nu;
    return res;
  }

  double c_total = 0.0, w_max = 0.0;
  for (const auto& cl : ctx.classes) {
    c_total += cl.c_sum;
    w_max = std::max(w_max, cl.weight);
  }

  // Outside the z-inversion range the weight classes collapse: as z -> 0
  // the objective is allocation-flat (value ~ rate w a C / ln2), as
  // z -> inf it vanishes with r. Allocate airtime proportional to the snr
  // coefficients and skip the dual machinery.
  double z_eq = a * c_total / r;
  if (z_eq <= kZMin || z_eq >= kZMax) {
    for (auto& cl : ctx.classes) {
      cl.z = std::clamp(z_eq, kZMin, kZMax);
      double tau_class = r * cl.c_sum / c_total;
      res.value += ctx.rate * cl.weight * tau_class * std::log2(1.0 + z_eq);
      res.dvalue += ctx.rate * cl.weight * cl.c_sum / ((1.0 + z_eq) * M_LN2);
    }
    res.nu = w_max * ctx.rate * g_fun(std::clamp(z_eq, 1e-300, 1e300)) / M_LN2;
    ctx.nu_warm = 0.0;  // not a dual solution; do not warm-start from it
    return res;
  }

  ctx.z_scratch.resize(nc);
  std::vector<double>& z = ctx.z_scratch;
  auto tau_sum = [&](double nu) {
    double sum = 0.0;
    for (size_t k = 0; k < nc; ++k) {
      z[k] = g_inverse(nu * ctx.classes[k].d, ctx.classes[k].z, tol.inner_tol,
                       tol.max_iters);
      ctx.classes[k].z = z[k];
      sum += a * ctx.classes[k].c_sum / z[k];
    }
    return sum;
  };

  // Starting nu: warm from the previous a, else the pooled one-class value.
  double nu = ctx.nu_warm;
  if (!(nu > 0.0)) {
    double z_pool = std::clamp(z_eq, kZMin, kZMax);
    nu = std::max(w_max * ctx.rate * g_fun(z_pool) / M_LN2, 1e-300);
  }

  // Newton sharpening of nu (S is strictly decreasing in nu).
  double step = nu;
  for (int it = 0; it < 20; ++it) {
    double s = tau_sum(nu);
    double err = s - r;
    if (std::abs(err) <= 1e-13 * r) break;
    double ds = 0.0;
    for (size_t k = 0; k < nc; ++k) {
      double gk = g_deriv(z[k]);
      if (gk > 0.0)
        ds -= a * ctx.classes[k].c_sum / (z[k] * z[k]) * ctx.classes[k].d / gk;
    }
    if (!(ds < 0.0)) break;
    step = err / ds;
    double next = nu - step;
    if (!(next > 0.0)) next = 0.5 * nu;
    step = next - nu;
    nu = next;
    if (std::abs(step) <= 1e-13 * nu) break;
  }

  // Certified bracket around the sharpened nu.
  double delta = std::max(std::abs(step) * 8.0, nu * 8.0 * tol.dual_tol);
  double nu_lo = std::max(nu - delta, nu * 1e-6);
  double nu_hi = nu + delta;
  double s_lo = tau_sum(nu_lo);
  double s_hi = tau_sum(nu_hi);
  for (int it = 0; it < tol.max_iters && s_lo < r; ++it) {
    nu_lo *= 0.25;
    s_lo = tau_sum(nu_lo);
  }
  for (int it = 0; it < tol.max_iters && s_hi > r; ++it) {
    nu_hi *= 4.0;
    s_hi = tau_sum(nu_hi);
  }
  const double slack = 1e-9 * std::max(r, 1.0);
  if (!(s_lo + slack >= r && s_hi <= r + slack) || !(nu_lo <= nu_hi))
    throw ContractError("dual bisection: tau sum not decreasing across the nu bracket");

  // Dual bisection to its relative tolerance.
  for (int it = 0; it < tol.max_iters && nu_hi - nu_lo > tol.dual_tol * nu_hi; ++it) {
    double mid = 0.5 * (nu_lo + nu_hi);
    if (tau_sum(mid) > r)
      nu_lo = mid;
    else
      nu_hi = mid;
  }
  nu = 0.5 * (nu_lo + nu_hi);
  tau_sum(nu);

  res.nu = nu;
  ctx.nu_warm = nu;
  for (size_t k = 0; k < nc; ++k) {
    const WeightClass& cl = ctx.classes[k];
    res.value += ctx.rate * cl.weight * (a * cl.c_sum / z[k]) * std::log2(1.0 + z[k]);
    res.dvalue += ctx.rate * cl.weight * cl.c_sum / ((1.0 + z[k]) * M_LN2);
  }
  return res;
}

double wpt_value(WptContext& ctx, double a, const SolverTolerances& tol) {
  const double t_slot = ctx.cfg->slot_len;
  double v = ctx.eta * ctx.local_sum * std::cbrt(a);
  if (!ctx.offloaders.empty() && a > 0.0 && t_slot - a > 0.0)
    v += inner_solve(ctx, a, t_slot - a, tol).value;
  return v;
}

// V'(a) by the envelope theorem: the local part differentiates directly;
// the airtime the broadcast eats is priced at the dual variable.
double wpt_slope(WptContext& ctx, double a, const SolverTolerances& tol) {
  double slope = a > 0.0 ? ctx.eta * ctx.local_sum / (3.0 * std::cbrt(a) * std::cbrt(a))
                         : std::numeric_limits<double>::infinity();
  if (!ctx.offloaders.empty()) {
    InnerResult inner = inner_solve(ctx, a, ctx.cfg->slot_len - a, tol);
    slope += inner.dvalue - inner.nu;
  }
  return slope;
}

// Golden-section over a in [0, T]; kept as the fallback when the slope has
// no usable sign change (worthless channels, degenerate objectives).
double golden_search(WptContext& ctx, const SolverTolerances& tol) {
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double lo = 0.0, hi = ctx.cfg->slot_len;
  double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
  double f1 = wpt_value(ctx, x1, tol), f2 = wpt_value(ctx, x2, tol);
  for (int it = 0; it < tol.max_iters && hi - lo > tol.outer_tol; ++it) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + phi * (hi - lo);
      f2 = wpt_value(ctx, x2, tol);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - phi * (hi - lo);
      f1 = wpt_value(ctx, x1, tol);
    }
  }
  return 0.5 * (lo + hi);
}

// Root of the concave objective's slope by Illinois-damped regula falsi,
// bracketing to outer_tol. The value function is concave in a (partial
// maximization of a jointly concave objective), so the slope is decreasing
// and the bracket is valid.
double outer_search(WptContext& ctx, const SolverTolerances& tol) {
  const double t_slot = ctx.cfg->slot_len;
  double a_lo = 1e-9 * t_slot, a_hi = (1.0 - 1e-9) * t_slot;
  double f_hi = wpt_slope(ctx, a_hi, tol);
  if (f_hi >= 0.0) return t_slot;  // still climbing at the right edge
  double f_lo = wpt_slope(ctx, a_lo, tol);
  if (!(f_lo > 0.0)) return golden_search(ctx, tol);

  int held = 0;  // consecutive retentions of the same side
  for (int it = 0; it < tol.max_iters && a_hi - a_lo > tol.outer_tol; ++it) {
    double denom = f_lo - f_hi;
    double a_new = denom > 0.0 ? a_lo + f_lo * (a_hi - a_lo) / denom
                               : 0.5 * (a_lo + a_hi);
    double margin = 0.01 * (a_hi - a_lo);
    a_new = std::clamp(a_new, a_lo + margin, a_hi - margin);
    double f_new = wpt_slope(ctx, a_new, tol);
    if (f_new > 0.0) {
      a_lo = a_new;
      f_lo = f_new;
      held = held > 0 ? held + 1 : 1;
      if (held >= 2) f_hi *= 0.5;  // Illinois damping
    } else {
      a_hi = a_new;
      f_hi = f_new;
      held = held < 0 ? held - 1 : -1;
      if (held <= -2) f_lo *= 0.5;
    }
  }
  return 0.5 * (a_lo + a_hi);
}

OffloadAction build_wpt_action(WptContext& ctx, const std::vector<uint8_t>& x, double a,
                               const SolverTolerances& tol) {
  const SystemConfig& cfg = *ctx.cfg;
  OffloadAction action = OffloadAction::idle(cfg.n_devices);
  action.x = x;
  action.wpt_frac = a;
  double r = cfg.slot_len - a;
  if (!ctx.offloaders.empty() && a > 0.0 && r > 0.0) {
    inner_solve(ctx, a, r, tol);
    double tau_total = 0.0;
    std::vector<double> tau(ctx.offloaders.size());
    for (size_t j = 0; j < ctx.offloaders.size(); ++j) {
      tau[j] = a * ctx.c[j] / ctx.classes[ctx.class_of[j]].z;
      tau_total += tau[j];
    }
    // Rescale so the time budget is met exactly (the dual solve leaves a
    // dual_tol-sized residual).
    double scale = tau_total > 0.0 ? r / tau_total : 0.0;
    for (size_t j = 0; j < ctx.offloaders.size(); ++j)
      action.time_shares[ctx.offloaders[j]] = tau[j] * scale;
  }
  return action;
}

}  // namespace

void SolverTolerances::validate() const {
  if (!(outer_tol > 0) || !(dual_tol > 0) || !(inner_tol > 0))
    throw ConfigError("solver tolerances must be strictly positive");
  if (max_iters < 10) throw ConfigError("solver max_iters must be >= 10");
}

ScoredAction solve_wpt(const SystemConfig& cfg, const std::vector<double>& gains,
                       const std::vector<uint8_t>& x, const SolverTolerances& tol) {
  auto start = clock_type::now();
  if (x.size() != static_cast<size_t>(cfg.n_devices))
    throw FeasibilityError("x: length must equal n_devices");
  tol.validate();

  WptContext ctx = make_wpt_context(cfg, gains, x);
  const double t_slot = cfg.slot_len;

  double a_best;
  if (ctx.offloaders.empty()) {
    a_best = t_slot;  // utility is monotone in a when everyone computes locally
  } else {
    a_best = outer_search(ctx, tol);
    // The boundary a = T (offloaders starved of airtime) can win when
    // offload channels are worthless.
    if (a_best < t_slot && wpt_value(ctx, t_slot, tol) > wpt_value(ctx, a_best, tol))
      a_best = t_slot;
  }

  ScoredAction out;
  out.action = build_wpt_action(ctx, x, a_best, tol);
  out.score = utility_wpt(cfg, gains, out.action);
  out.solve_time_us = elapsed_us(start);
  return out;
}

ScoredAction solve_lyapunov(const SystemConfig& cfg, const SlotObservation& obs,
                            const std::vector<uint8_t>& x, const SolverTolerances& tol) {
  auto start = clock_type::now();
  if (x.size() != static_cast<size_t>(cfg.n_devices))
    throw FeasibilityError("x: length must equal n_devices");
  tol.validate();

  const double t_slot = cfg.slot_len;
  const double phi_u = cfg.cycles_per_unit();
  OffloadAction action = OffloadAction::idle(cfg.n_devices);
  action.x = x;

  struct OffCand {
    int device;
    double value;  // marginal value per unit time
    double rho;    // rate at its optimal power
    double p;
  };
  std::vector<OffCand> cands;

  for (int i = 0; i < cfg.n_devices; ++i) {
    const double q = obs.queues.data_q[i];
    const double y = obs.queues.energy_q[i];
    const double qv = q + cfg.lyapunov_v * cfg.weights[i];
    if (q <= 0.0) continue;  // nothing to process, stay idle
    if (!x[i]) {
      // Local: value (Q+Vw) f T / phi_u - Y k f^3 T rises until the
      // stationary frequency, so the binding cap decides.
      double f_cap = std::min(cfg.f_max, phi_u * q / t_slot);
      double f_star = cfg.f_max;
      if (y > 0.0)
        f_star = std::sqrt(qv / (3.0 * phi_u * cfg.cap_coeff * y));
      action.cpu_freq[i] = std::min(f_star, f_cap);
    } else {
      double h = obs.gains[i];
      double p_star = cfg.p_max;
      if (y > 0.0) {
        p_star = qv * cfg.rate_scale() / (y * M_LN2) - cfg.noise_power / h;
        p_star = std::clamp(p_star, 0.0, cfg.p_max);
      }
      if (p_star <= 0.0) continue;
      double rho = offload_rate(cfg, p_star, h);
      double value = qv * rho - y * p_star;
      if (value <= 0.0 || rho <= 0.0) continue;
      cands.push_back({i, value, rho, p_star});
    }
  }

  // Fractional knapsack over airtime: best marginal value first, each
  // device capped at the time that drains its queue. Ties by lower index.
  std::stable_sort(cands.begin(), cands.end(), [](const OffCand& a, const OffCand& b) {
    if (a.value != b.value) return a.value > b.value;
    return a.device < b.device;
  });
  double remaining = t_slot;
  for (const OffCand& c : cands) {
    if (remaining <= 0.0) break;
    double tau = std::min(remaining, obs.queues.data_q[c.device] / c.rho);
    if (tau <= 0.0) continue;
    action.time_shares[c.device] = tau;
    action.tx_power[c.device] = c.p;
    remaining -= tau;
  }

  ScoredAction out;
  out.action = std::move(action);
  out.score = lyapunov_score(cfg, obs, out.action).first;
  out.solve_time_us = elapsed_us(start);
  return out;
}

ScoredAction solve_mode(const SystemConfig& cfg, const SlotObservation& obs,
                        const std::vector<uint8_t>& x, ScoreMode mode,
                        const SolverTolerances& tol) {
  return mode == ScoreMode::wpt ? solve_wpt(cfg, obs.gains, x, tol)
                                : solve_lyapunov(cfg, obs, x, tol);
}

namespace {

// Nested grid sweep: f evaluates a point given the vector of dim values.
// Runs the coarse pass then `rounds` shrinking refinements around the best.
struct GridDim {
  double lo, hi;
};

template <typename F>
std::pair<double, std::vector<double>> grid_search(const std::vector<GridDim>& dims,
                                                   double step, const F& eval,
                                                   int rounds) {
  const size_t nd = dims.size();
  std::vector<double> best_pt(nd, 0.0);
  double best = -std::numeric_limits<double>::infinity();

  auto sweep = [&](const std::vector<GridDim>& box, double h) {
    std::vector<size_t> counts(nd);
    size_t total = 1;
    for (size_t d = 0; d < nd; ++d) {
      counts[d] = static_cast<size_t>(std::floor((box[d].hi - box[d].lo) / h)) + 1;
      total *= counts[d] + 1;
    }
    std::vector<double> pt(nd);
    for (size_t flat = 0; flat < total; ++flat) {
      size_t rem = flat;
      for (size_t d = 0; d < nd; ++d) {
        size_t j = rem % (counts[d] + 1);
        rem /= counts[d] + 1;
        pt[d] = j == counts[d] ? box[d].hi : box[d].lo + static_cast<double>(j) * h;
      }
      double v = eval(pt);
      if (v > best) {
        best = v;
        best_pt = pt;
      }
    }
  };

  sweep(dims, step);
  // High-dimensional sweeps refine with fewer points per axis.
  const double divider = nd >= 5 ? 4.0 : 8.0;
  double window = step;
  for (int r = 0; r < rounds; ++r) {
    std::vector<GridDim> box(nd);
    for (size_t d = 0; d < nd; ++d) {
      box[d].lo = std::max(dims[d].lo, best_pt[d] - window);
      box[d].hi = std::min(dims[d].hi, best_pt[d] + window);
    }
    sweep(box, window / divider);
    window /= 4.0;
  }
  return {best, best_pt};
}

}  // namespace

ScoredAction oracle_grid(const SystemConfig& cfg, const SlotObservation& obs,
                         const std::vector<uint8_t>& x, ScoreMode mode,
                         double resolution) {
  auto start = clock_type::now();
  if (x.size() != static_cast<size_t>(cfg.n_devices))
    throw FeasibilityError("x: length must equal n_devices");
  if (!(resolution > 0) || resolution >= 1.0)
    throw ConfigError("oracle_grid: resolution must be in (0, 1)");
  std::vector<int> off;
  for (int i = 0; i < cfg.n_devices; ++i)
    if (x[i]) off.push_back(i);
  if (off.size() > 3)
    throw ConfigError("oracle_grid: more than 3 offloaders (grid dimensionality guard)");

  const double t_slot = cfg.slot_len;
  const int m = static_cast<int>(off.size());
  ScoredAction out;

  if (mode == ScoreMode::wpt) {
    const double eta = cfg.eta();
    const double rate = cfg.rate_scale();
    double local_sum = 0.0;
    std::vector<double> c(m), w(m);
    for (int i = 0; i < cfg.n_devices; ++i)
      if (!x[i]) local_sum += cfg.weights[i] * std::cbrt(obs.gains[i]);
    for (int j = 0; j < m; ++j) {
      c[j] = cfg.snr_coeff(obs.gains[off[j]]);
      w[j] = cfg.weights[off[j]];
    }
    // Dims: a plus the first m-1 shares; the objective never decreases in
    // any tau, so the last offloader takes the residual.
    std::vector<GridDim> dims(std::max(m, 1), GridDim{0.0, t_slot});
    auto eval = [&](const std::vector<double>& pt) {
      double a = pt[0];
      double v = eta * local_sum * std::cbrt(a);
      if (m > 0) {
        double used = 0.0;
        for (int j = 1; j < m; ++j) used += pt[j];
        if (used > t_slot - a + 1e-12) return -1.0;
        double tail = std::max(t_slot - a - used, 0.0);
        for (int j = 0; j < m; ++j) {
          double tau = j + 1 < m ? pt[j + 1] : tail;
          if (tau > 0.0 && a > 0.0)
            v += w[j] * rate * tau * std::log2(1.0 + c[j] * a / tau);
        }
      }
      return v;
    };
    auto [best, pt] = grid_search(dims, resolution * t_slot, eval, 3);
    (void)best;
    OffloadAction action = OffloadAction::idle(cfg.n_devices);
    action.x = x;
    action.wpt_frac = pt[0];
    double used = 0.0;
    for (int j = 0; j + 1 < m; ++j) {
      action.time_shares[off[j]] = pt[j + 1];
      used += pt[j + 1];
    }
    if (m > 0)
      action.time_shares[off[m - 1]] = std::max(t_slot - pt[0] - used, 0.0);
    out.action = action;
    out.score = utility_wpt(cfg, obs.gains, action);
  } else {
    // Locals separate into independent 1-D problems over f; offloaders form
    // a joint (p, tau) grid under sum tau <= T.
    OffloadAction action = OffloadAction::idle(cfg.n_devices);
    action.x = x;
    const double phi_u = cfg.cycles_per_unit();
    for (int i = 0; i < cfg.n_devices; ++i) {
      if (x[i]) continue;
      const double q = obs.queues.data_q[i];
      const double y = obs.queues.energy_q[i];
      const double qv = q + cfg.lyapunov_v * cfg.weights[i];
      auto eval = [&](const std::vector<double>& pt) {
        double f = pt[0];
        double d = std::min(f * t_slot / phi_u, q);
        return qv * d - y * cfg.cap_coeff * f * f * f * t_slot;
      };
      auto [best, pt] = grid_search({GridDim{0.0, cfg.f_max}}, resolution * cfg.f_max,
                                    eval, 3);
      (void)best;
      action.cpu_freq[i] = pt[0];
    }
    if (m > 0) {
      std::vector<GridDim> dims;
      for (int j = 0; j < m; ++j) {
        dims.push_back({0.0, cfg.p_max});
        dims.push_back({0.0, t_slot});
      }
      auto eval = [&](const std::vector<double>& pt) {
        double tau_sum = 0.0, v = 0.0;
        for (int j = 0; j < m; ++j) {
          double p = pt[2 * j], tau = pt[2 * j + 1];
          tau_sum += tau;
          if (tau_sum > t_slot + kFeasSlack) return -1e300;
          int i = off[j];
          const double q = obs.queues.data_q[i];
          const double qv = q + cfg.lyapunov_v * cfg.weights[i];
          double d = std::min(tau * offload_rate(cfg, p, obs.gains[i]), q);
          v += qv * d - obs.queues.energy_q[i] * p * tau;
        }
        return v;
      };
      // Coarser base step keeps the 2m-dimensional sweep affordable.
      double step = resolution * (m == 3 ? 8.0 : 1.0);
      std::vector<double> scratch(dims.size());
      auto eval_scaled = [&](const std::vector<double>& pt) {
        for (size_t d = 0; d < pt.size(); ++d)
          scratch[d] = pt[d] * (d % 2 == 0 ? cfg.p_max : t_slot);
        return eval(scratch);
      };
      std::vector<GridDim> norm(dims.size(), GridDim{0.0, 1.0});
      auto [best, pt] = grid_search(norm, step, eval_scaled, 3);
      (void)best;
      for (int j = 0; j < m; ++j) {
        action.tx_power[off[j]] = pt[2 * j] * cfg.p_max;
        action.time_shares[off[j]] = pt[2 * j + 1] * t_slot;
      }
      // Clamp any refinement spill over the airtime budget.
      double tau_sum = 0.0;
      for (int j = 0; j < m; ++j) tau_sum += action.time_shares[off[j]];
      if (tau_sum > t_slot)
        for (int j = 0; j < m; ++j) action.time_shares[off[j]] *= t_slot / tau_sum;
      for (int j = 0; j < m; ++j)
        if (action.time_shares[off[j]] <= 0.0) action.tx_power[off[j]] = 0.0;
    }
    out.action = action;
    out.score = lyapunov_score(cfg, obs, action).first;
  }
  out.solve_time_us = elapsed_us(start);
  return out;
}

std::vector<double> score_candidates(const SystemConfig& cfg, const SlotObservation& obs,
                                     std::span<const std::vector<uint8_t>> candidates,
                                     ScoreMode mode, const SolverTolerances& tol,
                                     bool parallel) {
  std::vector<double> scores(candidates.size());
  std::exception_ptr error;
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(candidates.size());
#pragma omp parallel for schedule(dynamic, 8) if (parallel)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      scores[i] = solve_mode(cfg, obs, candidates[i], mode, tol).score;
    } catch (...) {
#pragma omp critical
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return scores;
}

BestChoice best_action(const SystemConfig& cfg, const SlotObservation& obs,
                       std::span<const std::vector<uint8_t>> candidates, ScoreMode mode,
                       const SolverTolerances& tol, bool parallel) {
  if (candidates.empty()) throw ConfigError("best_action: empty candidate list");
  std::vector<double> scores = score_candidates(cfg, obs, candidates, mode, tol, parallel);
  size_t best = 0;
  for (size_t i = 1; i < scores.size(); ++i)
    if (scores[i] > scores[best]) best = i;  // ties keep the lowest index
  BestChoice choice;
  choice.index = best;
  choice.best = solve_mode(cfg, obs, candidates[best], mode, tol);
  return choice;
}

}  // namespace mecsim
