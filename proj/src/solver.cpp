#include "shelab/solver.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numbers>
#include <string>

#include "shelab/errors.hpp"
#include "shelab/format.hpp"
#include "shelab/simd/kernels.hpp"

namespace shelab {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

template <class... F>
struct Overloaded : F... {
  using F::operator()...;
};
template <class... F>
Overloaded(F...) -> Overloaded<F...>;

bool finite_all(std::span<const double> v) noexcept {
  std::uint64_t bad = 0;
  for (double x : v) bad |= static_cast<std::uint64_t>(((std::bit_cast<std::uint64_t>(x) >> 52) & 0x7FF) == 0x7FF);
  return bad == 0;
}

void require_finite(double v, const char* field) {
  if (!std::isfinite(v)) throw ConfigError(field, "must be finite");
}

// Tridiagonal system with constant coefficients, factored once. Row i reads
// sub[i] x[i-1] + diag[i] x[i] + sup[i] x[i+1] = d[i].
class Thomas {
 public:
  Thomas() = default;
  Thomas(std::vector<double> sub, std::vector<double> diag, std::vector<double> sup)
      : sub_(std::move(sub)), denom_(diag.size()), cp_(diag.size()) {
    const std::size_t n = diag.size();
    denom_[0] = diag[0];
    cp_[0] = n > 1 ? sup[0] / denom_[0] : 0.0;
    for (std::size_t i = 1; i < n; ++i) {
      denom_[i] = diag[i] - sub_[i] * cp_[i - 1];
      cp_[i] = i + 1 < n ? sup[i] / denom_[i] : 0.0;
    }
  }

  // In place: d -> x.
  void solve(double* d) const noexcept {
    const std::size_t n = denom_.size();
    d[0] /= denom_[0];
    for (std::size_t i = 1; i < n; ++i) d[i] = (d[i] - sub_[i] * d[i - 1]) / denom_[i];
    for (std::size_t i = n - 1; i-- > 0;) d[i] -= cp_[i] * d[i + 1];
  }

  std::size_t size() const noexcept { return denom_.size(); }

 private:
  std::vector<double> sub_, denom_, cp_;
};

class Stepper {
 public:
  Stepper(const SolverConfig& cfg, Scheme scheme)
      : cfg_(cfg),
        kt_(simd::active()),
        scheme_(scheme),
        n_(cfg.node_count()),
        m_(cfg.updated_count()),
        first_(std::holds_alternative<Dirichlet>(cfg.bc) ? 1 : 0),
        k_(cfg.alpha * cfg.dt / (cfg.dx() * cfg.dx())),
        amp_scale_(std::sqrt(cfg.dt / cfg.dx())),
        amp_(m_),
        drift_(cfg.drift.active() ? m_ : 0),
        forcing_(m_) {
    if (scheme_ == Scheme::Explicit)
      pad_.resize(std::holds_alternative<Dirichlet>(cfg.bc) ? n_ : n_ + 2);
    else
      build_implicit();
  }

  std::size_t updated() const noexcept { return m_; }

  // Advances `v` (node_count values) by one step; returns the number of clamps.
  std::uint64_t advance(std::span<double> v, std::span<const double> xi) {
    const std::span<const double> upd(v.data() + first_, m_);
    cfg_.sigma.evaluate(upd, amp_scale_, amp_);
    if (!drift_.empty()) cfg_.drift.evaluate(upd, cfg_.dt, drift_);
    kt_.noise_forcing(amp_.data(), xi.data(), drift_.empty() ? nullptr : drift_.data(),
                      forcing_.data(), m_);
    if (scheme_ == Scheme::Explicit)
      explicit_update(v);
    else
      implicit_update(v);
    if (const auto* d = std::get_if<Dirichlet>(&cfg_.bc)) v[0] = v[n_ - 1] = d->value;

    std::uint64_t clamps = 0;
    if (cfg_.sigma.requires_nonnegative()) {
      for (double& x : v)
        if (x < 0.0) {
          x = 0.0;
          ++clamps;
        }
    }
    return clamps;
  }

 private:
  void explicit_update(std::span<double> v) {
    double* p = pad_.data();
    if (std::holds_alternative<Dirichlet>(cfg_.bc)) {
      std::memcpy(p, v.data(), n_ * sizeof(double));
      kt_.heat_update(p, p + 1, p + 2, forcing_.data(), k_, v.data() + 1, m_);
      return;
    }
    std::memcpy(p + 1, v.data(), n_ * sizeof(double));
    if (std::holds_alternative<Periodic>(cfg_.bc)) {
      p[0] = v[n_ - 1];
      p[n_ + 1] = v[0];
    } else {  // Neumann: reflection ghost, zero flux
      p[0] = v[1];
      p[n_ + 1] = v[n_ - 2];
    }
    kt_.heat_update(p, p + 1, p + 2, forcing_.data(), k_, v.data(), n_);
  }

  void build_implicit() {
    const double diag = 1.0 + 2.0 * k_;
    std::vector<double> sub(m_, -k_), dia(m_, diag), sup(m_, -k_);
    if (std::holds_alternative<Neumann>(cfg_.bc)) {
      sup[0] = -2.0 * k_;
      sub[m_ - 1] = -2.0 * k_;
    }
    if (std::holds_alternative<Periodic>(cfg_.bc)) {
      // Sherman-Morrison: A = B + u v^T with corners -k in A[0][m-1] and A[m-1][0].
      gamma_ = -dia[0];
      const double corner = -k_;
      dia[0] -= gamma_;
      dia[m_ - 1] -= corner * corner / gamma_;
      thomas_ = Thomas(sub, dia, sup);
      z_.assign(m_, 0.0);
      z_[0] = gamma_;
      z_[m_ - 1] = corner;
      thomas_.solve(z_.data());
      sm_denom_ = 1.0 + z_[0] + corner * z_[m_ - 1] / gamma_;
    } else {
      thomas_ = Thomas(std::move(sub), std::move(dia), std::move(sup));
    }
    rhs_.resize(m_);
  }

  void implicit_update(std::span<double> v) {
    double* r = rhs_.data();
    for (std::size_t i = 0; i < m_; ++i) r[i] = v[first_ + i] + forcing_[i];
    if (const auto* d = std::get_if<Dirichlet>(&cfg_.bc)) {
      r[0] += k_ * d->value;
      r[m_ - 1] += k_ * d->value;
    }
    thomas_.solve(r);
    if (std::holds_alternative<Periodic>(cfg_.bc)) {
      const double fact = (r[0] + (-k_) * r[m_ - 1] / gamma_) / sm_denom_;
      for (std::size_t i = 0; i < m_; ++i) r[i] -= fact * z_[i];
    }
    std::memcpy(v.data() + first_, r, m_ * sizeof(double));
  }

  const SolverConfig& cfg_;
  const simd::KernelTable& kt_;
  Scheme scheme_;
  std::size_t n_, m_, first_;
  double k_, amp_scale_;
  std::vector<double> amp_, drift_, forcing_, pad_;
  Thomas thomas_;
  std::vector<double> rhs_, z_;
  double gamma_ = 0.0, sm_denom_ = 1.0;
};

FieldState single_step(const FieldState& state, const SolverConfig& cfg,
                       std::span<const double> noise, std::uint64_t* clamps, Scheme scheme) {
  if (state.values.size() != cfg.node_count())
    throw ConfigError("state", "length " + std::to_string(state.values.size()) +
                                   " does not match the grid", std::to_string(cfg.node_count()));
  if (noise.size() != cfg.updated_count())
    throw ConfigError("noise", "length " + std::to_string(noise.size()) +
                                   " does not match the updated nodes",
                      std::to_string(cfg.updated_count()));
  Stepper stepper(cfg, scheme);
  FieldState next{state.time + cfg.dt, state.values};
  const std::uint64_t c = stepper.advance(next.values, noise);
  if (clamps) *clamps += c;
  if (!finite_all(next.values)) throw BlowUpError(1, next.time);
  return next;
}

}  // namespace

// ---------------------------------------------------------------- SigmaSpec

double SigmaSpec::operator()(double x) const noexcept {
  double out;
  evaluate({&x, 1}, 1.0, {&out, 1});
  return out;
}

void SigmaSpec::evaluate(std::span<const double> x, double scale, std::span<double> out) const {
  const std::size_t n = x.size();
  std::visit(Overloaded{
                 [&](const SigmaConstant& s) { std::fill_n(out.begin(), n, scale * s.c); },
                 [&](const SigmaAffine& s) {
                   for (std::size_t i = 0; i < n; ++i) out[i] = scale * (s.p + s.q * x[i]);
                 },
                 [&](const SigmaSine& s) {
                   // scalar and SIMD tables agree bit-for-bit, so either is fine here
                   simd::active().sine_affine(x.data(), s.c0, s.c1, s.omega / kTwoPi, scale,
                                              out.data(), n);
                 },
                 [&](const SigmaPower& s) {
                   if (s.beta == 0.5) {
                     for (std::size_t i = 0; i < n; ++i) out[i] = scale * std::sqrt(std::max(x[i], 0.0));
                   } else {
                     for (std::size_t i = 0; i < n; ++i)
                       out[i] = scale * std::pow(std::max(x[i], 0.0), s.beta);
                   }
                 },
             },
             v_);
}

double SigmaSpec::lipschitz_constant() const noexcept {
  return std::visit(Overloaded{
                        [](const SigmaConstant&) { return 0.0; },
                        [](const SigmaAffine& s) { return std::fabs(s.q); },
                        [](const SigmaSine& s) { return std::fabs(s.c1 * s.omega); },
                        [](const SigmaPower&) { return std::numeric_limits<double>::infinity(); },
                    },
                    v_);
}

std::pair<double, double> SigmaSpec::linear_growth() const noexcept {
  return std::visit(Overloaded{
                        [](const SigmaConstant& s) { return std::pair{std::fabs(s.c), 0.0}; },
                        [](const SigmaAffine& s) { return std::pair{std::fabs(s.p), std::fabs(s.q)}; },
                        [](const SigmaSine& s) {
                          return std::pair{std::fabs(s.c0) + std::fabs(s.c1), 0.0};
                        },
                        // x^beta <= 1 + |x|
                        [](const SigmaPower&) { return std::pair{1.0, 1.0}; },
                    },
                    v_);
}

void SigmaSpec::validate() const {
  std::visit(Overloaded{
                 [](const SigmaConstant& s) {
                   require_finite(s.c, "sigma.c");
                   if (s.c < 0.0) throw ConfigError("sigma.c", "must be non-negative", ">= 0");
                 },
                 [](const SigmaAffine& s) {
                   require_finite(s.p, "sigma.p");
                   require_finite(s.q, "sigma.q");
                 },
                 [](const SigmaSine& s) {
                   require_finite(s.c0, "sigma.c0");
                   require_finite(s.c1, "sigma.c1");
                   require_finite(s.omega, "sigma.omega");
                 },
                 [](const SigmaPower& s) {
                   if (!(s.beta > 0.0 && s.beta < 1.0))
                     throw ConfigError("sigma.beta", "must lie in (0, 1)", "(0, 1)");
                 },
             },
             v_);
}

std::string SigmaSpec::describe() const {
  return std::visit(
      Overloaded{
          [](const SigmaConstant& s) { return "constant(" + shortest(s.c) + ")"; },
          [](const SigmaAffine& s) { return shortest(s.p) + " + " + shortest(s.q) + " x"; },
          [](const SigmaSine& s) {
            return shortest(s.c0) + " + " + shortest(s.c1) + " sin(" + shortest(s.omega) + " x)";
          },
          [](const SigmaPower& s) { return "max(x, 0)^" + shortest(s.beta); },
      },
      v_);
}

// ---------------------------------------------------------------- DriftSpec

double DriftSpec::operator()(double x) const noexcept {
  double out;
  evaluate({&x, 1}, 1.0, {&out, 1});
  return out;
}

void DriftSpec::evaluate(std::span<const double> x, double scale, std::span<double> out) const {
  const std::size_t n = x.size();
  std::visit(Overloaded{
                 [&](const DriftNone&) { std::fill_n(out.begin(), n, 0.0); },
                 [&](const DriftLinear& d) {
                   for (std::size_t i = 0; i < n; ++i) out[i] = scale * (d.k * x[i]);
                 },
                 [&](const DriftSine& d) {
                   simd::active().sine_affine(x.data(), 0.0, d.a, d.omega / kTwoPi, scale, out.data(), n);
                 },
             },
             v_);
}

double DriftSpec::lipschitz_constant() const noexcept {
  return std::visit(Overloaded{
                        [](const DriftNone&) { return 0.0; },
                        [](const DriftLinear& d) { return std::fabs(d.k); },
                        [](const DriftSine& d) { return std::fabs(d.a * d.omega); },
                    },
                    v_);
}

void DriftSpec::validate() const {
  std::visit(Overloaded{
                 [](const DriftNone&) {},
                 [](const DriftLinear& d) { require_finite(d.k, "drift.k"); },
                 [](const DriftSine& d) {
                   require_finite(d.a, "drift.a");
                   require_finite(d.omega, "drift.omega");
                 },
             },
             v_);
}

std::string DriftSpec::describe() const {
  return std::visit(Overloaded{
                        [](const DriftNone&) { return std::string("none"); },
                        [](const DriftLinear& d) { return shortest(d.k) + " x"; },
                        [](const DriftSine& d) {
                          return shortest(d.a) + " sin(" + shortest(d.omega) + " x)";
                        },
                    },
                    v_);
}

// ---------------------------------------------------------------- config

std::size_t SolverConfig::node_count() const noexcept {
  return std::holds_alternative<Periodic>(bc) ? nx : nx + 1;
}

std::size_t SolverConfig::updated_count() const noexcept {
  if (std::holds_alternative<Periodic>(bc)) return nx;
  if (std::holds_alternative<Dirichlet>(bc)) return nx - 1;
  return nx + 1;
}

std::uint64_t SolverConfig::step_count() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("dt", "must be positive and finite", "> 0");
  if (!(t_end >= 0.0) || !std::isfinite(t_end))
    throw ConfigError("t_end", "must be non-negative and finite", ">= 0");
  const double ratio = t_end / dt;
  const double steps = std::nearbyint(ratio);
  if (std::fabs(ratio - steps) > 1e-9 * std::max(1.0, ratio))
    throw ConfigError("t_end", "must be an integer multiple of dt (t_end / dt = " + shortest(ratio) + ")");
  return static_cast<std::uint64_t>(steps);
}

CflReport cfl_check(const SolverConfig& cfg) {
  CflReport r;
  const double dx = cfg.dx();
  r.ratio = 2.0 * cfg.alpha * cfg.dt / (dx * dx);
  if (cfg.scheme == Scheme::Explicit) {
    r.max_dt = cfg.alpha > 0.0 ? dx * dx / (2.0 * cfg.alpha) : std::numeric_limits<double>::infinity();
    // relative slack so that dt = dx^2 / (2 alpha) computed in floating point passes
    r.ok = r.ratio <= 1.0 + 1e-12;
    if (!r.ok)
      r.advisory = "explicit scheme unstable: 2 alpha dt / dx^2 = " + shortest(r.ratio) +
                   " > 1; use dt <= " + shortest(r.max_dt);
  } else {
    r.max_dt = std::numeric_limits<double>::infinity();
    if (cfg.dt > dx)
      r.advisory = "dt > dx: the linear part is stable but time accuracy is poor";
  }
  return r;
}

void validate(const SolverConfig& cfg) {
  if (!(cfg.alpha > 0.0) || !std::isfinite(cfg.alpha))
    throw ConfigError("alpha", "must be positive and finite", "> 0");
  require_finite(cfg.a, "a");
  require_finite(cfg.b, "b");
  if (!(cfg.a < cfg.b)) throw ConfigError("b", "domain requires a < b", "> " + shortest(cfg.a));
  if (cfg.nx < 3) throw ConfigError("nx", "need at least 3 cells", ">= 3");
  const std::uint64_t steps = cfg.step_count();
  const CflReport cfl = cfl_check(cfg);
  if (!cfl.ok) throw ConfigError("dt", cfl.advisory, "<= " + shortest(cfl.max_dt));
  cfg.sigma.validate();
  cfg.drift.validate();
  if (const auto* d = std::get_if<Dirichlet>(&cfg.bc)) require_finite(d->value, "bc.value");

  for (double t : cfg.record.snapshot_times) {
    if (!(t >= 0.0) || !std::isfinite(t)) throw ConfigError("record.snapshot_times", "must be >= 0");
    if (std::nearbyint(t / cfg.dt) > static_cast<double>(steps))
      throw ConfigError("record.snapshot_times",
                        "time " + shortest(t) + " is beyond t_end", "<= " + shortest(cfg.t_end));
  }
  for (double x : cfg.record.trace_positions) {
    if (!(x >= cfg.a && x <= cfg.b))
      throw ConfigError("record.trace_positions", "position " + shortest(x) + " outside the domain",
                        "[" + shortest(cfg.a) + ", " + shortest(cfg.b) + "]");
  }
  if (cfg.record.trace_every < 1) throw ConfigError("record.trace_every", "must be >= 1", ">= 1");
  if (!(cfg.record.trace_from >= 0.0) || cfg.record.trace_from > cfg.t_end)
    throw ConfigError("record.trace_from", "must lie in [0, t_end]", "[0, " + shortest(cfg.t_end) + "]");
}

// ---------------------------------------------------------------- stepping

FieldState step_explicit(const FieldState& state, const SolverConfig& cfg,
                         std::span<const double> noise, std::uint64_t* clamps) {
  SolverConfig as_explicit = cfg;
  as_explicit.scheme = Scheme::Explicit;
  const CflReport cfl = cfl_check(as_explicit);
  if (!cfl.ok) throw ConfigError("dt", cfl.advisory, "<= " + shortest(cfl.max_dt));
  return single_step(state, cfg, noise, clamps, Scheme::Explicit);
}

FieldState step_semi_implicit(const FieldState& state, const SolverConfig& cfg,
                              std::span<const double> noise, std::uint64_t* clamps) {
  return single_step(state, cfg, noise, clamps, Scheme::SemiImplicit);
}

std::vector<double> initial_field(const SolverConfig& cfg, double (*f)(double)) {
  std::vector<double> v(cfg.node_count());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(cfg.node_position(i));
  return v;
}

SpaceTimeRecord simulate(const SolverConfig& cfg, std::span<const double> x0, std::uint32_t replicate) {
  validate(cfg);
  const std::size_t n = cfg.node_count();
  if (x0.size() != n)
    throw ConfigError("x0", "length " + std::to_string(x0.size()) + " does not match the grid",
                      std::to_string(n));
  if (!finite_all(x0)) throw ConfigError("x0", "must be finite");
  if (cfg.sigma.requires_nonnegative() && std::any_of(x0.begin(), x0.end(), [](double v) { return v < 0.0; }))
    throw ConfigError("x0", "power sigma needs non-negative initial data", ">= 0");

  const std::uint64_t steps = cfg.step_count();
  const double dx = cfg.dx();
  SpaceTimeRecord rec;
  rec.provenance = {cfg.seed, cfg.stream, replicate};

  struct SnapPlan {
    std::uint64_t step;
    std::size_t slot;
  };
  std::vector<SnapPlan> snaps;
  bool end_requested = false;
  for (double t : cfg.record.snapshot_times) {
    const auto s = static_cast<std::uint64_t>(std::nearbyint(t / cfg.dt));
    end_requested |= s == steps;
    Snapshot snap;
    snap.requested_time = t;
    snap.snap_distance = std::fabs(static_cast<double>(s) * cfg.dt - t);
    rec.snapshots.push_back(std::move(snap));
    snaps.push_back({s, rec.snapshots.size() - 1});
  }
  if (!end_requested) {
    rec.snapshots.push_back({cfg.t_end, 0.0, {}});
    snaps.push_back({steps, rec.snapshots.size() - 1});
  }
  std::stable_sort(snaps.begin(), snaps.end(), [](auto& l, auto& r) { return l.step < r.step; });

  const std::uint64_t stride = cfg.record.trace_every;
  const auto first_trace_step =
      static_cast<std::uint64_t>(std::ceil(cfg.record.trace_from / (cfg.dt * static_cast<double>(stride)) - 1e-9)) *
      stride;
  for (double x : cfg.record.trace_positions) {
    Trace tr;
    tr.requested_position = x;
    const auto node = static_cast<std::size_t>(std::nearbyint((x - cfg.a) / dx));
    tr.snap_distance = std::fabs(cfg.a + static_cast<double>(node) * dx - x);
    tr.node = std::holds_alternative<Periodic>(cfg.bc) ? node % cfg.nx : node;
    tr.position = cfg.node_position(tr.node);
    tr.first_step = first_trace_step;
    tr.step_stride = stride;
    tr.dt = cfg.dt;
    if (first_trace_step <= steps) tr.values.reserve((steps - first_trace_step) / stride + 1);
    rec.traces.push_back(std::move(tr));
  }

  std::vector<double> v(x0.begin(), x0.end());
  Stepper stepper(cfg, cfg.scheme);
  const std::size_t m = stepper.updated();
  std::vector<double> xi(m);
  const auto& kt = simd::active();
  std::size_t next_snap = 0;

  const auto record = [&](std::uint64_t s) {
    while (next_snap < snaps.size() && snaps[next_snap].step == s) {
      rec.snapshots[snaps[next_snap].slot].state = {static_cast<double>(s) * cfg.dt, v};
      ++next_snap;
    }
    if (s >= first_trace_step && (s - first_trace_step) % stride == 0)
      for (auto& tr : rec.traces) tr.values.push_back(v[tr.node]);
  };

  record(0);
  for (std::uint64_t s = 1; s <= steps; ++s) {
    kt.fill_normals(cfg.seed, cfg.stream, replicate, (s - 1) * m, xi.data(), m);
    rec.clamp_count += stepper.advance(v, xi);
    rec.total_updates += m;
    if (!finite_all(v)) throw BlowUpError(s, static_cast<double>(s) * cfg.dt);
    record(s);
  }
  return rec;
}

// ---------------------------------------------------------------- checkpoints

namespace {

constexpr char kMagic[8] = {'S', 'H', 'E', 'L', 'A', 'B', 'C', 'K'};

void put_u64(std::vector<unsigned char>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}
void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

struct Reader {
  std::span<const unsigned char> bytes;
  std::size_t pos = 0;

  std::uint64_t get(int width) {
    if (pos + static_cast<std::size_t>(width) > bytes.size()) throw Error("checkpoint truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= std::uint64_t{bytes[pos + i]} << (8 * i);
    pos += static_cast<std::size_t>(width);
    return v;
  }
};

}  // namespace

std::vector<unsigned char> encode_checkpoint(const Checkpoint& c) {
  std::vector<unsigned char> out(std::begin(kMagic), std::end(kMagic));
  out.reserve(40 + 8 * c.state.values.size());
  put_u32(out, kCheckpointVersion);
  put_u32(out, 0);
  put_u64(out, c.config_hash);
  put_u64(out, std::bit_cast<std::uint64_t>(c.state.time));
  put_u64(out, c.state.values.size());
  for (double v : c.state.values) put_u64(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

Checkpoint decode_checkpoint(std::span<const unsigned char> bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 8) != 0) throw Error("not a checkpoint file");
  Reader r{bytes, 8};
  const auto version = static_cast<std::uint32_t>(r.get(4));
  if (version != kCheckpointVersion)
    throw Error("unsupported checkpoint version " + std::to_string(version));
  r.get(4);
  Checkpoint c;
  c.config_hash = r.get(8);
  c.state.time = std::bit_cast<double>(r.get(8));
  const std::uint64_t count = r.get(8);
  if (count != (bytes.size() - r.pos) / 8 || (bytes.size() - r.pos) % 8 != 0)
    throw Error("checkpoint length does not match its header");
  c.state.values.resize(count);
  for (auto& v : c.state.values) v = std::bit_cast<double>(r.get(8));
  return c;
}

}  // namespace shelab
