#include "ewa/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include "ewa/errors.hpp"

namespace ewa {

std::string_view to_string(BasisKind kind) {
  switch (kind) {
    case BasisKind::cosine:
      return "cosine";
    case BasisKind::standard:
      return "standard";
    case BasisKind::random:
      return "random";
  }
  return "unknown";
}

std::string_view to_string(FamilyKind kind) {
  switch (kind) {
    case FamilyKind::projections:
      return "projections";
    case FamilyKind::taper:
      return "taper";
    case FamilyKind::both:
      return "both";
  }
  return "unknown";
}

std::string_view to_string(MomentForms forms) {
  switch (forms) {
    case MomentForms::general:
      return "general";
    case MomentForms::projection_gaussian:
      return "projection_gaussian";
    case MomentForms::both:
      return "both";
  }
  return "unknown";
}

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x,
                                 std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

[[noreturn]] void fail(const std::string& key, const std::string& reason) {
  throw ConfigError(key + ": " + reason);
}

double to_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    fail(key, "expected a number, got '" + text + "'");
  }
  if (!std::isfinite(v)) fail(key, "must be finite");
  return v;
}

std::uint64_t to_u64(const std::string& key, const std::string& text) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    fail(key, "expected a nonnegative integer, got '" + text + "'");
  }
  return v;
}

// Key/value pairs, consumed as they are interpreted so leftovers are unknown.
class Entries {
 public:
  explicit Entries(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
      ++number;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.resize(hash);
      const std::string body = trim(line);
      if (body.empty()) continue;
      const auto eq = body.find('=');
      if (eq == std::string::npos) {
        throw ConfigError("line " + std::to_string(number) +
                          ": expected 'key = value'");
      }
      const std::string key = trim(std::string_view(body).substr(0, eq));
      const std::string value = trim(std::string_view(body).substr(eq + 1));
      if (key.empty()) {
        throw ConfigError("line " + std::to_string(number) + ": empty key");
      }
      if (value.empty()) fail(key, "empty value");
      if (!map_.emplace(key, value).second) fail(key, "given more than once");
    }
  }

  std::optional<std::string> take(const std::string& key) {
    const auto it = map_.find(key);
    if (it == map_.end()) return std::nullopt;
    std::string v = it->second;
    map_.erase(it);
    return v;
  }

  bool has(const std::string& key) const { return map_.count(key) > 0; }

  void reject_prefix(const std::string& prefix, const std::string& reason) {
    for (const auto& [k, v] : map_) {
      if (k.rfind(prefix, 0) == 0) fail(k, reason);
    }
  }

  void finish() const {
    if (!map_.empty()) fail(map_.begin()->first, "unknown key");
  }

 private:
  std::map<std::string, std::string> map_;
};

double get_double(Entries& e, const std::string& key, double fallback) {
  const auto v = e.take(key);
  return v ? to_double(key, *v) : fallback;
}

std::uint64_t get_u64(Entries& e, const std::string& key, std::uint64_t fallback) {
  const auto v = e.take(key);
  return v ? to_u64(key, *v) : fallback;
}

std::vector<double> get_doubles(Entries& e, const std::string& key) {
  std::vector<double> out;
  if (const auto v = e.take(key)) {
    for (const auto& item : split(*v, ',')) out.push_back(to_double(key, item));
  }
  return out;
}

std::vector<Eigen::Index> get_indices(Entries& e, const std::string& key) {
  std::vector<Eigen::Index> out;
  if (const auto v = e.take(key)) {
    for (const auto& item : split(*v, ',')) {
      out.push_back(static_cast<Eigen::Index>(to_u64(key, item)));
    }
  }
  return out;
}

template <typename Enum, typename Parse>
Enum get_enum(Entries& e, const std::string& key, Enum fallback, Parse parse) {
  const auto v = e.take(key);
  if (!v) return fallback;
  try {
    return parse(*v);
  } catch (const std::exception& ex) {
    fail(key, ex.what());
  }
}

BasisKind parse_basis(std::string_view s) {
  if (s == "cosine") return BasisKind::cosine;
  if (s == "standard") return BasisKind::standard;
  if (s == "random") return BasisKind::random;
  throw ValidationError("expected cosine, standard or random");
}

FamilyKind parse_family(std::string_view s) {
  if (s == "projections") return FamilyKind::projections;
  if (s == "taper") return FamilyKind::taper;
  if (s == "both") return FamilyKind::both;
  throw ValidationError("expected projections, taper or both");
}

MomentForms parse_forms(std::string_view s) {
  if (s == "general") return MomentForms::general;
  if (s == "projection_gaussian") return MomentForms::projection_gaussian;
  if (s == "both") return MomentForms::both;
  throw ValidationError("expected general, projection_gaussian or both");
}

SignalSpec parse_signal(Entries& e) {
  const SignalKind kind =
      get_enum(e, "signal.kind", SignalKind::sinusoid, parse_signal_kind);
  SignalSpec s;
  switch (kind) {
    case SignalKind::zero:
      s = SignalSpec::zero();
      break;
    case SignalKind::sinusoid:
      s = SignalSpec::sinusoid(get_double(e, "signal.amplitude", 1.0),
                               get_double(e, "signal.frequency", 1.0),
                               get_double(e, "signal.phase", 0.0));
      break;
    case SignalKind::mix: {
      const auto a = get_doubles(e, "signal.amplitudes");
      const auto f = get_doubles(e, "signal.frequencies");
      auto p = get_doubles(e, "signal.phases");
      if (a.empty()) fail("signal.amplitudes", "required for signal.kind = mix");
      if (f.size() != a.size()) {
        fail("signal.frequencies", "needs one entry per amplitude");
      }
      if (p.empty()) p.assign(a.size(), 0.0);
      if (p.size() != a.size()) fail("signal.phases", "needs one entry per amplitude");
      std::vector<SinusoidComponent> comps;
      for (std::size_t i = 0; i < a.size(); ++i) comps.push_back({a[i], f[i], p[i]});
      s = SignalSpec::mix(std::move(comps));
      break;
    }
    case SignalKind::step:
      s = SignalSpec::step(get_double(e, "signal.level", 1.0),
                           get_double(e, "signal.location", 0.5));
      break;
    case SignalKind::custom: {
      auto values = get_doubles(e, "signal.values");
      if (values.empty()) fail("signal.values", "required for signal.kind = custom");
      s = SignalSpec::custom(std::move(values));
      break;
    }
  }
  e.reject_prefix("signal.", "does not apply to signal.kind = " +
                                 std::string(to_string(kind)));
  return s;
}

Eigen::MatrixXd basis_matrix(const RunConfig& cfg) {
  switch (cfg.collection.basis) {
    case BasisKind::cosine:
      return cosine_basis<double>(cfg.n);
    case BasisKind::standard:
      return standard_basis<double>(cfg.n);
    case BasisKind::random:
      return random_orthonormal_basis<double>(cfg.n, cfg.collection.basis_seed);
  }
  return {};
}

std::vector<Estimator> build_items(const RunConfig& cfg) {
  const OrthonormalBasis<double> basis(basis_matrix(cfg));
  std::vector<Estimator> items;
  const auto& c = cfg.collection;
  if (c.family != FamilyKind::taper) {
    for (auto& e : nested_projections(basis, c.ranks)) items.push_back(std::move(e));
  }
  if (c.family != FamilyKind::projections) {
    for (auto& e : taper_family(basis, c.taper_widths)) items.push_back(std::move(e));
  }
  return items;
}

double max_norm(const std::vector<Estimator>& items) {
  double v = 0.0;
  for (const auto& e : items) v = std::max(v, e.stats().spec_norm);
  return v;
}

void check_shape(const RunConfig& cfg) {
  const auto& c = cfg.collection;
  if (c.family != FamilyKind::taper) {
    if (c.ranks.empty()) fail("collection.ranks", "must not be empty");
    for (Eigen::Index k : c.ranks) {
      if (k > cfg.n) fail("collection.ranks", "rank " + std::to_string(k) + " exceeds n");
    }
  }
  if (c.family != FamilyKind::projections) {
    if (c.taper_widths.empty()) fail("collection.taper_widths", "must not be empty");
    for (Eigen::Index k : c.taper_widths) {
      if (k < 1) fail("collection.taper_widths", "widths must be positive");
    }
  }
}

template <typename F>
void as_key(const std::string& key, F&& f) {
  try {
    f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& ex) {
    fail(key, ex.what());
  }
}

}  // namespace

Collection build_collection(const RunConfig& cfg) {
  auto items = build_items(cfg);
  Eigen::VectorXd prior;
  if (cfg.collection.prior.empty()) {
    prior = Collection::uniform_prior(items.size());
  } else {
    prior = Eigen::Map<const Eigen::VectorXd>(
        cfg.collection.prior.data(),
        static_cast<Eigen::Index>(cfg.collection.prior.size()));
  }
  return Collection(std::move(items), prior, cfg.agg.v_bound);
}

Scenario build_scenario(const RunConfig& cfg) {
  return Scenario(cfg.signal, build_collection(cfg), cfg.noise, cfg.agg);
}

void validate(const RunConfig& cfg) {
  if (cfg.n < 1) fail("n", "must be at least 1");
  if (cfg.n > static_cast<Eigen::Index>(kDefaultMaxGridSize)) {
    fail("n", "exceeds the maximum grid size " + std::to_string(kDefaultMaxGridSize));
  }
  as_key("signal.kind", [&] { (void)cfg.signal.evaluate(cfg.n); });

  check_shape(cfg);
  const auto& c = cfg.collection;
  std::vector<Estimator> items;
  as_key("collection.basis", [&] { items = build_items(cfg); });
  if (!c.prior.empty()) {
    if (c.prior.size() != items.size()) {
      fail("collection.prior", "has " + std::to_string(c.prior.size()) +
                                   " entries, collection has " +
                                   std::to_string(items.size()));
    }
    as_key("collection.prior", [&] {
      Eigen::Map<const Eigen::VectorXd> p(c.prior.data(),
                                          static_cast<Eigen::Index>(c.prior.size()));
      detail::check_probability<double>(p, "prior");
    });
  }

  const Config& a = cfg.agg;
  if (!(a.sigma_sq > 0.0)) fail("agg.sigma_sq", "must be positive");
  if (a.sigma_sq < cfg.noise.sigma_sq() * (1.0 - 1e-12)) {
    fail("agg.sigma_sq", "is below the noise model's σ² = " +
                             format_double(cfg.noise.sigma_sq()));
  }
  if (!(a.v_bound >= 0.5)) fail("agg.v_bound", "V must be at least 0.5");
  if (a.v_bound < max_norm(items)) {
    fail("agg.v_bound", "V is below the largest spectral norm " +
                            format_double(max_norm(items)));
  }
  if (!(a.delta >= 0.0 && a.delta <= 1.0)) fail("agg.delta", "must lie in [0, 1]");
  if (!(a.eta > 0.0 && a.eta <= 1.0)) fail("agg.eta", "must lie in (0, 1]");
  if (a.penalty_rule == PenaltyRule::custom && !(a.kappa > 0.0)) {
    fail("agg.kappa", "must be positive for penalty_rule = custom");
  }
  if (a.penalty_rule == PenaltyRule::gaussian_projection) {
    if (cfg.noise.kind() != NoiseKind::gaussian) {
      fail("agg.penalty_rule", "gaussian_projection requires noise.kind = gaussian");
    }
    for (const auto& e : items) {
      if (!e.is_projection()) {
        fail("agg.penalty_rule",
             "gaussian_projection requires orthogonal projections, '" + e.label() +
                 "' is not one");
      }
    }
  }
  as_key("agg.beta", [&] { a.validate(); });
  as_key("agg.kappa", [&] { (void)build_scenario(cfg); });

  if (cfg.trials < 1) fail("run.trials", "must be at least 1");
  if (cfg.moment_samples < kMinMomentSamples) {
    fail("moments.samples", "must be at least " + std::to_string(kMinMomentSamples));
  }
  for (const auto& [t, u] : cfg.moment_pairs) {
    if (t >= items.size() || u >= items.size()) {
      fail("moments.pairs", "index out of range for " + std::to_string(items.size()) +
                                " estimators");
    }
  }
  if (cfg.mgf_samples < 2) fail("mgf.samples", "must be at least 2");
  if (cfg.mgf_directions < 1) fail("mgf.directions", "must be at least 1");
}

RunConfig parse_config(std::string_view text) {
  Entries e(text);
  RunConfig cfg;

  const auto n = e.take("n");
  if (!n) fail("n", "required");
  cfg.n = static_cast<Eigen::Index>(to_u64("n", *n));
  if (cfg.n < 1) fail("n", "must be at least 1");
  if (cfg.n > static_cast<Eigen::Index>(kDefaultMaxGridSize)) {
    fail("n", "exceeds the maximum grid size " + std::to_string(kDefaultMaxGridSize));
  }

  cfg.signal = parse_signal(e);

  auto& c = cfg.collection;
  c.basis = get_enum(e, "collection.basis", BasisKind::cosine, parse_basis);
  if (c.basis == BasisKind::random) {
    c.basis_seed = get_u64(e, "collection.basis_seed", 0);
  } else if (e.has("collection.basis_seed")) {
    fail("collection.basis_seed", "only applies to collection.basis = random");
  }
  c.family = get_enum(e, "collection.family", FamilyKind::projections, parse_family);
  if (c.family != FamilyKind::taper) {
    c.ranks = get_indices(e, "collection.ranks");
    if (c.ranks.empty()) c.ranks = dyadic_ranks(cfg.n);
  }
  if (c.family != FamilyKind::projections) {
    c.taper_widths = get_indices(e, "collection.taper_widths");
    if (c.taper_widths.empty()) c.taper_widths = dyadic_ranks(cfg.n);
  }
  if (const auto p = e.take("collection.prior"); p && *p != "uniform") {
    for (const auto& item : split(*p, ',')) {
      c.prior.push_back(to_double("collection.prior", item));
    }
  }
  e.reject_prefix("collection.", "does not apply to collection.family = " +
                                     std::string(to_string(c.family)));

  const NoiseKind kind =
      get_enum(e, "noise.kind", NoiseKind::gaussian, parse_noise_kind);
  const auto sigma = e.take("noise.sigma");
  if (!sigma) fail("noise.sigma", "required");
  const double scale = to_double("noise.sigma", *sigma);
  if (!(scale > 0.0)) fail("noise.sigma", "must be positive");
  cfg.noise = NoiseModel(kind, scale);

  auto& a = cfg.agg;
  const auto beta = e.take("agg.beta");
  if (!beta) fail("agg.beta", "required");
  a.beta = to_double("agg.beta", *beta);
  a.delta = get_double(e, "agg.delta", 1.0);
  a.eta = get_double(e, "agg.eta", 0.05);
  a.penalty_rule = get_enum(e, "agg.penalty_rule", PenaltyRule::theorem1,
                            parse_penalty_rule);
  if (a.penalty_rule == PenaltyRule::custom) {
    a.kappa = get_double(e, "agg.kappa", 0.0);
  } else if (e.has("agg.kappa")) {
    fail("agg.kappa", "only applies to agg.penalty_rule = custom");
  }
  a.sigma_sq = get_double(e, "agg.sigma_sq", cfg.noise.sigma_sq());
  if (const auto v = e.take("agg.v_bound")) {
    a.v_bound = to_double("agg.v_bound", *v);
  } else {
    check_shape(cfg);
    std::vector<Estimator> items;
    as_key("collection.basis", [&] { items = build_items(cfg); });
    a.v_bound = std::max(0.5, max_norm(items));
  }

  cfg.trials = get_u64(e, "run.trials", cfg.trials);
  cfg.seed = get_u64(e, "run.seed", cfg.seed);

  cfg.moment_samples = get_u64(e, "moments.samples", cfg.moment_samples);
  if (const auto p = e.take("moments.pairs"); p && *p != "adjacent") {
    for (const auto& item : split(*p, ',')) {
      const auto parts = split(item, ':');
      if (parts.size() != 2) fail("moments.pairs", "expected t:u, got '" + item + "'");
      cfg.moment_pairs.emplace_back(to_u64("moments.pairs", parts[0]),
                                    to_u64("moments.pairs", parts[1]));
    }
  }
  cfg.moment_forms = get_enum(e, "moments.form", MomentForms::general, parse_forms);

  cfg.mgf_samples = get_u64(e, "mgf.samples", cfg.mgf_samples);
  cfg.mgf_directions = get_u64(e, "mgf.directions", cfg.mgf_directions);

  e.finish();
  validate(cfg);
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path + ": cannot open config file");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

namespace {

template <typename T, typename F>
std::string join(const std::vector<T>& xs, F&& f) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ',';
    out += f(xs[i]);
  }
  return out;
}

}  // namespace

std::string render(const RunConfig& cfg) {
  std::ostringstream out;
  auto line = [&](std::string_view key, const std::string& value) {
    out << key << " = " << value << '\n';
  };
  auto num = [](double x) { return format_double(x); };
  auto idx = [](Eigen::Index k) { return std::to_string(k); };

  line("n", std::to_string(cfg.n));

  const SignalSpec& s = cfg.signal;
  line("signal.kind", std::string(to_string(s.kind)));
  switch (s.kind) {
    case SignalKind::zero:
      break;
    case SignalKind::sinusoid:
      line("signal.amplitude", num(s.components.at(0).amplitude));
      line("signal.frequency", num(s.components.at(0).frequency));
      line("signal.phase", num(s.components.at(0).phase));
      break;
    case SignalKind::mix:
      line("signal.amplitudes",
           join(s.components, [&](const SinusoidComponent& c) { return num(c.amplitude); }));
      line("signal.frequencies",
           join(s.components, [&](const SinusoidComponent& c) { return num(c.frequency); }));
      line("signal.phases",
           join(s.components, [&](const SinusoidComponent& c) { return num(c.phase); }));
      break;
    case SignalKind::step:
      line("signal.level", num(s.level));
      line("signal.location", num(s.location));
      break;
    case SignalKind::custom:
      line("signal.values", join(s.values, num));
      break;
  }

  const auto& c = cfg.collection;
  line("collection.basis", std::string(to_string(c.basis)));
  if (c.basis == BasisKind::random) line("collection.basis_seed", std::to_string(c.basis_seed));
  line("collection.family", std::string(to_string(c.family)));
  if (c.family != FamilyKind::taper) line("collection.ranks", join(c.ranks, idx));
  if (c.family != FamilyKind::projections) {
    line("collection.taper_widths", join(c.taper_widths, idx));
  }
  line("collection.prior", c.prior.empty() ? "uniform" : join(c.prior, num));

  line("noise.kind", std::string(to_string(cfg.noise.kind())));
  line("noise.sigma", num(cfg.noise.scale()));

  const Config& a = cfg.agg;
  line("agg.beta", num(a.beta));
  line("agg.delta", num(a.delta));
  line("agg.eta", num(a.eta));
  line("agg.penalty_rule", std::string(to_string(a.penalty_rule)));
  if (a.penalty_rule == PenaltyRule::custom) line("agg.kappa", num(a.kappa));
  line("agg.sigma_sq", num(a.sigma_sq));
  line("agg.v_bound", num(a.v_bound));

  line("run.trials", std::to_string(cfg.trials));
  line("run.seed", std::to_string(cfg.seed));

  line("moments.samples", std::to_string(cfg.moment_samples));
  line("moments.pairs",
       cfg.moment_pairs.empty()
           ? std::string("adjacent")
           : join(cfg.moment_pairs, [](const std::pair<std::size_t, std::size_t>& p) {
               return std::to_string(p.first) + ":" + std::to_string(p.second);
             }));
  line("moments.form", std::string(to_string(cfg.moment_forms)));

  line("mgf.samples", std::to_string(cfg.mgf_samples));
  line("mgf.directions", std::to_string(cfg.mgf_directions));
  return out.str();
}

std::vector<std::pair<std::size_t, std::size_t>> moment_pairs(const RunConfig& cfg,
                                                              std::size_t m) {
  if (!cfg.moment_pairs.empty()) return cfg.moment_pairs;
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t t = 0; t + 1 < m; ++t) {
    out.emplace_back(t, t + 1);
    out.emplace_back(t + 1, t);
  }
  if (out.empty()) out.emplace_back(0, 0);
  return out;
}

}  // namespace ewa
