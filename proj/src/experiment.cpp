#include "ebpca/experiment.hpp"

#include "ebpca/rmt.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace ebpca {

namespace {

using json = nlohmann::ordered_json;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = v.find(',', start);
    std::string item = trim(std::string_view(v).substr(start, comma == std::string::npos ? std::string::npos : comma - start));
    if (!item.empty()) out.push_back(item);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) {
    fail(ErrorKind::kConfig, "bad value for '" + key + "': '" + v + "'");
  }
  return out;
}

std::string num(double x) {
  if (std::isnan(x)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

std::string hex64(std::uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

double elapsed(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    fail(ErrorKind::kIo, "cannot create output directory '" + dir + "'");
  }
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::kIo, "cannot write '" + path + "'");
  return out;
}

void write_json(const std::string& path, const json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
  if (!out) fail(ErrorKind::kIo, "failed writing '" + path + "'");
}

Vector diag_or_empty(const Matrix& m) {
  return m.size() ? Vector(m.diagonal()) : Vector();
}

void push_history(SeedOutcome& so, const std::string& method, const EBPCAResult& r) {
  for (const auto& h : r.history) {
    if (!h.acc_u || !h.acc_v) continue;
    MethodRecord rec;
    rec.method = method;
    rec.seed = so.seed;
    rec.iteration = h.t;
    rec.acc_u = *h.acc_u;
    rec.acc_v = *h.acc_v;
    rec.sigma = diag_or_empty(h.right.Sigma);
    rec.sigmabar = diag_or_empty(h.left.Sigma);
    so.records.push_back(std::move(rec));
  }
  for (const auto& w : r.warnings) so.warnings.push_back(method + ": " + w);
  if (!r.history.empty() && !r.history.back().npmle_converged) {
    so.warnings.push_back(method + ": NPMLE did not reach tolerance in the final round");
  }
}

SeedOutcome run_seed(const RunConfig& c, std::uint64_t seed) {
  SeedOutcome so;
  so.seed = seed;
  const Index k = c.k();
  SpikedConfig sc{c.n, c.d, c.signals, seed};
  const PriorSpec pu = PriorSpec::parse(c.prior_u, k);
  const PriorSpec pv = PriorSpec::parse(c.prior_v, k);
  const SpikedInstance inst = generate_instance(sc, pu, pv);
  so.y_hash = hash_matrix(inst.Y);
  for (Index i : sc.subcritical()) {
    so.warnings.push_back("signal " + std::to_string(i + 1) + " is at or below the phase transition");
  }

  AmpOptions opt = c.amp_options();
  opt.seed = seed;
  opt.truth = Truth{inst.U, inst.V};

  // The spectrum is shared by PCA and the EB variants, so they all start
  // from the same sample PCs.
  std::optional<Normalized> nz;
  auto normalized = [&]() -> const Normalized& {
    if (!nz) nz = normalize(inst.Y, k, opt.svd);
    return *nz;
  };

  for (const std::string& m : c.methods) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      if (m == "pca") {
        const Normalized& z = normalized();
        MethodRecord rec;
        rec.method = m;
        rec.seed = seed;
        rec.iteration = -1;
        rec.acc_u = accuracy(z.spectrum.F, inst.U);
        rec.acc_v = accuracy(z.spectrum.G, inst.V);
        so.records.push_back(std::move(rec));
      } else if (m == "ebpca" || m == "ebpca_marginal") {
        const Normalized& z = normalized();
        AmpOptions o = opt;
        o.marginal = m == "ebpca_marginal";
        push_history(so, m, run_ebpca_normalized(z.Y, z.spectrum, z.tau_hat, o));
      } else if (m == "oracle") {
        push_history(so, m,
                     run_oracle_bayes_amp(inst.Y, k, c.iters, prior_from_spec(pu),
                                          prior_from_spec(pv), c.signals, opt));
      } else if (m == "vb") {
        push_history(so, m, run_mean_field_vb(inst.Y, c.iters, opt));
      }
    } catch (const Error& e) {
      so.warnings.push_back(m + ": " + e.what());
    }
    so.seconds.emplace_back(m, elapsed(t0));
  }
  return so;
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

const std::vector<std::string>& known_methods() {
  static const std::vector<std::string> names{"pca", "ebpca", "ebpca_marginal", "oracle", "vb"};
  return names;
}

AmpOptions RunConfig::amp_options() const {
  AmpOptions o;
  o.iters = iters;
  o.support_cap = support_cap;
  o.npmle.tol = npmle_tol;
  o.npmle.max_iter = npmle_max_iter;
  o.npmle.solver = solver == "em" ? NpmleSolver::kEm : NpmleSolver::kActiveSetNewton;
  return o;
}

void RunConfig::validate() const {
  require(n >= 2 && d >= 2, ErrorKind::kConfig, "n and d must be at least 2");
  require(!signals.empty(), ErrorKind::kConfig, "signals must not be empty");
  require(iters >= 0, ErrorKind::kConfig, "iters must be >= 0");
  require(seeds >= 1, ErrorKind::kConfig, "seeds must be >= 1");
  require(support_cap >= 1, ErrorKind::kConfig, "support_cap must be >= 1");
  require(npmle_tol > 0.0, ErrorKind::kConfig, "npmle_tol must be > 0");
  require(npmle_max_iter >= 0, ErrorKind::kConfig, "npmle_max_iter must be >= 0");
  require(solver == "newton" || solver == "em", ErrorKind::kConfig,
          "solver must be 'newton' or 'em'");
  require(!methods.empty(), ErrorKind::kConfig, "methods must not be empty");
  for (const auto& m : methods) {
    if (std::find(known_methods().begin(), known_methods().end(), m) == known_methods().end()) {
      fail(ErrorKind::kConfig, "unknown method '" + m + "'");
    }
  }
  if (std::find(methods.begin(), methods.end(), "vb") != methods.end()) {
    require(k() == 1, ErrorKind::kConfig, "method 'vb' is rank-one only (use one signal)");
  }
  SpikedConfig sc{n, d, signals, seed_base};
  try {
    sc.validate();
    PriorSpec::parse(prior_u, k()).validate();
    PriorSpec::parse(prior_v, k()).validate();
  } catch (const Error& e) {
    fail(ErrorKind::kConfig, e.what());
  }
}

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig c;
  std::optional<Index> k_given;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      fail(ErrorKind::kConfig, "line " + std::to_string(lineno) + ": expected key=value");
    }
    const std::string key = trim(std::string_view(t).substr(0, eq));
    const std::string val = trim(std::string_view(t).substr(eq + 1));
    if (key == "n") c.n = parse_number<Index>(key, val);
    else if (key == "d") c.d = parse_number<Index>(key, val);
    else if (key == "k") k_given = parse_number<Index>(key, val);
    else if (key == "signals") {
      c.signals.clear();
      for (const auto& s : split_list(val)) c.signals.push_back(parse_number<double>(key, s));
    } else if (key == "prior_u") c.prior_u = val;
    else if (key == "prior_v") c.prior_v = val;
    else if (key == "prior") c.prior_u = c.prior_v = val;
    else if (key == "methods") c.methods = split_list(val);
    else if (key == "iters") c.iters = parse_number<int>(key, val);
    else if (key == "seeds") c.seeds = parse_number<int>(key, val);
    else if (key == "seed_base") c.seed_base = parse_number<std::uint64_t>(key, val);
    else if (key == "out") c.out = val;
    else if (key == "support_cap") c.support_cap = parse_number<Index>(key, val);
    else if (key == "npmle_tol") c.npmle_tol = parse_number<double>(key, val);
    else if (key == "npmle_max_iter") c.npmle_max_iter = parse_number<int>(key, val);
    else if (key == "solver") c.solver = val;
    else fail(ErrorKind::kConfig, "line " + std::to_string(lineno) + ": unknown key '" + key + "'");
  }
  if (k_given && *k_given != c.k()) {
    fail(ErrorKind::kConfig, "k = " + std::to_string(*k_given) + " but " +
                                 std::to_string(c.k()) + " signals were given");
  }
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

// ---------------------------------------------------------------------------
// simulate

int worker_count(int jobs) {
  int w = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("EBPCA_THREADS")) {
    int cap = 0;
    const std::string s(env);
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), cap);
    if (ec == std::errc() && ptr == s.data() + s.size() && cap >= 1) w = std::min(w, cap);
  }
  return std::max(1, std::min(w, jobs));
}

SimulationOutput run_simulation(const RunConfig& config, int workers) {
  config.validate();
  SimulationOutput out;
  out.config = config;
  out.workers = std::max(1, std::min(workers, config.seeds));
  out.seeds.resize(static_cast<std::size_t>(config.seeds));

  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex error_mu;
  auto work = [&] {
    while (true) {
      const int i = next.fetch_add(1);
      if (i >= config.seeds) return;
      try {
        out.seeds[static_cast<std::size_t>(i)] =
            run_seed(config, config.seed_base + static_cast<std::uint64_t>(i));
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  if (out.workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < out.workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);
  return out;
}

std::vector<SummaryRow> summarize(const SimulationOutput& out) {
  std::vector<SummaryRow> rows;
  const Index k = out.config.k();
  for (const std::string& m : out.config.methods) {
    // Final record per seed.
    std::vector<const MethodRecord*> finals;
    for (const auto& so : out.seeds) {
      const MethodRecord* last = nullptr;
      for (const auto& r : so.records) {
        if (r.method == m) last = &r;
      }
      if (last) finals.push_back(last);
    }
    auto add = [&](const std::string& metric, int pc, auto getter) {
      SummaryRow row;
      row.method = m;
      row.metric = metric;
      row.pc = pc;
      std::vector<double> vals;
      for (const MethodRecord* r : finals) {
        const double v = getter(*r);
        if (std::isfinite(v)) vals.push_back(v);
      }
      row.count = static_cast<Index>(vals.size());
      if (!vals.empty()) {
        double s = 0.0;
        for (double v : vals) s += v;
        row.mean = s / static_cast<double>(vals.size());
        double ss = 0.0;
        for (double v : vals) ss += (v - row.mean) * (v - row.mean);
        row.sd = vals.size() > 1 ? std::sqrt(ss / static_cast<double>(vals.size() - 1)) : 0.0;
      } else {
        row.mean = row.sd = std::numeric_limits<double>::quiet_NaN();
      }
      rows.push_back(row);
    };
    auto at = [](const Vector& v, Index i) {
      return i < v.size() ? v(i) : std::numeric_limits<double>::quiet_NaN();
    };
    for (Index i = 0; i < k; ++i) {
      const int pc = static_cast<int>(i + 1);
      add("alignment_u", pc, [&](const MethodRecord& r) { return at(r.acc_u.alignment, i); });
      add("alignment_v", pc, [&](const MethodRecord& r) { return at(r.acc_v.alignment, i); });
      add("distance_u", pc, [&](const MethodRecord& r) { return at(r.acc_u.pc_distance, i); });
      add("distance_v", pc, [&](const MethodRecord& r) { return at(r.acc_v.pc_distance, i); });
    }
    add("joint_distance_u", 0, [](const MethodRecord& r) { return r.acc_u.joint_distance; });
    add("joint_distance_v", 0, [](const MethodRecord& r) { return r.acc_v.joint_distance; });
    add("joint_projector_u", 0, [](const MethodRecord& r) { return r.acc_u.joint_projector; });
    add("joint_projector_v", 0, [](const MethodRecord& r) { return r.acc_v.joint_projector; });
  }
  return rows;
}

std::string format_mean_sd(double mean, double sd) {
  auto three = [](double x) {
    if (!std::isfinite(x)) return std::string("nan");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", x);
    std::string s(buf);
    if (s.rfind("0.", 0) == 0) s.erase(0, 1);
    else if (s.rfind("-0.", 0) == 0) s.erase(1, 1);
    return s;
  };
  return three(mean) + "(" + three(sd) + ")";
}

void write_simulation(const SimulationOutput& out, const std::string& dir) {
  ensure_dir(dir);
  const Index k = out.config.k();
  {
    auto f = open_out(dir + "/per_seed.csv");
    f << "method,seed,iteration,pc,alignment_u,alignment_v,distance_u,distance_v,"
         "projector_u,projector_v,joint_distance_u,joint_distance_v,joint_projector_u,"
         "joint_projector_v,sigma,sigmabar\n";
    auto at = [](const Vector& v, Index i) {
      return i < v.size() ? v(i) : std::numeric_limits<double>::quiet_NaN();
    };
    for (const auto& so : out.seeds) {
      for (const auto& r : so.records) {
        for (Index i = 0; i < k; ++i) {
          f << r.method << ',' << r.seed << ',' << r.iteration << ',' << (i + 1) << ','
            << num(at(r.acc_u.alignment, i)) << ',' << num(at(r.acc_v.alignment, i)) << ','
            << num(at(r.acc_u.pc_distance, i)) << ',' << num(at(r.acc_v.pc_distance, i)) << ','
            << num(at(r.acc_u.pc_projector, i)) << ',' << num(at(r.acc_v.pc_projector, i)) << ','
            << num(r.acc_u.joint_distance) << ',' << num(r.acc_v.joint_distance) << ','
            << num(r.acc_u.joint_projector) << ',' << num(r.acc_v.joint_projector) << ','
            << num(at(r.sigma, i)) << ',' << num(at(r.sigmabar, i)) << '\n';
        }
      }
    }
    if (!f) fail(ErrorKind::kIo, "failed writing per_seed.csv");
  }
  {
    auto f = open_out(dir + "/summary.csv");
    f << "method,metric,pc,count,mean,sd,mean_sd\n";
    for (const auto& r : summarize(out)) {
      f << r.method << ',' << r.metric << ',' << r.pc << ',' << r.count << ',' << num(r.mean)
        << ',' << num(r.sd) << ',' << format_mean_sd(r.mean, r.sd) << '\n';
    }
    if (!f) fail(ErrorKind::kIo, "failed writing summary.csv");
  }
  json m;
  m["version"] = kVersion;
  const RunConfig& c = out.config;
  m["config"] = {{"n", c.n},
                 {"d", c.d},
                 {"k", c.k()},
                 {"signals", c.signals},
                 {"prior_u", c.prior_u},
                 {"prior_v", c.prior_v},
                 {"methods", c.methods},
                 {"iters", c.iters},
                 {"seeds", c.seeds},
                 {"seed_base", c.seed_base},
                 {"out", c.out},
                 {"support_cap", c.support_cap},
                 {"npmle_tol", c.npmle_tol},
                 {"npmle_max_iter", c.npmle_max_iter},
                 {"solver", c.solver}};
  m["workers"] = out.workers;
  json seeds = json::array();
  for (const auto& so : out.seeds) {
    json s;
    s["seed"] = so.seed;
    json hashes = json::object();
    for (const auto& [method, secs] : so.seconds) hashes[method] = hex64(so.y_hash);
    s["y_hash"] = hashes;
    json secs = json::object();
    for (const auto& [method, t] : so.seconds) secs[method] = t;
    s["seconds"] = secs;
    s["warnings"] = so.warnings;
    seeds.push_back(s);
  }
  m["seeds"] = seeds;
  write_json(dir + "/manifest.json", m);
}

// ---------------------------------------------------------------------------
// fit

EBPCAResult run_fit(const FitRequest& req) {
  require(req.k >= 1, ErrorKind::kValidation, "k must be >= 1");
  require(req.iters >= 0, ErrorKind::kValidation, "iters must be >= 0");
  Matrix Y = read_matrix(req.input, parse_format(req.format));
  require(req.k < std::min(Y.rows(), Y.cols()), ErrorKind::kDimension,
          "k must be smaller than both matrix dimensions");
  Index constant_rows = 0;
  if (req.standardize) constant_rows = standardize_rows(Y);

  AmpOptions opt;
  opt.iters = req.iters;
  const auto t0 = std::chrono::steady_clock::now();
  EBPCAResult r = run_ebpca(Y, req.k, opt);
  const double secs = elapsed(t0);

  ensure_dir(req.out);
  write_csv(req.out + "/U.csv", r.U);
  write_csv(req.out + "/V.csv", r.V);
  write_csv(req.out + "/S_hat.csv", r.S_hat);
  {
    auto f = open_out(req.out + "/history.csv");
    f << "t,pc,sigma,m,sigmabar,mbar,b,bbar,loglik_v,loglik_u,atoms_v,atoms_u,npmle_converged\n";
    for (const auto& h : r.history) {
      for (Index i = 0; i < r.k(); ++i) {
        f << h.t << ',' << (i + 1) << ',' << num(h.right.Sigma(i, i)) << ','
          << num(h.right.M(i, i)) << ',' << num(h.left.Sigma(i, i)) << ','
          << num(h.left.M(i, i)) << ',' << num(h.B(i, i)) << ',' << num(h.Bbar(i, i)) << ','
          << num(h.loglik_v) << ',' << num(h.loglik_u) << ',' << h.atoms_v << ','
          << h.atoms_u << ',' << (h.npmle_converged ? 1 : 0) << '\n';
      }
    }
  }
  json rep;
  rep["version"] = kVersion;
  rep["input"] = req.input;
  rep["n"] = Y.rows();
  rep["d"] = Y.cols();
  rep["k_requested"] = req.k;
  rep["k_kept"] = r.k();
  rep["kept"] = r.kept;
  rep["iters"] = req.iters;
  rep["standardized_rows"] = req.standardize;
  rep["constant_rows"] = constant_rows;
  rep["tau_hat"] = r.tau_hat;
  std::vector<double> sh, lam;
  for (Index i = 0; i < r.k(); ++i) {
    sh.push_back(r.S_hat(i, i));
    lam.push_back(r.lambda(i));
  }
  rep["s_hat"] = sh;
  rep["lambda"] = lam;
  rep["rounds_completed"] = r.history.size();
  rep["degenerate"] = r.degenerate;
  std::vector<std::string> warnings = r.warnings;
  if (constant_rows > 0) {
    warnings.push_back(std::to_string(constant_rows) + " constant rows were centered but not scaled");
  }
  rep["warnings"] = warnings;
  rep["seconds"] = secs;
  write_json(req.out + "/report.json", rep);
  return r;
}

// ---------------------------------------------------------------------------
// diagnose

Diagnosis diagnose_matrix(const Matrix& Y_obs, Index k) {
  require(k >= 1 && k < std::min(Y_obs.rows(), Y_obs.cols()), ErrorKind::kDimension,
          "k must be in [1, min(n, d))");
  Diagnosis dg;
  dg.n = Y_obs.rows();
  dg.d = Y_obs.cols();
  dg.gamma = static_cast<double>(dg.d) / static_cast<double>(dg.n);
  SvdOptions svd;
  svd.check_gap = false;
  const Normalized nz = normalize(Y_obs, k, svd);
  dg.tau_hat = nz.tau_hat;
  dg.singular_values = singular_values(nz.Y);
  std::tie(dg.lambda_minus, dg.lambda_plus) = bulk_edges(dg.gamma);
  dg.threshold = std::max(dg.lambda_plus, outlier_threshold(dg.n, dg.d));
  const double sg = std::sqrt(dg.gamma);
  for (Index i = 0; i < dg.singular_values.size(); ++i) {
    if (dg.singular_values(i) <= dg.threshold) break;
    ++dg.outliers;
    double s = std::numeric_limits<double>::quiet_NaN();
    try {
      s = estimate_signal(dg.singular_values(i) / sg, dg.gamma);
    } catch (const Error&) {
    }
    dg.s_hat.push_back(s);
  }
  // KS distance of the bulk values to the square-root MP law.
  const Index m = dg.singular_values.size() - dg.outliers;
  double ks = 0.0;
  if (m > 0) {
    std::vector<double> bulk(dg.singular_values.data() + dg.outliers,
                             dg.singular_values.data() + dg.singular_values.size());
    std::sort(bulk.begin(), bulk.end());
    for (Index i = 0; i < m; ++i) {
      const double F = mp_singular_cdf(bulk[static_cast<std::size_t>(i)], dg.gamma);
      ks = std::max({ks, std::abs(F - static_cast<double>(i) / static_cast<double>(m)),
                     std::abs(F - static_cast<double>(i + 1) / static_cast<double>(m))});
    }
  }
  dg.ks_bulk = ks;
  return dg;
}

Diagnosis run_diagnose(const DiagnoseRequest& req) {
  Matrix Y = read_matrix(req.input, parse_format(req.format));
  Index constant_rows = 0;
  if (req.standardize) constant_rows = standardize_rows(Y);
  const Diagnosis dg = diagnose_matrix(Y, req.k);

  ensure_dir(req.out);
  {
    auto f = open_out(req.out + "/singular_values.csv");
    f << "index,singular_value,outlier\n";
    for (Index i = 0; i < dg.singular_values.size(); ++i) {
      f << (i + 1) << ',' << num(dg.singular_values(i)) << ',' << (i < dg.outliers ? 1 : 0) << '\n';
    }
  }
  const double lo = dg.lambda_minus, hi = dg.lambda_plus;
  {
    // Bulk histogram on the predicted support (slightly widened), normalized
    // as a density over the non-outlier values.
    const int bins = 40;
    const double a = std::max(0.0, lo - 0.05 * (hi - lo)), b = hi + 0.05 * (hi - lo);
    const double w = (b - a) / bins;
    std::vector<Index> counts(bins, 0);
    const Index m = dg.singular_values.size() - dg.outliers;
    for (Index i = dg.outliers; i < dg.singular_values.size(); ++i) {
      const double x = dg.singular_values(i);
      int bin = static_cast<int>(std::floor((x - a) / w));
      if (bin >= 0 && bin < bins) ++counts[static_cast<std::size_t>(bin)];
    }
    auto f = open_out(req.out + "/histogram.csv");
    f << "bin_lo,bin_hi,count,density,mp_mass\n";
    for (int j = 0; j < bins; ++j) {
      const double l = a + j * w, r = l + w;
      const double dens = m > 0 ? static_cast<double>(counts[static_cast<std::size_t>(j)]) /
                                      (static_cast<double>(m) * w)
                                : 0.0;
      const double mass = (mp_singular_cdf(r, dg.gamma) - mp_singular_cdf(l, dg.gamma)) / w;
      f << num(l) << ',' << num(r) << ',' << counts[static_cast<std::size_t>(j)] << ','
        << num(dens) << ',' << num(mass) << '\n';
    }
  }
  {
    auto f = open_out(req.out + "/mp_overlay.csv");
    f << "x,density\n";
    const int pts = 200;
    for (int j = 0; j <= pts; ++j) {
      const double x = lo + (hi - lo) * j / pts;
      f << num(x) << ',' << num(mp_singular_density(x, dg.gamma)) << '\n';
    }
  }
  json s;
  s["version"] = kVersion;
  s["input"] = req.input;
  s["n"] = dg.n;
  s["d"] = dg.d;
  s["gamma"] = dg.gamma;
  s["k"] = req.k;
  s["standardized_rows"] = req.standardize;
  s["constant_rows"] = constant_rows;
  s["tau_hat"] = dg.tau_hat;
  s["bulk_edges"] = {dg.lambda_minus, dg.lambda_plus};
  s["outlier_threshold"] = dg.threshold;
  s["outliers"] = dg.outliers;
  json sh = json::array();
  for (double v : dg.s_hat) {
    if (std::isfinite(v)) sh.push_back(v);
    else sh.push_back(nullptr);
  }
  s["s_hat"] = sh;
  s["ks_bulk"] = dg.ks_bulk;
  write_json(req.out + "/summary.json", s);
  return dg;
}

}  // namespace ebpca
