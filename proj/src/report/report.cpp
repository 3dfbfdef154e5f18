#include "report/report.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "common/error.hpp"
#include "policy/design_policy.hpp"

namespace decor {

Stat stat_of(const std::vector<double>& xs) {
  Stat s;
  if (xs.empty()) return s;
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return s;
  double ss = 0.0;
  for (double x : xs) ss += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  return s;
}

EvalRow summarize_runs(const std::string& layout, const std::string& controller, double alpha,
                       const std::vector<EpisodeMetrics>& runs) {
  if (runs.empty()) throw Error(ErrorKind::kContract, "no runs to summarize");
  auto col = [&](auto field) {
    std::vector<double> v;
    for (const auto& m : runs) v.push_back(static_cast<double>(m.*field));
    return stat_of(v);
  };
  EvalRow r;
  r.layout = layout;
  r.controller = controller;
  r.alpha = alpha;
  r.n_runs = static_cast<int>(runs.size());
  r.ped_arrival_s = col(&EpisodeMetrics::mean_ped_arrival_s);
  r.ped_wait_s = col(&EpisodeMetrics::mean_ped_wait_s);
  r.veh_wait_s = col(&EpisodeMetrics::mean_veh_wait_s);
  r.ped_max_wait_s = col(&EpisodeMetrics::max_ped_wait_s);
  r.veh_max_wait_s = col(&EpisodeMetrics::max_veh_wait_s);
  r.ped_total_wait_s = col(&EpisodeMetrics::total_ped_wait_s);
  r.veh_total_wait_s = col(&EpisodeMetrics::total_veh_wait_s);
  r.conflicts = col(&EpisodeMetrics::conflicts);
  return r;
}

// ---------------------------------------------------------------------------

std::string format_double(double x) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  if (ec != std::errc()) throw Error(ErrorKind::kContract, "cannot format number");
  return std::string(buf, end);
}

double parse_double(const std::string& s) {
  double x = 0.0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || end != s.data() + s.size())
    throw Error(ErrorKind::kParse, "not a number: '" + s + "'");
  return x;
}

namespace {

std::uint64_t parse_u64(const std::string& s) {
  std::uint64_t x = 0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || end != s.data() + s.size())
    throw Error(ErrorKind::kParse, "not an unsigned integer: '" + s + "'");
  return x;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\n\r#") != std::string::npos)
    throw Error(ErrorKind::kContract, "report label cannot hold ',', '#' or newlines: " + s);
  return s;
}

nlohmann::json stat_json(const Stat& s) { return {{"mean", s.mean}, {"std", s.std}}; }
Stat stat_from(const nlohmann::json& j) { return {j.at("mean").get<double>(), j.at("std").get<double>()}; }

nlohmann::json layout_json(const std::vector<CrosswalkProposal>& l) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& p : l) a.push_back({{"location_m", p.location}, {"width_m", p.width}});
  return a;
}

std::vector<CrosswalkProposal> layout_from(const nlohmann::json& j) {
  std::vector<CrosswalkProposal> out;
  for (const auto& p : j) out.push_back({p.at("location_m").get<double>(), p.at("width_m").get<double>()});
  return out;
}

// Metadata lines "# key=value" followed by one header line and data rows.
struct CsvTable {
  std::map<std::string, std::string> meta;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      auto key = line.substr(1, eq - 1);
      while (!key.empty() && key.front() == ' ') key.erase(key.begin());
      t.meta[key] = line.substr(eq + 1);
      continue;
    }
    auto cells = split(line, ',');
    if (t.header.empty()) {
      t.header = cells;
      continue;
    }
    if (cells.size() != t.header.size())
      throw Error(ErrorKind::kParse, "CSV row has " + std::to_string(cells.size()) + " cells, header has " +
                                         std::to_string(t.header.size()));
    t.rows.push_back(cells);
  }
  if (t.header.empty()) throw Error(ErrorKind::kParse, "CSV has no header");
  return t;
}

const std::string& meta_at(const CsvTable& t, const std::string& key) {
  auto it = t.meta.find(key);
  if (it == t.meta.end()) throw Error(ErrorKind::kParse, "CSV is missing '# " + key + "='");
  return it->second;
}

const char* const kStatNames[] = {"ped_arrival_s",    "ped_wait_s",       "veh_wait_s",
                                  "ped_max_wait_s",   "veh_max_wait_s",   "ped_total_wait_s",
                                  "veh_total_wait_s", "conflicts"};

std::vector<Stat*> stats_of(EvalRow& r) {
  return {&r.ped_arrival_s,  &r.ped_wait_s,       &r.veh_wait_s,       &r.ped_max_wait_s,
          &r.veh_max_wait_s, &r.ped_total_wait_s, &r.veh_total_wait_s, &r.conflicts};
}

std::string u64_string(std::uint64_t x) { return std::to_string(x); }

}  // namespace

// ---------------------------------------------------------------------------

const EvalRow* EvalReport::find(const std::string& layout, const std::string& controller,
                                double alpha) const {
  for (const auto& r : rows)
    if (r.layout == layout && r.controller == controller && std::abs(r.alpha - alpha) < 1e-9) return &r;
  return nullptr;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (auto r : rows) {
    nlohmann::json j = {{"layout", r.layout}, {"controller", r.controller}, {"alpha", r.alpha},
                        {"n_runs", r.n_runs}};
    auto st = stats_of(r);
    for (std::size_t k = 0; k < st.size(); ++k) j[kStatNames[k]] = stat_json(*st[k]);
    arr.push_back(j);
  }
  // Hash as a string: JSON readers often hold numbers in doubles.
  return {{"command", command}, {"seed", seed}, {"config_hash", u64_string(config_hash)}, {"rows", arr}};
}

EvalReport EvalReport::from_json(const nlohmann::json& j) {
  try {
    EvalReport r;
    r.command = j.at("command").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.config_hash = parse_u64(j.at("config_hash").get<std::string>());
    for (const auto& x : j.at("rows")) {
      EvalRow row;
      row.layout = x.at("layout").get<std::string>();
      row.controller = x.at("controller").get<std::string>();
      row.alpha = x.at("alpha").get<double>();
      row.n_runs = x.at("n_runs").get<int>();
      auto st = stats_of(row);
      for (std::size_t k = 0; k < st.size(); ++k) *st[k] = stat_from(x.at(kStatNames[k]));
      r.rows.push_back(row);
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("malformed eval report: ") + e.what());
  }
}

std::string EvalReport::to_csv() const {
  std::ostringstream out;
  out << "# command=" << csv_cell(command) << "\n# seed=" << seed << "\n# config_hash=" << config_hash << "\n";
  out << "layout,controller,alpha,n_runs";
  for (const char* n : kStatNames) out << ',' << n << "_mean," << n << "_std";
  out << '\n';
  for (auto r : rows) {
    out << csv_cell(r.layout) << ',' << csv_cell(r.controller) << ',' << format_double(r.alpha) << ','
        << r.n_runs;
    for (const Stat* s : stats_of(r)) out << ',' << format_double(s->mean) << ',' << format_double(s->std);
    out << '\n';
  }
  return out.str();
}

EvalReport EvalReport::from_csv(const std::string& text) {
  const CsvTable t = parse_csv(text);
  if (t.header.size() != 4 + 2 * std::size(kStatNames) || t.header[0] != "layout")
    throw Error(ErrorKind::kParse, "not an eval report CSV");
  EvalReport r;
  r.command = meta_at(t, "command");
  r.seed = parse_u64(meta_at(t, "seed"));
  r.config_hash = parse_u64(meta_at(t, "config_hash"));
  for (const auto& c : t.rows) {
    EvalRow row;
    row.layout = c[0];
    row.controller = c[1];
    row.alpha = parse_double(c[2]);
    row.n_runs = static_cast<int>(parse_u64(c[3]));
    auto st = stats_of(row);
    for (std::size_t k = 0; k < st.size(); ++k) {
      st[k]->mean = parse_double(c[4 + 2 * k]);
      st[k]->std = parse_double(c[5 + 2 * k]);
    }
    r.rows.push_back(row);
  }
  return r;
}

// ---------------------------------------------------------------------------

double gap_percent(double coopt, double seq) {
  if (seq == 0.0) return coopt == 0.0 ? 0.0 : -100.0;
  return (seq - coopt) / seq * 100.0;
}

namespace {

const char* const kGapHeader =
    "alpha,coopt_ped_wait_s,seq_ped_wait_s,ped_gap_pct,coopt_veh_wait_s,seq_veh_wait_s,veh_gap_pct";

std::vector<double*> gap_fields(GapRow& g) {
  return {&g.alpha, &g.coopt_ped_wait_s, &g.seq_ped_wait_s, &g.ped_gap_pct,
          &g.coopt_veh_wait_s, &g.seq_veh_wait_s, &g.veh_gap_pct};
}

}  // namespace

nlohmann::json RobustnessReport::to_json() const {
  nlohmann::json g = nlohmann::json::array();
  for (auto x : gaps) {
    auto f = gap_fields(x);
    g.push_back({{"alpha", *f[0]},
                 {"coopt_ped_wait_s", *f[1]},
                 {"seq_ped_wait_s", *f[2]},
                 {"ped_gap_pct", *f[3]},
                 {"coopt_veh_wait_s", *f[4]},
                 {"seq_veh_wait_s", *f[5]},
                 {"veh_gap_pct", *f[6]}});
  }
  return {{"eval", eval.to_json()},
          {"extra_crosswalk", {{"location_m", extra_location_m}, {"width_m", extra_width_m}}},
          {"gaps", g}};
}

RobustnessReport RobustnessReport::from_json(const nlohmann::json& j) {
  try {
    RobustnessReport r;
    r.eval = EvalReport::from_json(j.at("eval"));
    r.extra_location_m = j.at("extra_crosswalk").at("location_m").get<double>();
    r.extra_width_m = j.at("extra_crosswalk").at("width_m").get<double>();
    const auto names = split(kGapHeader, ',');
    for (const auto& x : j.at("gaps")) {
      GapRow g;
      auto f = gap_fields(g);
      for (std::size_t k = 0; k < f.size(); ++k) *f[k] = x.at(names[k]).get<double>();
      r.gaps.push_back(g);
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("malformed robustness report: ") + e.what());
  }
}

std::string RobustnessReport::gaps_csv() const {
  std::ostringstream out;
  out << "# extra_location_m=" << format_double(extra_location_m)
      << "\n# extra_width_m=" << format_double(extra_width_m) << '\n'
      << kGapHeader << '\n';
  for (auto g : gaps) {
    auto f = gap_fields(g);
    for (std::size_t k = 0; k < f.size(); ++k) out << (k ? "," : "") << format_double(*f[k]);
    out << '\n';
  }
  return out.str();
}

std::vector<GapRow> RobustnessReport::gaps_from_csv(const std::string& text) {
  const CsvTable t = parse_csv(text);
  if (t.header != split(kGapHeader, ',')) throw Error(ErrorKind::kParse, "not a robustness gap CSV");
  std::vector<GapRow> out;
  for (const auto& c : t.rows) {
    GapRow g;
    auto f = gap_fields(g);
    for (std::size_t k = 0; k < f.size(); ++k) *f[k] = parse_double(c[k]);
    out.push_back(g);
  }
  return out;
}

// ---------------------------------------------------------------------------

const AblationRow* AblationReport::find(const std::string& variant, const std::string& cls,
                                        const std::string& metric) const {
  for (const auto& r : rows)
    if (r.variant == variant && r.cls == cls && r.metric == metric) return &r;
  return nullptr;
}

nlohmann::json AblationReport::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rows)
    arr.push_back({{"variant", r.variant},
                   {"class", r.cls},
                   {"metric", r.metric},
                   {"value", stat_json(r.value)},
                   {"per_seed", r.per_seed}});
  return {{"seeds", seeds},   {"budget_sim_steps", budget_sim_steps}, {"alpha", alpha},
          {"eval_runs", eval_runs}, {"layout", layout}, {"config_hash", u64_string(config_hash)},
          {"rows", arr}};
}

AblationReport AblationReport::from_json(const nlohmann::json& j) {
  try {
    AblationReport r;
    r.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    r.budget_sim_steps = j.at("budget_sim_steps").get<long long>();
    r.alpha = j.at("alpha").get<double>();
    r.eval_runs = j.at("eval_runs").get<int>();
    r.layout = j.at("layout").get<std::string>();
    r.config_hash = parse_u64(j.at("config_hash").get<std::string>());
    for (const auto& x : j.at("rows"))
      r.rows.push_back({x.at("variant").get<std::string>(), x.at("class").get<std::string>(),
                        x.at("metric").get<std::string>(), stat_from(x.at("value")),
                        x.at("per_seed").get<std::vector<double>>()});
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("malformed ablation report: ") + e.what());
  }
}

std::string AblationReport::to_csv() const {
  std::ostringstream out;
  out << "variant,class,metric,mean,std,per_seed\n";
  for (const auto& r : rows) {
    out << csv_cell(r.variant) << ',' << csv_cell(r.cls) << ',' << csv_cell(r.metric) << ','
        << format_double(r.value.mean) << ',' << format_double(r.value.std) << ',';
    for (std::size_t k = 0; k < r.per_seed.size(); ++k) out << (k ? ";" : "") << format_double(r.per_seed[k]);
    out << '\n';
  }
  out << "# seeds=";
  for (std::size_t k = 0; k < seeds.size(); ++k) out << (k ? ";" : "") << seeds[k];
  out << "\n# budget_sim_steps=" << budget_sim_steps << "\n# alpha=" << format_double(alpha)
      << "\n# eval_runs=" << eval_runs << "\n# layout=" << csv_cell(layout)
      << "\n# config_hash=" << config_hash << '\n';
  return out.str();
}

AblationReport AblationReport::from_csv(const std::string& text) {
  const CsvTable t = parse_csv(text);
  if (t.header != split("variant,class,metric,mean,std,per_seed", ','))
    throw Error(ErrorKind::kParse, "not an ablation CSV");
  AblationReport r;
  for (const auto& s : split(meta_at(t, "seeds"), ';'))
    if (!s.empty()) r.seeds.push_back(parse_u64(s));
  r.budget_sim_steps = static_cast<long long>(parse_u64(meta_at(t, "budget_sim_steps")));
  r.alpha = parse_double(meta_at(t, "alpha"));
  r.eval_runs = static_cast<int>(parse_u64(meta_at(t, "eval_runs")));
  r.layout = meta_at(t, "layout");
  r.config_hash = parse_u64(meta_at(t, "config_hash"));
  for (const auto& c : t.rows) {
    AblationRow row{c[0], c[1], c[2], {parse_double(c[3]), parse_double(c[4])}, {}};
    if (!c[5].empty())
      for (const auto& s : split(c[5], ';')) row.per_seed.push_back(parse_double(s));
    r.rows.push_back(row);
  }
  return r;
}

// ---------------------------------------------------------------------------

nlohmann::json DesignInspection::to_json() const {
  nlohmann::json m = nlohmann::json::array();
  for (Eigen::Index i = 0; i < means.rows(); ++i) m.push_back({means(i, 0), means(i, 1)});
  nlohmann::json md = nlohmann::json::array();
  for (const auto& x : modes) md.push_back({x(0), x(1)});
  return {{"sigma", sigma},
          {"means", m},
          {"means_m", layout_json(means_m)},
          {"modes", md},
          {"proposals", layout_json(proposals)},
          {"context_layout", layout_json(context_layout)},
          {"resolution", resolution},
          {"density", density}};
}

DesignInspection DesignInspection::from_json(const nlohmann::json& j) {
  try {
    DesignInspection d;
    d.sigma = j.at("sigma").get<double>();
    const auto& m = j.at("means");
    d.means.resize(static_cast<Eigen::Index>(m.size()), 2);
    for (std::size_t i = 0; i < m.size(); ++i) {
      d.means(static_cast<Eigen::Index>(i), 0) = m[i].at(0).get<double>();
      d.means(static_cast<Eigen::Index>(i), 1) = m[i].at(1).get<double>();
    }
    d.means_m = layout_from(j.at("means_m"));
    for (const auto& x : j.at("modes")) d.modes.emplace_back(x.at(0).get<double>(), x.at(1).get<double>());
    d.proposals = layout_from(j.at("proposals"));
    d.context_layout = layout_from(j.at("context_layout"));
    d.resolution = j.at("resolution").get<int>();
    d.density = j.at("density").get<std::vector<double>>();
    if (d.density.size() != static_cast<std::size_t>(d.resolution) * static_cast<std::size_t>(d.resolution))
      throw Error(ErrorKind::kParse, "density grid size does not match the resolution");
    return d;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("malformed design inspection: ") + e.what());
  }
}

std::string DesignInspection::density_csv(const CorridorSpec& spec) const {
  std::ostringstream out;
  out << "u,v,location_m,width_m,density\n";
  for (int i = 0; i < resolution; ++i) {
    for (int k = 0; k < resolution; ++k) {
      const double u = (i + 0.5) / resolution, v = (k + 0.5) / resolution;
      const CrosswalkProposal p = denormalize(spec, u, v);
      out << format_double(u) << ',' << format_double(v) << ',' << format_double(p.location) << ','
          << format_double(p.width) << ','
          << format_double(density[static_cast<std::size_t>(i) * static_cast<std::size_t>(resolution) +
                                   static_cast<std::size_t>(k)])
          << '\n';
    }
  }
  return out.str();
}

// ---------------------------------------------------------------------------

std::vector<double> standard_alpha_grid() {
  std::vector<double> out;
  for (int k = 0; k < 10; ++k) out.push_back(0.5 + 0.25 * k);
  return out;
}

std::vector<double> parse_sweep(const std::string& text) {
  if (text == "grid") return standard_alpha_grid();
  std::vector<double> out;
  try {
    if (text.find(':') != std::string::npos) {
      auto p = split(text, ':');
      if (p.size() != 3) throw Error(ErrorKind::kConfig, "sweep range must be start:stop:step");
      const double a = parse_double(p[0]), b = parse_double(p[1]), s = parse_double(p[2]);
      if (!(s > 0.0) || b < a) throw Error(ErrorKind::kConfig, "sweep range needs step > 0 and stop >= start");
      const long long n = std::llround(std::floor((b - a) / s + 1e-9));
      for (long long k = 0; k <= n; ++k) out.push_back(a + s * static_cast<double>(k));
    } else {
      for (const auto& p : split(text, ',')) out.push_back(parse_double(p));
    }
  } catch (const Error& e) {
    throw Error(ErrorKind::kConfig, std::string("bad sweep '") + text + "': " + e.what());
  }
  for (double a : out)
    if (!(a > 0.0)) throw Error(ErrorKind::kConfig, "sweep scales must be positive");
  return out;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path);
  out << text;
  if (!out) throw Error(ErrorKind::kIo, "write failed: " + path);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace decor
