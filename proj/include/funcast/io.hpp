#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "funcast/curves.hpp"
#include "funcast/error.hpp"
#include "funcast/eval.hpp"
#include "funcast/forecast.hpp"
#include "funcast/fpca.hpp"
#include "funcast/rolling.hpp"
#include "funcast/sim.hpp"

namespace funcast::io {

using json = nlohmann::json;

namespace detail {

inline std::vector<std::string> split(const std::string& line, char sep = ',') {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, sep)) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    std::size_t b = 0;
    while (b < cell.size() && cell[b] == ' ') ++b;
    out.push_back(cell.substr(b));
  }
  return out;
}

inline bool parse_double(const std::string& s, double& v) {
  if (s.empty()) return false;
  char* end = nullptr;
  v = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

inline std::ifstream open_in(const std::filesystem::path& p) {
  std::ifstream in(p);
  require(in.good(), ErrorCode::IoError, "cannot open " + p.string());
  return in;
}

inline std::ofstream open_out(const std::filesystem::path& p) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p);
  require(out.good(), ErrorCode::IoError, "cannot write " + p.string());
  out << std::setprecision(17);
  return out;
}

}  // namespace detail

/// Unix seconds, or ISO-8601 "YYYY-MM-DD[ T]HH:MM[:SS][Z]" in UTC.
inline std::int64_t parse_timestamp(const std::string& s) {
  double v = 0.0;
  if (detail::parse_double(s, v)) return static_cast<std::int64_t>(std::llround(v));
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
  char sep = 0;
  int consumed = 0;
  const int got = std::sscanf(s.c_str(), "%d-%d-%d%c%d:%d:%d%n", &y, &mo, &d, &sep, &h, &mi, &sec, &consumed);
  if (got < 7) {
    sec = 0;
    consumed = 0;
    const int got2 = std::sscanf(s.c_str(), "%d-%d-%d%c%d:%d%n", &y, &mo, &d, &sep, &h, &mi, &consumed);
    if (got2 < 6) {
      require(std::sscanf(s.c_str(), "%d-%d-%d%n", &y, &mo, &d, &consumed) == 3, ErrorCode::IoError,
              "unrecognised timestamp '" + s + "'");
      h = mi = 0;
      sep = 'T';
    }
  }
  require(sep == 'T' || sep == ' ', ErrorCode::IoError, "unrecognised timestamp '" + s + "'");
  const std::string rest = s.substr(static_cast<std::size_t>(consumed));
  require(rest.empty() || rest == "Z" || rest == "+00:00", ErrorCode::IoError,
          "only UTC timestamps are supported: '" + s + "'");
  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  require(ymd.ok(), ErrorCode::IoError, "invalid calendar date '" + s + "'");
  require(h >= 0 && h < 24 && mi >= 0 && mi < 60 && sec >= 0 && sec < 61, ErrorCode::IoError,
          "invalid time of day '" + s + "'");
  const auto days = sys_days{ymd}.time_since_epoch().count();
  return static_cast<std::int64_t>(days) * kSecondsPerDay + h * 3600 + mi * 60 + sec;
}

inline std::string format_timestamp(std::int64_t ts) {
  using namespace std::chrono;
  const sys_seconds tp{seconds{ts}};
  const auto dp = floor<days>(tp);
  const year_month_day ymd{dp};
  const hh_mm_ss hms{tp - dp};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()));
  return buf;
}

/// Two columns (timestamp, price); a non-numeric first row is treated as a header.
inline std::vector<PricePoint> read_prices_csv(const std::filesystem::path& path) {
  auto in = detail::open_in(path);
  std::vector<PricePoint> out;
  std::string line;
  bool first = true;
  int format = 0;  // 1 unix seconds, 2 ISO-8601
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto cells = detail::split(line);
    require(cells.size() >= 2, ErrorCode::IoError, "price row needs timestamp and price: '" + line + "'");
    double price = 0.0;
    if (!detail::parse_double(cells[1], price)) {
      require(first, ErrorCode::IoError, "non-numeric price: '" + line + "'");
      first = false;
      continue;
    }
    first = false;
    // the timestamp format is fixed by the first data row
    double unused = 0.0;
    const int kind = detail::parse_double(cells[0], unused) ? 1 : 2;
    if (format == 0) format = kind;
    require(kind == format, ErrorCode::IoError, "timestamp format changes within file: '" + line + "'");
    out.push_back({parse_timestamp(cells[0]), price});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Panels

/// CSV "day_index,day_start,r1..rT" plus a JSON sidecar with grid metadata.
inline void write_panel(const ReturnCurvePanel& panel, const std::filesystem::path& csv_path,
                        const json& extra = json::object()) {
  validate_panel(panel);
  auto out = detail::open_out(csv_path);
  out << "day_index,day_start";
  for (int t = 1; t <= panel.T(); ++t) out << ",r" << t;
  out << "\n";
  for (const auto& c : panel.curves) {
    out << c.day_index << "," << format_timestamp(c.day_start);
    for (double v : c.values) out << "," << v;
    out << "\n";
  }
  json meta = extra;
  meta["N"] = panel.N();
  meta["T"] = panel.T();
  meta["grid_step"] = panel.grid_step;
  meta["demeaned"] = panel.demeaned;
  if (panel.demeaned) meta["mean_curve"] = panel.mean_curve;
  auto side = detail::open_out(std::filesystem::path(csv_path).replace_extension(".json"));
  side << meta.dump(2) << "\n";
}

inline ReturnCurvePanel read_panel(const std::filesystem::path& csv_path) {
  auto in = detail::open_in(csv_path);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::IoError, "empty panel file");
  std::vector<ReturnCurve> curves;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto cells = detail::split(line);
    require(cells.size() >= 3, ErrorCode::IoError, "panel row too short");
    ReturnCurve c;
    c.day_index = std::stoi(cells[0]);
    c.day_start = parse_timestamp(cells[1]);
    for (std::size_t k = 2; k < cells.size(); ++k) {
      double v = 0.0;
      require(detail::parse_double(cells[k], v), ErrorCode::IoError, "non-numeric return '" + cells[k] + "'");
      c.values.push_back(v);
    }
    c.grid = day_grid(static_cast<int>(c.values.size()));
    curves.push_back(std::move(c));
  }
  std::int64_t grid_step = 0;
  const auto side = std::filesystem::path(csv_path).replace_extension(".json");
  if (std::filesystem::exists(side)) {
    auto sin = detail::open_in(side);
    const json meta = json::parse(sin, nullptr, false);
    require(!meta.is_discarded(), ErrorCode::IoError, "malformed panel sidecar " + side.string());
    grid_step = meta.value("grid_step", std::int64_t{0});
  }
  return make_panel(std::move(curves), grid_step);
}

// ---------------------------------------------------------------------------
// JSON views of results

inline json to_json(const Vec& v) { return to_std(v); }

inline json to_json(const Mat& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(to_std(m.row(r).transpose()));
  return rows;
}

inline Mat mat_from_json(const json& j) {
  require(j.is_array() && !j.empty(), ErrorCode::ConfigInvalid, "expected a nonempty matrix");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j.at(0).size());
  Mat m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    require(static_cast<Eigen::Index>(j.at(r).size()) == cols, ErrorCode::ConfigInvalid, "ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j.at(r).at(c).get<double>();
  }
  return m;
}

inline Vec vec_from_json(const json& j) { return to_vec(j.get<std::vector<double>>()); }

inline json to_json(const FpcaBasis& b) {
  return {{"J", b.J},
          {"T", b.T()},
          {"N", b.N()},
          {"weight", b.weight},
          {"mean_curve", to_json(b.mean_curve)},
          {"eigenvalues", to_json(b.eigenvalues)},
          {"cpv", to_json(b.cpv)},
          {"eigenfunctions", to_json(Mat(b.eigenfunctions.transpose()))},
          {"sigma2_resid", b.sigma2_resid},
          {"omega", to_json(b.omega)},
          {"warnings", b.warnings}};
}

inline void write_scores_csv(const FpcaBasis& b, const ReturnCurvePanel& panel, const std::filesystem::path& path) {
  auto out = detail::open_out(path);
  out << "day_index";
  for (int j = 1; j <= b.J; ++j) out << ",beta" << j;
  out << "\n";
  for (int i = 0; i < b.N(); ++i) {
    out << panel.curves[static_cast<std::size_t>(i)].day_index;
    for (int j = 0; j < b.J; ++j) out << "," << b.scores(i, j);
    out << "\n";
  }
}

inline json to_json(const ArGarchFit& f) {
  return {{"mu", f.params.mu},
          {"ar", f.params.ar},
          {"var_const", f.params.var_const},
          {"arch", f.params.arch},
          {"garch", f.params.garch},
          {"loglik", f.loglik},
          {"iterations", f.info.iterations},
          {"converged", f.info.converged},
          {"warnings", f.warnings}};
}

inline json to_json(const SbekkFit& f) {
  return {{"a", f.a},
          {"g", f.g},
          {"C", to_json(f.c)},
          {"loglik", f.loglik},
          {"converged", f.info.converged},
          {"warnings", f.warnings}};
}

inline json to_json(const VarFit& f) {
  return {{"pi1", to_json(f.pi1)},
          {"intercept", to_json(f.intercept)},
          {"sigma_resid", to_json(f.sigma_resid)},
          {"spectral_radius", f.spectral_radius},
          {"warnings", f.warnings}};
}

inline json to_json(const ArmaFit& f) {
  return {{"p", f.p},         {"q", f.q},         {"ar", to_json(f.ar_coefs)}, {"ma", to_json(f.ma_coefs)},
          {"intercept", f.intercept}, {"innov_var", f.innov_var}, {"aicc", f.aicc}, {"fallback", f.fallback}};
}

inline void write_forecast_csv(const FunctionalForecast& f, const std::filesystem::path& path,
                               const Vec* realized = nullptr) {
  auto out = detail::open_out(path);
  out << "t,point,lower,upper" << (realized ? ",realized" : "") << "\n";
  for (Eigen::Index t = 0; t < f.point.size(); ++t) {
    out << (t + 1) << "," << f.point(t) << "," << f.lower(t) << "," << f.upper(t);
    if (realized) out << "," << (*realized)(t);
    out << "\n";
  }
}

inline json forecast_meta(const FunctionalForecast& f, int window, int day) {
  return {{"method", std::string(to_string(f.method))},
          {"level", f.level},
          {"J", f.score_forecasts.size()},
          {"window", window},
          {"day", day},
          {"score_forecasts", to_json(f.score_forecasts)},
          {"score_variances", to_json(f.score_variances)}};
}

inline json to_json(const BacktestReport& r) {
  json j;
  j["level"] = r.level;
  j["failed_days"] = r.failed_days;
  j["failures"] = r.failures;
  j["aggregates"] = json::array();
  for (const auto& a : r.aggregates)
    j["aggregates"].push_back({{"method", a.method},
                               {"rmse", a.rmse},
                               {"mae", a.mae},
                               {"sign_rate", a.sign_rate},
                               {"mean_interval_score", a.mean_interval_score},
                               {"coverage", a.coverage},
                               {"mean_width", a.mean_width},
                               {"n_points", a.n_points},
                               {"n_days", a.n_days}});
  j["per_day"] = json::array();
  for (const auto& d : r.per_day)
    j["per_day"].push_back({{"day", d.day},
                            {"method", d.method},
                            {"rmse", d.rmse},
                            {"mae", d.mae},
                            {"sign_rate", d.sign_rate},
                            {"mean_interval_score", d.mean_interval_score},
                            {"coverage", d.coverage}});
  j["dm_tests"] = json::array();
  for (const auto& d : r.dm_tests)
    j["dm_tests"].push_back(
        {{"method_a", d.method_a}, {"method_b", d.method_b}, {"statistic", d.statistic}, {"p_value", d.p_value}});
  return j;
}

/// Table with columns method,RMSE,MAE,Sign,S,coverage,n_points.
inline void write_report_table(const BacktestReport& r, const std::filesystem::path& path) {
  auto out = detail::open_out(path);
  out << "method,RMSE,MAE,Sign,S,coverage,n_points\n";
  for (const auto& a : r.aggregates)
    out << a.method << "," << a.rmse << "," << a.mae << "," << a.sign_rate << "," << a.mean_interval_score << ","
        << a.coverage << "," << a.n_points << "\n";
}

inline std::string format_report_table(const BacktestReport& r) {
  std::ostringstream os;
  os << std::left << std::setw(11) << "method" << std::right << std::setw(11) << "RMSE" << std::setw(11) << "MAE"
     << std::setw(9) << "Sign" << std::setw(11) << "S" << std::setw(10) << "coverage" << std::setw(9) << "points"
     << "\n";
  os << std::fixed;
  for (const auto& a : r.aggregates)
    os << std::left << std::setw(11) << a.method << std::right << std::setprecision(4) << std::setw(11) << a.rmse
       << std::setw(11) << a.mae << std::setprecision(3) << std::setw(9) << a.sign_rate << std::setprecision(4)
       << std::setw(11) << a.mean_interval_score << std::setprecision(3) << std::setw(10) << a.coverage
       << std::setw(9) << a.n_points << "\n";
  for (const auto& d : r.dm_tests)
    os << "DM " << d.method_a << " vs " << d.method_b << ": stat " << std::setprecision(3) << d.statistic << ", p "
       << d.p_value << "\n";
  if (r.failed_days > 0) os << "failed days: " << r.failed_days << "\n";
  return os.str();
}

/// origin_timestamp,step,forecast,realized,sign_hit
inline void write_rolling_csv(const RollingBacktestResult& r, const std::vector<std::int64_t>& end_times,
                              const std::filesystem::path& path) {
  auto out = detail::open_out(path);
  out << "origin_timestamp,step,forecast,realized,sign_hit\n";
  auto sgn = [](double v) { return (v > 0.0) - (v < 0.0); };
  for (const auto& p : r.points) {
    const auto idx = static_cast<std::size_t>(p.origin + p.step - 1);
    const std::string ts = idx < end_times.size() ? format_timestamp(end_times[idx]) : std::to_string(idx);
    out << ts << "," << p.step << "," << p.forecast << "," << p.realized << ","
        << (sgn(p.forecast) == sgn(p.realized) ? 1 : 0) << "\n";
  }
}

// ---------------------------------------------------------------------------
// Simulation specs

/// Fields: J0, T, lambdas, dynamics{type, ...}, optional eigenfunctions (J0 rows
/// of length T), basis ("random"|"fourier"), basis_seed, mean_curve,
/// noise_sigma2, seed, grid_step, enforce_unit_variance.
inline KlFactorSpec spec_from_json(const json& j) {
  try {
    KlFactorSpec s;
    s.J0 = j.at("J0").get<int>();
    s.T = j.at("T").get<int>();
    s.seed = j.value("seed", std::uint64_t{0});
    s.noise_sigma2 = j.value("noise_sigma2", 0.0);
    s.grid_step = j.value("grid_step", std::int64_t{s.T > 0 ? kSecondsPerDay / s.T : 0});
    s.lambdas = j.contains("lambdas") ? vec_from_json(j.at("lambdas")) : Vec::Ones(s.J0);
    s.mean_curve = j.contains("mean_curve") ? vec_from_json(j.at("mean_curve")) : Vec::Zero(s.T);
    if (j.contains("eigenfunctions")) {
      s.eigenfunctions = mat_from_json(j.at("eigenfunctions")).transpose();
    } else {
      const std::string kind = j.value("basis", std::string("random"));
      require(kind == "random" || kind == "fourier", ErrorCode::InvalidSpec, "basis must be random or fourier");
      s.eigenfunctions = make_orthonormal_basis(s.T, s.J0, j.value("basis_seed", s.seed),
                                                kind == "random" ? BasisKind::Random : BasisKind::Fourier);
    }
    const json& d = j.at("dynamics");
    const std::string type = d.at("type").get<std::string>();
    if (type == "linear_var") {
      LinearVarDynamics v;
      v.pi = mat_from_json(d.at("pi"));
      v.sigma = d.contains("sigma") ? mat_from_json(d.at("sigma")) : Mat(Mat::Identity(s.J0, s.J0));
      s.dynamics = v;
    } else if (type == "var_sbekk") {
      VarSbekkDynamics v;
      v.pi = mat_from_json(d.at("pi"));
      v.a = d.at("a").get<double>();
      v.g = d.at("g").get<double>();
      v.c = d.contains("c") ? mat_from_json(d.at("c"))
                            : Mat(std::sqrt(1.0 - v.a - v.g) * Mat::Identity(s.J0, s.J0));
      s.dynamics = v;
    } else if (type == "univ_argarch") {
      UnivArGarchDynamics v;
      v.ar = vec_from_json(d.at("ar"));
      v.arch = vec_from_json(d.at("arch"));
      v.garch = vec_from_json(d.at("garch"));
      v.var_const = d.contains("var_const") ? vec_from_json(d.at("var_const")) : Vec::Ones(v.ar.size());
      s.dynamics = v;
    } else {
      throw Error(ErrorCode::InvalidSpec, "unknown dynamics type '" + type + "'");
    }
    if (j.value("enforce_unit_variance", false)) enforce_unit_variance(s.dynamics);
    validate_spec(s);
    return s;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidSpec, std::string("bad simulation spec: ") + e.what());
  }
}

}  // namespace funcast::io
