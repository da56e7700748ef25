// funcast command-line driver.
//
//   funcast ingest    --prices p.csv --grid-step 3600
//   funcast fpca      --panel panel.csv
//   funcast forecast  --panel panel.csv --methods argarch,var_sbekk
//   funcast backtest  --panel panel.csv --methods argarch,arma_aue --days 10
//   funcast rolling   --prices p.csv --k 1 --estimator ridge --window-range 90:110
//   funcast simulate  --spec spec.json --days 500
//   funcast diag-acf  --panel panel.csv --max-lag 20
//
// Every option can also come from a JSON object passed with --config, keyed by
// the long option name with dashes replaced by underscores. Flags win.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "funcast/funcast.hpp"
#include "funcast/io.hpp"

namespace fs = std::filesystem;
using funcast::Error;
using funcast::ErrorCode;
using json = nlohmann::json;

namespace {

/// Fills options the user did not pass on the command line from a JSON config.
class ConfigBinder {
 public:
  template <class T>
  CLI::Option* add(CLI::App* app, const std::string& flag, T& target, const std::string& help) {
    CLI::Option* opt = app->add_option(flag, target, help);
    if constexpr (!std::is_same_v<T, std::vector<std::string>>) opt->capture_default_str();
    bindings_.push_back({app, opt, [&target](const json& v) { target = v.get<T>(); }});
    return opt;
  }

  CLI::Option* add_flag(CLI::App* app, const std::string& flag, bool& target, const std::string& help) {
    CLI::Option* opt = app->add_flag(flag, target, help);
    bindings_.push_back({app, opt, [&target](const json& v) { target = v.get<bool>(); }});
    return opt;
  }

  void apply(const json& cfg) const {
    for (const auto& b : bindings_) {
      // options of subcommands that did not run must not clobber the active ones
      if (!b.app->parsed() || b.option->count() > 0) continue;
      std::string key = b.option->get_lnames().empty() ? b.option->get_name() : b.option->get_lnames().front();
      for (char& c : key)
        if (c == '-') c = '_';
      if (!cfg.contains(key)) continue;
      try {
        b.assign(cfg.at(key));
      } catch (const json::exception& e) {
        throw Error(ErrorCode::ConfigInvalid, "config key '" + key + "': " + e.what());
      }
    }
  }

 private:
  struct Binding {
    CLI::App* app;
    CLI::Option* option;
    std::function<void(const json&)> assign;
  };
  std::vector<Binding> bindings_;
};

std::vector<std::string> split_list(const std::vector<std::string>& items) {
  std::vector<std::string> out;
  for (const auto& item : items) {
    std::stringstream ss(item);
    std::string tok;
    while (std::getline(ss, tok, ','))
      if (!tok.empty()) out.push_back(tok);
  }
  return out;
}

std::vector<funcast::Method> parse_methods(const std::vector<std::string>& names) {
  std::vector<funcast::Method> out;
  for (const auto& n : split_list(names)) out.push_back(funcast::parse_method(n));
  if (out.empty()) throw Error(ErrorCode::ConfigInvalid, "no methods given");
  return out;
}

funcast::GridWeight parse_weight(const std::string& s) {
  if (s == "unit") return funcast::GridWeight::Unit;
  if (s == "inverse_t") return funcast::GridWeight::InverseT;
  throw Error(ErrorCode::ConfigInvalid, "weight must be unit or inverse_t");
}

funcast::AueRefit parse_refit(const std::string& s) {
  if (s == "expanding") return funcast::AueRefit::Expanding;
  if (s == "full") return funcast::AueRefit::FullSample;
  throw Error(ErrorCode::ConfigInvalid, "aue-refit must be expanding or full");
}

void write_json(const fs::path& p, const json& j) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + p.string());
  out << j.dump(2) << "\n";
}

int exit_code_for(ErrorCode code) {
  switch (funcast::kind_of(code)) {
    case funcast::ErrorKind::Config: return 2;
    case funcast::ErrorKind::Data: return 3;
    case funcast::ErrorKind::Numerical: return 4;
  }
  return 4;
}

void report_error(const std::string& code, const std::string& kind, const std::string& message) {
  std::cerr << json{{"error", code}, {"kind", kind}, {"message", message}}.dump() << std::endl;
}

struct Common {
  std::string config;
  std::string out_dir;
  int threads = 0;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Functional forecasts of intraday return curves"};
  app.require_subcommand(1);
  Common common;
  ConfigBinder binder;
  app.add_option("--config", common.config, "JSON config file; command-line flags take precedence");
  binder.add(&app, "--out-dir", common.out_dir, "Output directory (default: $FUNCAST_OUT_DIR or .)");
  binder.add(&app, "--threads", common.threads, "Worker threads for backtests (0 = all cores)");

  // shared settings
  std::string prices_path, panel_path, spec_path;
  std::int64_t grid_step = 3600;
  std::int64_t day_offset_steps = 0;
  std::string fill = "forward";
  double delta = 0.85;
  int j_max = 0;
  std::string weight = "unit";
  double level = 0.95;
  int window = 250;
  std::vector<std::string> methods{"argarch", "arma_aue", "var_sbekk", "var_aue"};
  std::string aue_refit = "expanding";
  int days = 10;
  int start_day = -1;
  int k = 1;
  std::string window_range;
  std::string estimator = "ridge";
  double penalty = -1.0;
  bool cv = false;
  int n_forecasts = 200;
  int stride = 1;
  std::string first_origin;
  bool horizon_diag = false;
  int burn_in = 500;
  int max_lag = 20;

  auto* ingest = app.add_subcommand("ingest", "Price CSV to a daily return-curve panel");
  binder.add(ingest, "--prices", prices_path, "Price CSV (timestamp,price)")->required();
  binder.add(ingest, "--grid-step", grid_step, "Grid step in seconds");
  binder.add(ingest, "--day-offset-steps", day_offset_steps, "Shift of the day boundary in grid steps");
  binder.add(ingest, "--fill", fill, "forward or strict");

  auto* fpca = app.add_subcommand("fpca", "Fit the functional principal components of a panel");
  binder.add(fpca, "--panel", panel_path, "Panel CSV")->required();
  binder.add(fpca, "--delta", delta, "CPV threshold");
  binder.add(fpca, "--j-max", j_max, "Upper bound on stored components (0 = automatic)");
  binder.add(fpca, "--weight", weight, "unit or inverse_t");

  auto* forecast = app.add_subcommand("forecast", "Forecast the day after the panel");
  binder.add(forecast, "--panel", panel_path, "Panel CSV")->required();
  binder.add(forecast, "--methods", methods, "Comma-separated methods");
  binder.add(forecast, "--delta", delta, "CPV threshold");
  binder.add(forecast, "--level", level, "Nominal interval level");
  binder.add(forecast, "--window", window, "Trailing days used (capped at the panel length)");
  binder.add(forecast, "--aue-refit", aue_refit, "expanding or full");
  binder.add(forecast, "--weight", weight, "unit or inverse_t");

  auto* backtest = app.add_subcommand("backtest", "Rolling one-day-ahead evaluation");
  binder.add(backtest, "--panel", panel_path, "Panel CSV")->required();
  binder.add(backtest, "--methods", methods, "Comma-separated methods");
  binder.add(backtest, "--delta", delta, "CPV threshold");
  binder.add(backtest, "--level", level, "Nominal interval level");
  binder.add(backtest, "--window", window, "Training window in days");
  binder.add(backtest, "--days", days, "Number of evaluation days");
  binder.add(backtest, "--start-day", start_day, "0-based first evaluation day (-1 = window)");
  binder.add(backtest, "--aue-refit", aue_refit, "expanding or full");
  binder.add(backtest, "--weight", weight, "unit or inverse_t");

  auto* rolling = app.add_subcommand("rolling", "Intraday tail forecasts from shifted panels");
  binder.add(rolling, "--prices", prices_path, "Price CSV (timestamp,price)")->required();
  binder.add(rolling, "--grid-step", grid_step, "Grid step in seconds");
  binder.add(rolling, "--fill", fill, "forward or strict");
  binder.add(rolling, "--k", k, "Horizon in grid steps");
  binder.add(rolling, "--window", window, "Days per panel");
  binder.add(rolling, "--window-range", window_range, "lo:hi window search by sign rate");
  binder.add(rolling, "--estimator", estimator, "ols, ridge or lasso");
  binder.add(rolling, "--penalty", penalty, "Penalty; negative selects the estimator default");
  binder.add_flag(rolling, "--cv", cv, "Choose the penalty by 5-fold cross-validation");
  binder.add(rolling, "--delta", delta, "CPV threshold");
  binder.add(rolling, "--n-forecasts", n_forecasts, "Number of forecast origins");
  binder.add(rolling, "--stride", stride, "Grid steps between origins");
  binder.add(rolling, "--first-origin", first_origin, "Timestamp of the first forecast return (default: last block)");
  binder.add_flag(rolling, "--horizon-diag", horizon_diag, "Also write mean R^2 for k = 1..T-1");

  auto* simulate = app.add_subcommand("simulate", "Simulate a panel from a factor-model spec");
  binder.add(simulate, "--spec", spec_path, "Spec JSON")->required();
  binder.add(simulate, "--days", days, "Number of days");
  binder.add(simulate, "--burn-in", burn_in, "Discarded initial days");

  auto* acf = app.add_subcommand("diag-acf", "ACF and cross ACF of scores and squared scores");
  binder.add(acf, "--panel", panel_path, "Panel CSV")->required();
  binder.add(acf, "--delta", delta, "CPV threshold");
  binder.add(acf, "--max-lag", max_lag, "Largest lag");

  // config-file values must be in place before required-option checks run
  for (int i = 1; i + 1 < argc; ++i)
    if (std::string(argv[i]) == "--config") common.config = argv[i + 1];
  json cfg = json::object();
  if (!common.config.empty()) {
    std::ifstream in(common.config);
    if (!in) {
      report_error("ConfigInvalid", "config", "cannot open config " + common.config);
      return 2;
    }
    cfg = json::parse(in, nullptr, false);
    if (cfg.is_discarded() || !cfg.is_object()) {
      report_error("ConfigInvalid", "config", "config is not a JSON object");
      return 2;
    }
    for (auto* sub : app.get_subcommands({}))
      for (auto* opt : sub->get_options())
        if (opt->get_required()) {
          std::string key = opt->get_lnames().front();
          for (char& c : key)
            if (c == '-') c = '_';
          if (cfg.contains(key)) opt->required(false);
        }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error("ConfigInvalid", "config", e.what());
    return 2;
  }

  try {
    binder.apply(cfg);
    // precedence: flag, then environment, then config file
    fs::path out_dir = common.out_dir.empty() ? "." : common.out_dir;
    const char* env = std::getenv("FUNCAST_OUT_DIR");
    if (app.get_option("--out-dir")->count() == 0 && env && *env) out_dir = env;
    fs::create_directories(out_dir);

    if (fill != "forward" && fill != "strict") throw Error(ErrorCode::ConfigInvalid, "fill must be forward or strict");
    const auto fill_policy = fill == "strict" ? funcast::FillPolicy::Strict : funcast::FillPolicy::ForwardFill;
    if (!(level > 0.0 && level < 1.0)) throw Error(ErrorCode::ConfigInvalid, "level must lie in (0,1)");
    if (!(delta > 0.0 && delta <= 1.0)) throw Error(ErrorCode::ConfigInvalid, "delta must lie in (0,1]");

    if (*ingest) {
      funcast::ReturnOptions ro;
      ro.grid_step = grid_step;
      ro.day_offset_steps = day_offset_steps;
      ro.fill = fill_policy;
      const auto daily = funcast::compute_returns(funcast::io::read_prices_csv(prices_path), ro);
      funcast::io::write_panel(funcast::make_panel(daily), out_dir / "panel.csv",
                               {{"filled_points", daily.filled_points}, {"dropped_days", daily.dropped_days},
                                {"day_offset_steps", day_offset_steps}, {"fill", fill}});
      std::cout << "wrote " << daily.curves.size() << " days x " << daily.curves.front().values.size()
                << " returns to " << (out_dir / "panel.csv").string() << "\n";
    } else if (*fpca) {
      const auto raw = funcast::io::read_panel(panel_path);
      const auto dm = funcast::demean_panel(raw);
      funcast::FpcaOptions fo{delta, j_max, parse_weight(weight)};
      const auto basis = funcast::fit_fpca(dm, fo);
      write_json(out_dir / "basis.json", funcast::io::to_json(basis));
      funcast::io::write_scores_csv(basis, raw, out_dir / "scores.csv");
      std::cout << "J = " << basis.J << " (CPV " << basis.cpv(basis.J - 1) << ")\n";
    } else if (*forecast) {
      const auto raw = funcast::io::read_panel(panel_path);
      const int w = std::min(window, raw.N());
      const auto train = funcast::slice_panel(raw, raw.N() - w, w);
      funcast::AueOptions aue;
      aue.refit = parse_refit(aue_refit);
      const auto fcs =
          funcast::forecast_next_day(train, delta, parse_methods(methods), level, aue, parse_weight(weight));
      for (const auto& f : fcs) {
        const std::string name(funcast::to_string(f.method));
        funcast::io::write_forecast_csv(f, out_dir / ("forecast_" + name + ".csv"));
        write_json(out_dir / ("forecast_" + name + ".json"), funcast::io::forecast_meta(f, w, raw.N()));
        std::cout << name << ": J = " << f.score_forecasts.size() << ", mean width "
                  << (f.upper - f.lower).mean() << "\n";
      }
    } else if (*backtest) {
      const auto raw = funcast::io::read_panel(panel_path);
      funcast::BacktestConfig bc;
      bc.window = window;
      bc.horizon_days = days;
      bc.start_day = start_day;
      bc.delta = delta;
      bc.methods = parse_methods(methods);
      bc.level = level;
      bc.threads = common.threads;
      bc.aue.refit = parse_refit(aue_refit);
      bc.weight = parse_weight(weight);
      std::vector<funcast::EvaluatedDay> days_out;
      const auto rep = funcast::rolling_backtest(raw, bc, &days_out);
      write_json(out_dir / "report.json", funcast::io::to_json(rep));
      funcast::io::write_report_table(rep, out_dir / "report_table.csv");
      std::ofstream fc_out(out_dir / "forecasts.csv");
      fc_out << std::setprecision(17) << "day,method,t,point,lower,upper,realized\n";
      for (const auto& d : days_out)
        for (Eigen::Index t = 0; t < d.point.size(); ++t)
          fc_out << d.day << "," << d.method << "," << (t + 1) << "," << d.point(t) << "," << d.lower(t) << ","
                 << d.upper(t) << "," << d.realized(t) << "\n";
      std::cout << funcast::io::format_report_table(rep);
    } else if (*rolling) {
      const auto flat = funcast::compute_flat_returns(funcast::io::read_prices_csv(prices_path), grid_step, fill_policy);
      if (flat.values.empty()) throw Error(ErrorCode::InsufficientData, "no returns in the price file");
      const int T = static_cast<int>(funcast::kSecondsPerDay / grid_step);
      const funcast::Vec r = funcast::to_vec(flat.values);
      funcast::RollingBacktestConfig rc;
      rc.T = T;
      rc.k = k;
      rc.window = window;
      rc.n_forecasts = n_forecasts;
      rc.stride = stride;
      rc.threads = common.threads;
      rc.model.delta = delta;
      rc.model.estimator = funcast::parse_estimator(estimator);
      if (penalty >= 0.0) rc.model.penalty = penalty;
      rc.model.cv = cv;
      if (!first_origin.empty()) {
        const auto ts = funcast::io::parse_timestamp(first_origin);
        const auto it = std::lower_bound(flat.end_times.begin(), flat.end_times.end(), ts);
        if (it == flat.end_times.end()) throw Error(ErrorCode::InsufficientData, "first origin after the data");
        rc.first_origin = static_cast<long>(it - flat.end_times.begin());
      }
      funcast::RollingBacktestResult best;
      std::ostringstream table;
      table << std::setprecision(17) << "estimator,window,RMSE,MAE,Sign\n";
      if (!window_range.empty()) {
        const auto colon = window_range.find(':');
        if (colon == std::string::npos) throw Error(ErrorCode::ConfigInvalid, "window-range must be lo:hi");
        const int lo = std::stoi(window_range.substr(0, colon));
        const int hi = std::stoi(window_range.substr(colon + 1));
        const auto tuning = funcast::tune_window(r, rc, lo, hi);
        for (const auto& c : tuning.candidates) {
          table << estimator << "," << c.window << "," << c.rmse << "," << c.mae << "," << c.sign_rate << "\n";
          if (c.window == tuning.best_window) best = c;
        }
      } else {
        best = funcast::rolling_origin_backtest(r, rc);
        table << estimator << "," << best.window << "," << best.rmse << "," << best.mae << "," << best.sign_rate
              << "\n";
      }
      std::ofstream(out_dir / "rolling_table.csv") << table.str();
      funcast::io::write_rolling_csv(best, flat.end_times, out_dir / "rolling.csv");
      std::cout << estimator << " window " << best.window << ": RMSE " << best.rmse << ", sign "
                << best.sign_rate << "\n";
      if (horizon_diag) {
        std::vector<int> ks;
        for (int h = 1; h < T; ++h) ks.push_back(h);
        const auto pts = funcast::horizon_diagnostic(r, T, ks, window, rc.model);
        std::ofstream hd(out_dir / "horizon.csv");
        hd << std::setprecision(17) << "k,mean_r2,J\n";
        for (const auto& p : pts) hd << p.k << "," << p.mean_r2 << "," << p.J << "\n";
      }
    } else if (*simulate) {
      std::ifstream in(spec_path);
      if (!in) throw Error(ErrorCode::IoError, "cannot open " + spec_path);
      const json spec_json = json::parse(in, nullptr, false);
      if (spec_json.is_discarded()) throw Error(ErrorCode::ConfigInvalid, "spec is not valid JSON");
      const auto spec = funcast::io::spec_from_json(spec_json);
      const auto sim = funcast::simulate_panel(spec, days, burn_in);
      funcast::io::write_panel(sim.panel, out_dir / "panel.csv", {{"seed", spec.seed}, {"burn_in", burn_in}});
      std::ofstream ts(out_dir / "true_scores.csv");
      ts << std::setprecision(17) << "day_index";
      for (int j = 1; j <= spec.J0; ++j) ts << ",beta" << j;
      ts << "\n";
      for (Eigen::Index i = 0; i < sim.true_scores.rows(); ++i) {
        ts << (i + 1);
        for (Eigen::Index j = 0; j < sim.true_scores.cols(); ++j) ts << "," << sim.true_scores(i, j);
        ts << "\n";
      }
      std::cout << "simulated " << days << " days x " << spec.T << " points\n";
    } else if (*acf) {
      const auto basis = funcast::fit_fpca(funcast::demean_panel(funcast::io::read_panel(panel_path)),
                                           funcast::FpcaOptions{delta, 0, funcast::GridWeight::Unit});
      std::ofstream out(out_dir / "acf.csv");
      out << std::setprecision(17) << "series_a,series_b,squared,lag,value,band\n";
      for (int sq = 0; sq < 2; ++sq) {
        funcast::Mat s = basis.scores.leftCols(basis.J);
        if (sq) s = s.array().square().matrix();
        for (int a = 0; a < basis.J; ++a) {
          const auto r = funcast::acf(s.col(a), max_lag);
          for (int l = 0; l <= max_lag; ++l)
            out << "beta" << a + 1 << ",beta" << a + 1 << "," << sq << "," << l << "," << r.values(l) << ","
                << r.band << "\n";
          for (int b = a + 1; b < basis.J; ++b) {
            const auto c = funcast::cross_acf(s.col(a), s.col(b), max_lag);
            for (std::size_t i = 0; i < c.lags.size(); ++i)
              out << "beta" << a + 1 << ",beta" << b + 1 << "," << sq << "," << c.lags[i] << "," << c.values(i)
                  << "," << c.band << "\n";
          }
        }
      }
      std::cout << "wrote ACF for " << basis.J << " scores\n";
    }
  } catch (const Error& e) {
    const auto kind = funcast::kind_of(e.code());
    report_error(std::string(funcast::to_string(e.code())),
                 kind == funcast::ErrorKind::Config ? "config" : kind == funcast::ErrorKind::Data ? "data" : "numerical",
                 e.what());
    return exit_code_for(e.code());
  } catch (const json::exception& e) {
    report_error("ConfigInvalid", "config", e.what());
    return 2;
  } catch (const std::exception& e) {
    report_error("Internal", "numerical", e.what());
    return 4;
  }
  return 0;
}
