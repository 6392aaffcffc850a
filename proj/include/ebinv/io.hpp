#pragma once

// CSV datasets and JSON serialization of fitted estimates.

#include <json.hpp>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "ebinv/grouping.hpp"
#include "ebinv/posterior_f.hpp"
#include "ebinv/posterior_g.hpp"

namespace ebinv {

using Json = nlohmann::ordered_json;

/// Shortest decimal text that reads back to the same double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

/// Fixed-point text with the given number of decimals.
inline std::string format_fixed(double v, int decimals) {
  if (!std::isfinite(v)) return format_double(v);
  std::array<char, 400> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::fixed, decimals);
  if (res.ec != std::errc()) return format_double(v);
  std::string s(buf.data(), res.ptr);
  if (s.find_first_not_of("-0.") == std::string::npos && s.front() == '-') s.erase(0, 1);  // no "-0.000"
  return s;
}

/// A dataset file: counts plus whichever optional per-item columns were present.
struct LoadedDataset {
  std::vector<std::string> ids;
  Dataset data;
  std::optional<std::vector<double>> price;
  std::optional<std::vector<double>> unit_cost;
  std::optional<std::vector<double>> fixed_cost;
  std::optional<std::vector<std::int64_t>> future_demand;

  std::size_t size() const noexcept { return ids.size(); }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::string located(std::string_view source, std::size_t line, const std::string& msg) {
  return std::string(source) + ":" + std::to_string(line) + ": " + msg;
}

inline std::int64_t parse_count(std::string_view text, std::string_view source, std::size_t line, std::string_view col) {
  std::int64_t v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw DataError(located(source, line, std::string(col) + " '" + std::string(text) + "' is not an integer"));
  if (v < 0) throw DataError(located(source, line, std::string(col) + " must be non-negative"));
  return v;
}

inline double parse_money(std::string_view text, std::string_view source, std::size_t line, std::string_view col) {
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || res.ec != std::errc() || res.ptr != text.data() + text.size() || !std::isfinite(v))
    throw DataError(located(source, line, std::string(col) + " '" + std::string(text) + "' is not a number"));
  if (v < 0.0) throw DataError(located(source, line, std::string(col) + " must be non-negative"));
  return v;
}

}  // namespace detail

/// Reads `item_id,demand[,price,unit_cost,fixed_cost,future_demand]` with a header row.
/// Optional columns may appear in any order after demand; blank lines and `#` lines are skipped.
inline LoadedDataset read_dataset_csv(std::istream& in, double horizon, std::string_view source = "<input>") {
  if (!(horizon > 0.0)) throw ConfigError("horizon T must be positive");
  LoadedDataset out;
  out.data.horizon = horizon;
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> header;
  int c_id = -1, c_demand = -1, c_price = -1, c_unit = -1, c_fixed = -1, c_future = -1;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto fields = detail::split_fields(t);
    if (header.empty()) {
      for (std::size_t i = 0; i < fields.size(); ++i) {
        const std::string name(fields[i]);
        if (std::find(header.begin(), header.end(), name) != header.end())
          throw DataError(detail::located(source, lineno, "duplicate column '" + name + "'"));
        header.push_back(name);
        const int idx = static_cast<int>(i);
        if (name == "item_id") c_id = idx;
        else if (name == "demand") c_demand = idx;
        else if (name == "price") c_price = idx;
        else if (name == "unit_cost") c_unit = idx;
        else if (name == "fixed_cost") c_fixed = idx;
        else if (name == "future_demand") c_future = idx;
        else throw DataError(detail::located(source, lineno, "unknown column '" + name + "'"));
      }
      if (c_id != 0 || c_demand != 1)
        throw DataError(detail::located(source, lineno, "header must start with item_id,demand"));
      if (c_price >= 0) out.price.emplace();
      if (c_unit >= 0) out.unit_cost.emplace();
      if (c_fixed >= 0) out.fixed_cost.emplace();
      if (c_future >= 0) out.future_demand.emplace();
      continue;
    }
    if (fields.size() != header.size())
      throw DataError(detail::located(source, lineno,
                                      "expected " + std::to_string(header.size()) + " fields, found " +
                                          std::to_string(fields.size())));
    if (fields[0].empty()) throw DataError(detail::located(source, lineno, "empty item_id"));
    out.ids.emplace_back(fields[0]);
    out.data.counts.push_back(detail::parse_count(fields[1], source, lineno, "demand"));
    if (c_price >= 0) out.price->push_back(detail::parse_money(fields[c_price], source, lineno, "price"));
    if (c_unit >= 0) out.unit_cost->push_back(detail::parse_money(fields[c_unit], source, lineno, "unit_cost"));
    if (c_fixed >= 0) out.fixed_cost->push_back(detail::parse_money(fields[c_fixed], source, lineno, "fixed_cost"));
    if (c_future >= 0)
      out.future_demand->push_back(detail::parse_count(fields[c_future], source, lineno, "future_demand"));
  }
  if (header.empty()) throw DataError(std::string(source) + ": missing header row");
  if (out.ids.empty()) throw DataError(std::string(source) + ": no data rows");
  return out;
}

inline LoadedDataset load_dataset(const std::string& path, double horizon) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return read_dataset_csv(in, horizon, path);
}

inline void write_dataset_csv(std::ostream& out, const LoadedDataset& d) {
  out << "item_id,demand";
  if (d.price) out << ",price";
  if (d.unit_cost) out << ",unit_cost";
  if (d.fixed_cost) out << ",fixed_cost";
  if (d.future_demand) out << ",future_demand";
  out << '\n';
  for (std::size_t i = 0; i < d.size(); ++i) {
    out << d.ids[i] << ',' << d.data.counts[i];
    if (d.price) out << ',' << format_double((*d.price)[i]);
    if (d.unit_cost) out << ',' << format_double((*d.unit_cost)[i]);
    if (d.fixed_cost) out << ',' << format_double((*d.fixed_cost)[i]);
    if (d.future_demand) out << ',' << (*d.future_demand)[i];
    out << '\n';
  }
}

/// Per-item economics: file columns where present, otherwise the given defaults.
inline std::vector<ItemEconomics> item_economics(const LoadedDataset& d, const std::optional<double>& price,
                                                 const std::optional<double>& unit_cost,
                                                 const std::optional<double>& fixed_cost) {
  std::vector<ItemEconomics> out(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    auto pick = [&](const std::optional<std::vector<double>>& col, const std::optional<double>& flag,
                    const char* name) -> double {
      if (col) return (*col)[i];
      if (flag) return *flag;
      throw ConfigError(std::string("no ") + name + " column in the dataset and no default given");
    };
    out[i] = {pick(d.price, price, "price"), pick(d.unit_cost, unit_cost, "unit_cost"),
              pick(d.fixed_cost, fixed_cost, "fixed_cost")};
    out[i].validate();
  }
  return out;
}

// JSON serialization.

inline Json to_json(const DiscreteMixture& mix) {
  return Json{{"atoms", mix.atoms()}, {"weights", mix.weights()}};
}

inline DiscreteMixture mixture_from_json(const Json& j) {
  try {
    return DiscreteMixture(j.at("atoms").get<std::vector<double>>(), j.at("weights").get<std::vector<double>>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed mixture JSON: ") + e.what());
  }
}

inline Json to_json(const NpmleFit& fit) {
  Json j = to_json(fit.mixture);
  j["loglik"] = fit.log_likelihood;
  j["certificate_eps"] = fit.report.final_certificate();
  j["certified"] = fit.report.certified();
  j["iterations"] = fit.report.iterations.size();
  j["gamma_lower_bound"] = fit.report.gamma_bound();
  return j;
}

inline Json to_json(const MarginalEstimate& m) {
  Json j{{"kind", to_string(m.kind())}, {"horizon", m.horizon()}, {"loglik", m.log_likelihood()}};
  if (m.kind() == MarginalKind::spline) {
    const auto& c = m.spline_coefficients();
    const auto r = spline_residuals(c);
    j["beta0"] = c.beta0;
    j["beta"] = c.beta;
    j["knots"] = c.knots;
    j["residuals"] = {{"natural", r.natural}, {"probability", r.probability}, {"monotone", r.monotone}};
  }
  return j;
}

inline MarginalEstimate marginal_from_json(const Json& j) {
  try {
    if (j.at("kind").get<std::string>() != "spline") throw DataError("only spline marginals can be read back");
    SplineCoefficients c;
    c.beta0 = j.at("beta0").get<double>();
    c.beta = j.at("beta").get<std::vector<double>>();
    c.knots = j.at("knots").get<std::vector<double>>();
    return MarginalEstimate::spline(std::move(c), j.at("horizon").get<double>(), j.at("loglik").get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed marginal JSON: ") + e.what());
  }
}

inline Json to_json(const LrTestResult& r) {
  return Json{{"statistic", r.statistic},
              {"raw_statistic", r.raw_statistic},
              {"clamped", r.clamped},
              {"df", r.df},
              {"p_value", r.p_value},
              {"cutoff", r.cutoff},
              {"split", r.split},
              {"log_likelihood_group0", r.log_likelihood0},
              {"log_likelihood_group1", r.log_likelihood1},
              {"log_likelihood_pooled", r.log_likelihood_pooled},
              {"fit_group0", to_json(r.fit0)},
              {"fit_group1", to_json(r.fit1)},
              {"fit_pooled", to_json(r.fit_pooled)}};
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path + ": " + e.what());
  }
}

}  // namespace ebinv
