#include "mtvgp/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <string_view>

#include <Eigen/QR>

#include "mtvgp/errors.hpp"
#include "mtvgp/fileio.hpp"

namespace mtvgp {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t k = 0; k <= line.size(); ++k)
    if (k == line.size() || line[k] == ',') {
      out.push_back(trim(line.substr(start, k - start)));
      start = k + 1;
    }
  return out;
}

bool parse_number(std::string_view s, double& v) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool is_missing(std::string_view s) { return s.empty() || s == "NA" || s == "NaN" || s == "nan"; }

std::string fmt(double v) {
  if (std::isnan(v)) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void SpatialDataset::validate() const {
  if (x.rows() != n() || y.rows() != n()) throw DataError("covariate and response rows must match the site count");
  if (!x.allFinite()) throw DataError("covariates must be finite");
  if (static_cast<Index>(covariate_names.size()) != p()) throw DataError("covariate names do not match columns");
  if (static_cast<Index>(response_names.size()) != q()) throw DataError("response names do not match columns");
  model.validate(y);
}

void SpatialDataset::require_full_rank() const {
  if (p() >= n())
    throw DataError("covariate matrix needs full column rank with p < n (p=" + std::to_string(p()) +
                    ", n=" + std::to_string(n()) + ")");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  if (qr.rank() < p())
    throw DataError("covariate matrix is rank deficient (rank " + std::to_string(qr.rank()) + " < p=" +
                    std::to_string(p()) + "); full column rank with p < n is required");
}

SpatialDataset SpatialDataset::rows(std::span<const Index> ids) const {
  SpatialDataset out{sites.subset(ids), Eigen::MatrixXd(static_cast<Index>(ids.size()), p()),
                     Eigen::MatrixXd(static_cast<Index>(ids.size()), q()), model, covariate_names, response_names};
  if (model.trials.size() != 0) out.model.trials.resize(static_cast<Index>(ids.size()), q());
  for (std::size_t k = 0; k < ids.size(); ++k) {
    out.x.row(static_cast<Index>(k)) = x.row(ids[k]);
    out.y.row(static_cast<Index>(k)) = y.row(ids[k]);
    if (model.trials.size() != 0) out.model.trials.row(static_cast<Index>(k)) = model.trials.row(ids[k]);
  }
  return out;
}

SpatialDataset SpatialDataset::response(Index j) const {
  if (j < 0 || j >= q()) throw ConfigError("response index out of range");
  SpatialDataset out{sites, x, y.col(j), ResponseModel{{model.families[static_cast<std::size_t>(j)]}, {}},
                     covariate_names, {response_names[static_cast<std::size_t>(j)]}};
  if (model.trials.size() != 0) out.model.trials = model.trials.col(j);
  return out;
}

SpatialDataset parse_dataset(const std::string& text, const DatasetSchema& schema) {
  if (schema.responses.empty()) throw ConfigError("dataset schema lists no responses");
  std::vector<std::string_view> header;
  std::vector<std::vector<std::string_view>> rows;
  std::vector<std::size_t> line_numbers;
  std::string_view rest(text);
  std::size_t line_no = 0;
  while (!rest.empty()) {
    const std::size_t nl = rest.find('\n');
    std::string_view line = rest.substr(0, nl);
    rest = nl == std::string_view::npos ? std::string_view() : rest.substr(nl + 1);
    ++line_no;
    if (trim(line).empty() || trim(line).front() == '#') continue;
    if (header.empty()) {
      header = split_fields(line);
      continue;
    }
    rows.push_back(split_fields(line));
    line_numbers.push_back(line_no);
  }
  if (header.size() < 3 || header[0] != "lon" || header[1] != "lat")
    throw DataError("CSV header must start with lon,lat");
  if (rows.empty()) throw DataError("dataset has no rows");

  const auto find_col = [&](std::string_view name) -> std::size_t {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError("column \"" + std::string(name) + "\" not found in CSV header");
    return static_cast<std::size_t>(it - header.begin());
  };

  std::vector<std::size_t> resp_cols, trial_cols;
  for (const auto& r : schema.responses) {
    resp_cols.push_back(find_col(r.name));
    trial_cols.push_back(r.trials_column.empty() ? header.size() : find_col(r.trials_column));
  }
  std::vector<std::size_t> cov_cols;
  if (!schema.covariates.empty()) {
    for (const auto& c : schema.covariates) cov_cols.push_back(find_col(c));
  } else {
    for (std::size_t c = 2; c < header.size(); ++c)
      if (std::find(resp_cols.begin(), resp_cols.end(), c) == resp_cols.end() &&
          std::find(trial_cols.begin(), trial_cols.end(), c) == trial_cols.end())
        cov_cols.push_back(c);
  }

  const Index n = static_cast<Index>(rows.size());
  const Index q = static_cast<Index>(resp_cols.size());
  const Index p = static_cast<Index>(cov_cols.size()) + (schema.intercept ? 1 : 0);
  Eigen::MatrixXd coords(n, 2), x(n, p), y(n, q);
  Eigen::MatrixXi trials;
  const bool any_trials = std::any_of(trial_cols.begin(), trial_cols.end(), [&](std::size_t c) { return c < header.size(); });
  if (any_trials) trials.resize(n, q);

  for (Index i = 0; i < n; ++i) {
    const auto& f = rows[static_cast<std::size_t>(i)];
    const std::string where = "line " + std::to_string(line_numbers[static_cast<std::size_t>(i)]);
    if (f.size() != header.size())
      throw DataError(where + ": expected " + std::to_string(header.size()) + " fields, found " + std::to_string(f.size()));
    for (int c = 0; c < 2; ++c)
      if (!parse_number(f[static_cast<std::size_t>(c)], coords(i, c)) || !std::isfinite(coords(i, c)))
        throw DataError(where + ": missing or invalid coordinate in column " + std::string(header[static_cast<std::size_t>(c)]));
    Index col = 0;
    if (schema.intercept) x(i, col++) = 1.0;
    for (std::size_t c : cov_cols) {
      if (!parse_number(f[c], x(i, col)) || !std::isfinite(x(i, col)))
        throw DataError(where + ": invalid covariate in column " + std::string(header[c]));
      ++col;
    }
    for (Index j = 0; j < q; ++j) {
      const std::size_t c = resp_cols[static_cast<std::size_t>(j)];
      if (is_missing(f[c])) {
        y(i, j) = std::numeric_limits<double>::quiet_NaN();
      } else if (!parse_number(f[c], y(i, j))) {
        throw DataError(where + ": invalid response in column " + std::string(header[c]));
      }
      if (any_trials) {
        const std::size_t tc = trial_cols[static_cast<std::size_t>(j)];
        double t = schema.responses[static_cast<std::size_t>(j)].family.trials;
        if (tc < header.size() && (!parse_number(f[tc], t) || t < 1 || t != std::floor(t)))
          throw DataError(where + ": invalid trial count in column " + std::string(header[tc]));
        trials(i, j) = static_cast<int>(t);
      }
      try {
        validate_response(schema.responses[static_cast<std::size_t>(j)].family, y(i, j),
                          any_trials ? trials(i, j) : 0);
      } catch (const DataError& e) {
        throw DataError(where + " (row " + std::to_string(i + 1) + "), column " + std::string(header[c]) + ": " + e.what());
      }
    }
  }

  ResponseModel model;
  std::vector<std::string> rnames;
  for (const auto& r : schema.responses) {
    model.families.push_back(r.family);
    rnames.push_back(r.name);
  }
  model.trials = trials;
  std::vector<std::string> cnames;
  if (schema.intercept) cnames.emplace_back("intercept");
  for (std::size_t c : cov_cols) cnames.emplace_back(header[c]);

  SpatialDataset out{SiteSet(std::move(coords)), std::move(x), std::move(y), std::move(model), std::move(cnames),
                     std::move(rnames)};
  out.validate();
  return out;
}

SpatialDataset load_dataset(const std::string& path, const DatasetSchema& schema) {
  return parse_dataset(read_file(path), schema);
}

std::string dataset_to_csv(const SpatialDataset& data, const std::vector<std::string>& comments) {
  std::ostringstream out;
  for (const auto& c : comments) out << "# " << c << '\n';
  out << "lon,lat";
  std::vector<Index> cov;
  for (Index k = 0; k < data.p(); ++k)
    if (data.covariate_names[static_cast<std::size_t>(k)] != "intercept") {
      cov.push_back(k);
      out << ',' << data.covariate_names[static_cast<std::size_t>(k)];
    }
  for (const auto& r : data.response_names) out << ',' << r;
  const bool trials = data.model.trials.size() != 0;
  if (trials)
    for (const auto& r : data.response_names) out << ',' << r << "_trials";
  out << '\n';
  for (Index i = 0; i < data.n(); ++i) {
    out << fmt(data.sites.coords()(i, 0)) << ',' << fmt(data.sites.coords()(i, 1));
    for (Index k : cov) out << ',' << fmt(data.x(i, k));
    for (Index j = 0; j < data.q(); ++j) out << ',' << fmt(data.y(i, j));
    if (trials)
      for (Index j = 0; j < data.q(); ++j) out << ',' << data.model.trials(i, j);
    out << '\n';
  }
  return out.str();
}

}  // namespace mtvgp
