#include "ppd/core.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <utility>

#include "ppd/errors.hpp"

namespace ppd {

namespace {

std::string join_rows(const std::vector<std::string>& rows) {
  std::string out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i > 0) out += "; ";
    out += rows[i];
  }
  return out;
}

}  // namespace

void CountPanel::validate() const {
  if (counties < 1 || months < 1) {
    throw ValidationError("panel: needs at least one county and one month");
  }
  if (static_cast<long long>(cases.size()) != counties ||
      static_cast<long long>(deaths.size()) != counties) {
    throw ValidationError("panel: grid row count does not match county count");
  }
  std::vector<std::string> bad;
  for (long long j = 0; j < counties; ++j) {
    if (static_cast<long long>(cases[j].size()) != months ||
        static_cast<long long>(deaths[j].size()) != months) {
      throw ValidationError("panel: grid column count does not match month count");
    }
    for (long long t = 0; t < months; ++t) {
      const long long c = cases[j][t];
      const long long d = deaths[j][t];
      if (d < 0 || c < 0 || d > c) {
        bad.push_back("(county " + std::to_string(j) + ", month " + std::to_string(t) +
                      "): cases=" + std::to_string(c) + " deaths=" + std::to_string(d));
      }
    }
  }
  if (!bad.empty()) {
    throw ValidationError("panel: cells violating cases >= deaths >= 0: " + join_rows(bad));
  }
}

void CountPanel::to_csv(std::ostream& out) const {
  out << "county,month,cases,deaths\n";
  for (long long j = 0; j < counties; ++j) {
    for (long long t = 0; t < months; ++t) {
      out << j << ',' << t << ',' << cases[j][t] << ',' << deaths[j][t] << '\n';
    }
  }
}

CountPanel CountPanel::from_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) {
    throw ValidationError("panel csv: empty file");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "county,month,cases,deaths") {
    throw ValidationError("panel csv: bad header '" + line +
                          "', expected 'county,month,cases,deaths'");
  }

  struct Cell {
    long long cases;
    long long deaths;
  };
  std::map<std::pair<long long, long long>, Cell> cells;
  std::vector<std::string> errors;
  long long max_county = -1, max_month = -1;
  long long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string field;
    long long values[4];
    bool ok = true;
    for (int f = 0; f < 4; ++f) {
      if (!std::getline(row, field, ',')) {
        ok = false;
        break;
      }
      try {
        std::size_t pos = 0;
        values[f] = std::stoll(field, &pos);
        if (pos != field.size()) ok = false;
      } catch (const std::exception&) {
        ok = false;
      }
    }
    std::string rest;
    if (ok && std::getline(row, rest)) ok = false;
    if (!ok) {
      errors.push_back("line " + std::to_string(line_no) + ": malformed row '" + line + "'");
      continue;
    }
    const long long j = values[0], t = values[1], c = values[2], d = values[3];
    if (j < 0 || t < 0 || c < 0 || d < 0) {
      errors.push_back("line " + std::to_string(line_no) + ": negative field");
      continue;
    }
    if (d > c) {
      errors.push_back("line " + std::to_string(line_no) + ": deaths " + std::to_string(d) +
                       " exceed cases " + std::to_string(c));
      continue;
    }
    if (!cells.emplace(std::make_pair(j, t), Cell{c, d}).second) {
      errors.push_back("line " + std::to_string(line_no) + ": duplicate cell (" +
                       std::to_string(j) + ", " + std::to_string(t) + ")");
      continue;
    }
    max_county = std::max(max_county, j);
    max_month = std::max(max_month, t);
  }
  if (!errors.empty()) {
    throw ValidationError("panel csv: " + join_rows(errors));
  }
  if (cells.empty()) {
    throw ValidationError("panel csv: no data rows");
  }

  CountPanel panel;
  panel.counties = max_county + 1;
  panel.months = max_month + 1;
  panel.cases.assign(panel.counties, std::vector<long long>(panel.months, -1));
  panel.deaths.assign(panel.counties, std::vector<long long>(panel.months, 0));
  for (const auto& [key, cell] : cells) {
    panel.cases[key.first][key.second] = cell.cases;
    panel.deaths[key.first][key.second] = cell.deaths;
  }
  std::vector<std::string> missing;
  for (long long j = 0; j < panel.counties; ++j) {
    for (long long t = 0; t < panel.months; ++t) {
      if (panel.cases[j][t] < 0) {
        missing.push_back("(" + std::to_string(j) + ", " + std::to_string(t) + ")");
      }
    }
  }
  if (!missing.empty()) {
    throw ValidationError("panel csv: missing cells " + join_rows(missing));
  }
  panel.validate();
  return panel;
}

void PublicInfo::validate() const {
  if (current_total < 0) {
    throw ValidationError("public info: negative current total");
  }
  if (prior_cases.size() != prior_deaths.size()) {
    throw ValidationError("public info: prior vectors have different lengths");
  }
  for (std::size_t j = 0; j < prior_cases.size(); ++j) {
    if (prior_cases[j] < 0 || prior_deaths[j] < 0) {
      throw ValidationError("public info: negative prior count at county " + std::to_string(j));
    }
  }
}

void SecretPair::validate() const {
  if (record_index < 0) throw ValidationError("secret pair: negative record index");
  if (value_a == value_b) throw ValidationError("secret pair: values must differ");
}

double compose_sequential(const std::vector<double>& eps_list) {
  double total = 0.0;
  for (double e : eps_list) {
    if (!(e >= 0.0) || !std::isfinite(e)) {
      throw std::invalid_argument("compose_sequential: budgets must be finite and nonnegative");
    }
    total += e;
  }
  return total;
}

double compose_parallel(const std::vector<double>& eps_list) {
  if (eps_list.empty()) {
    throw std::invalid_argument("compose_parallel: empty budget list");
  }
  double best = 0.0;
  for (double e : eps_list) {
    if (!(e >= 0.0)) {
      throw std::invalid_argument("compose_parallel: budgets must be nonnegative");
    }
    best = std::max(best, e);
  }
  return best;
}

double condition_on_public(double eps) {
  if (!(eps >= 0.0)) {
    throw std::invalid_argument("condition_on_public: budget must be nonnegative");
  }
  return 2.0 * eps;
}

void PrivacyLedger::record(std::string release_id, double epsilon,
                           std::optional<std::string> partition, bool conditioned) {
  if (!(epsilon >= 0.0)) {
    throw std::invalid_argument("ledger: budget must be nonnegative");
  }
  std::lock_guard<std::mutex> lock(mutex_);
  entries_.push_back(Entry{std::move(release_id), epsilon, std::move(partition), conditioned});
}

double PrivacyLedger::total() const {
  std::lock_guard<std::mutex> lock(mutex_);
  double sequential = 0.0;
  std::map<std::string, double> partition_max;
  for (const Entry& e : entries_) {
    const double effective = e.conditioned ? 2.0 * e.epsilon : e.epsilon;
    if (e.partition) {
      auto [it, inserted] = partition_max.emplace(*e.partition, effective);
      if (!inserted) it->second = std::max(it->second, effective);
    } else {
      sequential += effective;
    }
  }
  for (const auto& [label, eps] : partition_max) {
    (void)label;
    sequential += eps;
  }
  return sequential;
}

std::vector<PrivacyLedger::Entry> PrivacyLedger::entries() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return entries_;
}

}  // namespace ppd
