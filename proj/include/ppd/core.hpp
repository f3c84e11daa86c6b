#pragma once

#include <iosfwd>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace ppd {

// J counties by T months of case and death counts, indexed [county][month].
// Invariants: J, T >= 1 and cases[j][t] >= deaths[j][t] >= 0 everywhere.
struct CountPanel {
  long long counties = 0;
  long long months = 0;
  std::vector<std::vector<long long>> cases;
  std::vector<std::vector<long long>> deaths;

  void validate() const;

  // CSV schema: header "county,month,cases,deaths", one row per (j, t),
  // county and month as 0-based integers, rows in county-major order.
  void to_csv(std::ostream& out) const;
  static CountPanel from_csv(std::istream& in);
};

// Realized public information for one release month: the previous month's
// per-county counts, the current month's exact case total, and whether the
// cases >= deaths ordering is announced as holding.
struct PublicInfo {
  std::vector<long long> prior_cases;
  std::vector<long long> prior_deaths;
  long long current_total = 0;
  bool ordering_enforced = true;

  void validate() const;
};

// A discriminative pair about one record: two distinct values whose
// conditional release laws must stay epsilon-indistinguishable. Values are
// binary or bounded reals; nothing richer is modeled.
struct SecretPair {
  long long record_index = 0;
  double value_a = 0.0;
  double value_b = 1.0;

  void validate() const;
};

// Budget arithmetic. Sequential releases that are conditionally independent
// given (X, Z) add; releases over a disjoint partition cost the max;
// conditioning an eps-DP release on a set-membership public event doubles it.
double compose_sequential(const std::vector<double>& eps_list);
double compose_parallel(const std::vector<double>& eps_list);
double condition_on_public(double eps);

// Append-only record of releases. The `conditioned` flag applies the doubling
// at accounting time so stored budgets stay auditable as spent. Partition
// labels are opaque; disjointness is the caller's claim. Appends are
// serialized; reads take a snapshot and are safe from any thread.
class PrivacyLedger {
 public:
  struct Entry {
    std::string release_id;
    double epsilon = 0.0;
    std::optional<std::string> partition;
    bool conditioned = false;
  };

  void record(std::string release_id, double epsilon,
              std::optional<std::string> partition = std::nullopt,
              bool conditioned = false);

  // Sequential composition over {standalone entries} + {per-partition maxima}.
  double total() const;

  std::vector<Entry> entries() const;

 private:
  mutable std::mutex mutex_;
  std::vector<Entry> entries_;
};

}  // namespace ppd
