#pragma once

#include <cstddef>
#include <vector>

namespace ppd {

// Probability mass function on a strictly increasing integer support.
// Masses must be nonnegative and sum to 1 within 1e-12; exact-zero masses are
// dropped on construction so that the stored support carries positive mass
// everywhere (zero-mass points must not influence transport distances).
class DiscretePmf {
 public:
  DiscretePmf(std::vector<long long> support, std::vector<double> mass);

  static DiscretePmf point(long long x);
  // Binomial(trials, p), normalized after exponentiating log masses.
  static DiscretePmf binomial(long long trials, double p);

  DiscretePmf shifted(long long offset) const;

  const std::vector<long long>& support() const { return support_; }
  const std::vector<double>& mass() const { return mass_; }
  std::size_t size() const { return support_.size(); }

 private:
  std::vector<long long> support_;
  std::vector<double> mass_;
};

}  // namespace ppd
