#include "ppd/pmf.hpp"

#include <cmath>
#include <string>

#include "ppd/errors.hpp"

namespace ppd {

DiscretePmf::DiscretePmf(std::vector<long long> support, std::vector<double> mass) {
  if (support.size() != mass.size()) {
    throw ValidationError("pmf: support and mass lengths differ");
  }
  if (support.empty()) {
    throw ValidationError("pmf: empty support");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < support.size(); ++i) {
    if (i > 0 && support[i] <= support[i - 1]) {
      throw ValidationError("pmf: support must be strictly increasing");
    }
    if (!(mass[i] >= 0.0)) {
      throw ValidationError("pmf: negative or non-finite mass at index " + std::to_string(i));
    }
    total += mass[i];
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw ValidationError("pmf: masses sum to " + std::to_string(total) + ", expected 1");
  }
  support_.reserve(support.size());
  mass_.reserve(mass.size());
  for (std::size_t i = 0; i < support.size(); ++i) {
    if (mass[i] > 0.0) {
      support_.push_back(support[i]);
      mass_.push_back(mass[i]);
    }
  }
  if (support_.empty()) {
    throw ValidationError("pmf: all masses are zero");
  }
}

DiscretePmf DiscretePmf::point(long long x) { return DiscretePmf({x}, {1.0}); }

DiscretePmf DiscretePmf::binomial(long long trials, double p) {
  if (trials < 0) throw ValidationError("binomial: negative trial count");
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("binomial: p outside [0, 1]");
  if (trials == 0 || p == 0.0) return point(0);
  if (p == 1.0) return point(trials);

  const double lp = std::log(p);
  const double lq = std::log1p(-p);
  const double lgn = std::lgamma(static_cast<double>(trials) + 1.0);
  std::vector<long long> support(static_cast<std::size_t>(trials) + 1);
  std::vector<double> mass(static_cast<std::size_t>(trials) + 1);
  double total = 0.0;
  for (long long k = 0; k <= trials; ++k) {
    const double kd = static_cast<double>(k);
    const double nd = static_cast<double>(trials);
    const double logm = lgn - std::lgamma(kd + 1.0) - std::lgamma(nd - kd + 1.0) +
                        kd * lp + (nd - kd) * lq;
    support[static_cast<std::size_t>(k)] = k;
    mass[static_cast<std::size_t>(k)] = std::exp(logm);
    total += mass[static_cast<std::size_t>(k)];
  }
  for (double& m : mass) m /= total;
  return DiscretePmf(std::move(support), std::move(mass));
}

DiscretePmf DiscretePmf::shifted(long long offset) const {
  std::vector<long long> support = support_;
  for (long long& s : support) s += offset;
  return DiscretePmf(std::move(support), mass_);
}

}  // namespace ppd
