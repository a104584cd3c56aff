#include "xlt/errors.hpp"
#include "xlt/optim.hpp"

#include <algorithm>

namespace xlt {

double CyclicalSchedule::lr_at(std::uint64_t step) const {
  if (stepsize == 0) throw ConfigError("cyclical schedule stepsize must be >= 1");
  // Integer phase keeps the wave exactly periodic.
  const std::uint64_t phase = step % (2 * stepsize);
  const std::uint64_t rise = phase <= stepsize ? phase : 2 * stepsize - phase;
  if (rise == 0) return lr_min;
  if (rise == stepsize) return lr_max;
  const double frac = static_cast<double>(rise) / static_cast<double>(stepsize);
  return std::clamp((1.0 - frac) * lr_min + frac * lr_max, std::min(lr_min, lr_max),
                    std::max(lr_min, lr_max));
}

std::uint64_t default_stepsize(std::size_t n_examples, std::size_t batch_size) {
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  const std::uint64_t steps_per_epoch = (n_examples + batch_size - 1) / batch_size;
  return std::max<std::uint64_t>(1, 2 * steps_per_epoch);
}

}  // namespace xlt
