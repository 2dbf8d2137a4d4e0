#include "segzip/data.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace segzip {

void Dataset::rebuild_time_levels() {
  std::set<double> levels;
  for (const auto& c : clusters)
    for (const auto& o : c.observations) levels.insert(o.t);
  time_levels.assign(levels.begin(), levels.end());
}

int Dataset::time_level_index(double t) const {
  auto it = std::lower_bound(time_levels.begin(), time_levels.end(), t);
  if (it == time_levels.end() || *it != t)
    throw std::invalid_argument("Dataset: unknown time level");
  return static_cast<int>(it - time_levels.begin());
}

void Dataset::validate() const {
  std::set<std::string> ids;
  std::set<double> seen;
  for (const auto& c : clusters) {
    if (c.observations.empty())
      throw std::invalid_argument("Dataset: empty cluster " + c.id);
    if (!ids.insert(c.id).second)
      throw std::invalid_argument("Dataset: duplicate cluster id " + c.id);
    for (const auto& o : c.observations) {
      if (!(o.offset > 0.0) || !std::isfinite(o.offset))
        throw std::invalid_argument("Dataset: offsets must be positive");
      if (o.y < 0) throw std::invalid_argument("Dataset: negative count");
      seen.insert(o.t);
    }
  }
  if (std::vector<double>(seen.begin(), seen.end()) != time_levels)
    throw std::invalid_argument(
        "Dataset: time_levels out of sync with observations");
}

}  // namespace segzip
