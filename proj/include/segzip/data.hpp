#ifndef SEGZIP_DATA_HPP
#define SEGZIP_DATA_HPP

#include <string>
#include <vector>

namespace segzip {

// One longitudinal count record.  x_row feeds the log-linear (count) model,
// w_row the logistic zero model, z_row the per-cluster random effects.
struct Observation {
  long long y = 0;      // count
  double t = 0.0;       // time (month index or scenario covariate)
  double offset = 1.0;  // exposure, strictly positive
  std::vector<double> x_row;
  std::vector<double> w_row;
  std::vector<double> z_row;
};

struct Cluster {
  std::string id;
  std::vector<Observation> observations;
};

struct Dataset {
  std::vector<Cluster> clusters;
  std::vector<double> time_levels;  // sorted distinct observation times

  long long n_observations() const {
    long long n = 0;
    for (const auto& c : clusters) n += static_cast<long long>(c.observations.size());
    return n;
  }

  // Recompute time_levels from the observations (sorted, deduplicated).
  void rebuild_time_levels();

  // Index of t in time_levels; throws if t is not a known level.
  int time_level_index(double t) const;

  // Basic structural checks: nonempty clusters, unique ids, positive
  // offsets, time_levels consistent with the data.
  void validate() const;
};

}  // namespace segzip

#endif
