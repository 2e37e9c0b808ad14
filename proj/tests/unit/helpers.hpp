#pragma once

#include <string>
#include <tuple>
#include <vector>

#include "adlift/core_types.hpp"

namespace testutil {

struct Row {
  int z, w, y;
};

// Dataset with one upper-funnel event "conv" and no features.
inline adlift::ExperimentDataset rows_dataset(const std::vector<Row>& rows) {
  adlift::ExperimentDataset ds;
  ds.meta.experiment_id = "t";
  ds.meta.outcome_events = {{"conv", adlift::Funnel::kUpper}};
  ds.meta.planned_split = 0.5;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    adlift::UserRecord u;
    u.user_id = "u" + std::to_string(i);
    u.z = rows[i].z;
    u.w = rows[i].w;
    u.y["conv"] = rows[i].y;
    ds.users.push_back(u);
  }
  return ds;
}

// Repeats (z, w, y) `count` times.
inline void add(std::vector<Row>& rows, int z, int w, int y, int count) {
  for (int k = 0; k < count; ++k) rows.push_back({z, w, y});
}

}  // namespace testutil
