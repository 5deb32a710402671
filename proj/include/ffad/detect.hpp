#pragma once

#include <string>
#include <vector>

#include "ffad/model.hpp"
#include "ffad/preprocess.hpp"

// Window scoring and evaluation. A window's anomaly score is its noise-free
// reconstruction error; the threshold is fitted on validation scores and
// frozen, and a window is flagged when its score exceeds it (strictly).

namespace ffad::detect {

struct anomaly_score {
  size_t window_index = 0;
  size_t start_block = 0;
  double score = 0.0;  // mean squared residual, >= 0 and finite
};

std::vector<anomaly_score> score_windows(const prep::multimodal_series& series,
                                         const std::vector<prep::window_ref>& windows,
                                         const model::model_config& mcfg,
                                         const std::vector<double>& params);

struct threshold_choice {
  double threshold = 0.0;
  std::string policy;   // the policy actually applied
  std::string warning;  // non-empty when best-f1 fell back to a percentile
};

// policy strings: "best-f1" or "percentile:<x>" with x in [0,100].
// best-f1 sweeps the midpoints of sorted unique scores plus one
// below-minimum candidate (the all-anomalous cut, which midpoints cannot
// express); ties break toward the lower threshold, favoring recall.
// Degenerate labels (all equal) under best-f1 fall back to percentile:99
// with a warning.
threshold_choice select_threshold(const std::vector<double>& scores,
                                  const std::vector<int>& labels,
                                  const std::string& policy);

// prediction = score > threshold
std::vector<int> predict(const std::vector<double>& scores, double threshold);

struct eval_report {
  size_t tp = 0, fp = 0, fn = 0, tn = 0;
  double precision = 0.0;  // tp/(tp+fp), 0 when undefined
  double recall = 0.0;     // tp/(tp+fn), 0 when undefined
  double f1 = 0.0;         // harmonic mean, 0 when p+r = 0
  double threshold = 0.0;  // filled by callers that applied one
  std::string policy;
};

eval_report evaluate(const std::vector<int>& predictions,
                     const std::vector<int>& labels);

double f1_from_pr(double precision, double recall);

}  // namespace ffad::detect
