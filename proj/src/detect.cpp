#include "ffad/detect.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "ffad/common.hpp"
#include "ffad/train.hpp"

namespace ffad::detect {

std::vector<anomaly_score> score_windows(const prep::multimodal_series& series,
                                         const std::vector<prep::window_ref>& windows,
                                         const model::model_config& mcfg,
                                         const std::vector<double>& params) {
  std::vector<anomaly_score> out;
  out.reserve(windows.size());
  for (size_t i = 0; i < windows.size(); ++i) {
    const auto& wr = windows[i];
    numerics::tape tp;
    auto bp = model::bind_params(tp, mcfg, params);
    auto wm = prep::slice_rows(series.metrics, wr.start, wr.end);
    auto wl = prep::slice_rows(series.log_occurrence, wr.start, wr.end);
    auto res = model::forward(tp, bp, mcfg, wm, wl, false, 0);
    if (!std::isfinite(res.loss_value))
      throw numeric_error("non-finite score for window " + std::to_string(i));
    out.push_back({i, wr.start, res.loss_value});
  }
  return out;
}

namespace {

double best_f1_threshold(const std::vector<double>& scores,
                         const std::vector<int>& labels) {
  std::vector<double> uniq(scores);
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());

  std::vector<double> candidates;
  candidates.push_back(uniq.front() - 1.0);  // all-anomalous cut
  for (size_t i = 0; i + 1 < uniq.size(); ++i)
    candidates.push_back(uniq[i] + (uniq[i + 1] - uniq[i]) / 2.0);

  double best_t = candidates.front();
  double best_f1 = -1.0;
  for (double t : candidates) {  // ascending: strict > keeps the lowest tie
    const auto rep = evaluate(predict(scores, t), labels);
    if (rep.f1 > best_f1) {
      best_f1 = rep.f1;
      best_t = t;
    }
  }
  return best_t;
}

}  // namespace

threshold_choice select_threshold(const std::vector<double>& scores,
                                  const std::vector<int>& labels,
                                  const std::string& policy) {
  if (scores.empty()) throw data_error("select_threshold: no scores");

  auto percentile_policy = [&](double p, std::string name, std::string warning) {
    if (p < 0 || p > 100)
      throw config_error("percentile policy value out of [0, 100]: " + name);
    return threshold_choice{percentile_linear(scores, p), std::move(name),
                            std::move(warning)};
  };

  if (policy == "best-f1") {
    if (labels.size() != scores.size())
      throw data_error("best-f1 policy needs one label per score");
    const size_t pos = size_t(std::count(labels.begin(), labels.end(), 1));
    if (pos == 0 || pos == labels.size())
      return percentile_policy(
          99.0, "percentile:99",
          "validation labels are all " + std::to_string(pos == 0 ? 0 : 1) +
              "; best-f1 is undefined, fell back to percentile:99");
    return {best_f1_threshold(scores, labels), "best-f1", ""};
  }
  if (policy.rfind("percentile:", 0) == 0) {
    const std::string arg = policy.substr(11);
    char* end = nullptr;
    const double p = std::strtod(arg.c_str(), &end);
    if (arg.empty() || end != arg.c_str() + arg.size())
      throw config_error("bad percentile policy: " + policy);
    return percentile_policy(p, policy, "");
  }
  throw config_error("unknown threshold policy: " + policy);
}

std::vector<int> predict(const std::vector<double>& scores, double threshold) {
  std::vector<int> out(scores.size());
  for (size_t i = 0; i < scores.size(); ++i) out[i] = scores[i] > threshold ? 1 : 0;
  return out;
}

eval_report evaluate(const std::vector<int>& predictions,
                     const std::vector<int>& labels) {
  if (predictions.size() != labels.size())
    throw data_error("evaluate: prediction and label counts differ");
  eval_report r;
  for (size_t i = 0; i < labels.size(); ++i) {
    if ((predictions[i] != 0 && predictions[i] != 1) ||
        (labels[i] != 0 && labels[i] != 1))
      throw data_error("evaluate: entries must be 0 or 1");
    if (predictions[i] == 1 && labels[i] == 1) ++r.tp;
    else if (predictions[i] == 1) ++r.fp;
    else if (labels[i] == 1) ++r.fn;
    else ++r.tn;
  }
  r.precision = r.tp + r.fp > 0 ? double(r.tp) / double(r.tp + r.fp) : 0.0;
  r.recall = r.tp + r.fn > 0 ? double(r.tp) / double(r.tp + r.fn) : 0.0;
  r.f1 = f1_from_pr(r.precision, r.recall);
  return r;
}

double f1_from_pr(double precision, double recall) {
  const double s = precision + recall;
  return s > 0 ? 2.0 * precision * recall / s : 0.0;
}

}  // namespace ffad::detect
