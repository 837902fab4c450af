#pragma once

#include "mhm/predict.hpp"
#include "mhm/types.hpp"

#include <map>
#include <span>
#include <string>
#include <vector>

namespace mhm {

enum class SegmentAxis { Activity, Spend };

struct EvalConfig {
    std::vector<int> deadlines{30, 45, 60, 75, 90};
    bool cap_truth_at_deadline = true; // cap observed durations at t_d (vs drop)
    bool same_item_only = false;       // predict the anchor event's item instead
                                       // of the observed next item
    int max_order = 5;
    std::vector<double> percentiles{10, 20, 30, 40, 50, 60, 70, 80, 90, 100};
};

struct SegmentPoint {
    double percentile = 0.0;
    std::map<std::string, double> relative_tll; // variant -> (TLL - TLL_mhme)/|TLL_mhme|
};

struct EvalReport {
    std::vector<int> deadlines;
    std::map<std::string, std::map<int, double>> rmse; // variant -> deadline -> days
    std::map<std::string, double> tll;                 // variant -> test log-likelihood
    std::vector<SegmentPoint> segments_activity;
    std::vector<SegmentPoint> segments_spend;
    // variant -> deadline -> purchase order -> RMSE (absent orders omitted)
    std::map<std::string, std::map<int, std::map<int, double>>> order_rmse;
};

// One test event with its teacher-forced anchor: the user's previous
// observed test event, or the last training event for the first one.
struct TestObs {
    int user = 0;
    int item = 0;
    int order = 1; // 1-based per-user rank within the test window
    double anchor = 0.0;
    double time = 0.0;
    double duration = 0.0;
};

std::vector<TestObs> teacher_forced_observations(const FittedModel& model, const EventLog& test,
                                                 const EvalConfig& config = {});

double rmse(std::span<const double> predictions, std::span<const double> truths);

// Per-event temporal log density ln lambda(t) - Lambda(duration); the bid
// term is excluded so price-free variants are scored on the same quantity.
std::vector<double> per_event_tll(const FittedModel& model, const EventLog& test,
                                  const EvalConfig& config = {});

double test_log_likelihood(const FittedModel& model, const EventLog& test);

std::vector<SegmentPoint> segment_report(const std::map<std::string, const FittedModel*>& models,
                                         const EventLog& test, SegmentAxis axis,
                                         std::span<const double> percentiles,
                                         const EvalConfig& config = {});

std::map<int, std::map<int, double>> order_report(const FittedModel& model, const EventLog& test,
                                                  std::span<const int> deadlines, int max_order,
                                                  const EvalConfig& config = {});

EvalReport evaluate(const std::map<std::string, const FittedModel*>& models, const EventLog& test,
                    const EvalConfig& config = {});

// rmse.csv, tll.csv, segments_activity.csv, segments_spend.csv,
// order_rmse.csv under `dir`.
void write_report_csvs(const EvalReport& report, const std::string& dir);

// Prediction dump: user,item,deadline,expected_days,actual_days rows.
void write_predictions_csv(const std::string& path, const FittedModel& model, const EventLog& test,
                           const EvalConfig& config = {});

} // namespace mhm
