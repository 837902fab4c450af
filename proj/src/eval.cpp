#include "mhm/eval.hpp"

#include "mhm/errors.hpp"
#include "mhm/hazard.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace mhm {

namespace {

std::vector<PrecursorEvent> training_stream_for(const FittedModel& model, int user, int item) {
    if (!has_social(model.spec.variant)) return {};
    const std::vector<int>& idx = is_self_exciting(model.spec.variant)
                                      ? model.train.events_of_user(user)
                                      : model.train.events_of_item(item);
    std::size_t lo = 0;
    if (model.spec.precursor_cap > 0 && idx.size() > static_cast<std::size_t>(model.spec.precursor_cap)) {
        lo = idx.size() - static_cast<std::size_t>(model.spec.precursor_cap);
    }
    std::vector<PrecursorEvent> stream;
    for (std::size_t i = lo; i < idx.size(); ++i) {
        const PurchaseEvent& e = model.train.events()[static_cast<std::size_t>(idx[i])];
        stream.push_back({e.user, e.time});
    }
    return stream;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

} // namespace

std::vector<TestObs> teacher_forced_observations(const FittedModel& model, const EventLog& test,
                                                 const EvalConfig& config) {
    std::vector<TestObs> out;
    std::vector<double> anchor(static_cast<std::size_t>(model.train.n_users()), -1.0);
    std::vector<int> last_item(static_cast<std::size_t>(model.train.n_users()), -1);
    std::vector<int> order(static_cast<std::size_t>(model.train.n_users()), 0);
    for (const PurchaseEvent& e : test.events()) {
        if (e.user < 0 || e.user >= model.train.n_users() || e.item < 0 ||
            e.item >= model.train.n_items()) {
            continue; // never indexed during training
        }
        const std::size_t u = static_cast<std::size_t>(e.user);
        if (anchor[u] < 0.0) {
            const std::vector<int>& hist = model.train.events_of_user(e.user);
            if (hist.empty()) continue; // cold user, no parameters
            anchor[u] = model.train.events()[static_cast<std::size_t>(hist.back())].time;
            last_item[u] = model.train.events()[static_cast<std::size_t>(hist.back())].item;
        }
        TestObs o;
        o.user = e.user;
        o.item = config.same_item_only ? last_item[u] : e.item;
        o.order = ++order[u];
        o.anchor = anchor[u];
        o.time = e.time;
        o.duration = e.time - anchor[u];
        out.push_back(o);
        anchor[u] = e.time;
        last_item[u] = e.item;
    }
    return out;
}

double rmse(std::span<const double> predictions, std::span<const double> truths) {
    if (predictions.size() != truths.size()) throw std::invalid_argument("rmse: size mismatch");
    if (predictions.empty()) throw std::invalid_argument("rmse: empty input");
    double acc = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const double d = predictions[i] - truths[i];
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(predictions.size()));
}

std::vector<double> per_event_tll(const FittedModel& model, const EventLog& test,
                                  const EvalConfig& config) {
    const std::vector<TestObs> obs = teacher_forced_observations(model, test, config);
    std::vector<double> terms;
    terms.reserve(obs.size());
    for (const TestObs& o : obs) {
        const std::vector<PrecursorEvent> stream = training_stream_for(model, o.user, o.item);
        Precursors pre;
        for (const PrecursorEvent& e : stream) {
            if (e.time < o.time) pre.entries.push_back({e.user, o.time - e.time});
        }
        const double lam = hazard_rate(model.spec, model.params, o.user, o.item, o.time, pre);
        const double cum = cumulative_hazard(model.spec, model.params, o.user, o.item, o.anchor,
                                             stream, o.duration);
        terms.push_back(std::log(lam) - cum);
    }
    return terms;
}

double test_log_likelihood(const FittedModel& model, const EventLog& test) {
    const std::vector<double> terms = per_event_tll(model, test);
    return std::accumulate(terms.begin(), terms.end(), 0.0);
}

std::vector<SegmentPoint> segment_report(const std::map<std::string, const FittedModel*>& models,
                                         const EventLog& test, SegmentAxis axis,
                                         std::span<const double> percentiles,
                                         const EvalConfig& config) {
    const auto ref_it = models.find("mhme");
    if (ref_it == models.end()) {
        throw std::invalid_argument("segment_report: MHMe must be among the evaluated variants");
    }
    const FittedModel& ref = *ref_it->second;

    const std::vector<TestObs> obs = teacher_forced_observations(ref, test, config);
    std::map<std::string, std::vector<double>> terms;
    for (const auto& [name, model] : models) {
        terms[name] = per_event_tll(*model, test, config);
        if (terms[name].size() != obs.size()) {
            throw std::invalid_argument("segment_report: models disagree on the test set");
        }
    }

    // rank test users by training activity or training spend
    std::vector<int> users;
    for (const TestObs& o : obs) users.push_back(o.user);
    std::sort(users.begin(), users.end());
    users.erase(std::unique(users.begin(), users.end()), users.end());
    std::vector<std::pair<double, int>> keyed;
    for (int u : users) {
        const double metric = axis == SegmentAxis::Activity
                                  ? static_cast<double>(ref.train.events_of_user(u).size())
                                  : user_total_spend(ref.train, u);
        keyed.emplace_back(metric, u);
    }
    std::sort(keyed.begin(), keyed.end());

    std::vector<SegmentPoint> out;
    for (double pct : percentiles) {
        const std::size_t take = static_cast<std::size_t>(
            std::ceil(pct / 100.0 * static_cast<double>(keyed.size())));
        if (take == 0) continue; // empty subset, skipped
        std::vector<char> in_subset(static_cast<std::size_t>(ref.train.n_users()), 0);
        for (std::size_t i = 0; i < take && i < keyed.size(); ++i) {
            in_subset[static_cast<std::size_t>(keyed[i].second)] = 1;
        }
        std::map<std::string, double> subset_tll;
        bool any = false;
        for (const auto& [name, t] : terms) {
            double acc = 0.0;
            for (std::size_t i = 0; i < obs.size(); ++i) {
                if (in_subset[static_cast<std::size_t>(obs[i].user)]) {
                    acc += t[i];
                    any = true;
                }
            }
            subset_tll[name] = acc;
        }
        if (!any) continue;
        SegmentPoint point;
        point.percentile = pct;
        const double ref_tll = subset_tll.at("mhme");
        const double denom = std::max(std::abs(ref_tll), 1e-12);
        for (const auto& [name, v] : subset_tll) {
            point.relative_tll[name] = (v - ref_tll) / denom;
        }
        out.push_back(std::move(point));
    }
    return out;
}

namespace {

struct PredRow {
    TestObs obs;
    std::vector<double> expected; // one value per configured deadline
};

std::vector<PredRow> predict_rows(const FittedModel& model, const EventLog& test,
                                  const EvalConfig& config) {
    const std::vector<TestObs> obs = teacher_forced_observations(model, test, config);
    const int max_deadline =
        config.deadlines.empty() ? 0 : *std::max_element(config.deadlines.begin(), config.deadlines.end());
    std::vector<PredRow> rows;
    rows.reserve(obs.size());
    for (const TestObs& o : obs) {
        const std::vector<PrecursorEvent> stream = training_stream_for(model, o.user, o.item);
        const std::vector<double> curve = survival_curve(model.spec, model.params, o.user, o.item,
                                                         o.anchor, stream, max_deadline);
        PredRow row;
        row.obs = o;
        // prefix sums of the curve make each deadline an O(1) lookup, so
        // the deadline list does not need to be sorted
        std::vector<double> prefix(curve.size() + 1, 0.0);
        for (std::size_t i = 0; i < curve.size(); ++i) prefix[i + 1] = prefix[i] + curve[i];
        for (int d : config.deadlines) {
            row.expected.push_back(prefix[static_cast<std::size_t>(d) + 1]);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace

std::map<int, std::map<int, double>> order_report(const FittedModel& model, const EventLog& test,
                                                  std::span<const int> deadlines, int max_order,
                                                  const EvalConfig& config) {
    if (max_order < 1) throw std::invalid_argument("order_report: max_order must be >= 1");
    EvalConfig cfg = config;
    cfg.deadlines.assign(deadlines.begin(), deadlines.end());
    const std::vector<PredRow> rows = predict_rows(model, test, cfg);
    std::map<int, std::map<int, double>> out;
    for (std::size_t di = 0; di < cfg.deadlines.size(); ++di) {
        const int d = cfg.deadlines[di];
        std::map<int, std::vector<double>> preds, truths;
        for (const PredRow& r : rows) {
            if (r.obs.order > max_order) continue;
            double truth = r.obs.duration;
            if (truth > d) {
                if (!cfg.cap_truth_at_deadline) continue;
                truth = d;
            }
            preds[r.obs.order].push_back(r.expected[di]);
            truths[r.obs.order].push_back(truth);
        }
        for (const auto& [k, p] : preds) {
            out[d][k] = rmse(p, truths.at(k));
        }
    }
    return out;
}

EvalReport evaluate(const std::map<std::string, const FittedModel*>& models, const EventLog& test,
                    const EvalConfig& config) {
    EvalReport report;
    report.deadlines = config.deadlines;
    for (const auto& [name, model] : models) {
        const std::vector<PredRow> rows = predict_rows(*model, test, config);
        for (std::size_t di = 0; di < config.deadlines.size(); ++di) {
            const int d = config.deadlines[di];
            std::vector<double> preds, truths;
            for (const PredRow& r : rows) {
                double truth = r.obs.duration;
                if (truth > d) {
                    if (!config.cap_truth_at_deadline) continue;
                    truth = d;
                }
                preds.push_back(r.expected[di]);
                truths.push_back(truth);
            }
            if (!preds.empty()) report.rmse[name][d] = rmse(preds, truths);
        }
        report.tll[name] = test_log_likelihood(*model, test);
        report.order_rmse[name] =
            order_report(*model, test, config.deadlines, config.max_order, config);
    }
    if (models.count("mhme") != 0) {
        report.segments_activity =
            segment_report(models, test, SegmentAxis::Activity, config.percentiles, config);
        report.segments_spend =
            segment_report(models, test, SegmentAxis::Spend, config.percentiles, config);
    }
    return report;
}

void write_report_csvs(const EvalReport& report, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    {
        std::ofstream out(fs::path(dir) / "rmse.csv", std::ios::binary);
        out << "variant,deadline,rmse_days\n";
        for (const auto& [name, by_deadline] : report.rmse) {
            for (const auto& [d, v] : by_deadline) {
                out << name << ',' << d << ',' << fmt(v) << '\n';
            }
        }
    }
    {
        std::ofstream out(fs::path(dir) / "tll.csv", std::ios::binary);
        out << "variant,test_log_likelihood\n";
        for (const auto& [name, v] : report.tll) out << name << ',' << fmt(v) << '\n';
    }
    const auto write_segments = [&](const std::string& file, const std::vector<SegmentPoint>& pts) {
        std::ofstream out(fs::path(dir) / file, std::ios::binary);
        out << "percentile,variant,relative_tll\n";
        for (const SegmentPoint& p : pts) {
            for (const auto& [name, v] : p.relative_tll) {
                out << fmt(p.percentile) << ',' << name << ',' << fmt(v) << '\n';
            }
        }
    };
    write_segments("segments_activity.csv", report.segments_activity);
    write_segments("segments_spend.csv", report.segments_spend);
    {
        std::ofstream out(fs::path(dir) / "order_rmse.csv", std::ios::binary);
        out << "variant,deadline,order,rmse_days\n";
        for (const auto& [name, by_deadline] : report.order_rmse) {
            for (const auto& [d, by_order] : by_deadline) {
                for (const auto& [k, v] : by_order) {
                    out << name << ',' << d << ',' << k << ',' << fmt(v) << '\n';
                }
            }
        }
    }
}

void write_predictions_csv(const std::string& path, const FittedModel& model, const EventLog& test,
                           const EvalConfig& config) {
    if (config.deadlines.empty()) {
        throw std::invalid_argument("write_predictions_csv: deadline list is empty");
    }
    const std::vector<PredRow> rows = predict_rows(model, test, config);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << "user,item,deadline,expected_days,actual_days\n";
    for (const PredRow& r : rows) {
        for (std::size_t di = 0; di < config.deadlines.size(); ++di) {
            out << model.user_ids[static_cast<std::size_t>(r.obs.user)] << ','
                << model.item_ids[static_cast<std::size_t>(r.obs.item)] << ','
                << config.deadlines[di] << ',' << fmt(r.expected[di]) << ','
                << fmt(r.obs.duration) << '\n';
        }
    }
}

} // namespace mhm
