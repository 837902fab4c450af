#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace mhm {

enum class Variant { PP, HP, CC, IB, MHMl, MHMe };

const char* variant_name(Variant v);
Variant parse_variant(const std::string& name);

// True for variants whose baseline hazard carries the per-user price
// perception factor and whose likelihood carries the bid term.
bool has_price(Variant v);
// True for variants with a social (or self-exciting) intensity component.
bool has_social(Variant v);
// True for variants that pass the social term through the exponential
// link with the w(t) covariate weight.
bool has_weight(Variant v);
// HP sums over the user's own history instead of same-item neighbors.
bool is_self_exciting(Variant v);

// One timestamped (user, item, price) interaction. Times are real
// day-offsets from the observation window start; identifiers are dense
// indices assigned at ingestion.
struct PurchaseEvent {
    int user = 0;
    int item = 0;
    double time = 0.0;
    double price = 0.0;
};

// Time-sorted event collection over a fixed observation window.
// Immutable after construction; safe to share across threads.
class EventLog {
public:
    EventLog() = default;
    // Stable-sorts by time (ties keep input order) and validates bounds.
    EventLog(std::vector<PurchaseEvent> events, double t_end, int n_users, int n_items);

    const std::vector<PurchaseEvent>& events() const { return events_; }
    double t_end() const { return t_end_; }
    int n_users() const { return n_users_; }
    int n_items() const { return n_items_; }
    std::size_t size() const { return events_.size(); }
    bool empty() const { return events_.empty(); }

    // Event indices per user / per item, in time order.
    const std::vector<int>& events_of_user(int user) const;
    const std::vector<int>& events_of_item(int item) const;

private:
    std::vector<PurchaseEvent> events_;
    double t_end_ = 0.0;
    int n_users_ = 0;
    int n_items_ = 0;
    std::vector<std::vector<int>> by_user_;
    std::vector<std::vector<int>> by_item_;
};

// All latent parameters in natural (constrained) space.
struct ModelParams {
    std::vector<double> theta_u; // per-user latent factor, > 0
    std::vector<double> theta_o; // per-item latent factor, > 0
    std::vector<double> kappa_u; // per-user price perception (Gamma rate), > 0
    std::vector<double> alpha_u; // per-user influence rate, >= 0
    std::vector<double> beta_u;  // per-user infection rate, >= 0
    std::vector<double> w;       // covariate weight per time bucket
    double sigma = 0.1;          // decay rate of the influence kernel, 1/day
};

struct ModelSpec {
    Variant variant = Variant::MHMe;
    int precursor_cap = 100;  // <= 0 means unlimited
    int time_bucket_days = 7; // width of the w(t) grid buckets
    int horizon_days = 90;    // prediction horizon covered by the w grid
};

// Number of w(t) buckets needed to cover [0, t_end + horizon].
int weight_bucket_count(const ModelSpec& spec, double t_end);

// ---- core operations ------------------------------------------------

// Number of events of `user` strictly before t, clamped below at 1 so the
// Gamma bid shape stays valid before a user's first purchase.
int cumulative_purchase_count(const EventLog& log, int user, double t);

double user_total_spend(const EventLog& log, int user);

struct SplitLog {
    EventLog train;
    EventLog test;
    std::size_t dropped_unknown = 0; // test events whose user/item never trains
};

// train: events with time <= cutoff, t_end = cutoff.
// test: events with time > cutoff, minus users/items absent from train.
SplitLog split_by_time(const EventLog& log, double cutoff);

} // namespace mhm
