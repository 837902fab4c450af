#include "mhm/types.hpp"

#include "mhm/errors.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mhm {

const char* variant_name(Variant v) {
    switch (v) {
        case Variant::PP: return "pp";
        case Variant::HP: return "hp";
        case Variant::CC: return "cc";
        case Variant::IB: return "ib";
        case Variant::MHMl: return "mhml";
        case Variant::MHMe: return "mhme";
    }
    return "?";
}

Variant parse_variant(const std::string& name) {
    std::string s;
    s.reserve(name.size());
    for (char c : name) s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (s == "pp") return Variant::PP;
    if (s == "hp") return Variant::HP;
    if (s == "cc") return Variant::CC;
    if (s == "ib") return Variant::IB;
    if (s == "mhml") return Variant::MHMl;
    if (s == "mhme") return Variant::MHMe;
    throw std::invalid_argument("unknown model variant: " + name);
}

bool has_price(Variant v) { return v == Variant::MHMl || v == Variant::MHMe; }

bool has_social(Variant v) { return v != Variant::PP; }

bool has_weight(Variant v) { return v == Variant::CC || v == Variant::MHMe; }

bool is_self_exciting(Variant v) { return v == Variant::HP; }

EventLog::EventLog(std::vector<PurchaseEvent> events, double t_end, int n_users, int n_items)
    : events_(std::move(events)), t_end_(t_end), n_users_(n_users), n_items_(n_items) {
    if (t_end_ < 0.0) {
        throw std::invalid_argument("EventLog: t_end must be non-negative");
    }
    if (n_users_ < 0 || n_items_ < 0) {
        throw std::invalid_argument("EventLog: negative user/item count");
    }
    std::stable_sort(events_.begin(), events_.end(),
                     [](const PurchaseEvent& a, const PurchaseEvent& b) { return a.time < b.time; });
    by_user_.assign(static_cast<std::size_t>(n_users_), {});
    by_item_.assign(static_cast<std::size_t>(n_items_), {});
    for (std::size_t i = 0; i < events_.size(); ++i) {
        const PurchaseEvent& e = events_[i];
        if (e.user < 0 || e.user >= n_users_ || e.item < 0 || e.item >= n_items_) {
            throw UnknownIdError("EventLog: event references unindexed user/item");
        }
        if (e.time < 0.0 || e.time > t_end_) {
            throw std::invalid_argument("EventLog: event time outside [0, t_end]");
        }
        if (e.price < 0.0) {
            throw std::invalid_argument("EventLog: negative price");
        }
        by_user_[static_cast<std::size_t>(e.user)].push_back(static_cast<int>(i));
        by_item_[static_cast<std::size_t>(e.item)].push_back(static_cast<int>(i));
    }
}

const std::vector<int>& EventLog::events_of_user(int user) const {
    if (user < 0 || user >= n_users_) {
        throw UnknownIdError("unindexed user identifier: " + std::to_string(user));
    }
    return by_user_[static_cast<std::size_t>(user)];
}

const std::vector<int>& EventLog::events_of_item(int item) const {
    if (item < 0 || item >= n_items_) {
        throw UnknownIdError("unindexed item identifier: " + std::to_string(item));
    }
    return by_item_[static_cast<std::size_t>(item)];
}

int weight_bucket_count(const ModelSpec& spec, double t_end) {
    if (spec.time_bucket_days <= 0) {
        throw std::invalid_argument("time_bucket_days must be positive");
    }
    const double span = t_end + static_cast<double>(spec.horizon_days);
    const int n = static_cast<int>(std::ceil(span / spec.time_bucket_days));
    return std::max(n, 1);
}

int cumulative_purchase_count(const EventLog& log, int user, double t) {
    if (t < 0.0) {
        throw std::invalid_argument("cumulative_purchase_count: t must be non-negative");
    }
    const std::vector<int>& idx = log.events_of_user(user);
    int count = 0;
    for (int i : idx) {
        if (log.events()[static_cast<std::size_t>(i)].time < t) {
            ++count;
        } else {
            break;
        }
    }
    return std::max(count, 1);
}

double user_total_spend(const EventLog& log, int user) {
    double total = 0.0;
    for (int i : log.events_of_user(user)) {
        total += log.events()[static_cast<std::size_t>(i)].price;
    }
    return total;
}

SplitLog split_by_time(const EventLog& log, double cutoff) {
    if (!(cutoff > 0.0) || !(cutoff < log.t_end())) {
        throw std::out_of_range("split_by_time: cutoff must lie strictly inside (0, t_end)");
    }
    std::vector<PurchaseEvent> train_events;
    std::vector<PurchaseEvent> test_events;
    std::vector<char> user_trains(static_cast<std::size_t>(log.n_users()), 0);
    std::vector<char> item_trains(static_cast<std::size_t>(log.n_items()), 0);
    for (const PurchaseEvent& e : log.events()) {
        if (e.time <= cutoff) {
            train_events.push_back(e);
            user_trains[static_cast<std::size_t>(e.user)] = 1;
            item_trains[static_cast<std::size_t>(e.item)] = 1;
        }
    }
    std::size_t dropped = 0;
    for (const PurchaseEvent& e : log.events()) {
        if (e.time > cutoff) {
            if (user_trains[static_cast<std::size_t>(e.user)] && item_trains[static_cast<std::size_t>(e.item)]) {
                test_events.push_back(e);
            } else {
                ++dropped;
            }
        }
    }
    SplitLog out;
    out.train = EventLog(std::move(train_events), cutoff, log.n_users(), log.n_items());
    // test keeps the original window close and the same dense index space
    out.test = EventLog(std::move(test_events), log.t_end(), log.n_users(), log.n_items());
    out.dropped_unknown = dropped;
    return out;
}

} // namespace mhm
