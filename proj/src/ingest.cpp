#include "mhm/ingest.hpp"

#include "mhm/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace mhm {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string trim(const std::string& s) {
    std::size_t a = 0;
    std::size_t b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

// RFC 4180 style reader; quoted fields may contain commas, escaped quotes
// and line breaks.
class CsvReader {
public:
    explicit CsvReader(const std::string& path) : in_(path, std::ios::binary) {
        if (!in_) throw std::runtime_error("cannot open file: " + path);
    }

    bool next_row(std::vector<std::string>& row) {
        row.clear();
        std::string field;
        bool in_quotes = false;
        bool any = false;
        char c;
        while (in_.get(c)) {
            any = true;
            if (in_quotes) {
                if (c == '"') {
                    if (in_.peek() == '"') {
                        in_.get(c);
                        field.push_back('"');
                    } else {
                        in_quotes = false;
                    }
                } else {
                    field.push_back(c);
                }
            } else if (c == '"') {
                in_quotes = true;
            } else if (c == ',') {
                row.push_back(field);
                field.clear();
            } else if (c == '\n') {
                row.push_back(field);
                return true;
            } else if (c != '\r') {
                field.push_back(c);
            }
        }
        if (any) {
            row.push_back(field);
            return true;
        }
        return false;
    }

private:
    std::ifstream in_;
};

bool parse_double(const std::string& s, double& out) {
    try {
        std::size_t pos = 0;
        out = std::stod(s, &pos);
        return pos == trim(s).size() || pos == s.size();
    } catch (...) {
        return false;
    }
}

void require_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open file: " + path);
}

} // namespace

std::int64_t parse_datetime(const std::string& text) {
    const std::string s = trim(text);
    if (s.empty()) throw SchemaError("empty timestamp");

    if (s.find_first_not_of("0123456789-") == std::string::npos && s.find('-') == std::string::npos) {
        return std::stoll(s); // Unix seconds
    }

    std::tm tm{};
    int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
    if (std::sscanf(s.c_str(), "%d-%d-%d%*1[T ]%d:%d:%d", &y, &mo, &d, &h, &mi, &sec) >= 3 ||
        (h = mi = sec = 0, std::sscanf(s.c_str(), "%d-%d-%d", &y, &mo, &d) == 3)) {
        // ISO-8601 calendar date, optional time, optional trailing Z
    } else if (std::sscanf(s.c_str(), "%d/%d/%d %d:%d:%d", &mo, &d, &y, &h, &mi, &sec) >= 3) {
        // US style used by the Online Retail export (M/D/YYYY H:MM)
    } else {
        throw SchemaError("unparseable timestamp: " + text);
    }
    if (y < 1900 || mo < 1 || mo > 12 || d < 1 || d > 31) {
        throw SchemaError("unparseable timestamp: " + text);
    }
    tm.tm_year = y - 1900;
    tm.tm_mon = mo - 1;
    tm.tm_mday = d;
    tm.tm_hour = h;
    tm.tm_min = mi;
    tm.tm_sec = sec;
    return static_cast<std::int64_t>(timegm(&tm));
}

std::vector<RawRecord> parse_online_retail(const std::string& path, ParseStats* stats) {
    require_file(path);
    CsvReader reader(path);
    std::vector<std::string> row;
    if (!reader.next_row(row)) throw SchemaError("empty file: " + path);

    static const std::vector<std::string> expected = {"invoiceno",  "stockcode", "description",
                                                      "quantity",   "invoicedate", "unitprice",
                                                      "customerid", "country"};
    std::vector<std::string> bad;
    for (std::size_t i = 0; i < expected.size(); ++i) {
        std::string got = i < row.size() ? lower(trim(row[i])) : "<missing>";
        // tolerate a UTF-8 BOM on the first column
        if (i == 0 && got.size() >= 3 && static_cast<unsigned char>(got[0]) == 0xef) {
            got = got.substr(3);
        }
        if (got != expected[i]) bad.push_back(expected[i] + " (got '" + got + "')");
    }
    if (!bad.empty()) {
        std::string msg = "online-retail header mismatch:";
        for (const std::string& b : bad) msg += " " + b;
        throw SchemaError(msg);
    }

    ParseStats local;
    std::vector<RawRecord> out;
    while (reader.next_row(row)) {
        if (row.size() == 1 && trim(row[0]).empty()) continue;
        if (row.size() < 8) {
            ++local.skipped_malformed;
            continue;
        }
        const std::string customer = trim(row[6]);
        if (customer.empty()) {
            ++local.skipped_missing_user;
            continue;
        }
        double qty = 0.0, unit_price = 0.0;
        if (!parse_double(row[3], qty) || !parse_double(row[5], unit_price)) {
            ++local.skipped_malformed;
            continue;
        }
        if (qty <= 0.0 || unit_price <= 0.0) {
            ++local.skipped_cancelled;
            continue;
        }
        std::int64_t ts;
        try {
            ts = parse_datetime(row[4]);
        } catch (const SchemaError&) {
            ++local.skipped_malformed;
            continue;
        }
        out.push_back({customer, trim(row[1]), ts, unit_price * qty});
        ++local.parsed;
    }
    if (stats != nullptr) *stats = local;
    return out;
}

std::vector<RawRecord> parse_generic_events(const std::string& path, ParseStats* stats) {
    require_file(path);
    CsvReader reader(path);
    std::vector<std::string> row;
    ParseStats local;
    std::vector<RawRecord> out;
    if (!reader.next_row(row)) {
        if (stats != nullptr) *stats = local;
        return out; // empty file -> empty list
    }
    if (row.size() < 4 || lower(trim(row[0])) != "user" || lower(trim(row[1])) != "item" ||
        lower(trim(row[2])) != "timestamp" || lower(trim(row[3])) != "price") {
        throw SchemaError("generic event header must be user,item,timestamp,price");
    }
    while (reader.next_row(row)) {
        if (row.size() == 1 && trim(row[0]).empty()) continue;
        if (row.size() < 4) {
            ++local.skipped_malformed;
            continue;
        }
        const std::string user = trim(row[0]);
        if (user.empty()) {
            ++local.skipped_missing_user;
            continue;
        }
        double price = 0.0;
        std::int64_t ts = 0;
        try {
            ts = parse_datetime(row[2]);
        } catch (const SchemaError&) {
            ++local.skipped_malformed;
            continue;
        }
        if (!parse_double(row[3], price) || price < 0.0) {
            ++local.skipped_malformed;
            continue;
        }
        out.push_back({user, trim(row[1]), ts, price});
        ++local.parsed;
    }
    if (stats != nullptr) *stats = local;
    return out;
}

IndexedLog build_event_log(std::vector<RawRecord> records, std::int64_t window_start,
                           std::int64_t window_end, int min_degree) {
    if (window_start >= window_end) {
        throw std::invalid_argument("build_event_log: window_start must precede window_end");
    }
    if (min_degree < 0) throw std::invalid_argument("build_event_log: negative min_degree");

    std::stable_sort(records.begin(), records.end(),
                     [](const RawRecord& a, const RawRecord& b) { return a.timestamp < b.timestamp; });

    // window filter + merge of same (user, item, timestamp) line items
    struct Merged {
        std::string user, item;
        std::int64_t timestamp;
        double price;
    };
    std::vector<Merged> merged;
    std::unordered_map<std::string, std::size_t> merge_key;
    for (RawRecord& r : records) {
        if (r.timestamp < window_start || r.timestamp > window_end) continue;
        std::string key = r.user + '\x1f' + r.item + '\x1f' + std::to_string(r.timestamp);
        auto [it, inserted] = merge_key.emplace(std::move(key), merged.size());
        if (inserted) {
            merged.push_back({std::move(r.user), std::move(r.item), r.timestamp, r.price});
        } else {
            merged[it->second].price += r.price;
        }
    }

    // iterate the degree filter to a fixed point
    std::vector<char> alive(merged.size(), 1);
    bool changed = true;
    while (changed) {
        changed = false;
        std::unordered_map<std::string, int> user_deg, item_deg;
        for (std::size_t i = 0; i < merged.size(); ++i) {
            if (!alive[i]) continue;
            ++user_deg[merged[i].user];
            ++item_deg[merged[i].item];
        }
        for (std::size_t i = 0; i < merged.size(); ++i) {
            if (!alive[i]) continue;
            if (user_deg[merged[i].user] < min_degree || item_deg[merged[i].item] < min_degree) {
                alive[i] = 0;
                changed = true;
            }
        }
    }

    IndexedLog out;
    std::unordered_map<std::string, int> user_index, item_index;
    std::vector<PurchaseEvent> events;
    for (std::size_t i = 0; i < merged.size(); ++i) {
        if (!alive[i]) continue;
        auto [uit, unew] = user_index.emplace(merged[i].user, static_cast<int>(out.user_ids.size()));
        if (unew) out.user_ids.push_back(merged[i].user);
        auto [iit, inew] = item_index.emplace(merged[i].item, static_cast<int>(out.item_ids.size()));
        if (inew) out.item_ids.push_back(merged[i].item);
        PurchaseEvent e;
        e.user = uit->second;
        e.item = iit->second;
        e.time = static_cast<double>(merged[i].timestamp - window_start) / 86400.0;
        e.price = merged[i].price;
        events.push_back(e);
    }
    if (events.empty()) {
        throw EmptyDatasetError("build_event_log: no events left after window/degree filtering");
    }
    const double t_end = static_cast<double>(window_end - window_start) / 86400.0;
    out.log = EventLog(std::move(events), t_end, static_cast<int>(out.user_ids.size()),
                       static_cast<int>(out.item_ids.size()));
    return out;
}

DatasetStats dataset_stats(const EventLog& log) {
    DatasetStats s;
    s.users = log.n_users();
    s.items = log.n_items();
    s.purchases = log.size();
    s.span_days = log.t_end();
    return s;
}

void save_event_log(const std::string& path, const IndexedLog& log) {
    ordered_json j;
    j["format"] = "mhm-event-log";
    j["version"] = 1;
    j["t_end"] = log.log.t_end();
    j["user_ids"] = log.user_ids;
    j["item_ids"] = log.item_ids;
    ordered_json events = ordered_json::array();
    for (const PurchaseEvent& e : log.log.events()) {
        events.push_back({e.user, e.item, e.time, e.price});
    }
    j["events"] = std::move(events);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << j.dump(1) << '\n';
}

IndexedLog load_event_log(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    ordered_json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw SchemaError(std::string("invalid event-log file: ") + e.what());
    }
    if (j.value("format", "") != "mhm-event-log") {
        throw SchemaError("not an event-log file: " + path);
    }
    IndexedLog out;
    out.user_ids = j.at("user_ids").get<std::vector<std::string>>();
    out.item_ids = j.at("item_ids").get<std::vector<std::string>>();
    std::vector<PurchaseEvent> events;
    for (const auto& row : j.at("events")) {
        events.push_back({row.at(0).get<int>(), row.at(1).get<int>(), row.at(2).get<double>(),
                          row.at(3).get<double>()});
    }
    out.log = EventLog(std::move(events), j.at("t_end").get<double>(),
                       static_cast<int>(out.user_ids.size()), static_cast<int>(out.item_ids.size()));
    return out;
}

void write_generic_csv(const std::string& path, const IndexedLog& log) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << "user,item,timestamp,price\n";
    char buf[64];
    for (const PurchaseEvent& e : log.log.events()) {
        const std::int64_t ts = static_cast<std::int64_t>(std::llround(e.time * 86400.0));
        std::snprintf(buf, sizeof(buf), "%.17g", e.price);
        out << log.user_ids[static_cast<std::size_t>(e.user)] << ','
            << log.item_ids[static_cast<std::size_t>(e.item)] << ',' << ts << ',' << buf << '\n';
    }
}

} // namespace mhm
