#pragma once

#include "mhm/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mhm {

// One cleaned transaction line before identifier densification.
struct RawRecord {
    std::string user;
    std::string item;
    std::int64_t timestamp = 0; // Unix seconds, UTC
    double price = 0.0;
};

struct ParseStats {
    std::size_t parsed = 0;
    std::size_t skipped_missing_user = 0;
    std::size_t skipped_cancelled = 0; // non-positive quantity or unit price
    std::size_t skipped_malformed = 0;
};

// "YYYY-MM-DD[ HH:MM[:SS]]", "YYYY-MM-DDTHH:MM:SS[Z]", "MM/DD/YYYY HH:MM",
// or plain Unix seconds. Throws SchemaError on anything else.
std::int64_t parse_datetime(const std::string& text);

// UCI Online Retail schema: InvoiceNo,StockCode,Description,Quantity,
// InvoiceDate,UnitPrice,CustomerID,Country. Price = UnitPrice * Quantity;
// returns/cancellations and rows without a CustomerID are skipped.
std::vector<RawRecord> parse_online_retail(const std::string& path, ParseStats* stats = nullptr);

// Generic schema: user,item,timestamp,price (header required).
std::vector<RawRecord> parse_generic_events(const std::string& path, ParseStats* stats = nullptr);

struct IndexedLog {
    EventLog log;
    std::vector<std::string> user_ids; // dense index -> raw identifier
    std::vector<std::string> item_ids;
};

// Window-filters, merges same (user, item, timestamp) line items,
// iterates the min-degree filter to a fixed point, densifies identifiers,
// and converts times to day-offsets from window_start.
IndexedLog build_event_log(std::vector<RawRecord> records, std::int64_t window_start,
                           std::int64_t window_end, int min_degree);

struct DatasetStats {
    int users = 0;
    int items = 0;
    std::size_t purchases = 0;
    double span_days = 0.0;
};

DatasetStats dataset_stats(const EventLog& log);

// JSON on-disk form of an indexed log (CLI interchange format).
void save_event_log(const std::string& path, const IndexedLog& log);
IndexedLog load_event_log(const std::string& path);

// Generic event CSV emitted by the simulator and accepted back by
// parse_generic_events.
void write_generic_csv(const std::string& path, const IndexedLog& log);

} // namespace mhm
