#pragma once

// Raw event-log parsing (order placements, phone calls) and id blocklists.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace egolayers {

enum class Side : std::uint8_t { buy, sell };

struct OrderEvent {
  std::string investor_id;
  std::string stock_id;
  Side side = Side::buy;
  std::int64_t timestamp = 0;  // epoch seconds, >= 0

  friend bool operator==(const OrderEvent&, const OrderEvent&) = default;
};

struct CallEvent {
  std::string caller_id;
  std::string callee_id;
  std::int64_t timestamp = 0;

  friend bool operator==(const CallEvent&, const CallEvent&) = default;
};

struct RowError {
  std::size_t line = 0;  // 1-based, header is line 1
  std::string message;
};

/// Events in file order plus row-level bookkeeping. Only the first
/// `kMaxStoredErrors` messages are kept; `error_count` is always exact.
template <class Event>
struct ParseResult {
  static constexpr std::size_t kMaxStoredErrors = 100;

  std::vector<Event> events;
  std::vector<RowError> errors;
  std::size_t error_count = 0;
  std::size_t self_calls = 0;
  std::size_t data_rows = 0;  // non-empty lines after the header
};

struct OrderSchema {
  char delimiter = ',';
  std::string investor_column = "investor_id";
  std::string stock_column = "stock_id";
  std::string side_column = "side";
  std::string timestamp_column = "timestamp";
};

struct CallSchema {
  char delimiter = ',';
  std::string caller_column = "caller_id";
  std::string callee_column = "callee_id";
  std::string timestamp_column = "timestamp";
};

/// Throws SchemaError when the header lacks a mapped column or the stream is empty.
ParseResult<OrderEvent> parse_order_log(std::string_view text, const OrderSchema& schema = {},
                                        unsigned threads = 1);
ParseResult<OrderEvent> parse_order_log(std::istream& in, const OrderSchema& schema = {},
                                        unsigned threads = 1);

ParseResult<CallEvent> parse_call_log(std::string_view text, const CallSchema& schema = {},
                                      unsigned threads = 1);
ParseResult<CallEvent> parse_call_log(std::istream& in, const CallSchema& schema = {},
                                      unsigned threads = 1);

/// Side token "B"/"S" (also "buy"/"sell", any case).
bool parse_side(std::string_view token, Side& out);
/// Integer epoch seconds; a fractional part is accepted and truncated.
bool parse_timestamp(std::string_view token, std::int64_t& out);

class Blocklist {
 public:
  Blocklist() = default;
  explicit Blocklist(std::unordered_set<std::string> ids) : ids_(std::move(ids)) {}

  /// One id per line; surrounding whitespace is trimmed and blank lines skipped.
  static Blocklist read(std::istream& in);

  bool contains(std::string_view id) const { return ids_.contains(std::string(id)); }
  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }

 private:
  std::unordered_set<std::string> ids_;
};

std::vector<OrderEvent> apply_blocklist(std::span<const OrderEvent> events, const Blocklist& blocklist);
std::vector<CallEvent> apply_blocklist(std::span<const CallEvent> events, const Blocklist& blocklist);

void write_order_log(std::ostream& out, std::span<const OrderEvent> events);
void write_call_log(std::ostream& out, std::span<const CallEvent> events);

}  // namespace egolayers
