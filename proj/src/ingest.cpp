#include "egolayers/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>

#include <fmt/format.h>

#include "egolayers/error.hpp"
#include "egolayers/parallel.hpp"

namespace egolayers {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

void split_fields(std::string_view line, char delimiter, std::vector<std::string_view>& fields) {
  fields.clear();
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(delimiter, start);
    if (pos == std::string_view::npos) {
      fields.push_back(trim(line.substr(start)));
      return;
    }
    fields.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
}

std::string read_all(std::istream& in) {
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return std::move(buffer).str();
}

// Resolves each requested column name to its index in the header line.
std::vector<std::size_t> resolve_header(std::string_view header, char delimiter,
                                        std::span<const std::string> columns) {
  std::vector<std::string_view> names;
  split_fields(header, delimiter, names);
  std::vector<std::size_t> indices;
  for (const auto& column : columns) {
    auto it = std::find(names.begin(), names.end(), column);
    if (it == names.end())
      throw SchemaError(fmt::format("missing mandatory column '{}' in header", column));
    indices.push_back(static_cast<std::size_t>(it - names.begin()));
  }
  return indices;
}

struct Chunk {
  std::string_view text;
  std::size_t first_line = 0;
};

// Splits `body` into roughly equal pieces ending on line boundaries and assigns
// each its starting line number.
std::vector<Chunk> split_chunks(std::string_view body, std::size_t first_line, unsigned threads) {
  const std::size_t pieces = std::max(1u, threads) == 1 || body.size() < (1u << 16)
                                 ? 1
                                 : std::max(1u, threads) * 4;
  std::vector<Chunk> chunks;
  std::size_t begin = 0;
  for (std::size_t p = 0; p < pieces && begin < body.size(); ++p) {
    std::size_t end = p + 1 == pieces ? body.size() : body.size() * (p + 1) / pieces;
    if (end < begin) end = begin;
    if (end < body.size()) {
      const std::size_t nl = body.find('\n', end);
      end = nl == std::string_view::npos ? body.size() : nl + 1;
    }
    chunks.push_back({body.substr(begin, end - begin), 0});
    begin = end;
  }
  std::size_t line = first_line;
  for (auto& chunk : chunks) {
    chunk.first_line = line;
    line += static_cast<std::size_t>(std::count(chunk.text.begin(), chunk.text.end(), '\n'));
  }
  return chunks;
}

// RowParser: (fields, ParseResult<Event>&) -> std::optional<std::string> error message,
// pushing events itself.
template <class Event, class RowParser>
ParseResult<Event> parse_log(std::string_view text, char delimiter,
                             std::span<const std::string> columns, unsigned threads,
                             RowParser&& parse_row) {
  const std::size_t header_end = text.find('\n');
  const std::string_view header =
      trim(text.substr(0, header_end == std::string_view::npos ? text.size() : header_end));
  if (header.empty()) throw SchemaError("log has no header row");
  const auto indices = resolve_header(header, delimiter, columns);
  const std::size_t needed = *std::max_element(indices.begin(), indices.end()) + 1;

  const std::string_view body =
      header_end == std::string_view::npos ? std::string_view{} : text.substr(header_end + 1);
  const auto chunks = split_chunks(body, 2, threads);
  std::vector<ParseResult<Event>> partial(chunks.size());

  parallel_for(chunks.size(), threads, [&](std::size_t c) {
    auto& result = partial[c];
    std::vector<std::string_view> fields;
    std::vector<std::string_view> picked(indices.size());
    std::string_view rest = chunks[c].text;
    std::size_t line_no = chunks[c].first_line;
    while (!rest.empty()) {
      const std::size_t nl = rest.find('\n');
      const std::string_view line = trim(rest.substr(0, nl));
      rest = nl == std::string_view::npos ? std::string_view{} : rest.substr(nl + 1);
      const std::size_t this_line = line_no++;
      if (line.empty()) continue;
      ++result.data_rows;
      split_fields(line, delimiter, fields);
      std::optional<std::string> error;
      if (fields.size() < needed) {
        error = fmt::format("expected at least {} fields, found {}", needed, fields.size());
      } else {
        for (std::size_t k = 0; k < indices.size(); ++k) picked[k] = fields[indices[k]];
        error = parse_row(picked, result);
      }
      if (error) {
        ++result.error_count;
        if (result.errors.size() < ParseResult<Event>::kMaxStoredErrors)
          result.errors.push_back({this_line, std::move(*error)});
      }
    }
  });

  ParseResult<Event> merged;
  for (auto& part : partial) {
    merged.events.insert(merged.events.end(), std::make_move_iterator(part.events.begin()),
                         std::make_move_iterator(part.events.end()));
    for (auto& e : part.errors)
      if (merged.errors.size() < ParseResult<Event>::kMaxStoredErrors)
        merged.errors.push_back(std::move(e));
    merged.error_count += part.error_count;
    merged.self_calls += part.self_calls;
    merged.data_rows += part.data_rows;
  }
  return merged;
}

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

}  // namespace

bool parse_side(std::string_view token, Side& out) {
  if (iequals(token, "B") || iequals(token, "buy")) {
    out = Side::buy;
    return true;
  }
  if (iequals(token, "S") || iequals(token, "sell")) {
    out = Side::sell;
    return true;
  }
  return false;
}

bool parse_timestamp(std::string_view token, std::int64_t& out) {
  if (token.empty()) return false;
  const std::size_t dot = token.find('.');
  const std::string_view whole = token.substr(0, dot);
  if (whole.empty()) return false;
  if (dot != std::string_view::npos) {
    const std::string_view frac = token.substr(dot + 1);
    if (!std::all_of(frac.begin(), frac.end(),
                     [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)); }))
      return false;
  }
  std::int64_t value = 0;
  const auto [ptr, ec] = std::from_chars(whole.data(), whole.data() + whole.size(), value);
  if (ec != std::errc{} || ptr != whole.data() + whole.size() || value < 0) return false;
  out = value;
  return true;
}

ParseResult<OrderEvent> parse_order_log(std::string_view text, const OrderSchema& schema,
                                        unsigned threads) {
  const std::string columns[] = {schema.investor_column, schema.stock_column, schema.side_column,
                                 schema.timestamp_column};
  return parse_log<OrderEvent>(
      text, schema.delimiter, columns, threads,
      [](std::span<const std::string_view> f,
         ParseResult<OrderEvent>& result) -> std::optional<std::string> {
        if (f[0].empty() || f[1].empty()) return "empty investor or stock id";
        OrderEvent event{std::string(f[0]), std::string(f[1]), Side::buy, 0};
        if (!parse_side(f[2], event.side)) return fmt::format("unparseable side '{}'", f[2]);
        if (!parse_timestamp(f[3], event.timestamp))
          return fmt::format("unparseable timestamp '{}'", f[3]);
        result.events.push_back(std::move(event));
        return std::nullopt;
      });
}

ParseResult<OrderEvent> parse_order_log(std::istream& in, const OrderSchema& schema,
                                        unsigned threads) {
  const std::string text = read_all(in);
  return parse_order_log(std::string_view(text), schema, threads);
}

ParseResult<CallEvent> parse_call_log(std::string_view text, const CallSchema& schema,
                                      unsigned threads) {
  const std::string columns[] = {schema.caller_column, schema.callee_column,
                                 schema.timestamp_column};
  return parse_log<CallEvent>(
      text, schema.delimiter, columns, threads,
      [](std::span<const std::string_view> f,
         ParseResult<CallEvent>& result) -> std::optional<std::string> {
        if (f[0].empty() || f[1].empty()) return "empty caller or callee id";
        CallEvent event{std::string(f[0]), std::string(f[1]), 0};
        if (!parse_timestamp(f[2], event.timestamp))
          return fmt::format("unparseable timestamp '{}'", f[2]);
        if (event.caller_id == event.callee_id) {
          ++result.self_calls;
          return std::nullopt;
        }
        result.events.push_back(std::move(event));
        return std::nullopt;
      });
}

ParseResult<CallEvent> parse_call_log(std::istream& in, const CallSchema& schema,
                                      unsigned threads) {
  const std::string text = read_all(in);
  return parse_call_log(std::string_view(text), schema, threads);
}

Blocklist Blocklist::read(std::istream& in) {
  std::unordered_set<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    const auto id = trim(line);
    if (!id.empty()) ids.emplace(id);
  }
  return Blocklist(std::move(ids));
}

std::vector<OrderEvent> apply_blocklist(std::span<const OrderEvent> events,
                                        const Blocklist& blocklist) {
  std::vector<OrderEvent> kept;
  kept.reserve(events.size());
  for (const auto& e : events)
    if (!blocklist.contains(e.investor_id)) kept.push_back(e);
  return kept;
}

std::vector<CallEvent> apply_blocklist(std::span<const CallEvent> events,
                                       const Blocklist& blocklist) {
  std::vector<CallEvent> kept;
  kept.reserve(events.size());
  for (const auto& e : events)
    if (!blocklist.contains(e.caller_id) && !blocklist.contains(e.callee_id)) kept.push_back(e);
  return kept;
}

void write_order_log(std::ostream& out, std::span<const OrderEvent> events) {
  out << "investor_id,stock_id,side,timestamp\n";
  std::string buffer;
  for (const auto& e : events) {
    buffer.clear();
    fmt::format_to(std::back_inserter(buffer), "{},{},{},{}\n", e.investor_id, e.stock_id,
                   e.side == Side::buy ? 'B' : 'S', e.timestamp);
    out << buffer;
  }
}

void write_call_log(std::ostream& out, std::span<const CallEvent> events) {
  out << "caller_id,callee_id,timestamp\n";
  for (const auto& e : events) out << e.caller_id << ',' << e.callee_id << ',' << e.timestamp << '\n';
}

}  // namespace egolayers
