#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "tasksel/core.hpp"
#include "tasksel/errors.hpp"
#include "tasksel/textio.hpp"

// File protocol for out-of-process performance measurement. Requests and
// responses are tab-separated lines:
//   request:   id <TAB> tasks (space-separated, empty for the empty subset)
//              <TAB> downsample <TAB> notes
//   response:  id <TAB> value <TAB> ok|failed <TAB> message
// '#'-prefixed lines are comments; a '#done' line marks a response batch as
// complete. Content after '#done' is ignored, which lets writers append while
// a reader only trusts finished batches.

namespace tasksel {

struct OracleRequest {
  std::int64_t id = 0;  // 1-based, unique within a batch
  Subset tasks;
  double downsample = 1.0;
  std::string notes;
};

struct OracleResponse {
  std::int64_t id = 0;
  double value = std::numeric_limits<double>::quiet_NaN();
  bool ok = false;
  std::string message;
};

struct ResponseBatch {
  std::vector<OracleResponse> responses;
  bool done = false;  // whether the '#done' marker was present
};

struct MatchResult {
  std::vector<PerformanceRecord> records;   // ok responses, request order
  std::vector<std::int64_t> failed_ids;     // responses with status failed
  std::vector<std::int64_t> missing_ids;    // requests with no response
  bool done = false;
};

namespace detail {

inline std::string sanitize_field(std::string_view s) {
  std::string out(s);
  for (char& c : out)
    if (c == '\t' || c == '\n' || c == '\r') c = ' ';
  return out;
}

}  // namespace detail

/// Writes explicit request lines atomically (ids as given).
inline void write_request_lines(const std::vector<OracleRequest>& requests,
                                const std::filesystem::path& path) {
  std::string out;
  for (const auto& r : requests) {
    if (r.id < 1)
      throw invalid_parameter_error("write_request_lines: ids must be >= 1");
    if (!(r.downsample > 0.0 && r.downsample <= 1.0))
      throw invalid_parameter_error(
          "write_request_lines: downsample must be in (0, 1]");
    out += std::to_string(r.id);
    out += '\t';
    const auto& m = r.tasks.members();
    for (std::size_t j = 0; j < m.size(); ++j) {
      if (j) out += ' ';
      out += std::to_string(m[j]);
    }
    out += '\t';
    out += fmt_double(r.downsample);
    out += '\t';
    out += detail::sanitize_field(r.notes);
    out += '\n';
  }
  atomic_write_file(path, out);
}

/// Writes one request per subset, ids 1..n, atomically. Returns the count.
inline std::int64_t write_requests(const std::vector<Subset>& subsets,
                                   const std::filesystem::path& path,
                                   double downsample = 1.0,
                                   std::string_view notes = "") {
  std::vector<OracleRequest> reqs;
  reqs.reserve(subsets.size());
  for (std::size_t i = 0; i < subsets.size(); ++i)
    reqs.push_back({static_cast<std::int64_t>(i + 1), subsets[i], downsample,
                    std::string(notes)});
  write_request_lines(reqs, path);
  return static_cast<std::int64_t>(subsets.size());
}

inline std::vector<OracleRequest> parse_requests(const std::filesystem::path& path) {
  const std::string content = read_file(path);
  std::vector<OracleRequest> out;
  std::unordered_set<std::int64_t> seen;
  long line_no = 0;
  for (std::string_view line : split(content, '\n')) try {
    ++line_no;
    if (trim(line).empty()) continue;
    if (trim(line).front() == '#') continue;
    const auto fields = split_n(line, '\t', 4);
    if (fields.size() < 3)
      throw parse_error("request needs id, tasks, downsample fields", line_no);
    OracleRequest r;
    r.id = parse_int64(trim(fields[0]), line_no);
    if (r.id < 1) throw protocol_error("request id must be >= 1 (line " +
                                       std::to_string(line_no) + ")");
    if (!seen.insert(r.id).second)
      throw protocol_error("duplicate request id " + std::to_string(r.id) +
                           " (line " + std::to_string(line_no) + ")");
    std::vector<TaskId> ids;
    for (std::string_view tok : split(trim(fields[1]), ' ')) {
      tok = trim(tok);
      if (tok.empty()) continue;
      ids.push_back(static_cast<TaskId>(parse_int64(tok, line_no)));
    }
    try {
      r.tasks = Subset(std::move(ids));
    } catch (const invalid_parameter_error& e) {
      throw parse_error(std::string("bad task list: ") + e.what(), line_no);
    }
    r.downsample = parse_double(trim(fields[2]), line_no);
    if (!(r.downsample > 0.0 && r.downsample <= 1.0))
      throw parse_error("downsample must be in (0, 1]", line_no);
    if (fields.size() > 3) r.notes = std::string(trim(fields[3]));
    out.push_back(std::move(r));
  } catch (const parse_error& e) {
    // malformed oracle files are protocol violations to callers
    throw protocol_error(e.what());
  }
  return out;
}

/// Writes a complete response batch, '#done' marker included, atomically.
inline void write_responses(const std::vector<OracleResponse>& responses,
                            const std::filesystem::path& path) {
  std::string out;
  for (const auto& r : responses) {
    out += std::to_string(r.id);
    out += '\t';
    out += fmt_double(r.value);
    out += '\t';
    out += r.ok ? "ok" : "failed";
    out += '\t';
    out += detail::sanitize_field(r.message);
    out += '\n';
  }
  out += "#done\n";
  atomic_write_file(path, out);
}

/// Parses a response file. Ids must be unique and within [1, expected].
/// Stops at the '#done' marker; its absence flags the batch as incomplete
/// (still usable, the caller decides).
inline ResponseBatch read_response_batch(const std::filesystem::path& path,
                                         std::int64_t expected) {
  const std::string content = read_file(path);
  ResponseBatch batch;
  std::unordered_set<std::int64_t> seen;
  long line_no = 0;
  for (std::string_view line : split(content, '\n')) try {
    ++line_no;
    const std::string_view t = trim(line);
    if (t.empty()) continue;
    if (t.front() == '#') {
      if (t == "#done") {
        batch.done = true;
        break;
      }
      continue;
    }
    const auto fields = split_n(line, '\t', 4);
    if (fields.size() < 3)
      throw parse_error("response needs id, value, status fields", line_no);
    OracleResponse r;
    r.id = parse_int64(trim(fields[0]), line_no);
    if (r.id < 1 || r.id > expected)
      throw protocol_error("response id " + std::to_string(r.id) +
                           " outside the request range 1.." +
                           std::to_string(expected) + " (line " +
                           std::to_string(line_no) + ")");
    if (!seen.insert(r.id).second)
      throw protocol_error("duplicate response id " + std::to_string(r.id) +
                           " (line " + std::to_string(line_no) + ")");
    const std::string_view status = trim(fields[2]);
    if (status == "ok")
      r.ok = true;
    else if (status == "failed")
      r.ok = false;
    else
      throw protocol_error("unknown status '" + std::string(status) + "' (line " +
                           std::to_string(line_no) + ")");
    if (r.ok) {
      r.value = parse_double(trim(fields[1]), line_no);
      if (!std::isfinite(r.value))
        throw protocol_error("ok response with non-finite value (line " +
                             std::to_string(line_no) + ")");
    }
    if (fields.size() > 3) r.message = std::string(trim(fields[3]));
    batch.responses.push_back(std::move(r));
  } catch (const parse_error& e) {
    throw protocol_error(e.what());
  }
  return batch;
}

/// Pairs responses with their requests by id. Failed responses are dropped
/// into failed_ids, unanswered requests into missing_ids; the returned
/// records follow request order.
inline MatchResult match_responses(const std::vector<OracleRequest>& requests,
                                   const ResponseBatch& batch,
                                   std::string_view source = "external") {
  std::unordered_map<std::int64_t, const OracleResponse*> by_id;
  by_id.reserve(batch.responses.size());
  for (const auto& r : batch.responses) by_id.emplace(r.id, &r);
  std::unordered_set<std::int64_t> request_ids;
  request_ids.reserve(requests.size());
  for (const auto& req : requests) request_ids.insert(req.id);
  for (const auto& r : batch.responses)
    if (!request_ids.count(r.id))
      throw protocol_error("response id " + std::to_string(r.id) +
                           " matches no request");
  MatchResult m;
  m.done = batch.done;
  for (const auto& req : requests) {
    const auto it = by_id.find(req.id);
    if (it == by_id.end()) {
      m.missing_ids.push_back(req.id);
      continue;
    }
    if (!it->second->ok) {
      m.failed_ids.push_back(req.id);
      continue;
    }
    PerformanceRecord rec;
    rec.subset = req.tasks;
    rec.value = it->second->value;
    rec.oracle_id = std::string(source) + "#" + std::to_string(req.id);
    m.records.push_back(std::move(rec));
  }
  return m;
}

/// One-call form: parse the response file against known requests.
inline MatchResult read_responses(const std::filesystem::path& path,
                                  const std::vector<OracleRequest>& requests,
                                  std::string_view source = "external") {
  std::int64_t max_id = 0;
  for (const auto& r : requests) max_id = std::max(max_id, r.id);
  return match_responses(requests, read_response_batch(path, max_id), source);
}

}  // namespace tasksel
