#include "dmsim/trace.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace dmsim {

namespace {

std::string escape(std::string_view v) {
  std::string out;
  out.reserve(v.size());
  for (char c : v) {
    switch (c) {
      case ' ': out += "%20"; break;
      case '=': out += "%3D"; break;
      case '%': out += "%25"; break;
      case '\n': out += "%0A"; break;
      case '\t': out += "%09"; break;
      default: out += c;
    }
  }
  return out;
}

int hexval(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  return -1;
}

std::string unescape(std::string_view v) {
  std::string out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] == '%' && i + 2 < v.size()) {
      const int hi = hexval(v[i + 1]);
      const int lo = hexval(v[i + 2]);
      if (hi < 0 || lo < 0) throw Error("bad escape in trace value: " + std::string(v));
      out += static_cast<char>(hi * 16 + lo);
      i += 2;
    } else if (v[i] == '%') {
      throw Error("truncated escape in trace value: " + std::string(v));
    } else {
      out += v[i];
    }
  }
  return out;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && line[i] == ' ') ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

std::int64_t parse_int(std::string_view s, std::string_view what) {
  std::int64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) {
    throw Error("malformed " + std::string(what) + ": '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace

const std::string* TraceRecord::field(std::string_view key) const {
  for (const auto& [k, v] : fields) {
    if (k == key) return &v;
  }
  return nullptr;
}

void TraceLog::append(TraceRecord rec) {
  records_.push_back(std::move(rec));
  if (observer_) observer_(records_.size() - 1, records_.back());
}

std::string format_record(const TraceRecord& rec) {
  std::string line = std::to_string(rec.t.ms);
  line += ' ';
  line += rec.device.empty() ? "-" : escape(rec.device);
  line += ' ';
  line += rec.kind;
  for (const auto& [k, v] : rec.fields) {
    line += ' ';
    line += escape(k);
    line += '=';
    line += escape(v);
  }
  return line;
}

TraceRecord parse_record(std::string_view line) {
  const auto tok = split_ws(line);
  if (tok.size() < 3) throw Error("malformed trace record: '" + std::string(line) + "'");
  TraceRecord rec;
  rec.t = SimTime{parse_int(tok[0], "t_ms")};
  rec.device = tok[1] == "-" ? std::string() : unescape(tok[1]);
  rec.kind = std::string(tok[2]);
  for (std::size_t i = 3; i < tok.size(); ++i) {
    const auto eq = tok[i].find('=');
    if (eq == std::string_view::npos) throw Error("malformed trace field: '" + std::string(tok[i]) + "'");
    rec.fields.emplace_back(unescape(tok[i].substr(0, eq)), unescape(tok[i].substr(eq + 1)));
  }
  return rec;
}

std::string format_header(const TraceHeader& h) {
  std::string line = "schema=" + std::to_string(h.schema) + " seed=" + std::to_string(h.seed) +
                     " horizon_ms=" + std::to_string(h.horizon.ms) + " devices=";
  for (std::size_t i = 0; i < h.devices.size(); ++i) {
    if (i) line += ',';
    const auto& d = h.devices[i];
    line += escape(d.id) + ':' + d.kind + ':' + std::to_string(d.scan_interval.ms);
  }
  return line;
}

TraceHeader parse_header(std::string_view line) {
  TraceHeader h;
  bool saw_schema = false;
  for (auto tok : split_ws(line)) {
    const auto eq = tok.find('=');
    if (eq == std::string_view::npos) throw Error("malformed trace header: '" + std::string(line) + "'");
    const auto key = tok.substr(0, eq);
    const auto val = tok.substr(eq + 1);
    if (key == "schema") {
      h.schema = static_cast<int>(parse_int(val, "schema"));
      saw_schema = true;
    } else if (key == "seed") {
      h.seed = static_cast<std::uint64_t>(parse_int(val, "seed"));
    } else if (key == "horizon_ms") {
      h.horizon = SimTime{parse_int(val, "horizon_ms")};
    } else if (key == "devices") {
      std::size_t pos = 0;
      while (pos < val.size()) {
        auto comma = val.find(',', pos);
        if (comma == std::string_view::npos) comma = val.size();
        const auto item = val.substr(pos, comma - pos);
        const auto c1 = item.find(':');
        const auto c2 = item.find(':', c1 == std::string_view::npos ? 0 : c1 + 1);
        if (c1 == std::string_view::npos || c2 == std::string_view::npos) {
          throw Error("malformed device entry in trace header: '" + std::string(item) + "'");
        }
        h.devices.push_back(DeviceInfo{unescape(item.substr(0, c1)), std::string(item.substr(c1 + 1, c2 - c1 - 1)),
                                       SimTime{parse_int(item.substr(c2 + 1), "scan interval")}});
        pos = comma + 1;
      }
    }
  }
  if (!saw_schema) throw Error("trace header lacks schema version");
  if (h.schema != kTraceSchemaVersion) {
    throw Error("unsupported trace schema " + std::to_string(h.schema) + " (expected " +
                std::to_string(kTraceSchemaVersion) + ")");
  }
  return h;
}

void write_trace(std::ostream& out, const TraceLog& log) {
  out << format_header(log.header) << '\n';
  for (const auto& r : log.records()) out << format_record(r) << '\n';
}

std::string trace_to_string(const TraceLog& log) {
  std::ostringstream os;
  write_trace(os, log);
  return os.str();
}

TraceLog read_trace(std::istream& in) {
  TraceLog log;
  std::string line;
  if (!std::getline(in, line)) throw Error("empty trace");
  log.header = parse_header(line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      log.append(parse_record(line));
    } catch (const Error& e) {
      throw Error("trace line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return log;
}

TraceLog read_trace_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open trace file: " + path);
  return read_trace(in);
}

}  // namespace dmsim
