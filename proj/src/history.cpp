#include "xfertune/history.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace xfertune::history {

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& v, std::size_t line, const char* field) {
  std::size_t pos = 0;
  double d;
  try {
    d = std::stod(v, &pos);
  } catch (const std::exception&) {
    throw ParseError(line, field, "not a number: " + v);
  }
  if (pos != v.size()) throw ParseError(line, field, "trailing junk: " + v);
  return d;
}

std::int64_t parse_int(const std::string& v, std::size_t line, const char* field) {
  std::size_t pos = 0;
  std::int64_t i;
  try {
    i = std::stoll(v, &pos);
  } catch (const std::exception&) {
    throw ParseError(line, field, "not an integer: " + v);
  }
  if (pos != v.size()) throw ParseError(line, field, "trailing junk: " + v);
  return i;
}

void validate_entry(const HistoryEntry& e) {
  if (!(e.throughput_bps > 0))
    throw std::invalid_argument("history entry throughput must be positive");
  if (e.file_count < 1)
    throw std::invalid_argument("history entry file_count must be >= 1");
  if (!(e.network.bandwidth_bps > 0) || !(e.network.rtt_s > 0) ||
      !(e.network.buffer_bytes > 0))
    throw std::invalid_argument("history entry network fields must be positive");
}

}  // namespace

std::string to_record(const HistoryEntry& e) {
  std::ostringstream os;
  os << "source=" << e.source << " destination=" << e.destination
     << " bandwidth_bps=" << fmt_double(e.network.bandwidth_bps)
     << " rtt_s=" << fmt_double(e.network.rtt_s)
     << " buffer_bytes=" << fmt_double(e.network.buffer_bytes)
     << " chunk_type=" << to_string(e.chunk_type)
     << " avg_file_size_bytes=" << fmt_double(e.avg_file_size)
     << " file_count=" << e.file_count << " cc=" << e.params.cc
     << " p=" << e.params.p << " pp=" << e.params.pp
     << " throughput_bps=" << fmt_double(e.throughput_bps)
     << " collected_at=" << e.collected_at
     << " session_id=" << (e.session_id.empty() ? "-" : e.session_id);
  return os.str();
}

HistoryEntry parse_record(const std::string& line, std::size_t line_number) {
  std::map<std::string, std::string> kv;
  std::istringstream is(line);
  std::string token;
  while (is >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos)
      throw ParseError(line_number, token, "expected key=value");
    kv[token.substr(0, eq)] = token.substr(eq + 1);
  }
  auto need = [&](const char* field) -> const std::string& {
    auto it = kv.find(field);
    if (it == kv.end())
      throw ParseError(line_number, field, "missing field");
    return it->second;
  };

  HistoryEntry e;
  e.source = need("source");
  e.destination = need("destination");
  const double bw = parse_double(need("bandwidth_bps"), line_number, "bandwidth_bps");
  const double rtt = parse_double(need("rtt_s"), line_number, "rtt_s");
  const double buf = parse_double(need("buffer_bytes"), line_number, "buffer_bytes");
  try {
    e.network = NetworkProfile(bw, rtt, buf);
  } catch (const std::invalid_argument& ex) {
    throw ParseError(line_number, "bandwidth_bps", ex.what());
  }
  try {
    e.chunk_type = parse_chunk_type(need("chunk_type"));
  } catch (const std::invalid_argument& ex) {
    throw ParseError(line_number, "chunk_type", ex.what());
  }
  e.avg_file_size =
      parse_double(need("avg_file_size_bytes"), line_number, "avg_file_size_bytes");
  e.file_count =
      static_cast<int>(parse_int(need("file_count"), line_number, "file_count"));
  const int cc = static_cast<int>(parse_int(need("cc"), line_number, "cc"));
  const int p = static_cast<int>(parse_int(need("p"), line_number, "p"));
  const int pp = static_cast<int>(parse_int(need("pp"), line_number, "pp"));
  try {
    e.params = ParamTriple(cc, p, pp);
  } catch (const std::invalid_argument& ex) {
    throw ParseError(line_number, "cc", ex.what());
  }
  e.throughput_bps =
      parse_double(need("throughput_bps"), line_number, "throughput_bps");
  if (!(e.throughput_bps > 0))
    throw ParseError(line_number, "throughput_bps", "must be positive");
  e.collected_at = parse_int(need("collected_at"), line_number, "collected_at");
  e.session_id = need("session_id");
  if (e.session_id == "-") e.session_id.clear();
  if (e.file_count < 1)
    throw ParseError(line_number, "file_count", "must be >= 1");
  return e;
}

void FeatureStats::extend(const std::array<double, kFeatureCount>& raw) {
  if (empty) {
    min = raw;
    max = raw;
    empty = false;
    return;
  }
  for (int i = 0; i < kFeatureCount; ++i) {
    min[i] = std::min(min[i], raw[i]);
    max[i] = std::max(max[i], raw[i]);
  }
}

HistoryStore HistoryStore::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open history file: " + path);
  HistoryStore store;
  store.path_ = path;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty() || line[0] == '#') continue;
    store.entries_.push_back(parse_record(line, line_number));
  }
  assign_missing_sessions(store.entries_);
  store.rebuild_stats();
  return store;
}

void HistoryStore::save(const std::string& path) {
  path_ = path;
  persist_all();
}

void HistoryStore::append(const std::vector<HistoryEntry>& entries) {
  for (const auto& e : entries) validate_entry(e);
  std::ofstream out;
  if (!path_.empty()) {
    out.open(path_, std::ios::app);
    if (!out) throw std::runtime_error("cannot append to history file: " + path_);
  }
  for (const auto& e : entries) {
    entries_.push_back(e);
    stats_.extend(raw_features(e));
    if (out.is_open()) out << to_record(e) << '\n';
  }
  if (out.is_open() && !out)
    throw std::runtime_error("write failed: " + path_);
}

void HistoryStore::prune_older_than(std::int64_t cutoff) {
  std::erase_if(entries_,
                [cutoff](const HistoryEntry& e) { return e.collected_at < cutoff; });
  rebuild_stats();
  if (!path_.empty()) persist_all();
}

void HistoryStore::rebuild_stats() {
  stats_ = FeatureStats{};
  for (const auto& e : entries_) stats_.extend(raw_features(e));
}

void HistoryStore::persist_all() const {
  std::ofstream out(path_, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write history file: " + path_);
  for (const auto& e : entries_) out << to_record(e) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path_);
}

void assign_missing_sessions(std::vector<HistoryEntry>& entries) {
  constexpr std::int64_t kWindowSeconds = 30 * 60;
  struct Key {
    std::string source, destination;
    int chunk_code;
    double avg_file_size;
    int file_count;
    auto operator<=>(const Key&) const = default;
  };
  std::map<Key, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (!entries[i].session_id.empty()) continue;
    const auto& e = entries[i];
    groups[{e.source, e.destination, chunk_type_code(e.chunk_type),
            e.avg_file_size, e.file_count}]
        .push_back(i);
  }
  int bucket = 0;
  for (auto& [key, idx] : groups) {
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return entries[a].collected_at < entries[b].collected_at;
    });
    std::int64_t window_start = 0;
    std::string session;
    for (std::size_t i : idx) {
      if (session.empty() ||
          entries[i].collected_at - window_start > kWindowSeconds) {
        window_start = entries[i].collected_at;
        session = "auto-" + std::to_string(bucket++);
      }
      entries[i].session_id = session;
    }
  }
}

}  // namespace xfertune::history
