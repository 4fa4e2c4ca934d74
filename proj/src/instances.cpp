#include "cycflow/instances.hpp"

#include "cycflow/errors.hpp"
#include "cycflow/rng.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace cycflow {

bool is_permutation(const Order& order, int n) {
  if (static_cast<int>(order.size()) != n) return false;
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  for (int idx : order) {
    if (idx < 0 || idx >= n || seen[static_cast<std::size_t>(idx)]) return false;
    seen[static_cast<std::size_t>(idx)] = 1;
  }
  return true;
}

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::exact: return "exact";
    case Provenance::heuristic: return "heuristic";
    case Provenance::decoded: return "decoded";
  }
  return "decoded";
}

Provenance parse_provenance(std::string_view text) {
  if (text == "exact") return Provenance::exact;
  if (text == "heuristic") return Provenance::heuristic;
  if (text == "decoded") return Provenance::decoded;
  throw InvalidArgument("unknown tour provenance '" + std::string(text) + "'");
}

bool Dataset::fully_labeled() const {
  for (const auto& r : records) {
    if (!r.tour) return false;
  }
  return !records.empty();
}

void validate(const Instance& inst) {
  if (inst.size() < 3) {
    throw InvalidArgument("instance " + std::to_string(inst.id) + " has " +
                          std::to_string(inst.size()) + " nodes; at least 3 are required");
  }
  if (!inst.points.allFinite()) {
    throw InvalidArgument("instance " + std::to_string(inst.id) + " has non-finite coordinates");
  }
}

Instance random_instance(int n, std::uint64_t seed, std::uint64_t index) {
  if (n < 3) throw InvalidArgument("instance size must be at least 3, got " + std::to_string(n));
  Rng rng(seed, index);
  Instance inst;
  inst.id = index;
  inst.points.resize(n, 2);
  for (int i = 0; i < n; ++i) {
    inst.points(i, 0) = rng.uniform();
    inst.points(i, 1) = rng.uniform();
  }
  return inst;
}

Dataset gen_uniform(int n, int count, std::uint64_t seed) {
  if (n < 3) throw InvalidArgument("instance size must be at least 3, got " + std::to_string(n));
  if (count < 1) throw InvalidArgument("instance count must be at least 1");
  Dataset ds;
  ds.records.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    ds.records.push_back(Record{random_instance(n, seed, static_cast<std::uint64_t>(k)), {}, {}});
  }
  return ds;
}

double tour_length(const Cloud& points, const Order& order) {
  const int n = static_cast<int>(points.rows());
  if (!is_permutation(order, n)) {
    throw InvalidArgument("tour is not a permutation of 0.." + std::to_string(n - 1));
  }
  double total = 0.0;
  for (int k = 0; k < n; ++k) {
    const int a = order[static_cast<std::size_t>(k)];
    const int b = order[static_cast<std::size_t>((k + 1) % n)];
    total += (points.row(a) - points.row(b)).norm();
  }
  return total;
}

double tour_length(const Instance& inst, const Order& order) {
  return tour_length(inst.points, order);
}

Tour make_tour(const Instance& inst, Order order, Provenance provenance) {
  const double len = tour_length(inst, order);
  return Tour{std::move(order), len, provenance};
}

double gap_percent(double l_method, double l_opt) {
  if (!(l_opt > 0.0)) throw InvalidArgument("reference tour length must be positive");
  return 100.0 * (l_method - l_opt) / l_opt;
}

std::string format_double(double value) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------
// Serialization

void write_dataset(const Dataset& ds, std::ostream& out) {
  out << "cycflow-dataset v" << ds.version << '\n';
  for (const auto& rec : ds.records) {
    const auto& inst = rec.instance;
    out << "instance " << inst.id << ' ' << inst.size() << '\n';
    for (int i = 0; i < inst.size(); ++i) {
      out << format_double(inst.points(i, 0)) << ' ' << format_double(inst.points(i, 1)) << '\n';
    }
    if (rec.tour) {
      out << "tour " << to_string(rec.tour->provenance) << ' ' << format_double(rec.tour->length);
      for (int idx : rec.tour->order) out << ' ' << idx;
      out << '\n';
    }
    if (rec.target) {
      for (int i = 0; i < rec.target->rows(); ++i) {
        out << "target " << format_double((*rec.target)(i, 0)) << ' '
            << format_double((*rec.target)(i, 1)) << '\n';
      }
    }
  }
}

std::string format_dataset(const Dataset& ds) {
  std::ostringstream out;
  write_dataset(ds, out);
  return out.str();
}

void write_dataset(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  write_dataset(ds, out);
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

namespace {

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && line[i] == ' ') ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ') ++j;
    if (j > i) tokens.push_back(line.substr(i, j - i));
    i = j;
  }
  return tokens;
}

template <typename T>
T parse_number(std::string_view tok, std::size_t line, const char* what) {
  T value{};
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size()) {
    throw ParseError(line, std::string("invalid ") + what + " '" + std::string(tok) + "'");
  }
  return value;
}

class LineReader {
 public:
  explicit LineReader(std::string_view text) : text_(text) {}

  bool next(std::string_view& line) {
    if (pos_ >= text_.size()) return false;
    auto end = text_.find('\n', pos_);
    if (end == std::string_view::npos) end = text_.size();
    line = text_.substr(pos_, end - pos_);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos_ = end + 1;
    ++number_;
    return true;
  }

  bool peek(std::string_view& line) const {
    LineReader copy = *this;
    return copy.next(line);
  }

  std::size_t number() const { return number_; }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t number_ = 0;
};

std::string record_label(std::size_t index, std::uint64_t id) {
  return "record " + std::to_string(index) + " (instance " + std::to_string(id) + ")";
}

}  // namespace

Dataset parse_dataset(std::string_view text) {
  LineReader reader(text);
  std::string_view line;
  if (!reader.next(line) || line != "cycflow-dataset v1") {
    throw ParseError(1, "expected header 'cycflow-dataset v1'");
  }
  Dataset ds;
  while (reader.next(line)) {
    const std::size_t lineno = reader.number();
    auto tokens = split(line);
    if (tokens.empty()) {
      std::string_view rest;
      if (!reader.peek(rest)) break;  // trailing blank line
      throw ParseError(lineno, "unexpected blank line");
    }
    if (tokens[0] != "instance" || tokens.size() != 3) {
      throw ParseError(lineno, "expected 'instance <id> <n>'");
    }
    Record rec;
    rec.instance.id = parse_number<std::uint64_t>(tokens[1], lineno, "instance id");
    const int n = parse_number<int>(tokens[2], lineno, "node count");
    const std::string label = record_label(ds.records.size(), rec.instance.id);
    if (n < 3) throw ParseError(lineno, label + ": node count must be at least 3");
    rec.instance.points.resize(n, 2);
    for (int i = 0; i < n; ++i) {
      if (!reader.next(line)) throw ParseError(reader.number() + 1, label + ": truncated coordinates");
      auto xy = split(line);
      if (xy.size() != 2) throw ParseError(reader.number(), label + ": expected '<x> <y>'");
      rec.instance.points(i, 0) = parse_number<double>(xy[0], reader.number(), "coordinate");
      rec.instance.points(i, 1) = parse_number<double>(xy[1], reader.number(), "coordinate");
      if (!std::isfinite(rec.instance.points(i, 0)) || !std::isfinite(rec.instance.points(i, 1))) {
        throw ParseError(reader.number(), label + ": non-finite coordinate");
      }
    }

    std::string_view ahead;
    if (reader.peek(ahead) && ahead.substr(0, 5) == "tour ") {
      reader.next(line);
      const std::size_t tl = reader.number();
      auto tt = split(line);
      if (tt.size() != static_cast<std::size_t>(n) + 3) {
        throw ParseError(tl, label + ": tour must list exactly " + std::to_string(n) + " indices");
      }
      Tour tour;
      try {
        tour.provenance = parse_provenance(tt[1]);
      } catch (const InvalidArgument& e) {
        throw ParseError(tl, label + ": " + e.what());
      }
      tour.length = parse_number<double>(tt[2], tl, "tour length");
      std::vector<char> seen(static_cast<std::size_t>(n), 0);
      for (int k = 0; k < n; ++k) {
        const int idx = parse_number<int>(tt[static_cast<std::size_t>(k) + 3], tl, "tour index");
        if (idx < 0 || idx >= n) {
          throw ParseError(tl, label + ": tour index " + std::to_string(idx) + " out of range");
        }
        if (seen[static_cast<std::size_t>(idx)]) {
          throw ParseError(tl, label + ": duplicated tour index " + std::to_string(idx));
        }
        seen[static_cast<std::size_t>(idx)] = 1;
        tour.order.push_back(idx);
      }
      const double recomputed = tour_length(rec.instance, tour.order);
      if (std::abs(recomputed - tour.length) > 1e-9 * std::max(1.0, recomputed)) {
        throw ParseError(tl, label + ": stored tour length " + std::string(tt[2]) +
                                 " disagrees with recomputed " + format_double(recomputed));
      }
      rec.tour = std::move(tour);
    }

    if (reader.peek(ahead) && ahead.substr(0, 7) == "target ") {
      Cloud target(n, 2);
      for (int i = 0; i < n; ++i) {
        if (!reader.next(line)) throw ParseError(reader.number() + 1, label + ": truncated targets");
        auto tt = split(line);
        if (tt.size() != 3 || tt[0] != "target") {
          throw ParseError(reader.number(), label + ": expected 'target <x> <y>'");
        }
        target(i, 0) = parse_number<double>(tt[1], reader.number(), "target coordinate");
        target(i, 1) = parse_number<double>(tt[2], reader.number(), "target coordinate");
      }
      rec.target = std::move(target);
    }
    ds.records.push_back(std::move(rec));
  }
  return ds;
}

Dataset read_dataset(std::istream& in) {
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_dataset(buf.str());
}

Dataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset '" + path.string() + "'");
  return read_dataset(in);
}

std::string fingerprint(const Dataset& ds) {
  const std::string text = format_dataset(ds);
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    hash ^= ch;
    hash *= 0x100000001b3ULL;
  }
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << hash;
  return out.str();
}

}  // namespace cycflow
