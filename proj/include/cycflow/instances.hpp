#pragma once

#include "cycflow/geometry.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cycflow {

/// An unordered set of N >= 3 planar points.
struct Instance {
  std::uint64_t id = 0;
  Cloud points;

  int size() const { return static_cast<int>(points.rows()); }
};

enum class Provenance { exact, heuristic, decoded };

std::string_view to_string(Provenance p);
Provenance parse_provenance(std::string_view text);

struct Tour {
  Order order;
  double length = 0.0;  // closed-cycle Euclidean length
  Provenance provenance = Provenance::decoded;
};

struct Record {
  Instance instance;
  std::optional<Tour> tour;
  // Optional per-node target cloud (coupled-pair dumps).
  std::optional<Cloud> target;
};

struct Dataset {
  int version = 1;
  std::vector<Record> records;

  bool fully_labeled() const;
};

// Throws InvalidArgument unless n >= 3 and every coordinate is finite.
void validate(const Instance& inst);

Dataset gen_uniform(int n, int count, std::uint64_t seed);
Instance random_instance(int n, std::uint64_t seed, std::uint64_t index);

double tour_length(const Instance& inst, const Order& order);
double tour_length(const Cloud& points, const Order& order);
Tour make_tour(const Instance& inst, Order order, Provenance provenance);

// 100 * (l_method - l_opt) / l_opt.
double gap_percent(double l_method, double l_opt);

// Canonical text serialization. Coordinates use shortest round-trip decimals so
// read(write(ds)) reproduces every double exactly.
void write_dataset(const Dataset& ds, std::ostream& out);
void write_dataset(const Dataset& ds, const std::filesystem::path& path);
std::string format_dataset(const Dataset& ds);

Dataset read_dataset(std::istream& in);
Dataset read_dataset(const std::filesystem::path& path);
Dataset parse_dataset(std::string_view text);

// FNV-1a 64 of the canonical serialization, as 16 hex digits.
std::string fingerprint(const Dataset& ds);

std::string format_double(double value);

}  // namespace cycflow
