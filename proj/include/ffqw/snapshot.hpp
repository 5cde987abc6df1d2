#pragma once

// Delimited-text snapshots of every state type. Layout:
//
//   # ffqw <kind> v1
//   # key=value          (zero or more header fields)
//   col1,col2,...        (column names)
//   row...
//
// Reals are written in shortest round-trip decimal form, so reading a
// snapshot back reproduces the exact bits.

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>

#include "ffqw/distribution.hpp"
#include "ffqw/markov.hpp"
#include "ffqw/pme.hpp"
#include "ffqw/walker.hpp"

namespace ffqw {

inline constexpr int kSnapshotVersion = 1;

using HeaderFields = std::map<std::string, std::string>;

std::string format_double(double value);
double parse_double(std::string_view text);
std::int64_t parse_int(std::string_view text);

void write_walker_snapshot(std::ostream& out, const WalkerState& state, const HeaderFields& extra = {});
WalkerState read_walker_snapshot(std::istream& in, HeaderFields* header = nullptr);

void write_markov_snapshot(std::ostream& out, const MarkovState& state, const HeaderFields& extra = {});
MarkovState read_markov_snapshot(std::istream& in, HeaderFields* header = nullptr);

void write_grid_snapshot(std::ostream& out, const PMEGrid& grid, const HeaderFields& extra = {});
PMEGrid read_grid_snapshot(std::istream& in, HeaderFields* header = nullptr);

void write_distribution(std::ostream& out, const Distribution& dist, const HeaderFields& extra = {});
/// Accepts both distribution files and walker/markov snapshots.
Distribution read_distribution(std::istream& in, HeaderFields* header = nullptr);

/// Kind tag of a snapshot stream ("walker", "markov", "grid", "distribution")
/// without consuming it.
std::string peek_snapshot_kind(std::istream& in);

/// Writes `contents` to `path` via a temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace ffqw
