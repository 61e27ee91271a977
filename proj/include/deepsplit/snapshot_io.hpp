#pragma once
// Persistence for trained (parameters, batch-norm state) pairs: a
// human-readable key-value header followed by the flat parameter array and
// the running statistics as little-endian IEEE-754 float64. Round-trips are
// byte-exact.

#include <iosfwd>
#include <string>

#include "deepsplit/network.hpp"

namespace deepsplit {

inline constexpr int kSnapshotLayoutVersion = 1;

void write_snapshot(std::ostream& out, const Snapshot& snapshot);
Snapshot read_snapshot(std::istream& in);

void save_snapshot(const std::string& path, const Snapshot& snapshot);
Snapshot load_snapshot(const std::string& path);

/// Serialized form, handy for bitwise comparisons.
std::string snapshot_bytes(const Snapshot& snapshot);

}  // namespace deepsplit
