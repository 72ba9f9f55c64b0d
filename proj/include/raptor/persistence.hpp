#pragma once

#include <string>

#include "raptor/tree.hpp"

namespace raptor {

inline constexpr int kIndexFormatVersion = 1;

// Write the tree as a versioned, checksummed JSON index. The serialization
// is canonical (nodes sorted by id, fixed key order, shortest round-trip
// floats), so saving the same tree twice produces byte-identical files. A
// path ending in ".gz" is gzip-compressed with a fixed header, keeping the
// bytes reproducible. The write is atomic: temp file in the same directory,
// then rename. The tree is validated before anything touches the disk.
void save_tree(const Tree& tree, const std::string& path);

// Read an index written by save_tree (gzip detected by content, not name)
// and revalidate every structural invariant. Throws UnsupportedVersionError
// for a foreign format_version, CorruptIndexError for damaged or
// inconsistent content, and IoError when the file cannot be read.
Tree load_tree(const std::string& path);

}  // namespace raptor
