#pragma once

#include <cstddef>
#include <vector>

#include "reid/errors.hpp"
#include "reid/numerics.hpp"

namespace reid {

// One image as an ordered list of row-feature vectors (horizontal stripes,
// top to bottom). All rows share the same dimension d.
struct RowSequence {
  std::vector<Vector> rows;

  std::size_t length() const { return rows.size(); }
  std::size_t dim() const { return rows.empty() ? 0 : rows.front().size(); }

  void validate() const {
    if (rows.empty()) throw DataError("RowSequence: empty sequence");
    const std::size_t d = rows.front().size();
    for (const Vector& r : rows) {
      if (r.size() != d) {
        throw ShapeError("RowSequence: row dimension " + std::to_string(r.size()) +
                         " differs from " + std::to_string(d));
      }
    }
  }
};

// Concatenate x_1 ... x_R into a single length R*d vector.
inline Vector concat_rows(const RowSequence& seq) {
  Vector out;
  out.reserve(seq.length() * seq.dim());
  for (const Vector& r : seq.rows) out.insert(out.end(), r.begin(), r.end());
  return out;
}

}  // namespace reid
