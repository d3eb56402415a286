// diarkit/similarity.hpp
//
// Copyright 2026 The diarkit authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef DIARKIT_SIMILARITY_HPP
#define DIARKIT_SIMILARITY_HPP

#include <string>
#include <vector>

#include "diarkit/binio.hpp"
#include "diarkit/common.hpp"
#include "diarkit/matrix.hpp"

namespace diarkit {

/// Pairwise segment similarities with the segment-id index they refer to.
struct SimilarityMatrix {
  Matrix values;                 // n x n
  std::vector<std::string> ids;  // segment/utterance ids, row order

  std::size_t size() const { return values.rows(); }

  void validate_symmetric(double tol = 1e-6) const {
    if (values.rows() != values.cols())
      throw ContractError("similarity matrix not square");
    if (!values.all_finite())
      throw ContractError("similarity matrix has non-finite entries");
    for (std::size_t i = 0; i < values.rows(); ++i)
      for (std::size_t j = i + 1; j < values.cols(); ++j)
        if (std::fabs(values(i, j) - values(j, i)) > tol)
          throw ContractError(format("similarity matrix asymmetric at (%zu,%zu)", i, j));
  }
};

// DKSM container: magic, u32 n, f32 payload, id table.
inline void write_similarity(const std::string& path, const SimilarityMatrix& sim) {
  if (sim.ids.size() != sim.values.rows())
    throw ContractError("write_similarity: id table size mismatch");
  BinaryWriter w(path);
  w.magic("DKSM");
  w.u32(static_cast<std::uint32_t>(sim.size()));
  for (std::size_t i = 0; i < sim.values.size(); ++i)
    w.f32(static_cast<float>(sim.values.data()[i]));
  for (const auto& id : sim.ids) w.str(id);
  w.close();
}

inline SimilarityMatrix read_similarity(const std::string& path) {
  BinaryReader r(path);
  r.expect_magic("DKSM");
  const std::uint32_t n = r.u32();
  SimilarityMatrix sim;
  sim.values = Matrix(n, n);
  for (std::size_t i = 0; i < sim.values.size(); ++i) sim.values.data()[i] = r.f32();
  sim.ids.resize(n);
  for (auto& id : sim.ids) id = r.str();
  return sim;
}

}  // namespace diarkit

#endif  // DIARKIT_SIMILARITY_HPP
