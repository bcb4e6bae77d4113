#include "mira/fad.hpp"

namespace mira {

Eigen::MatrixXd pool_frames(const EmbeddingSet& set) {
  Eigen::Index rows = 0;
  for (const auto& [id, frames] : set.entries) rows += frames.rows();
  Eigen::MatrixXd pooled(rows, set.dim);
  Eigen::Index at = 0;
  for (const auto& [id, frames] : set.entries) {
    pooled.middleRows(at, frames.rows()) = frames.cast<double>();
    at += frames.rows();
  }
  return pooled;
}

double fad_score(const EmbeddingSet& reference, const EmbeddingSet& target) {
  if (reference.model_id != target.model_id) {
    throw ConfigError("FAD across models '" + reference.model_id + "' and '" + target.model_id + "'");
  }
  if (reference.entries.empty() || target.entries.empty()) throw EmptyInputError("FAD over an empty set");
  const auto ref_fit = fit_gaussian(pool_frames(reference));
  const auto tgt_fit = fit_gaussian(pool_frames(target));
  return frechet_distance(ref_fit, tgt_fit);
}

}  // namespace mira
