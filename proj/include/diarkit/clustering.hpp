#pragma once

#include <Eigen/Dense>
#include <vector>

#include "diarkit/core.hpp"
#include "diarkit/nnet.hpp"

namespace diarkit {

// Pairwise cosine distances between unit embeddings, one item per turn.
struct AffinityMatrix {
  Eigen::MatrixXd distances;  // symmetric, zero diagonal, entries in [0, 2]
  std::vector<Segment> items;
};

Eigen::MatrixXd cosine_distances(const std::vector<Eigen::RowVectorXd> &emb);
AffinityMatrix affinity(const std::vector<Eigen::RowVectorXd> &emb,
                        std::vector<Segment> items);

// Frames whose middle lies in [s.start, s.end): [first, first + count).
// At least one frame is returned for a segment inside the signal.
std::pair<long, long> frames_of(const Segment &s, const SlidingWindowGeometry &g,
                                long total_frames);

// One embedding per turn (see embed_span for long and short turns).
std::vector<Eigen::RowVectorXd> turn_embeddings(
    const nn::SequenceModel &model, const SlidingWindowFeature &features,
    const Timeline &turns, long chunk_frames);

// Complete-linkage agglomerative clustering: clusters are merged while the
// smallest linkage is below `threshold`, ties going to the lowest index
// pair. Labels are numbered by the smallest item of each cluster.
std::vector<int> agglomerate(const Eigen::MatrixXd &distances, double threshold);

}  // namespace diarkit
