#pragma once

#include <vector>

#include "denrl/tape.hpp"

namespace denrl {

// Negative log-likelihood of the gold path under a linear-chain CRF with
// emission scores Z (T x V) and transition scores trans (V x V). All sums
// run in log space. Optional analytic gradients.
double crf_nll(const Mat& Z, const Mat& trans, const std::vector<int>& gold,
               Mat* dZ = nullptr, Mat* dTrans = nullptr);

// Highest-scoring path; ties break toward the lowest tag index.
std::vector<int> viterbi(const Mat& Z, const Mat& trans);

double path_score(const Mat& Z, const Mat& trans, const std::vector<int>& y);

// Tape nodes for training. fc_ce_node is the per-token softmax
// cross-entropy used by the FC decoder ablation.
int crf_nll_node(Tape& t, int z, int trans, std::vector<int> gold);
int fc_ce_node(Tape& t, int z, std::vector<int> gold);

std::vector<int> argmax_decode(const Mat& Z);

}  // namespace denrl
