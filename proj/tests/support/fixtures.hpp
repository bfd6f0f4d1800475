#pragma once

#include <map>
#include <string>
#include <vector>

#include "loyalty/attack/attack.hpp"
#include "loyalty/nn/losses.hpp"
#include "loyalty/rng.hpp"

namespace loyalty::testing {

// Attack fixtures: a keyword scorer with hand-set weights and a suite it
// classifies correctly except for example "f".
attack::PredictFn keyword_model(std::map<std::string, double> weights);
extern const std::map<std::string, double> kWeights;
std::vector<attack::LabeledText> fixture_suite();
attack::SynonymTable small_table();
attack::SynonymTable enlarged_table();

/// Random distribution of `dim` entries; with allow_zeros about a fifth of
/// them are exactly zero.
nn::ProbVector random_dist(Rng& rng, std::size_t dim, bool allow_zeros);

// Brute-force divergences in bits, summed in long double.
long double oracle_kl(const nn::ProbVector& p, const nn::ProbVector& q);
long double oracle_js(const nn::ProbVector& p, const nn::ProbVector& q);

}  // namespace loyalty::testing
