#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "kgtrust/embed.hpp"
#include "kgtrust/graph.hpp"

namespace kgtrust {

/// Synthetic SIoT bundle with planted communities. Users of one community
/// mostly comment on that community's objects, trust users further along a
/// ring inside the community, and may use community-specific words. Objects
/// are aligned to entities whose triples name the community's category.
struct SiotFixtureOptions {
  int users = 160;
  int objects = 600;
  int communities = 4;
  int comments_per_user = 24;
  double comment_affinity = 0.5;  // chance a comment stays inside the community
  int trust_out = 3;              // ring successors each user may trust
  double trust_keep = 0.8;        // chance each ring edge is kept
  double trust_noise = 0.1;       // extra random trust edges per user (expected)
  int words_per_comment = 8;
  int shared_vocab = 60;
  int topic_vocab = 10;
  double word_affinity = 0.0;  // chance a word comes from the community vocabulary
  double aligned_fraction = 1.0;
  int quiet_users = 8;    // users with too few comments to survive the filter
  int rare_objects = 4;   // two comments each; removed by any threshold of 2 or more
  std::uint64_t seed = 7;
};

struct SiotFixture {
  std::vector<std::vector<std::string>> trust;         // trustor, trustee
  std::vector<std::vector<std::string>> interactions;  // user, object, comment
  std::vector<std::vector<std::string>> objects;       // object, entity
  std::vector<std::vector<std::string>> triples;       // head, relation, tail
  std::vector<int> user_community;                     // by generated user index
};

SiotFixture make_siot_fixture(const SiotFixtureOptions& options);
/// Writes trust.csv, interactions.csv, objects.csv and triples.csv.
void write_siot_fixture(const std::filesystem::path& dir, const SiotFixture& fixture);

/// FilmTrust-format files with a planted ring trust structure.
struct FilmTrustFixtureOptions {
  int users = 120;
  int items = 80;
  int ratings_per_user = 12;
  int trust_out = 3;
  double trust_keep = 0.8;
  std::uint64_t seed = 11;
};
void write_filmtrust_fixture(const std::filesystem::path& dir, const FilmTrustFixtureOptions& options);

/// Entities 0..n-1 linked by one relation: (i, 0, i+1). Satisfiable by
/// evenly spaced unit vectors on a circle.
std::vector<KnowledgeTriple> chain_kg(int num_entities);

/// Directed edges among `n` nodes, each ordered pair kept with probability p.
std::vector<Edge> random_digraph(int n, double p, std::mt19937_64& rng);

/// 5 users and 3 objects with directed trust, interactions and one object
/// edge; small enough for exhaustive finite differences.
HeteroGraph tiny_graph();
/// Labeled pairs over tiny_graph() users, both classes present.
std::vector<TrustSample> tiny_samples();

}  // namespace kgtrust
