#include "kgtrust/fixtures.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>

#include "csv.hpp"
#include "kgtrust/seed.hpp"

namespace kgtrust {

namespace {

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  auto line = [&](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) out << (i ? "," : "") << detail::csv_escape(fields[i]);
    out << '\n';
  };
  line(header);
  for (const auto& row : rows) line(row);
}

}  // namespace

SiotFixture make_siot_fixture(const SiotFixtureOptions& o) {
  if (o.users < 2 || o.objects < 1 || o.communities < 1) throw std::invalid_argument("fixture too small");
  std::mt19937_64 rng(mix_seed(o.seed, 0x5107));
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  SiotFixture f;

  // Community assignment: round robin, then shuffled.
  f.user_community.resize(static_cast<std::size_t>(o.users));
  for (int u = 0; u < o.users; ++u) f.user_community[static_cast<std::size_t>(u)] = u % o.communities;
  std::shuffle(f.user_community.begin(), f.user_community.end(), rng);
  std::vector<int> object_community(static_cast<std::size_t>(o.objects));
  for (int b = 0; b < o.objects; ++b) object_community[static_cast<std::size_t>(b)] = b % o.communities;

  std::vector<std::vector<int>> members(static_cast<std::size_t>(o.communities));
  std::vector<std::vector<int>> catalog(static_cast<std::size_t>(o.communities));
  for (int u = 0; u < o.users; ++u) members[static_cast<std::size_t>(f.user_community[static_cast<std::size_t>(u)])].push_back(u);
  for (int b = 0; b < o.objects; ++b) catalog[static_cast<std::size_t>(object_community[static_cast<std::size_t>(b)])].push_back(b);

  auto user_name = [](int u) { return "u" + std::to_string(u); };
  auto object_name = [](int b) { return "item" + std::to_string(b); };

  auto comment = [&](int community) {
    std::string text;
    for (int w = 0; w < o.words_per_comment; ++w) {
      if (w) text += ' ';
      if (coin(rng) < o.word_affinity) {
        text += "topic" + std::to_string(community) + "w" +
                std::to_string(std::uniform_int_distribution<int>(0, o.topic_vocab - 1)(rng));
      } else {
        text += "w" + std::to_string(std::uniform_int_distribution<int>(0, o.shared_vocab - 1)(rng));
      }
    }
    return text;
  };
  std::uniform_int_distribution<int> any_object(0, o.objects - 1);
  for (int u = 0; u < o.users; ++u) {
    const int c = f.user_community[static_cast<std::size_t>(u)];
    const auto& own = catalog[static_cast<std::size_t>(c)];
    for (int k = 0; k < o.comments_per_user; ++k) {
      int b = own.empty() || coin(rng) >= o.comment_affinity
                  ? any_object(rng)
                  : own[std::uniform_int_distribution<std::size_t>(0, own.size() - 1)(rng)];
      f.interactions.push_back({user_name(u), object_name(b), comment(c)});
    }
  }
  // Quiet users and rare objects are removed by the comment filter.
  for (int q = 0; q < o.quiet_users; ++q) {
    for (int k = 0; k < 3; ++k) {
      f.interactions.push_back({"quiet" + std::to_string(q), object_name(any_object(rng)), comment(0)});
    }
  }
  for (int r = 0; r < o.rare_objects; ++r) {
    for (int k = 0; k < 2; ++k) {
      const int u = std::uniform_int_distribution<int>(0, o.users - 1)(rng);
      f.interactions.push_back({user_name(u), "rare" + std::to_string(r), comment(f.user_community[static_cast<std::size_t>(u)])});
    }
  }
  std::shuffle(f.interactions.begin(), f.interactions.end(), rng);

  // Trust: each user may trust the next few users of its community ring.
  std::set<std::pair<int, int>> trust;
  for (const auto& ring : members) {
    const int n = static_cast<int>(ring.size());
    for (int p = 0; p < n; ++p) {
      for (int step = 1; step <= o.trust_out && step < n; ++step) {
        if (coin(rng) < o.trust_keep) trust.insert({ring[static_cast<std::size_t>(p)], ring[static_cast<std::size_t>((p + step) % n)]});
      }
    }
  }
  std::uniform_int_distribution<int> any_user(0, o.users - 1);
  for (int u = 0; u < o.users; ++u) {
    if (coin(rng) < o.trust_noise) {
      const int v = any_user(rng);
      if (v != u) trust.insert({u, v});
    }
  }
  for (int q = 0; q < o.quiet_users; ++q) f.trust.push_back({"quiet" + std::to_string(q), user_name(any_user(rng))});
  for (const auto& [a, b] : trust) f.trust.push_back({user_name(a), user_name(b)});

  // Objects, their entities and the knowledge triples.
  for (int b = 0; b < o.objects; ++b) {
    const bool aligned = coin(rng) < o.aligned_fraction;
    f.objects.push_back({object_name(b), aligned ? "Q" + std::to_string(1000 + b) : ""});
  }
  for (int b = 0; b < o.objects; ++b) {
    const int c = object_community[static_cast<std::size_t>(b)];
    const std::string entity = "Q" + std::to_string(1000 + b);
    f.triples.push_back({entity, "category", "Cat" + std::to_string(c)});
    f.triples.push_back({entity, "made_by", "Maker" + std::to_string(c) + "_" + std::to_string(b % 2)});
  }
  for (int c = 0; c < o.communities; ++c) {
    f.triples.push_back({"Cat" + std::to_string(c), "part_of", "Domain"});
  }
  return f;
}

void write_siot_fixture(const std::filesystem::path& dir, const SiotFixture& f) {
  std::filesystem::create_directories(dir);
  write_csv(dir / "trust.csv", {"trustor", "trustee"}, f.trust);
  write_csv(dir / "interactions.csv", {"user", "object", "comment"}, f.interactions);
  write_csv(dir / "objects.csv", {"object", "entity_name"}, f.objects);
  write_csv(dir / "triples.csv", {"head_entity", "relation", "tail_entity"}, f.triples);
}

void write_filmtrust_fixture(const std::filesystem::path& dir, const FilmTrustFixtureOptions& o) {
  std::filesystem::create_directories(dir);
  std::mt19937_64 rng(mix_seed(o.seed, 0xf11));
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::ofstream ratings(dir / "ratings.txt");
  std::ofstream trust(dir / "trust.txt");
  if (!ratings || !trust) throw DataError("cannot write into " + dir.string());
  std::uniform_int_distribution<int> item(1, o.items);
  for (int u = 1; u <= o.users; ++u) {
    std::set<int> seen;
    while (static_cast<int>(seen.size()) < std::min(o.ratings_per_user, o.items)) {
      const int i = item(rng);
      if (seen.insert(i).second) ratings << u << ' ' << i << ' ' << (1 + static_cast<int>(rng() % 8) * 0.5) << '\n';
    }
  }
  for (int u = 1; u <= o.users; ++u) {
    for (int step = 1; step <= o.trust_out; ++step) {
      if (coin(rng) < o.trust_keep) trust << u << ' ' << (u - 1 + step) % o.users + 1 << " 1\n";
    }
  }
}

std::vector<KnowledgeTriple> chain_kg(int num_entities) {
  std::vector<KnowledgeTriple> out;
  for (int i = 0; i + 1 < num_entities; ++i) out.push_back({i, 0, i + 1});
  return out;
}

std::vector<Edge> random_digraph(int n, double p, std::mt19937_64& rng) {
  std::bernoulli_distribution keep(p);
  std::vector<Edge> edges;
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      if (a != b && keep(rng)) edges.push_back({a, b});
    }
  }
  return edges;
}

HeteroGraph tiny_graph() {
  return HeteroGraph(5, 3, {{0, 1}, {1, 2}, {2, 0}, {3, 1}, {4, 3}, {0, 4}},
                     {{0, 5}, {1, 5}, {1, 6}, {2, 6}, {3, 7}, {4, 7}, {4, 5}}, {{5, 6}});
}

std::vector<TrustSample> tiny_samples() {
  return {{0, 1, 1, Split::Train}, {1, 2, 1, Split::Train}, {3, 1, 1, Split::Train},
          {1, 0, 0, Split::Train}, {2, 4, 0, Split::Train}, {4, 0, 0, Split::Train}};
}

}  // namespace kgtrust
