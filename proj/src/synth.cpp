// Copyright 2026 The popnet Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "popnet/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>
#include <queue>
#include <set>
#include <tuple>

#include "popnet/alias.hpp"
#include "popnet/csv.hpp"
#include "text_util.hpp"

namespace popnet {

namespace {

constexpr std::size_t kAgeBands = 9;
constexpr int kRetirementAge = 67;

double layer_h(const SynthConfig& cfg, Layer layer) {
  return cfg.homophily_strength[static_cast<std::size_t>(layer)];
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

void add_clique(MultilayerGraph& g, std::span<const NodeId> members, const RelationType& rel) {
  for (std::size_t i = 0; i < members.size(); ++i)
    for (std::size_t j = i + 1; j < members.size(); ++j) g.add_edge(members[i], members[j], rel);
}

template <typename Key>
void add_group_cliques(MultilayerGraph& g, std::map<Key, std::vector<NodeId>>& groups,
                       std::size_t size, SplitMix64& rng,
                       const std::function<RelationType(const Key&)>& relation) {
  for (auto& [key, members] : groups) {
    for (std::size_t i = members.size(); i > 1; --i)
      std::swap(members[i - 1], members[uniform_below(rng, i)]);
    const RelationType rel = relation(key);
    for (std::size_t start = 0; start < members.size(); start += size) {
      const std::size_t len = std::min(size, members.size() - start);
      add_clique(g, std::span<const NodeId>(members).subspan(start, len), rel);
    }
  }
}

// k nearest persons within each municipality, sweeping outward in x order.
void add_neighbor_layer(MultilayerGraph& g, const Population& pop, std::size_t n_munis,
                        std::size_t k) {
  const RelationType rel{Layer::neighbors, std::to_string(k) + " closest"};
  std::vector<std::vector<NodeId>> by_muni(n_munis);
  for (NodeId v = 0; v < pop.position.size(); ++v) by_muni[pop.municipality[v]].push_back(v);

  using Cand = std::pair<double, NodeId>;
  for (auto& members : by_muni) {
    std::sort(members.begin(), members.end(), [&](NodeId a, NodeId b) {
      return std::tie(pop.position[a].x, a) < std::tie(pop.position[b].x, b);
    });
    const std::size_t want = std::min(k, members.empty() ? 0 : members.size() - 1);
    std::vector<Cand> found;
    for (std::size_t i = 0; i < members.size(); ++i) {
      const Point p = pop.position[members[i]];
      std::priority_queue<Cand> heap;
      auto offer = [&](std::size_t j) {
        const Point q = pop.position[members[j]];
        const double dx = q.x - p.x;
        const double dy = q.y - p.y;
        const Cand c{dx * dx + dy * dy, members[j]};
        if (heap.size() < want) {
          heap.push(c);
        } else if (c < heap.top()) {
          heap.pop();
          heap.push(c);
        }
      };
      auto done = [&](std::size_t j) {
        if (heap.size() < want) return false;
        const double dx = pop.position[members[j]].x - p.x;
        return dx * dx > heap.top().first;
      };
      for (std::size_t j = i + 1; j < members.size() && !done(j); ++j) offer(j);
      for (std::size_t j = i; j-- > 0 && !done(j);) offer(j);
      found.clear();
      while (!heap.empty()) {
        found.push_back(heap.top());
        heap.pop();
      }
      std::sort(found.begin(), found.end());
      for (const auto& [d2, w] : found) g.add_edge(members[i], w, rel);
    }
  }
}

}  // namespace

void SynthConfig::validate() const {
  require(n_persons >= 1, "synth.n_persons must be at least 1");
  require(n_municipalities >= 1, "synth.n_municipalities must be at least 1");
  require(grid_side >= 1 && n_municipalities <= grid_side * grid_side,
          "synth.grid_side is too small for n_municipalities");
  require(std::isfinite(municipality_zipf) && municipality_zipf >= 0,
          "synth.municipality_zipf must be non-negative");
  require(household_size_mean >= 1 && household_size_mean <= 64,
          "synth.household_size_mean must lie in [1, 64]");
  require(school_group_size >= 1, "synth.school_group_size must be at least 1");
  require(workplace_size >= 1, "synth.workplace_size must be at least 1");
  require(neighbor_k >= 1, "synth.neighbor_k must be at least 1");
  require(!education_levels.empty(), "synth.education_levels must not be empty");
  double total = 0.0;
  std::set<std::string> names;
  for (const auto& level : education_levels) {
    require(level.probability >= 0 && std::isfinite(level.probability),
            "synth.education_levels: probability of '" + level.name + "' is invalid");
    require(!level.name.empty() && names.insert(level.name).second,
            "synth.education_levels: names must be unique and non-empty");
    total += level.probability;
  }
  require(std::abs(total - 1.0) <= 1e-9, "synth.education_levels: probabilities must sum to 1");
  for (std::size_t l = 0; l < kLayerCount; ++l) {
    const double h = homophily_strength[l];
    require(h >= 0 && h <= 1,
            "synth.homophily." + std::string(layer_name(static_cast<Layer>(l))) +
                " must lie in [0, 1]");
  }
  require(commute_probability >= 0 && commute_probability <= 1,
          "synth.commute_probability must lie in [0, 1]");
  require(family_link_probability >= 0 && family_link_probability <= 1,
          "synth.family_link_probability must lie in [0, 1]");
  require(not_voted_fraction >= 0 && missing_fraction >= 0 &&
              not_voted_fraction + missing_fraction <= 1,
          "synth.not_voted_fraction and synth.missing_fraction must be fractions summing to at most 1");
  require(std::isfinite(outcome_intercept), "synth.outcome_intercept must be finite");
  for (const auto& [key, coef] : outcome_coefficients)
    require(std::isfinite(coef), "synth.outcome_coefficients." + key + " must be finite");

  const std::size_t per_muni = n_persons / n_municipalities;
  require(school_group_size <= per_muni,
          "synth.school_group_size exceeds persons per municipality (" +
              std::to_string(per_muni) + ")");
  require(neighbor_k < per_muni, "synth.neighbor_k must be below persons per municipality (" +
                                     std::to_string(per_muni) + ")");
  require(workplace_size <= n_persons, "synth.workplace_size exceeds n_persons");
}

std::string_view outcome_name(Outcome o) {
  switch (o) {
    case Outcome::populist: return "populist";
    case Outcome::non_populist: return "non-populist";
    case Outcome::not_voted: return "not-voted";
    case Outcome::missing: return "missing";
  }
  return "missing";
}

Outcome parse_outcome(std::string_view name) {
  for (std::size_t i = 0; i < kOutcomeCount; ++i) {
    const auto o = static_cast<Outcome>(i);
    if (outcome_name(o) == name) return o;
  }
  throw DataError("unknown outcome label '" + std::string(name) + "'");
}

Population generate_population(const SynthConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  SplitMix64 rng(seed);
  const std::size_t n = cfg.n_persons;
  const std::size_t n_levels = cfg.education_levels.size();

  std::vector<double> muni_w(cfg.n_municipalities);
  for (std::size_t m = 0; m < muni_w.size(); ++m)
    muni_w[m] = std::pow(static_cast<double>(m + 1), -cfg.municipality_zipf);
  const AliasTable muni_table(muni_w);
  std::vector<double> edu_w;
  for (const auto& level : cfg.education_levels) edu_w.push_back(level.probability);
  const AliasTable edu_table(edu_w);

  Population pop;
  pop.position.resize(n);
  pop.household.resize(n);
  pop.municipality.resize(n);
  pop.education.resize(n);
  std::vector<int> age(n);
  std::vector<bool> abroad(n);
  std::vector<std::vector<NodeId>> households;

  // Households, their location and the attributes shared within them.
  const auto size_lo = static_cast<std::size_t>(std::floor(cfg.household_size_mean));
  const double size_frac = cfg.household_size_mean - static_cast<double>(size_lo);
  const double h_house = layer_h(cfg, Layer::household);
  const double h_sort = layer_h(cfg, Layer::neighbors);
  for (NodeId next = 0; next < n;) {
    std::size_t size = size_lo + (uniform01(rng) < size_frac ? 1 : 0);
    size = std::min<std::size_t>(size, n - next);
    const auto muni = static_cast<std::uint32_t>(muni_table.sample(rng));
    const auto head_edu = static_cast<std::uint32_t>(edu_table.sample(rng));
    const double cx = static_cast<double>(muni % cfg.grid_side);
    const double cy = static_cast<double>(muni / cfg.grid_side);
    double fx = uniform01(rng);
    if (uniform01(rng) < h_sort) fx = (head_edu + fx) / static_cast<double>(n_levels);
    const Point home{cx + fx, cy + uniform01(rng)};
    const bool born_abroad = uniform01(rng) < 0.2;
    const int head_age = 25 + static_cast<int>(uniform_below(rng, 55));

    const auto hid = static_cast<std::uint32_t>(households.size());
    auto& members = households.emplace_back();
    for (std::size_t i = 0; i < size; ++i, ++next) {
      members.push_back(next);
      pop.household[next] = hid;
      pop.municipality[next] = muni;
      pop.position[next] = {home.x + 0.002 * (uniform01(rng) - 0.5),
                            home.y + 0.002 * (uniform01(rng) - 0.5)};
      abroad[next] = born_abroad;
      if (i == 0) {
        pop.education[next] = head_edu;
        age[next] = head_age;
        continue;
      }
      pop.education[next] = uniform01(rng) < h_house
                                ? head_edu
                                : static_cast<std::uint32_t>(edu_table.sample(rng));
      if (i == 1 && uniform01(rng) < 0.6) {
        age[next] = std::max(18, head_age - 5 + static_cast<int>(uniform_below(rng, 11)));
      } else {
        age[next] = std::max(0, head_age - 22 - static_cast<int>(uniform_below(rng, 16)));
      }
    }
  }

  std::vector<NodeId> ids(n);
  for (NodeId v = 0; v < n; ++v) ids[v] = pop.graph.add_node(std::to_string(v));

  const RelationType household_rel{Layer::household, ""};
  for (const auto& members : households) add_clique(pop.graph, members, household_rel);

  // Family: a household head linked to every member of another household.
  std::vector<std::vector<std::uint32_t>> households_by_edu(n_levels);
  for (std::uint32_t h = 0; h < households.size(); ++h)
    households_by_edu[pop.education[households[h].front()]].push_back(h);
  const RelationType family_rel{Layer::family, "kin"};
  const double h_family = layer_h(cfg, Layer::family);
  for (std::uint32_t h = 0; h < households.size(); ++h) {
    if (uniform01(rng) >= cfg.family_link_probability) continue;
    std::uint32_t other;
    if (uniform01(rng) < h_family) {
      const auto& pool = households_by_edu[pop.education[households[h].front()]];
      other = pool[uniform_below(rng, pool.size())];
    } else {
      other = static_cast<std::uint32_t>(uniform_below(rng, households.size()));
    }
    if (other == h) continue;
    const NodeId center = households[other].front();
    for (NodeId v : households[h]) pop.graph.add_edge(center, v, family_rel);
  }

  // Classmates: cliques over (municipality, school education, age band).
  using SchoolKey = std::tuple<std::uint32_t, std::uint32_t, std::size_t>;
  std::map<SchoolKey, std::vector<NodeId>> schools;
  const double h_school = layer_h(cfg, Layer::classmates);
  for (NodeId v = 0; v < n; ++v) {
    const auto key_edu = uniform01(rng) < h_school
                             ? pop.education[v]
                             : static_cast<std::uint32_t>(edu_table.sample(rng));
    const std::size_t band = std::min<std::size_t>(static_cast<std::size_t>(age[v]) / 10, kAgeBands - 1);
    schools[{pop.municipality[v], key_edu, band}].push_back(v);
  }
  add_group_cliques<SchoolKey>(pop.graph, schools, cfg.school_group_size, rng,
                               [&](const SchoolKey& key) {
                                 return RelationType{Layer::classmates,
                                                     cfg.education_levels[std::get<1>(key)].name};
                               });

  // Colleagues: working-age persons, some commuting to another municipality.
  using WorkKey = std::pair<std::uint32_t, std::uint32_t>;
  std::map<WorkKey, std::vector<NodeId>> workplaces;
  const double h_work = layer_h(cfg, Layer::colleagues);
  for (NodeId v = 0; v < n; ++v) {
    if (age[v] < 18 || age[v] >= kRetirementAge) continue;
    const auto work_muni = uniform01(rng) < cfg.commute_probability
                               ? static_cast<std::uint32_t>(muni_table.sample(rng))
                               : pop.municipality[v];
    const auto key_edu = uniform01(rng) < h_work
                             ? pop.education[v]
                             : static_cast<std::uint32_t>(edu_table.sample(rng));
    workplaces[{work_muni, key_edu}].push_back(v);
  }
  add_group_cliques<WorkKey>(pop.graph, workplaces, cfg.workplace_size, rng,
                             [](const WorkKey&) { return RelationType{Layer::colleagues, ""}; });

  add_neighbor_layer(pop.graph, pop, cfg.n_municipalities, cfg.neighbor_k);

  // Person attributes.
  std::vector<std::size_t> muni_count(cfg.n_municipalities);
  for (auto m : pop.municipality) ++muni_count[m];
  std::vector<double> latent(n);
  std::vector<std::string> gender(n);
  for (NodeId v = 0; v < n; ++v) {
    latent[v] = 0.8 * pop.education[v] + 0.02 * std::min(age[v], 60) + standard_normal(rng);
    gender[v] = uniform01(rng) < 0.5 ? "female" : "male";
  }
  std::vector<NodeId> order(n);
  std::iota(order.begin(), order.end(), NodeId{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](NodeId a, NodeId b) { return latent[a] < latent[b]; });
  std::vector<int> income(n);
  for (std::size_t r = 0; r < n; ++r) income[order[r]] = static_cast<int>(1 + (100 * r) / n);

  pop.attributes = AttributeTable({"education", "municipality", "age", "income_percentile",
                                   "gender", "parents_born_abroad", "urbanicity"});
  for (NodeId v = 0; v < n; ++v) {
    const auto m = pop.municipality[v];
    pop.attributes.add_row(
        std::to_string(v),
        {cfg.education_levels[pop.education[v]].name, std::to_string(m), std::to_string(age[v]),
         std::to_string(income[v]), gender[v], abroad[v] ? "yes" : "no",
         std::to_string(muni_count[m])});
  }

  auto draw = plant_outcome(pop.attributes, cfg.outcome_coefficients, cfg.outcome_intercept,
                            seed, cfg.not_voted_fraction, cfg.missing_fraction);
  pop.outcome_probability = std::move(draw.probability);
  pop.outcome = std::move(draw.label);
  return pop;
}

OutcomeDraw plant_outcome(const AttributeTable& attributes,
                          const std::map<std::string, double>& coefficients, double intercept,
                          std::uint64_t seed, double not_voted_fraction,
                          double missing_fraction) {
  const std::size_t n = attributes.row_count();
  std::vector<double> z(n, intercept);
  for (const auto& [key, coef] : coefficients) {
    const auto eq = key.find('=');
    const std::string column = key.substr(0, eq);
    if (!attributes.has_column(column))
      throw ConfigError("outcome coefficient refers to unknown attribute '" + column + "'");
    if (eq == std::string::npos) {
      const auto values = attributes.numeric(column);
      for (std::size_t i = 0; i < n; ++i)
        if (!std::isnan(values[i])) z[i] += coef * values[i];
    } else {
      const std::string value = key.substr(eq + 1);
      const std::size_t col = attributes.column_index(column);
      for (std::size_t i = 0; i < n; ++i)
        if (attributes.at(i, col) == value) z[i] += coef;
    }
  }

  OutcomeDraw out;
  out.probability.resize(n);
  out.label.resize(n);
  SplitMix64 rng(derive_seed(seed, fnv1a("outcome")));
  for (std::size_t i = 0; i < n; ++i) {
    const double p = 1.0 / (1.0 + std::exp(-z[i]));
    out.probability[i] = p;
    const double u = uniform01(rng);
    const double r = uniform01(rng);
    Outcome label = u < p ? Outcome::populist : Outcome::non_populist;
    if (r < not_voted_fraction) {
      label = Outcome::not_voted;
    } else if (r < not_voted_fraction + missing_fraction) {
      label = Outcome::missing;
    }
    out.label[i] = label;
  }
  return out;
}

void write_ground_truth(const Population& pop, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "node_id\tprobability\tlabel\n";
  for (std::size_t i = 0; i < pop.outcome.size(); ++i)
    out << pop.attributes.row_ids()[i] << '\t' << format_real(pop.outcome_probability[i]) << '\t'
        << outcome_name(pop.outcome[i]) << '\n';
  if (!out) throw DataError("failed writing " + path.string());
}

std::vector<Outcome> load_ground_truth(const std::filesystem::path& path, const IdMap& ids) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<Outcome> labels(ids.size(), Outcome::missing);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = detail::split(detail::chomp(line), '\t');
    if (line_no == 1) {
      if (fields.size() != 3 || fields[0] != "node_id")
        throw DataError(path.string() + ": expected header node_id, probability, label");
      continue;
    }
    if (fields.size() != 3)
      throw DataError(path.string() + ": line " + std::to_string(line_no) + ": expected 3 fields");
    if (!ids.contains(fields[0])) continue;
    labels[ids.at(fields[0])] = parse_outcome(fields[2]);
  }
  if (line_no == 0) throw DataError(path.string() + ": empty ground truth file");
  return labels;
}

void write_population(const Population& pop, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_edge_file(pop.graph, dir / "edges.tsv");
  write_attribute_file(pop.attributes, dir / "attributes.tsv");
  write_ground_truth(pop, dir / "ground_truth.tsv");
}

}  // namespace popnet
